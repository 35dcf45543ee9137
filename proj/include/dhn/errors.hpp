#ifndef DHN_ERRORS_HPP
#define DHN_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace dhn {

// Error taxonomy maps onto process exit codes:
//   UsageError     -> 1  (bad flags, bad configuration, dimension mismatches)
//   DataError      -> 2  (malformed input files, invalid labels, load failures)
//   NumericalError -> 3  (divergence, domain violations, failed factorizations)
struct UsageError : std::runtime_error {
  explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumerical = 3;

}  // namespace dhn

#endif
