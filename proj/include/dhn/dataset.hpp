#ifndef DHN_DATASET_HPP
#define DHN_DATASET_HPP

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dhn/matrix.hpp"
#include "dhn/rng.hpp"

namespace dhn {

enum class DataKind { continuous, count };

std::string to_string(DataKind kind);
DataKind data_kind_from_string(const std::string& s);

struct Dataset {
  Matd features;  // N x M
  Matd labels;    // N x L, nonnegative; integral when kind == count
  DataKind kind = DataKind::continuous;
  std::vector<std::string> feature_names;
  std::vector<std::string> target_names;

  int n() const { return features.rows; }
  int m() const { return features.cols; }
  int l() const { return labels.cols; }

  /// Fraction of label entries that are nonzero.
  double nonzero_fraction() const;

  /// Throws DataError with row/column coordinates on the first violation.
  void validate() const;
};

// Sidecar schema declaring which CSV columns are features vs targets and the
// data kind. Stored as JSON.
struct Schema {
  DataKind kind = DataKind::continuous;
  std::vector<std::string> features;
  std::vector<std::string> targets;
};

Schema load_schema(const std::filesystem::path& path);
void save_schema(const Schema& schema, const std::filesystem::path& path);

Dataset load_csv(const std::filesystem::path& path, const Schema& schema);
void save_csv(const Dataset& data, const std::filesystem::path& path);

// Deterministic 70/15/15 split; the rounding remainder goes to train.
struct SplitIndex {
  std::vector<int> train;
  std::vector<int> val;
  std::vector<int> test;
  std::uint64_t seed = 0;
};

SplitIndex split(int n, std::uint64_t seed);

/// Fresh shuffle into minibatches; the last batch may be short.
std::vector<std::vector<int>> batches(std::span<const int> indices, int batch_size,
                                      prob::RngStream stream);

// Per-feature centering/scaling fitted on the training split only.
// Zero-variance features keep scale 1 (pass-through after centering).
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;

  void apply_in_place(std::span<double> row) const;
  Matd apply(const Matd& features) const;
};

Standardizer fit_standardizer(const Matd& features, std::span<const int> train_rows);

// Synthetic data drawn from the model's own generative process, with linear
// mean maps so parameter recovery is checkable.
struct SyntheticConfig {
  int n = 0;
  int m = 0;
  int l = 0;
  DataKind kind = DataKind::continuous;
  std::uint64_t seed = 0;
  double correlation = 0.5;    // target pairwise latent correlation in [0, 0.95]
  double mu_scale = 1.0;       // row norm of the binary-side mean map
  double mu_prime_scale = 0.5; // row norm of the abundance-side mean map
};

struct GroundTruth {
  Matd a_mu;        // L x M
  Matd a_mu_prime;  // L x M
  Matd c;           // L x L lower-triangular factor of Sigma - I
  Matd c_prime;     // L x L lower-triangular factor of Sigma' - I
};

/// For each row: x ~ N(0, I); r ~ N(A_mu x, I + CC^T) gates positivity;
/// positive coordinates get exp(s) (continuous) or a zero-truncated Poisson
/// with rate exp(s) (count), where s ~ N(A_mu' x, I + C'C'^T).
std::pair<Dataset, GroundTruth> generate_synthetic(const SyntheticConfig& cfg);

void save_ground_truth(const GroundTruth& gt, const SyntheticConfig& cfg,
                       const std::filesystem::path& path);

}  // namespace dhn

#endif
