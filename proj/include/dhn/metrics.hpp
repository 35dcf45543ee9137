#ifndef DHN_METRICS_HPP
#define DHN_METRICS_HPP

#include <span>
#include <string>
#include <vector>

#include "dhn/dataset.hpp"
#include "dhn/matrix.hpp"
#include "dhn/model.hpp"

namespace dhn {

struct AccResult {
  double acc = 0.0;                // mean per-target correlation over included targets
  std::vector<double> per_target;  // NaN for excluded targets
  std::vector<int> excluded;       // targets where either column has zero variance
};

/// Per-target Pearson correlation between actual and predicted columns.
/// Zero-variance columns are excluded from the average and reported; if every
/// target is excluded the metric is undefined and a DataError is thrown.
AccResult acc_metric(const Matd& actual, const Matd& predicted);

/// Mean over rows of sqrt(alpha * mean_{j in zeros}(yhat_j^2)
///                     + (1-alpha) * mean_{j in positives}(y_j - yhat_j)^2),
/// where an empty index set contributes 0 to its row term.
double zrmse_metric(const Matd& actual, const Matd& predicted, double alpha);

struct EvalReport {
  double acc = 0.0;
  double zrmse = 0.0;
  double alpha = 0.5;
  double mean_nll = 0.0;  // computed with k_eval samples per row
  int rows = 0;
  std::vector<double> per_target;
  std::vector<int> excluded;
  std::vector<std::string> target_names;
  double wall_seconds = 0.0;
};

/// Predicts every row in `rows`, then scores ACC, zRMSE(alpha) and the mean
/// NLL. Deterministic given the model (the eval streams derive from the
/// model's stored seed).
EvalReport evaluate(const DhnModel& model, const Dataset& data, std::span<const int> rows,
                    double alpha, int k_eval);

/// Deterministic key-value rendering (wall-clock excluded; see README).
std::string render_eval_report(const EvalReport& report);

}  // namespace dhn

#endif
