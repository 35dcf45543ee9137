#include "dhn/metrics.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include "dhn/errors.hpp"

namespace dhn {

AccResult acc_metric(const Matd& actual, const Matd& predicted) {
  if (actual.rows != predicted.rows || actual.cols != predicted.cols) {
    throw UsageError("acc: shape mismatch");
  }
  if (actual.rows < 2) throw UsageError("acc: need at least two rows");
  const int n = actual.rows;
  const int l = actual.cols;

  AccResult res;
  res.per_target.assign(static_cast<std::size_t>(l),
                        std::numeric_limits<double>::quiet_NaN());
  double sum = 0.0;
  int included = 0;
  for (int j = 0; j < l; ++j) {
    double mean_a = 0.0;
    double mean_p = 0.0;
    for (int i = 0; i < n; ++i) {
      mean_a += actual(i, j);
      mean_p += predicted(i, j);
    }
    mean_a /= n;
    mean_p /= n;
    double saa = 0.0;
    double spp = 0.0;
    double sap = 0.0;
    for (int i = 0; i < n; ++i) {
      const double da = actual(i, j) - mean_a;
      const double dp = predicted(i, j) - mean_p;
      saa += da * da;
      spp += dp * dp;
      sap += da * dp;
    }
    const double tol_a = 1e-12 * (1.0 + std::abs(mean_a));
    const double tol_p = 1e-12 * (1.0 + std::abs(mean_p));
    if (std::sqrt(saa / n) <= tol_a || std::sqrt(spp / n) <= tol_p) {
      res.excluded.push_back(j);
      continue;
    }
    const double r = sap / std::sqrt(saa * spp);
    res.per_target[j] = r;
    sum += r;
    ++included;
  }
  if (included == 0) {
    throw DataError("acc: every target has a zero-variance column; metric undefined");
  }
  res.acc = sum / included;
  return res;
}

double zrmse_metric(const Matd& actual, const Matd& predicted, double alpha) {
  if (actual.rows != predicted.rows || actual.cols != predicted.cols) {
    throw UsageError("zrmse: shape mismatch");
  }
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw UsageError("zrmse: alpha must lie in [0, 1]");
  const int n = actual.rows;
  const int l = actual.cols;
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    double zero_sq = 0.0;
    double pos_sq = 0.0;
    int n_zero = 0;
    int n_pos = 0;
    for (int j = 0; j < l; ++j) {
      const double y = actual(i, j);
      if (y < 0.0) throw UsageError("zrmse: actual values must be nonnegative");
      const double yhat = predicted(i, j);
      if (y > 0.0) {
        pos_sq += (y - yhat) * (y - yhat);
        ++n_pos;
      } else {
        zero_sq += yhat * yhat;
        ++n_zero;
      }
    }
    const double zero_part = n_zero > 0 ? alpha * zero_sq / n_zero : 0.0;
    const double pos_part = n_pos > 0 ? (1.0 - alpha) * pos_sq / n_pos : 0.0;
    total += std::sqrt(zero_part + pos_part);
  }
  return total / n;
}

EvalReport evaluate(const DhnModel& model, const Dataset& data, std::span<const int> rows,
                    double alpha, int k_eval) {
  if (rows.empty()) throw UsageError("evaluate: empty row set");
  if (data.m() != model.config.feature_dim || data.l() != model.config.target_dim) {
    throw UsageError("evaluate: dataset dimensions do not match the model");
  }
  const auto t_start = std::chrono::steady_clock::now();

  const Predictor predictor(model);
  const int n = static_cast<int>(rows.size());
  const int l = data.l();
  Matd actual(n, l);
  Matd predicted(n, l);
  for (int i = 0; i < n; ++i) {
    const int r = rows[i];
    const Prediction pred = predictor(data.features.row(r));
    for (int j = 0; j < l; ++j) {
      actual(i, j) = data.labels(r, j);
      predicted(i, j) = pred.yhat[j];
    }
  }

  EvalReport report;
  report.alpha = alpha;
  report.rows = n;
  report.target_names = data.target_names;
  AccResult acc = acc_metric(actual, predicted);
  report.acc = acc.acc;
  report.per_target = std::move(acc.per_target);
  report.excluded = std::move(acc.excluded);
  report.zrmse = zrmse_metric(actual, predicted, alpha);
  report.mean_nll =
      dataset_nll(model, model.standardizer.apply(data.features), data.labels, rows, k_eval);
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return report;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

std::string render_eval_report(const EvalReport& report) {
  std::ostringstream out;
  out << "acc " << fmt(report.acc) << '\n';
  out << "zrmse " << fmt(report.zrmse) << '\n';
  out << "alpha " << fmt(report.alpha) << '\n';
  out << "mean_nll " << fmt(report.mean_nll) << '\n';
  out << "rows " << report.rows << '\n';
  out << "excluded_targets";
  if (report.excluded.empty()) {
    out << " none";
  } else {
    for (int j : report.excluded) out << ' ' << j;
  }
  out << '\n';
  for (std::size_t j = 0; j < report.per_target.size(); ++j) {
    const std::string name =
        j < report.target_names.size() ? report.target_names[j] : "t" + std::to_string(j);
    out << "correlation " << name << ' ';
    if (std::isnan(report.per_target[j])) {
      out << "excluded";
    } else {
      out << fmt(report.per_target[j]);
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace dhn
