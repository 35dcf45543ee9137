#include "dhn/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "dhn/covariance.hpp"
#include "dhn/errors.hpp"
#include "dhn/probability.hpp"

namespace dhn {

using nlohmann::json;

std::string to_string(DataKind kind) {
  return kind == DataKind::continuous ? "continuous" : "count";
}

DataKind data_kind_from_string(const std::string& s) {
  if (s == "continuous") return DataKind::continuous;
  if (s == "count") return DataKind::count;
  throw UsageError("unknown data kind '" + s + "' (expected 'continuous' or 'count')");
}

double Dataset::nonzero_fraction() const {
  if (labels.data.empty()) return 0.0;
  std::size_t nz = 0;
  for (double v : labels.data) nz += (v != 0.0);
  return static_cast<double>(nz) / static_cast<double>(labels.data.size());
}

void Dataset::validate() const {
  if (features.rows != labels.rows) throw DataError("dataset: feature/label row count mismatch");
  for (int i = 0; i < features.rows; ++i) {
    for (int j = 0; j < features.cols; ++j) {
      if (!std::isfinite(features(i, j))) {
        throw DataError("dataset: non-finite feature at row " + std::to_string(i) + ", column " +
                        std::to_string(j));
      }
    }
  }
  bool any_positive = false;
  for (int i = 0; i < labels.rows; ++i) {
    for (int j = 0; j < labels.cols; ++j) {
      const double v = labels(i, j);
      if (!std::isfinite(v) || v < 0.0) {
        throw DataError("dataset: invalid label " + std::to_string(v) + " at row " +
                        std::to_string(i) + ", target " + std::to_string(j));
      }
      if (kind == DataKind::count && v != std::floor(v)) {
        throw DataError("dataset: fractional count " + std::to_string(v) + " at row " +
                        std::to_string(i) + ", target " + std::to_string(j));
      }
      any_positive = any_positive || v > 0.0;
    }
  }
  if (labels.rows > 0 && !any_positive) {
    throw DataError("dataset: all labels are zero; the abundance head is untrainable");
  }
}

Schema load_schema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open schema file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("schema " + path.string() + ": " + e.what());
  }
  Schema s;
  try {
    s.kind = data_kind_from_string(j.at("kind").get<std::string>());
    s.features = j.at("features").get<std::vector<std::string>>();
    s.targets = j.at("targets").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw DataError("schema " + path.string() + ": " + e.what());
  }
  if (s.features.empty() || s.targets.empty()) {
    throw DataError("schema " + path.string() + ": features and targets must be nonempty");
  }
  return s;
}

void save_schema(const Schema& schema, const std::filesystem::path& path) {
  json j;
  j["kind"] = to_string(schema.kind);
  j["features"] = schema.features;
  j["targets"] = schema.targets;
  std::ofstream out(path);
  if (!out) throw DataError("cannot write schema file " + path.string());
  out << j.dump(2) << '\n';
}

namespace {

// RFC-4180 style field splitting: quoted fields may contain commas and
// doubled quotes.
std::vector<std::string> split_csv_line(const std::string& line, int row_for_errors) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  if (quoted) {
    throw DataError("csv row " + std::to_string(row_for_errors) + ": unterminated quote");
  }
  fields.push_back(std::move(cur));
  return fields;
}

double parse_number(const std::string& field, int row, const std::string& column) {
  double v = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last) {
    throw DataError("csv row " + std::to_string(row) + ", column '" + column +
                    "': cannot parse '" + field + "' as a number");
  }
  return v;
}

std::string format_number(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path, const Schema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open data file " + path.string());

  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": missing header row");
  const std::vector<std::string> header = split_csv_line(line, 0);

  auto column_of = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      throw DataError(path.string() + ": missing column '" + name + "'");
    }
    return static_cast<int>(it - header.begin());
  };

  std::vector<int> feat_cols;
  std::vector<int> target_cols;
  for (const std::string& name : schema.features) feat_cols.push_back(column_of(name));
  for (const std::string& name : schema.targets) target_cols.push_back(column_of(name));

  std::vector<double> feat_values;
  std::vector<double> label_values;
  int row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++row;
    const std::vector<std::string> fields = split_csv_line(line, row);
    if (fields.size() != header.size()) {
      throw DataError("csv row " + std::to_string(row) + ": expected " +
                      std::to_string(header.size()) + " fields, got " +
                      std::to_string(fields.size()));
    }
    for (std::size_t j = 0; j < feat_cols.size(); ++j) {
      const double v = parse_number(fields[feat_cols[j]], row, schema.features[j]);
      if (!std::isfinite(v)) {
        throw DataError("csv row " + std::to_string(row) + ", column '" + schema.features[j] +
                        "': non-finite feature value");
      }
      feat_values.push_back(v);
    }
    for (std::size_t j = 0; j < target_cols.size(); ++j) {
      const double v = parse_number(fields[target_cols[j]], row, schema.targets[j]);
      if (!std::isfinite(v) || v < 0.0) {
        throw DataError("csv row " + std::to_string(row) + ", column '" + schema.targets[j] +
                        "': labels must be finite and nonnegative, got '" + fields[target_cols[j]] +
                        "'");
      }
      if (schema.kind == DataKind::count && v != std::floor(v)) {
        throw DataError("csv row " + std::to_string(row) + ", column '" + schema.targets[j] +
                        "': count labels must be integers, got '" + fields[target_cols[j]] + "'");
      }
      label_values.push_back(v);
    }
  }

  Dataset d;
  d.kind = schema.kind;
  d.feature_names = schema.features;
  d.target_names = schema.targets;
  d.features.rows = row;
  d.features.cols = static_cast<int>(feat_cols.size());
  d.features.data = std::move(feat_values);
  d.labels.rows = row;
  d.labels.cols = static_cast<int>(target_cols.size());
  d.labels.data = std::move(label_values);
  d.validate();
  return d;
}

void save_csv(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write data file " + path.string());
  for (std::size_t j = 0; j < data.feature_names.size(); ++j) {
    if (j) out << ',';
    out << data.feature_names[j];
  }
  for (const std::string& name : data.target_names) out << ',' << name;
  out << '\n';
  for (int i = 0; i < data.n(); ++i) {
    for (int j = 0; j < data.m(); ++j) {
      if (j) out << ',';
      out << format_number(data.features(i, j));
    }
    for (int j = 0; j < data.l(); ++j) out << ',' << format_number(data.labels(i, j));
    out << '\n';
  }
}

SplitIndex split(int n, std::uint64_t seed) {
  if (n < 10) throw UsageError("split: need at least 10 rows, got " + std::to_string(n));
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  constexpr std::uint64_t kSplitTag = 655360;
  prob::RngStream stream = prob::RngStream(seed).derive(kSplitTag);
  // Fisher-Yates with the stream's uniform integers.
  for (int i = n - 1; i > 0; --i) {
    const int j = static_cast<int>(stream.next_u64() % static_cast<std::uint64_t>(i + 1));
    std::swap(order[i], order[j]);
  }
  const int n_val = static_cast<int>(0.15 * n);
  const int n_test = static_cast<int>(0.15 * n);
  const int n_train = n - n_val - n_test;
  SplitIndex s;
  s.seed = seed;
  s.train.assign(order.begin(), order.begin() + n_train);
  s.val.assign(order.begin() + n_train, order.begin() + n_train + n_val);
  s.test.assign(order.begin() + n_train + n_val, order.end());
  return s;
}

std::vector<std::vector<int>> batches(std::span<const int> indices, int batch_size,
                                      prob::RngStream stream) {
  if (batch_size < 1) throw UsageError("batches: batch size must be positive");
  std::vector<int> order(indices.begin(), indices.end());
  for (int i = static_cast<int>(order.size()) - 1; i > 0; --i) {
    const int j = static_cast<int>(stream.next_u64() % static_cast<std::uint64_t>(i + 1));
    std::swap(order[i], order[j]);
  }
  std::vector<std::vector<int>> out;
  for (std::size_t begin = 0; begin < order.size(); begin += batch_size) {
    const std::size_t end = std::min(order.size(), begin + batch_size);
    out.emplace_back(order.begin() + begin, order.begin() + end);
  }
  return out;
}

void Standardizer::apply_in_place(std::span<double> row) const {
  for (std::size_t j = 0; j < row.size(); ++j) row[j] = (row[j] - mean[j]) / scale[j];
}

Matd Standardizer::apply(const Matd& features) const {
  if (features.cols != static_cast<int>(mean.size())) {
    throw UsageError("standardizer: feature width mismatch");
  }
  Matd out = features;
  for (int i = 0; i < out.rows; ++i) apply_in_place(out.row(i));
  return out;
}

Standardizer fit_standardizer(const Matd& features, std::span<const int> train_rows) {
  if (train_rows.empty()) throw UsageError("standardizer: empty training split");
  const int m = features.cols;
  Standardizer s;
  s.mean.assign(static_cast<std::size_t>(m), 0.0);
  s.scale.assign(static_cast<std::size_t>(m), 1.0);
  for (int i : train_rows) {
    for (int j = 0; j < m; ++j) s.mean[j] += features(i, j);
  }
  for (double& v : s.mean) v /= static_cast<double>(train_rows.size());
  std::vector<double> var(static_cast<std::size_t>(m), 0.0);
  for (int i : train_rows) {
    for (int j = 0; j < m; ++j) {
      const double d = features(i, j) - s.mean[j];
      var[j] += d * d;
    }
  }
  for (int j = 0; j < m; ++j) {
    const double sd = std::sqrt(var[j] / static_cast<double>(train_rows.size()));
    s.scale[j] = sd > 1e-12 ? sd : 1.0;
  }
  return s;
}

namespace {

// Zero-truncated Poisson. Small rates invert the truncated CDF directly;
// large rates draw untruncated (a zero is then astronomically unlikely) and
// reject zeros to keep the law exact.
long long truncated_poisson(double lambda, prob::RngStream& rng) {
  if (!(lambda > 0.0)) throw NumericalError("truncated_poisson: rate must be positive");
  if (lambda > 50.0) {
    long long k = 0;
    do {
      k = rng.poisson(lambda);
    } while (k == 0);
    return k;
  }
  const double p0 = std::exp(-lambda);
  const double u = p0 + rng.uniform() * (1.0 - p0);
  double cumulative = p0;
  double pk = p0;
  long long k = 0;
  while (cumulative < u && k < 1000000) {
    ++k;
    pk *= lambda / static_cast<double>(k);
    cumulative += pk;
  }
  return std::max<long long>(k, 1);
}

Matd linear_map(int l, int m, double row_norm, prob::RngStream& rng) {
  Matd a(l, m);
  for (int i = 0; i < l; ++i) {
    double norm2 = 0.0;
    for (int j = 0; j < m; ++j) {
      a(i, j) = rng.normal();
      norm2 += a(i, j) * a(i, j);
    }
    const double s = row_norm / std::sqrt(norm2);
    for (int j = 0; j < m; ++j) a(i, j) *= s;
  }
  return a;
}

// Lower-triangular factor giving pairwise latent correlation ~rho: a shared
// first column plus a diagonal.
Matd correlation_factor(int l, double rho) {
  if (!(rho >= 0.0 && rho < 0.96)) {
    throw UsageError("synthetic correlation must lie in [0, 0.95]");
  }
  const double d = 0.2;
  const double c = std::sqrt(rho * (1.0 + d * d) / std::max(1.0 - rho, 0.04));
  Matd f(l, l, 0.0);
  for (int i = 0; i < l; ++i) {
    f(i, 0) = c;
    if (i > 0) f(i, i) = d;
  }
  // First coordinate only has the shared loading; give it the same marginal.
  f(0, 0) = std::sqrt(c * c + d * d);
  return f;
}

}  // namespace

std::pair<Dataset, GroundTruth> generate_synthetic(const SyntheticConfig& cfg) {
  if (cfg.n < 1 || cfg.m < 1 || cfg.l < 1) {
    throw UsageError("generate_synthetic: n, m, l must be positive");
  }
  prob::RngStream root(cfg.seed);
  prob::RngStream truth_rng = root.derive(1);
  prob::RngStream x_rng = root.derive(2);
  prob::RngStream gate_rng = root.derive(3);
  prob::RngStream value_rng = root.derive(4);

  GroundTruth gt;
  gt.a_mu = linear_map(cfg.l, cfg.m, cfg.mu_scale, truth_rng);
  gt.a_mu_prime = linear_map(cfg.l, cfg.m, cfg.mu_prime_scale, truth_rng);
  gt.c = correlation_factor(cfg.l, cfg.correlation);
  gt.c_prime = gt.c;

  Dataset d;
  d.kind = cfg.kind;
  for (int j = 0; j < cfg.m; ++j) d.feature_names.push_back("f" + std::to_string(j));
  for (int j = 0; j < cfg.l; ++j) d.target_names.push_back("t" + std::to_string(j));
  d.features = Matd(cfg.n, cfg.m);
  d.labels = Matd(cfg.n, cfg.l, 0.0);

  std::vector<double> mu(static_cast<std::size_t>(cfg.l));
  std::vector<double> mu_prime(static_cast<std::size_t>(cfg.l));
  std::vector<double> v(static_cast<std::size_t>(cfg.l));
  std::vector<double> z(static_cast<std::size_t>(cfg.l));
  for (int i = 0; i < cfg.n; ++i) {
    for (int j = 0; j < cfg.m; ++j) d.features(i, j) = x_rng.normal();
    for (int j = 0; j < cfg.l; ++j) {
      double acc = 0.0;
      double acc_p = 0.0;
      for (int t = 0; t < cfg.m; ++t) {
        acc += gt.a_mu(j, t) * d.features(i, t);
        acc_p += gt.a_mu_prime(j, t) * d.features(i, t);
      }
      mu[j] = acc;
      mu_prime[j] = acc_p;
    }
    // r = mu + z + C v  ~  N(mu, I + C C^T): gate on the sign of r.
    for (int j = 0; j < cfg.l; ++j) {
      v[j] = gate_rng.normal();
      z[j] = gate_rng.normal();
    }
    std::vector<bool> positive(static_cast<std::size_t>(cfg.l));
    for (int j = 0; j < cfg.l; ++j) {
      double r = mu[j] + z[j];
      for (int t = 0; t <= j; ++t) r += gt.c(j, t) * v[t];
      positive[j] = r > 0.0;
    }
    // s = mu' + z' + C' v'  ~  N(mu', I + C'C'^T) drives positive magnitudes.
    for (int j = 0; j < cfg.l; ++j) {
      v[j] = value_rng.normal();
      z[j] = value_rng.normal();
    }
    for (int j = 0; j < cfg.l; ++j) {
      if (!positive[j]) continue;
      double s = mu_prime[j] + z[j];
      for (int t = 0; t <= j; ++t) s += gt.c_prime(j, t) * v[t];
      if (cfg.kind == DataKind::continuous) {
        d.labels(i, j) = std::exp(s);
      } else {
        d.labels(i, j) =
            static_cast<double>(truncated_poisson(std::exp(std::min(s, 12.0)), value_rng));
      }
    }
  }
  return {std::move(d), std::move(gt)};
}

namespace {

json matrix_to_json(const Matd& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows; ++i) {
    json r = json::array();
    for (int j = 0; j < m.cols; ++j) r.push_back(m(i, j));
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace

void save_ground_truth(const GroundTruth& gt, const SyntheticConfig& cfg,
                       const std::filesystem::path& path) {
  json j;
  j["n"] = cfg.n;
  j["m"] = cfg.m;
  j["l"] = cfg.l;
  j["kind"] = to_string(cfg.kind);
  j["seed"] = cfg.seed;
  j["correlation"] = cfg.correlation;
  j["mu_scale"] = cfg.mu_scale;
  j["mu_prime_scale"] = cfg.mu_prime_scale;
  j["a_mu"] = matrix_to_json(gt.a_mu);
  j["a_mu_prime"] = matrix_to_json(gt.a_mu_prime);
  j["c"] = matrix_to_json(gt.c);
  j["c_prime"] = matrix_to_json(gt.c_prime);
  std::ofstream out(path);
  if (!out) throw DataError("cannot write ground truth file " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace dhn
