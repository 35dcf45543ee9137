#include "dhn/model.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <thread>

#include <json.hpp>

#include "dhn/errors.hpp"
#include "dhn/probability.hpp"

namespace dhn {

using nlohmann::json;

namespace {

// Stream derivation tags; changing these changes every seeded run.
constexpr std::uint64_t kTagInit = 11;
constexpr std::uint64_t kTagShuffle = 12;
constexpr std::uint64_t kTagBatch = 13;
constexpr std::uint64_t kTagEval = 14;
constexpr std::uint64_t kTagRowMvp = 1;
constexpr std::uint64_t kTagRowHead = 2;

}  // namespace

std::string to_string(Ablation a) {
  switch (a) {
    case Ablation::full: return "full";
    case Ablation::no_encoder: return "no-encoder";
    case Ablation::mlnd_only: return "mlnd-only";
    case Ablation::no_cov_penalty: return "no-cov-penalty";
  }
  return "full";
}

Ablation ablation_from_string(const std::string& s) {
  if (s == "full") return Ablation::full;
  if (s == "no-encoder") return Ablation::no_encoder;
  if (s == "mlnd-only") return Ablation::mlnd_only;
  if (s == "no-cov-penalty") return Ablation::no_cov_penalty;
  throw UsageError("unknown ablation '" + s +
                   "' (expected full, no-encoder, mlnd-only, or no-cov-penalty)");
}

void DhnConfig::validate() const {
  if (feature_dim < 1) throw UsageError("config: feature dimension must be positive");
  if (target_dim < 1) throw UsageError("config: target dimension must be positive");
  if (epochs < 1) throw UsageError("config: epochs must be positive");
  if (batch_size < 1) throw UsageError("config: batch size must be positive");
  if (k_train < 1 || k_eval < 1) throw UsageError("config: sample counts must be positive");
  if (!(optimizer.learning_rate > 0.0)) throw UsageError("config: learning rate must be positive");
  if (optimizer.decay < 0.0) throw UsageError("config: learning rate decay must be nonnegative");
  if (cov_penalty < 0.0) throw UsageError("config: covariance penalty must be nonnegative");
  if (threads < 1) throw UsageError("config: threads must be positive");
  if (ablation != Ablation::no_encoder) {
    if (encoder_dims.empty()) {
      throw UsageError("config: encoder dims must be nonempty unless ablation is no-encoder");
    }
    if (latent_dim < 1) throw UsageError("config: latent dimension must be positive");
  }
  for (int d : encoder_dims) {
    if (d < 1) throw UsageError("config: encoder hidden widths must be positive");
  }
  if (head_hidden_dim < 1) throw UsageError("config: head hidden width must be positive");
  if (ablation == Ablation::no_cov_penalty && cov_penalty != 0.0) {
    throw UsageError("config: the no-cov-penalty ablation requires a zero penalty weight");
  }
  if ((ablation == Ablation::full || ablation == Ablation::no_encoder) && cov_penalty == 0.0) {
    throw UsageError(
        "config: a zero penalty weight is the no-cov-penalty ablation; select it explicitly");
  }
}

DhnModel DhnModel::init(const DhnConfig& cfg, std::vector<std::string> feature_names,
                        std::vector<std::string> target_names, Standardizer standardizer) {
  cfg.validate();
  DhnModel m;
  m.config = cfg;
  m.feature_names = std::move(feature_names);
  m.target_names = std::move(target_names);
  m.standardizer = std::move(standardizer);

  prob::RngStream init = prob::RngStream(cfg.seed).derive(kTagInit);
  if (cfg.uses_encoder()) {
    int in = cfg.feature_dim;
    for (std::size_t i = 0; i < cfg.encoder_dims.size(); ++i) {
      prob::RngStream s = init.derive(1, i);
      m.encoder.push_back(DenseLayer::init(in, cfg.encoder_dims[i], Activation::relu, s));
      in = cfg.encoder_dims[i];
    }
    prob::RngStream s = init.derive(1, cfg.encoder_dims.size());
    m.encoder.push_back(DenseLayer::init(in, cfg.latent_dim, Activation::relu, s));
  }
  const int mlp_in = cfg.mlp_input_dim();
  {
    prob::RngStream s0 = init.derive(2, 0);
    prob::RngStream s1 = init.derive(2, 1);
    m.mvp_mlp.push_back(DenseLayer::init(mlp_in, cfg.head_hidden_dim, Activation::relu, s0));
    m.mvp_mlp.push_back(
        DenseLayer::init(cfg.head_hidden_dim, cfg.target_dim, Activation::identity, s1));
  }
  {
    prob::RngStream s0 = init.derive(3, 0);
    prob::RngStream s1 = init.derive(3, 1);
    m.head_mlp.push_back(DenseLayer::init(mlp_in, cfg.head_hidden_dim, Activation::relu, s0));
    m.head_mlp.push_back(
        DenseLayer::init(cfg.head_hidden_dim, cfg.target_dim, Activation::identity, s1));
  }
  prob::RngStream s_cov = init.derive(4);
  prob::RngStream s_cov_p = init.derive(5);
  m.sigma = CovarianceParam::init(cfg.target_dim, s_cov);
  m.sigma_prime = CovarianceParam::init(cfg.target_dim, s_cov_p);
  return m;
}

std::vector<ParamGroup> DhnModel::param_groups() {
  std::vector<ParamGroup> groups;
  auto add_mlp = [&](const std::string& prefix, Mlp& mlp) {
    for (std::size_t i = 0; i < mlp.size(); ++i) {
      groups.push_back({prefix + "." + std::to_string(i) + ".w", &mlp[i].w});
      groups.push_back({prefix + "." + std::to_string(i) + ".b", &mlp[i].b});
    }
  };
  add_mlp("encoder", encoder);
  add_mlp("mvp_mlp", mvp_mlp);
  add_mlp("head_mlp", head_mlp);
  groups.push_back({"sigma.raw", &sigma.raw});
  groups.push_back({"sigma_prime.raw", &sigma_prime.raw});
  return groups;
}

std::vector<std::vector<double>> DhnModel::snapshot_params() const {
  std::vector<std::vector<double>> snap;
  auto& self = const_cast<DhnModel&>(*this);
  for (const ParamGroup& g : self.param_groups()) snap.push_back(*g.values);
  return snap;
}

void DhnModel::restore_params(const std::vector<std::vector<double>>& snap) {
  std::vector<ParamGroup> groups = param_groups();
  if (snap.size() != groups.size()) throw UsageError("restore_params: group count mismatch");
  for (std::size_t g = 0; g < groups.size(); ++g) *groups[g].values = snap[g];
}

MountedModel mount_model(const DhnModel& model, ad::Tape* tape) {
  MountedModel m;
  auto& self = const_cast<DhnModel&>(model);
  // Bases are recorded in param_groups() order; leaves are appended in the
  // same order, so gradient extraction is a contiguous read per group.
  std::int32_t next = tape ? static_cast<std::int32_t>(tape->node_count()) : 0;
  for (const ParamGroup& g : self.param_groups()) {
    m.group_bases.push_back(next);
    next += static_cast<std::int32_t>(g.values->size());
  }
  m.encoder = mount(model.encoder, tape);
  m.mvp_mlp = mount(model.mvp_mlp, tape);
  m.head_mlp = mount(model.head_mlp, tape);
  m.sigma = mount(model.sigma, tape);
  m.sigma_prime = mount(model.sigma_prime, tape);
  m.c_sigma = factor_matrix(m.sigma);
  m.c_sigma_prime = factor_matrix(m.sigma_prime);
  return m;
}

ad::Var RowTerms::nll() const {
  ad::Var total = ad::constant(0.0);
  if (has_mvp) total = total - mvp;
  if (has_head) total = total - head;
  return total;
}

RowTerms row_nll_terms(const MountedModel& m, const DhnConfig& cfg,
                       std::span<const double> x_std, std::span<const double> y, int k_samples,
                       prob::RngStream row_stream) {
  std::vector<ad::Var> x;
  x.reserve(x_std.size());
  for (double v : x_std) x.push_back(ad::constant(v));

  std::vector<ad::Var> latent = cfg.uses_encoder() ? forward_mlp(m.encoder, x) : std::move(x);

  RowTerms terms;
  if (cfg.uses_mvp()) {
    const std::vector<ad::Var> mu = forward_mlp(m.mvp_mlp, latent);
    const std::vector<std::uint8_t> pattern = binary_pattern(y);
    prob::RngStream s = row_stream.derive(kTagRowMvp);
    terms.mvp = mvp_log_likelihood(mu, m.c_sigma, pattern, k_samples, s);
    terms.has_mvp = true;
  }

  const PositiveSubset subset = PositiveSubset::from_labels(y);
  if (!subset.empty()) {
    const std::vector<ad::Var> mu_prime = forward_mlp(m.head_mlp, latent);
    if (cfg.kind == DataKind::continuous) {
      terms.head = mlnd_log_density(mu_prime, m.c_sigma_prime, subset);
    } else {
      prob::RngStream s = row_stream.derive(kTagRowHead);
      if (cfg.ablation == Ablation::mlnd_only) {
        // Head-only count model scores every target; zeros contribute -lambda.
        std::vector<int> all_idx(y.size());
        for (std::size_t j = 0; j < y.size(); ++j) all_idx[j] = static_cast<int>(j);
        terms.head = poisson_lognormal_log_likelihood(mu_prime, m.c_sigma_prime, all_idx, y,
                                                      k_samples, s);
      } else {
        terms.head = poisson_lognormal_log_likelihood(mu_prime, m.c_sigma_prime, subset.indices,
                                                      subset.values, k_samples, s);
      }
    }
    terms.has_head = true;
  }
  return terms;
}

ad::Var cov_penalty_term(const Matrix<ad::Var>& sigma, const Matrix<ad::Var>& sigma_prime,
                         double lambda) {
  if (sigma.rows != sigma_prime.rows) throw UsageError("cov_penalty: dimension mismatch");
  ad::Var total = ad::constant(0.0);
  for (int i = 0; i < sigma.rows; ++i) {
    for (int j = 0; j < sigma.cols; ++j) {
      total = total + ad::abs(sigma(i, j) - sigma_prime(i, j));
    }
  }
  return ad::constant(lambda) * total;
}

ad::Var batch_loss(const MountedModel& m, const DhnConfig& cfg, const Matd& x_std,
                   const Matd& labels, std::span<const int> rows,
                   const RowStreamFn& row_streams, int k_samples) {
  if (rows.empty()) throw UsageError("batch_loss: empty batch");
  std::vector<ad::Var> nlls;
  nlls.reserve(rows.size());
  for (std::size_t pos = 0; pos < rows.size(); ++pos) {
    const int r = rows[pos];
    RowTerms terms =
        row_nll_terms(m, cfg, x_std.row(r), labels.row(r), k_samples, row_streams(static_cast<int>(pos)));
    ad::Var nll = terms.nll();
    if (!std::isfinite(nll.value)) {
      throw NumericalError("batch_loss: non-finite loss at dataset row " + std::to_string(r));
    }
    nlls.push_back(nll);
  }
  ad::Var loss = ad::sum(nlls) * (1.0 / static_cast<double>(rows.size()));
  if (cfg.uses_penalty()) {
    loss = loss + cov_penalty_term(sigma_matrix(m.c_sigma), sigma_matrix(m.c_sigma_prime),
                                   cfg.cov_penalty);
  }
  return loss;
}

namespace {

struct BatchResult {
  Grads grads;          // mean over rows (penalty included)
  double mean_nll = 0;  // penalty excluded
  double penalty = 0;
};

void accumulate_leaf_adjoints(const ad::Tape& tape, const MountedModel& m,
                              std::span<const ParamGroup> groups, double scale, Grads& out) {
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const std::int32_t base = m.group_bases[g];
    std::vector<double>& dst = out[g];
    for (std::size_t i = 0; i < dst.size(); ++i) {
      dst[i] += scale * tape.adjoint(ad::Var{0.0, base + static_cast<std::int32_t>(i)});
    }
  }
}

Grads zero_grads(std::span<const ParamGroup> groups) {
  Grads g(groups.size());
  for (std::size_t i = 0; i < groups.size(); ++i) g[i].assign(groups[i].values->size(), 0.0);
  return g;
}

void add_grads(Grads& into, const Grads& from) {
  for (std::size_t g = 0; g < into.size(); ++g) {
    for (std::size_t i = 0; i < into[g].size(); ++i) into[g][i] += from[g][i];
  }
}

// Per-row tapes with rewind-to-checkpoint; each worker handles a contiguous
// chunk of the batch in row order and chunk sums are reduced in chunk order,
// so a run is deterministic for a fixed seed and thread count.
BatchResult batch_gradients(DhnModel& model, const DhnConfig& cfg, const Matd& x_std,
                            const Matd& labels, std::span<const int> rows,
                            prob::RngStream batch_stream) {
  std::vector<ParamGroup> groups = model.param_groups();
  const int n_rows = static_cast<int>(rows.size());
  const int n_threads = std::max(1, std::min(cfg.threads, n_rows));
  const double inv_batch = 1.0 / static_cast<double>(n_rows);

  std::vector<Grads> chunk_grads(static_cast<std::size_t>(n_threads));
  std::vector<double> chunk_nll(static_cast<std::size_t>(n_threads), 0.0);
  std::vector<std::string> chunk_error(static_cast<std::size_t>(n_threads));
  double penalty_value = 0.0;
  Grads penalty_grads = zero_grads(groups);

  auto work = [&](int t, int row_begin, int row_end, bool with_penalty) {
    try {
      ad::Tape tape;
      ad::TapeGuard guard(tape);
      MountedModel mounted = mount_model(model, &tape);
      ad::Var penalty = ad::constant(0.0);
      if (with_penalty && cfg.uses_penalty()) {
        penalty = cov_penalty_term(sigma_matrix(mounted.c_sigma),
                                   sigma_matrix(mounted.c_sigma_prime), cfg.cov_penalty);
      }
      tape.checkpoint();
      Grads& grads = chunk_grads[t];
      grads = zero_grads(groups);
      for (int pos = row_begin; pos < row_end; ++pos) {
        tape.rewind();
        const int r = rows[pos];
        RowTerms terms = row_nll_terms(mounted, cfg, x_std.row(r), labels.row(r), cfg.k_train,
                                       batch_stream.derive(static_cast<std::uint64_t>(pos)));
        ad::Var nll = terms.nll();
        if (!std::isfinite(nll.value)) {
          throw NumericalError("training: non-finite loss at dataset row " + std::to_string(r));
        }
        chunk_nll[t] += nll.value;
        if (nll.tracked()) {
          tape.backward(nll);
          accumulate_leaf_adjoints(tape, mounted, groups, inv_batch, grads);
        }
      }
      if (with_penalty && cfg.uses_penalty()) {
        penalty_value = penalty.value;
        tape.backward(penalty);
        accumulate_leaf_adjoints(tape, mounted, groups, 1.0, penalty_grads);
      }
    } catch (const std::exception& e) {
      chunk_error[t] = e.what();
    }
  };

  if (n_threads == 1) {
    work(0, 0, n_rows, true);
  } else {
    std::vector<std::thread> pool;
    const int per = (n_rows + n_threads - 1) / n_threads;
    for (int t = 0; t < n_threads; ++t) {
      const int begin = t * per;
      const int end = std::min(n_rows, begin + per);
      pool.emplace_back(work, t, begin, end, t == 0);
    }
    for (std::thread& th : pool) th.join();
  }

  for (const std::string& err : chunk_error) {
    if (!err.empty()) throw NumericalError(err);
  }

  BatchResult result;
  result.grads = std::move(chunk_grads[0]);
  for (int t = 1; t < n_threads; ++t) add_grads(result.grads, chunk_grads[t]);
  add_grads(result.grads, penalty_grads);
  result.mean_nll = 0.0;
  for (double v : chunk_nll) result.mean_nll += v;
  result.mean_nll *= inv_batch;
  result.penalty = penalty_value;
  return result;
}

}  // namespace

double dataset_nll(const DhnModel& model, const Matd& x_std, const Matd& labels,
                   std::span<const int> rows, int k_samples) {
  if (rows.empty()) throw UsageError("dataset_nll: empty row set");
  const MountedModel mounted = mount_model(model, nullptr);
  prob::RngStream eval_root = prob::RngStream(model.config.seed).derive(kTagEval);
  double total = 0.0;
  for (int r : rows) {
    RowTerms terms = row_nll_terms(mounted, model.config, x_std.row(r), labels.row(r), k_samples,
                                   eval_root.derive(static_cast<std::uint64_t>(r)));
    const double nll = terms.nll().value;
    if (!std::isfinite(nll)) {
      throw NumericalError("dataset_nll: non-finite loss at dataset row " + std::to_string(r));
    }
    total += nll;
  }
  return total / static_cast<double>(rows.size());
}

TrainResult train(const Dataset& data, const DhnConfig& cfg) {
  cfg.validate();
  data.validate();
  if (data.m() != cfg.feature_dim || data.l() != cfg.target_dim) {
    throw UsageError("train: dataset dimensions (" + std::to_string(data.m()) + "x" +
                     std::to_string(data.l()) + " per row) do not match config (" +
                     std::to_string(cfg.feature_dim) + "x" + std::to_string(cfg.target_dim) + ")");
  }
  if (data.kind != cfg.kind) throw UsageError("train: dataset kind does not match config");

  const auto t_start = std::chrono::steady_clock::now();

  const SplitIndex si = split(data.n(), cfg.seed);
  const Standardizer st = fit_standardizer(data.features, si.train);
  const Matd x_std = st.apply(data.features);

  TrainResult result{
      DhnModel::init(cfg, data.feature_names, data.target_names, st),
      TrainReport{},
  };
  DhnModel& model = result.model;
  TrainReport& report = result.report;

  Optimizer optimizer(cfg.optimizer);
  prob::RngStream root(cfg.seed);

  std::vector<std::vector<double>> best = model.snapshot_params();
  double best_val = std::numeric_limits<double>::infinity();

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double epoch_nll = 0.0;
    double epoch_penalty = 0.0;
    std::size_t n_batches = 0;
    try {
      const auto epoch_batches =
          batches(si.train, cfg.batch_size, root.derive(kTagShuffle, epoch));
      std::vector<ParamGroup> groups = model.param_groups();
      for (std::size_t b = 0; b < epoch_batches.size(); ++b) {
        BatchResult br = batch_gradients(model, cfg, x_std, data.labels, epoch_batches[b],
                                         root.derive(kTagBatch, epoch, b));
        optimizer.step(groups, br.grads);
        epoch_nll += br.mean_nll;
        epoch_penalty = br.penalty;
        ++n_batches;
      }
      const double val_nll = dataset_nll(model, x_std, data.labels, si.val, cfg.k_eval);
      report.train_nll.push_back(epoch_nll / static_cast<double>(n_batches));
      report.val_nll.push_back(val_nll);
      report.penalty.push_back(epoch_penalty);
      if (val_nll < best_val) {
        best_val = val_nll;
        best = model.snapshot_params();
        report.best_epoch = epoch;
      }
    } catch (const NumericalError& e) {
      report.diverged = true;
      report.divergence_message = e.what();
      break;
    }
  }

  model.restore_params(best);
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return result;
}

Predictor::Predictor(const DhnModel& model)
    : model_(model), mounted_(mount_model(model, nullptr)) {
  sigma_ = sigma_matrix(factor_matrix(model.sigma));
  const Matd c_prime = factor_matrix(model.sigma_prime);
  sigma_prime_diag_.resize(static_cast<std::size_t>(c_prime.rows));
  for (int j = 0; j < c_prime.rows; ++j) {
    double acc = 1.0;
    for (int k = 0; k <= j; ++k) acc += c_prime(j, k) * c_prime(j, k);
    sigma_prime_diag_[j] = acc;
  }
}

Prediction Predictor::operator()(std::span<const double> x_raw) const {
  const DhnConfig& cfg = model_.config;
  if (static_cast<int>(x_raw.size()) != cfg.feature_dim) {
    throw UsageError("predict: input width " + std::to_string(x_raw.size()) +
                     " does not match model feature dimension " +
                     std::to_string(cfg.feature_dim));
  }
  std::vector<double> x(x_raw.begin(), x_raw.end());
  model_.standardizer.apply_in_place(x);

  std::vector<ad::Var> xv;
  xv.reserve(x.size());
  for (double v : x) xv.push_back(ad::constant(v));
  std::vector<ad::Var> latent = cfg.uses_encoder() ? forward_mlp(mounted_.encoder, xv)
                                                   : std::move(xv);

  Prediction out;
  out.p.assign(static_cast<std::size_t>(cfg.target_dim), 1.0);
  if (cfg.uses_mvp()) {
    const std::vector<ad::Var> mu = forward_mlp(mounted_.mvp_mlp, latent);
    std::vector<double> mu_values(mu.size());
    for (std::size_t j = 0; j < mu.size(); ++j) mu_values[j] = mu[j].value;
    out.p = positive_probabilities(mu_values, sigma_);
  }
  const std::vector<ad::Var> mu_prime = forward_mlp(mounted_.head_mlp, latent);
  out.yhat.resize(static_cast<std::size_t>(cfg.target_dim));
  for (int j = 0; j < cfg.target_dim; ++j) {
    const double cond_mean = std::exp(mu_prime[j].value + 0.5 * sigma_prime_diag_[j]);
    out.yhat[j] = out.p[j] * cond_mean;
  }
  return out;
}

Prediction predict(const DhnModel& model, std::span<const double> x_raw) {
  return Predictor(model)(x_raw);
}

// --- persistence ---

namespace {

json optimizer_to_json(const OptimizerConfig& o) {
  return json{{"kind", o.kind == OptimizerKind::adam ? "adam" : "sgd"},
              {"learning_rate", o.learning_rate},
              {"decay", o.decay},
              {"beta1", o.beta1},
              {"beta2", o.beta2},
              {"epsilon", o.epsilon}};
}

OptimizerConfig optimizer_from_json(const json& j) {
  OptimizerConfig o;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "adam") {
    o.kind = OptimizerKind::adam;
  } else if (kind == "sgd") {
    o.kind = OptimizerKind::sgd;
  } else {
    throw DataError("model file: unknown optimizer kind '" + kind + "'");
  }
  o.learning_rate = j.at("learning_rate").get<double>();
  o.decay = j.at("decay").get<double>();
  o.beta1 = j.at("beta1").get<double>();
  o.beta2 = j.at("beta2").get<double>();
  o.epsilon = j.at("epsilon").get<double>();
  return o;
}

}  // namespace

json config_to_json(const DhnConfig& cfg);
DhnConfig config_from_json(const json& j);

json config_to_json(const DhnConfig& cfg) {
  return json{{"feature_dim", cfg.feature_dim},
              {"target_dim", cfg.target_dim},
              {"kind", to_string(cfg.kind)},
              {"encoder_dims", cfg.encoder_dims},
              {"latent_dim", cfg.latent_dim},
              {"head_hidden_dim", cfg.head_hidden_dim},
              {"k_train", cfg.k_train},
              {"k_eval", cfg.k_eval},
              {"cov_penalty", cfg.cov_penalty},
              {"epochs", cfg.epochs},
              {"batch_size", cfg.batch_size},
              {"optimizer", optimizer_to_json(cfg.optimizer)},
              {"seed", cfg.seed},
              {"ablation", to_string(cfg.ablation)},
              {"threads", cfg.threads}};
}

DhnConfig config_from_json(const json& j) {
  DhnConfig cfg;
  cfg.feature_dim = j.at("feature_dim").get<int>();
  cfg.target_dim = j.at("target_dim").get<int>();
  cfg.kind = data_kind_from_string(j.at("kind").get<std::string>());
  cfg.encoder_dims = j.at("encoder_dims").get<std::vector<int>>();
  cfg.latent_dim = j.at("latent_dim").get<int>();
  cfg.head_hidden_dim = j.at("head_hidden_dim").get<int>();
  cfg.k_train = j.at("k_train").get<int>();
  cfg.k_eval = j.at("k_eval").get<int>();
  cfg.cov_penalty = j.at("cov_penalty").get<double>();
  cfg.epochs = j.at("epochs").get<int>();
  cfg.batch_size = j.at("batch_size").get<int>();
  cfg.optimizer = optimizer_from_json(j.at("optimizer"));
  cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.ablation = ablation_from_string(j.at("ablation").get<std::string>());
  cfg.threads = j.at("threads").get<int>();
  return cfg;
}

void save_model(const DhnModel& model, const std::filesystem::path& path) {
  json j;
  j["format"] = "dhn-model";
  j["format_version"] = kModelFormatVersion;
  j["config"] = config_to_json(model.config);
  j["feature_names"] = model.feature_names;
  j["target_names"] = model.target_names;
  j["standardizer"] = json{{"mean", model.standardizer.mean}, {"scale", model.standardizer.scale}};
  json params = json::object();
  auto& self = const_cast<DhnModel&>(model);
  for (const ParamGroup& g : self.param_groups()) params[g.name] = *g.values;
  j["params"] = std::move(params);
  std::ofstream out(path);
  if (!out) throw DataError("cannot write model file " + path.string());
  out << j.dump(1) << '\n';
}

DhnModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open model file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("model file " + path.string() + " is corrupt: " + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "dhn-model") {
      throw DataError("model file " + path.string() + ": unrecognized format");
    }
    if (j.at("format_version").get<int>() != kModelFormatVersion) {
      throw DataError("model file " + path.string() + ": unsupported format version " +
                      std::to_string(j.at("format_version").get<int>()));
    }
    const DhnConfig cfg = config_from_json(j.at("config"));
    Standardizer st;
    st.mean = j.at("standardizer").at("mean").get<std::vector<double>>();
    st.scale = j.at("standardizer").at("scale").get<std::vector<double>>();
    if (static_cast<int>(st.mean.size()) != cfg.feature_dim ||
        static_cast<int>(st.scale.size()) != cfg.feature_dim) {
      throw DataError("model file " + path.string() +
                      ": standardizer width does not match the stored feature dimension");
    }
    DhnModel model = DhnModel::init(cfg, j.at("feature_names").get<std::vector<std::string>>(),
                                    j.at("target_names").get<std::vector<std::string>>(), st);
    const json& params = j.at("params");
    for (const ParamGroup& g : model.param_groups()) {
      if (!params.contains(g.name)) {
        throw DataError("model file " + path.string() + ": missing parameter group " + g.name);
      }
      std::vector<double> values = params.at(g.name).get<std::vector<double>>();
      if (values.size() != g.values->size()) {
        throw DataError("model file " + path.string() + ": parameter group " + g.name + " has " +
                        std::to_string(values.size()) + " entries but the stored config implies " +
                        std::to_string(g.values->size()));
      }
      *g.values = std::move(values);
    }
    return model;
  } catch (const json::exception& e) {
    throw DataError("model file " + path.string() + " is malformed: " + e.what());
  }
}

}  // namespace dhn
