#ifndef DHN_MODEL_HPP
#define DHN_MODEL_HPP

#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dhn/abundance_head.hpp"
#include "dhn/covariance.hpp"
#include "dhn/dataset.hpp"
#include "dhn/layers.hpp"
#include "dhn/probit_head.hpp"

namespace dhn {

enum class Ablation { full, no_encoder, mlnd_only, no_cov_penalty };

std::string to_string(Ablation a);
Ablation ablation_from_string(const std::string& s);

struct DhnConfig {
  int feature_dim = 0;
  int target_dim = 0;
  DataKind kind = DataKind::continuous;
  std::vector<int> encoder_dims{512, 256};  // hidden widths of the encoder
  int latent_dim = 256;                     // encoder output width M'
  int head_hidden_dim = 256;                // hidden width of the two head MLPs
  int k_train = 64;
  int k_eval = 1024;
  double cov_penalty = 1.0;  // weight of the L1 coupling between Sigma and Sigma'
  int epochs = 100;
  int batch_size = 256;
  OptimizerConfig optimizer;
  std::uint64_t seed = 0;
  Ablation ablation = Ablation::full;
  int threads = 1;

  /// Throws UsageError on inconsistent settings.
  void validate() const;

  bool uses_encoder() const {
    return ablation != Ablation::no_encoder && !encoder_dims.empty();
  }
  bool uses_mvp() const { return ablation != Ablation::mlnd_only; }
  bool uses_penalty() const {
    return ablation != Ablation::mlnd_only && ablation != Ablation::no_cov_penalty &&
           cov_penalty > 0.0;
  }
  int mlp_input_dim() const { return uses_encoder() ? latent_dim : feature_dim; }
};

// Encoder + two mean MLPs + the two covariance parameters.
struct DhnModel {
  DhnConfig config;
  Mlp encoder;   // empty under the no-encoder ablation
  Mlp mvp_mlp;   // latent -> mu (length L)
  Mlp head_mlp;  // latent -> mu' (length L)
  CovarianceParam sigma;        // binary-side Sigma = I + C C^T
  CovarianceParam sigma_prime;  // abundance-side Sigma' = I + C'C'^T
  Standardizer standardizer;
  std::vector<std::string> feature_names;
  std::vector<std::string> target_names;

  static DhnModel init(const DhnConfig& cfg, std::vector<std::string> feature_names,
                       std::vector<std::string> target_names, Standardizer standardizer);

  /// Stable-ordered views of every trainable parameter vector.
  std::vector<ParamGroup> param_groups();
  std::vector<std::vector<double>> snapshot_params() const;
  void restore_params(const std::vector<std::vector<double>>& snap);
};

// The model mounted onto one tape (or as constants): parameter leaves plus
// the materialized covariance factors. Build once per tape, reuse per row.
struct MountedModel {
  MountedMlp encoder;
  MountedMlp mvp_mlp;
  MountedMlp head_mlp;
  MountedCov sigma;
  MountedCov sigma_prime;
  Matrix<ad::Var> c_sigma;
  Matrix<ad::Var> c_sigma_prime;
  std::vector<std::int32_t> group_bases;  // leaf base ids, aligned with param_groups()
};

MountedModel mount_model(const DhnModel& model, ad::Tape* tape);

// Negative-log-likelihood pieces of a single row. Terms are log-likelihood
// contributions (not yet negated); absent terms are untracked zeros.
struct RowTerms {
  ad::Var mvp = ad::constant(0.0);
  ad::Var head = ad::constant(0.0);
  bool has_mvp = false;
  bool has_head = false;

  ad::Var nll() const;
};

RowTerms row_nll_terms(const MountedModel& m, const DhnConfig& cfg,
                       std::span<const double> x_std, std::span<const double> y, int k_samples,
                       prob::RngStream row_stream);

/// lambda * sum_ij |Sigma_ij - Sigma'_ij|.
ad::Var cov_penalty_term(const Matrix<ad::Var>& sigma, const Matrix<ad::Var>& sigma_prime,
                         double lambda);

using RowStreamFn = std::function<prob::RngStream(int batch_position)>;

/// Mean over batch rows of the per-row NLL plus the covariance penalty.
/// Rows with all-zero labels contribute only the binary-pattern term; under
/// the head-only ablation the binary term is dropped and count rows score
/// every target. Throws NumericalError (with the offending row) on a
/// non-finite loss.
ad::Var batch_loss(const MountedModel& m, const DhnConfig& cfg, const Matd& x_std,
                   const Matd& labels, std::span<const int> rows,
                   const RowStreamFn& row_streams, int k_samples);

// --- training ---

struct TrainReport {
  std::vector<double> train_nll;  // per epoch, penalty excluded
  std::vector<double> val_nll;    // per epoch, fixed eval streams
  std::vector<double> penalty;    // per epoch, value at epoch end
  int best_epoch = -1;
  bool diverged = false;
  std::string divergence_message;
  double wall_seconds = 0.0;
};

struct TrainResult {
  DhnModel model;
  TrainReport report;
};

/// Splits, standardizes, and runs the minibatch training loop; returns the
/// parameters of the epoch with the lowest validation NLL. On divergence the
/// result is marked and carries the last finite checkpoint.
TrainResult train(const Dataset& data, const DhnConfig& cfg);

/// Mean NLL over the given rows with k samples per row and a fixed
/// evaluation stream per row (independent of iteration order and epoch).
double dataset_nll(const DhnModel& model, const Matd& x_std, const Matd& labels,
                   std::span<const int> rows, int k_samples);

// --- prediction ---

struct Prediction {
  std::vector<double> p;     // positive probabilities
  std::vector<double> yhat;  // hurdle-gated conditional means
};

// Immutable prediction context; safe to share across threads.
class Predictor {
 public:
  explicit Predictor(const DhnModel& model);

  /// p_j = Phi(mu_j / sqrt(Sigma_jj)); yhat_j = p_j * exp(mu'_j + Sigma'_jj/2).
  /// Under the head-only ablation p is identically 1.
  Prediction operator()(std::span<const double> x_raw) const;

 private:
  const DhnModel& model_;
  MountedModel mounted_;
  Matd sigma_;
  std::vector<double> sigma_prime_diag_;
};

Prediction predict(const DhnModel& model, std::span<const double> x_raw);

// --- persistence ---

inline constexpr int kModelFormatVersion = 1;

void save_model(const DhnModel& model, const std::filesystem::path& path);
DhnModel load_model(const std::filesystem::path& path);

}  // namespace dhn

#endif
