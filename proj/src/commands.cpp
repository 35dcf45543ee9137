#include "dhn/commands.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "dhn/config_json.hpp"
#include "dhn/dataset.hpp"
#include "dhn/errors.hpp"
#include "dhn/metrics.hpp"
#include "dhn/model.hpp"

namespace dhn {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

struct TrainOptions {
  std::string data_path;
  std::string schema_path;
  std::string out_dir = "dhn-run";
  std::string model_path;  // defaults to <out>/model.json
  DhnConfig cfg;
  std::string optimizer = "adam";
  std::string ablation = "full";
};

int cmd_train(TrainOptions opt, std::ostream& out) {
  const Schema schema = load_schema(opt.schema_path);
  const Dataset data = load_csv(opt.data_path, schema);
  out << "dataset: " << data.n() << " rows, " << data.m() << " features, " << data.l()
      << " targets, " << fmt(100.0 * data.nonzero_fraction()) << "% of label entries nonzero\n";

  DhnConfig cfg = opt.cfg;
  cfg.feature_dim = data.m();
  cfg.target_dim = data.l();
  cfg.kind = data.kind;
  cfg.optimizer.kind = opt.optimizer == "sgd" ? OptimizerKind::sgd : OptimizerKind::adam;
  cfg.ablation = ablation_from_string(opt.ablation);
  if (cfg.ablation == Ablation::no_cov_penalty) cfg.cov_penalty = 0.0;
  cfg.validate();

  fs::create_directories(opt.out_dir);
  const fs::path model_path =
      opt.model_path.empty() ? fs::path(opt.out_dir) / "model.json" : fs::path(opt.model_path);

  json run = config_to_json(cfg);
  run["data"] = opt.data_path;
  run["schema"] = opt.schema_path;
  run["model"] = model_path.string();
  write_json(fs::path(opt.out_dir) / "config.json", run);

  TrainResult result = train(data, cfg);

  json report;
  report["epochs_completed"] = result.report.train_nll.size();
  report["train_nll"] = result.report.train_nll;
  report["val_nll"] = result.report.val_nll;
  report["penalty"] = result.report.penalty;
  report["best_epoch"] = result.report.best_epoch;
  report["diverged"] = result.report.diverged;
  if (result.report.diverged) report["divergence_message"] = result.report.divergence_message;
  write_json(fs::path(opt.out_dir) / "train_report.json", report);
  write_text(fs::path(opt.out_dir) / "train.time.txt",
             fmt(result.report.wall_seconds) + " seconds\n");
  save_model(result.model, model_path);

  if (result.report.diverged) {
    out << "training diverged: " << result.report.divergence_message << "\n";
    out << "last finite checkpoint written to " << model_path.string() << "\n";
    throw NumericalError(result.report.divergence_message);
  }
  out << "trained " << result.report.train_nll.size() << " epochs in "
      << fmt(result.report.wall_seconds) << " s; best epoch " << result.report.best_epoch
      << " (val NLL " << fmt(result.report.val_nll[result.report.best_epoch]) << ")\n";
  out << "model written to " << model_path.string() << "\n";
  return kExitOk;
}

struct EvalOptions {
  std::string model_path;
  std::string data_path;
  std::string schema_path;
  std::string out_dir = "dhn-eval";
  std::string split_name = "test";
  double alpha = 0.5;
  std::vector<double> alpha_sweep;
  int k_eval = 0;  // 0: use the model's k_eval
};

std::vector<int> select_rows(const SplitIndex& si, const std::string& name, int n) {
  if (name == "train") return si.train;
  if (name == "val") return si.val;
  if (name == "test") return si.test;
  if (name == "all") {
    std::vector<int> all(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) all[i] = i;
    return all;
  }
  throw UsageError("unknown split '" + name + "' (expected train, val, test, or all)");
}

int cmd_eval(EvalOptions opt, std::ostream& out) {
  const DhnModel model = load_model(opt.model_path);
  const Schema schema = load_schema(opt.schema_path);
  const Dataset data = load_csv(opt.data_path, schema);
  if (data.m() != model.config.feature_dim || data.l() != model.config.target_dim) {
    throw UsageError("eval: dataset has " + std::to_string(data.m()) + " features / " +
                     std::to_string(data.l()) + " targets but the model expects " +
                     std::to_string(model.config.feature_dim) + " / " +
                     std::to_string(model.config.target_dim));
  }
  const SplitIndex si = split(data.n(), model.config.seed);
  const std::vector<int> rows = select_rows(si, opt.split_name, data.n());
  const int k_eval = opt.k_eval > 0 ? opt.k_eval : model.config.k_eval;

  fs::create_directories(opt.out_dir);
  json run;
  run["model"] = opt.model_path;
  run["data"] = opt.data_path;
  run["schema"] = opt.schema_path;
  run["split"] = opt.split_name;
  run["alpha"] = opt.alpha;
  run["alpha_sweep"] = opt.alpha_sweep;
  run["k_eval"] = k_eval;
  write_json(fs::path(opt.out_dir) / "eval_config.json", run);

  const EvalReport report = evaluate(model, data, rows, opt.alpha, k_eval);
  const std::string rendered = render_eval_report(report);
  out << rendered;
  write_text(fs::path(opt.out_dir) / "eval_report.txt", rendered);
  write_text(fs::path(opt.out_dir) / "eval.time.txt", fmt(report.wall_seconds) + " seconds\n");

  if (!opt.alpha_sweep.empty()) {
    // zRMSE over the sweep; predictions are alpha-independent so this reuses
    // the prediction pass per alpha via the metric alone.
    const Predictor predictor(model);
    Matd actual(static_cast<int>(rows.size()), data.l());
    Matd predicted(static_cast<int>(rows.size()), data.l());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const Prediction p = predictor(data.features.row(rows[i]));
      for (int j = 0; j < data.l(); ++j) {
        actual(static_cast<int>(i), j) = data.labels(rows[i], j);
        predicted(static_cast<int>(i), j) = p.yhat[j];
      }
    }
    std::ostringstream sweep;
    sweep << "alpha,zrmse\n";
    out << "alpha sweep:\n";
    for (double a : opt.alpha_sweep) {
      const double z = zrmse_metric(actual, predicted, a);
      sweep << fmt(a) << ',' << fmt(z) << '\n';
      out << "  alpha " << fmt(a) << " -> zrmse " << fmt(z) << '\n';
    }
    write_text(fs::path(opt.out_dir) / "alpha_sweep.csv", sweep.str());
  }
  return kExitOk;
}

struct PredictOptions {
  std::string model_path;
  std::string input_path;
  std::string output_path;
};

int cmd_predict(const PredictOptions& opt, std::ostream& out) {
  const DhnModel model = load_model(opt.model_path);
  std::ifstream in(opt.input_path);
  if (!in) throw DataError("cannot open input file " + opt.input_path);

  std::string line;
  if (!std::getline(in, line)) throw DataError(opt.input_path + ": missing header row");

  const int m = model.config.feature_dim;
  const int l = model.config.target_dim;
  std::ostringstream result;
  for (int j = 1; j <= l; ++j) result << (j > 1 ? "," : "") << "p_" << j;
  for (int j = 1; j <= l; ++j) result << ",yhat_" << j;
  result << '\n';

  const Predictor predictor(model);
  std::vector<double> x(static_cast<std::size_t>(m));
  int row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++row;
    std::stringstream ss(line);
    std::string field;
    int col = 0;
    while (std::getline(ss, field, ',')) {
      if (col >= m) break;
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
      if (ec != std::errc{} || ptr != field.data() + field.size() || !std::isfinite(v)) {
        throw DataError("predict input row " + std::to_string(row) + ", column " +
                        std::to_string(col + 1) + ": cannot parse '" + field + "'");
      }
      x[col] = v;
      ++col;
    }
    if (col != m) {
      throw DataError("predict input row " + std::to_string(row) + ": expected " +
                      std::to_string(m) + " feature columns, got " + std::to_string(col));
    }
    const Prediction p = predictor(x);
    for (int j = 0; j < l; ++j) result << (j > 0 ? "," : "") << fmt(p.p[j]);
    for (int j = 0; j < l; ++j) result << ',' << fmt(p.yhat[j]);
    result << '\n';
  }
  write_text(opt.output_path, result.str());

  json run;
  run["model"] = opt.model_path;
  run["input"] = opt.input_path;
  run["output"] = opt.output_path;
  write_json(fs::path(opt.output_path).string() + ".run.json", run);
  out << "wrote " << row << " prediction rows to " << opt.output_path << "\n";
  return kExitOk;
}

struct SynthOptions {
  SyntheticConfig cfg;
  std::string kind = "continuous";
  std::string out_prefix = "synth";
};

int cmd_synth(SynthOptions opt, std::ostream& out) {
  opt.cfg.kind = data_kind_from_string(opt.kind);
  auto [data, truth] = generate_synthetic(opt.cfg);

  const fs::path csv_path = opt.out_prefix + ".csv";
  const fs::path schema_path = opt.out_prefix + ".schema.json";
  const fs::path truth_path = opt.out_prefix + ".truth.json";
  if (const fs::path parent = csv_path.parent_path(); !parent.empty()) {
    fs::create_directories(parent);
  }
  save_csv(data, csv_path);
  Schema schema{data.kind, data.feature_names, data.target_names};
  save_schema(schema, schema_path);
  save_ground_truth(truth, opt.cfg, truth_path);

  json run;
  run["n"] = opt.cfg.n;
  run["m"] = opt.cfg.m;
  run["l"] = opt.cfg.l;
  run["kind"] = opt.kind;
  run["seed"] = opt.cfg.seed;
  run["correlation"] = opt.cfg.correlation;
  run["mu_scale"] = opt.cfg.mu_scale;
  run["mu_prime_scale"] = opt.cfg.mu_prime_scale;
  write_json(opt.out_prefix + ".run.json", run);

  out << "wrote " << csv_path.string() << " (" << data.n() << " rows, "
      << fmt(100.0 * data.nonzero_fraction()) << "% of label entries nonzero), "
      << schema_path.string() << ", " << truth_path.string() << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Deep hurdle network for zero-inflated multi-target regression"};
  app.require_subcommand(1);

  TrainOptions train_opt;
  CLI::App* train_cmd = app.add_subcommand("train", "Train a model");
  train_cmd->add_option("--data", train_opt.data_path, "Training data CSV")->required();
  train_cmd->add_option("--schema", train_opt.schema_path, "Schema JSON declaring columns and kind")
      ->required();
  train_cmd->add_option("--out", train_opt.out_dir, "Output directory")
      ->capture_default_str();
  train_cmd->add_option("--model", train_opt.model_path, "Model file path (default <out>/model.json)");
  train_cmd->add_option("--epochs", train_opt.cfg.epochs, "Training epochs")->capture_default_str();
  train_cmd->add_option("--batch-size", train_opt.cfg.batch_size, "Minibatch size")
      ->capture_default_str();
  train_cmd->add_option("--k-train", train_opt.cfg.k_train, "Monte Carlo samples per row (training)")
      ->capture_default_str();
  train_cmd->add_option("--k-eval", train_opt.cfg.k_eval, "Monte Carlo samples per row (validation)")
      ->capture_default_str();
  train_cmd
      ->add_option("--lambda-cov", train_opt.cfg.cov_penalty,
                   "Weight of the L1 covariance coupling penalty")
      ->capture_default_str();
  train_cmd
      ->add_option("--encoder-dims", train_opt.cfg.encoder_dims,
                   "Encoder hidden widths (comma separated)")
      ->delimiter(',')
      ->capture_default_str();
  train_cmd->add_option("--latent-dim", train_opt.cfg.latent_dim, "Encoder output width")
      ->capture_default_str();
  train_cmd->add_option("--head-hidden", train_opt.cfg.head_hidden_dim, "Head MLP hidden width")
      ->capture_default_str();
  train_cmd->add_option("--optimizer", train_opt.optimizer, "adam or sgd")->capture_default_str();
  train_cmd->add_option("--lr", train_opt.cfg.optimizer.learning_rate, "Learning rate")
      ->capture_default_str();
  train_cmd
      ->add_option("--lr-decay", train_opt.cfg.optimizer.decay,
                   "Inverse-time learning rate decay per step")
      ->capture_default_str();
  train_cmd
      ->add_option("--ablation", train_opt.ablation,
                   "full, no-encoder, mlnd-only, or no-cov-penalty")
      ->capture_default_str();
  train_cmd->add_option("--seed", train_opt.cfg.seed, "Random seed")
      ->envname("DHN_SEED")
      ->capture_default_str();
  train_cmd->add_option("--threads", train_opt.cfg.threads, "Batch-parallel worker threads")
      ->capture_default_str();

  EvalOptions eval_opt;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate a trained model");
  eval_cmd->add_option("--model", eval_opt.model_path, "Model file")->required();
  eval_cmd->add_option("--data", eval_opt.data_path, "Data CSV")->required();
  eval_cmd->add_option("--schema", eval_opt.schema_path, "Schema JSON")->required();
  eval_cmd->add_option("--out", eval_opt.out_dir, "Output directory")->capture_default_str();
  eval_cmd->add_option("--split", eval_opt.split_name, "train, val, test, or all")
      ->capture_default_str();
  eval_cmd->add_option("--alpha", eval_opt.alpha, "zRMSE zero-part weight")->capture_default_str();
  eval_cmd->add_option("--alpha-sweep", eval_opt.alpha_sweep, "Comma separated alpha values")
      ->delimiter(',');
  eval_cmd->add_option("--k-eval", eval_opt.k_eval, "Override the model's k_eval");

  PredictOptions predict_opt;
  CLI::App* predict_cmd = app.add_subcommand("predict", "Predict from a feature-only CSV");
  predict_cmd->add_option("--model", predict_opt.model_path, "Model file")->required();
  predict_cmd->add_option("--input", predict_opt.input_path, "Feature CSV (header row required)")
      ->required();
  predict_cmd->add_option("--output", predict_opt.output_path, "Output CSV")->required();

  SynthOptions synth_opt;
  CLI::App* synth_cmd = app.add_subcommand("synth", "Generate a synthetic dataset");
  synth_cmd->add_option("--n", synth_opt.cfg.n, "Rows")->required();
  synth_cmd->add_option("--m", synth_opt.cfg.m, "Features")->required();
  synth_cmd->add_option("--l", synth_opt.cfg.l, "Targets")->required();
  synth_cmd->add_option("--kind", synth_opt.kind, "continuous or count")->capture_default_str();
  synth_cmd->add_option("--seed", synth_opt.cfg.seed, "Random seed")
      ->envname("DHN_SEED")
      ->capture_default_str();
  synth_cmd
      ->add_option("--corr", synth_opt.cfg.correlation, "Latent pairwise correlation [0, 0.95]")
      ->capture_default_str();
  synth_cmd->add_option("--mu-scale", synth_opt.cfg.mu_scale, "Binary-side mean map row norm")
      ->capture_default_str();
  synth_cmd
      ->add_option("--mu-prime-scale", synth_opt.cfg.mu_prime_scale,
                   "Abundance-side mean map row norm")
      ->capture_default_str();
  synth_cmd->add_option("--out", synth_opt.out_prefix, "Output path prefix")
      ->capture_default_str();

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      // --help and friends.
      out << app.help();
      return kExitOk;
    }
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (train_cmd->parsed()) return cmd_train(std::move(train_opt), out);
    if (eval_cmd->parsed()) return cmd_eval(std::move(eval_opt), out);
    if (predict_cmd->parsed()) return cmd_predict(predict_opt, out);
    if (synth_cmd->parsed()) return cmd_synth(std::move(synth_opt), out);
    err << "error: no subcommand given\n";
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DataError& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
}

}  // namespace dhn
