// survmoe command-line runner: data generation, training, evaluation,
// expert-count sweeps, cluster reports, and gradient checks. Every command
// writes a run manifest; `rerun` replays a manifest into a fresh directory.
// Exit codes: 0 success, 1 usage/config error, 2 numerical failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "survmoe/cluster.hpp"
#include "survmoe/common.hpp"
#include "survmoe/csv_io.hpp"
#include "survmoe/dataset.hpp"
#include "survmoe/manifest.hpp"
#include "survmoe/metrics.hpp"
#include "survmoe/model.hpp"
#include "survmoe/presets.hpp"
#include "survmoe/synthetic.hpp"
#include "survmoe/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace survmoe;

namespace {

struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

/// Relative --out paths are rooted at $SURVMOE_OUT_ROOT when it is set.
fs::path resolve_out(const std::string& out) {
  if (out.empty()) throw UsageError("--out must not be empty");
  fs::path p(out);
  const char* root = std::getenv("SURVMOE_OUT_ROOT");
  if (root != nullptr && *root != '\0' && p.is_relative()) return fs::path(root) / p;
  return p;
}

fs::path prepare_out_dir(const std::string& out, bool force,
                         std::initializer_list<const char*> products) {
  const fs::path dir = resolve_out(out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (!fs::is_directory(dir))
    throw UsageError("cannot create output directory " + dir.string());
  if (!force) {
    for (const char* name : products)
      if (fs::exists(dir / name))
        throw UsageError("refusing to overwrite " + (dir / name).string() +
                         " (pass --force to allow)");
  }
  return dir;
}

json vec_json(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

std::vector<std::string> split_list(const std::string& csv) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : csv) {
    if (ch == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

// ---------------------------------------------------------------------------
// gen-data

struct GenDataOpts {
  data::SyntheticSpec spec;
  std::string out;
  bool force = false;
};

json gen_to_json(const GenDataOpts& o) {
  return json{{"class_means", o.spec.class_means},
              {"class_stds", o.spec.class_stds},
              {"censor_rate", o.spec.censor_rate},
              {"samples_per_class", o.spec.samples_per_class},
              {"feature_dim", o.spec.feature_dim},
              {"seed", o.spec.seed},
              {"out", o.out}};
}

GenDataOpts gen_from_json(const json& j) {
  GenDataOpts o;
  o.spec.class_means = j.at("class_means").get<std::vector<double>>();
  o.spec.class_stds = j.at("class_stds").get<std::vector<double>>();
  o.spec.censor_rate = j.at("censor_rate").get<double>();
  o.spec.samples_per_class = j.at("samples_per_class").get<int>();
  o.spec.feature_dim = j.at("feature_dim").get<int>();
  o.spec.seed = j.at("seed").get<std::uint64_t>();
  o.out = j.at("out").get<std::string>();
  return o;
}

int cmd_gen_data(const GenDataOpts& opts) {
  Stopwatch watch;
  const fs::path dir = prepare_out_dir(
      opts.out, opts.force, {"records.csv", "labels.csv", "schema.json", "manifest.json"});

  const data::Dataset ds = data::generate_synthetic(opts.spec);

  data::FeatureSchema schema;
  schema.time_col = "time";
  schema.event_col = "event";
  for (int f = 0; f < opts.spec.feature_dim; ++f)
    schema.continuous_names.push_back("x" + std::to_string(f));
  data::write_csv((dir / "records.csv").string(), ds, schema);
  data::write_labels_csv((dir / "labels.csv").string(), ds);

  data::SchemaDecl decl;
  decl.time_col = "time";
  decl.event_col = "event";
  decl.continuous = schema.continuous_names;
  data::write_schema_decl((dir / "schema.json").string(), decl);

  int censored = 0;
  for (const auto& r : ds.records) censored += 1 - r.event;

  manifest::RunManifest man;
  man.command = "gen-data";
  man.config = gen_to_json(opts);
  man.seeds = {opts.spec.seed};
  man.datasets = {manifest::fingerprint_csv((dir / "records.csv").string())};
  man.outputs = {"records.csv", "labels.csv", "schema.json"};
  man.metrics = json{{"records", ds.size()}, {"censored", censored}};
  man.runtime_seconds = watch.seconds();
  manifest::write_manifest(man, (dir / "manifest.json").string());

  std::printf("gen-data: %d records (%d censored, %zu classes) -> %s\n", ds.size(), censored,
              opts.spec.class_means.size(), dir.string().c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// shared training/eval plumbing

struct SplitSpec {
  std::vector<double> fractions{0.8, 0.1, 0.1};
};

void check_split(const std::vector<double>& f) {
  if (f.size() != 3) throw UsageError("--split needs exactly three fractions");
}

/// Raw CSV -> vocab-fitted schema -> seeded split -> standardized splits.
struct PreparedData {
  data::FeatureSchema schema;
  data::Splits splits;  // standardized
  data::TimeGrid grid;
};

PreparedData prepare_training_data(const std::string& data_path,
                                   const std::string& schema_path,
                                   const std::vector<double>& fracs, int bins,
                                   std::uint64_t seed) {
  const data::SchemaDecl decl = data::read_schema_decl(schema_path);
  data::FeatureSchema schema;
  data::Dataset ds = data::load_csv_fit(data_path, decl, schema);
  data::Splits raw = data::split(ds, fracs[0], fracs[1], fracs[2], seed);
  schema = data::fit_standardizer(raw.train, schema);
  PreparedData out;
  out.grid = data::TimeGrid::fit(raw.train, bins);
  out.splits.train = data::apply_standardizer(schema, std::move(raw.train));
  out.splits.val = data::apply_standardizer(schema, std::move(raw.val));
  out.splits.test = data::apply_standardizer(schema, std::move(raw.test));
  out.schema = std::move(schema);
  return out;
}

/// All evaluation metrics for one model on one standardized split.
json eval_metrics(const model::SurvivalModel& mod, const data::Dataset& ds) {
  const data::TimeGrid& grid = mod.grid;
  const Mat pmf = mod.predict_pmf(ds);
  const Mat cdf = metrics::cdf_rows(pmf);
  const metrics::StepFn g = metrics::censoring_survival(ds);
  const metrics::EceReport ece = metrics::ece_equal_mass(cdf, ds, g, grid, 10);
  const Vec brier = metrics::brier_curve(cdf, ds, g, grid);
  const Vec risks = metrics::median_survival_risks(pmf, grid);

  std::vector<double> times;
  std::vector<int> events;
  for (const auto& r : ds.records) {
    times.push_back(r.time);
    events.push_back(r.event);
  }

  json out;
  out["n"] = ds.size();
  out["nll"] = train::dataset_nll(mod, ds);
  out["harrell_c"] = metrics::concordance_harrell(risks, times, events);
  out["ipcw_c"] = metrics::concordance_ipcw(risks, times, events, g);
  out["ece"] = ece.average;
  out["ece_per_time"] = vec_json(ece.per_time);
  out["brier_25"] = brier[metrics::percentile_bin(grid.m, 0.25)];
  out["brier_50"] = brier[metrics::percentile_bin(grid.m, 0.50)];
  out["brier_75"] = brier[metrics::percentile_bin(grid.m, 0.75)];
  out["brier_mean"] = brier.mean();
  return out;
}

// ---------------------------------------------------------------------------
// train

struct TrainOpts {
  std::string data, schema, out;
  std::string head = "fixed", preset;
  int experts = 10, hidden_dim = 120, layers = 1, bins = 100;
  double lr = 1e-3, lambda_lb = 0.01, kappa_init = 2.0;
  int batch_size = 64, max_epochs = 200, patience = 10;
  std::vector<double> split{0.8, 0.1, 0.1};
  std::uint64_t seed = 42;
  bool force = false;
};

json train_to_json(const TrainOpts& o) {
  return json{{"data", o.data},         {"schema", o.schema},
              {"out", o.out},           {"head", o.head},
              {"preset", o.preset},     {"experts", o.experts},
              {"hidden_dim", o.hidden_dim}, {"layers", o.layers},
              {"bins", o.bins},         {"lr", o.lr},
              {"lambda_lb", o.lambda_lb},   {"kappa_init", o.kappa_init},
              {"batch_size", o.batch_size}, {"max_epochs", o.max_epochs},
              {"patience", o.patience}, {"split", o.split},
              {"seed", o.seed}};
}

TrainOpts train_from_json(const json& j) {
  TrainOpts o;
  o.data = j.at("data").get<std::string>();
  o.schema = j.at("schema").get<std::string>();
  o.out = j.at("out").get<std::string>();
  o.head = j.at("head").get<std::string>();
  o.preset = j.value("preset", std::string());
  o.experts = j.at("experts").get<int>();
  o.hidden_dim = j.at("hidden_dim").get<int>();
  o.layers = j.at("layers").get<int>();
  o.bins = j.at("bins").get<int>();
  o.lr = j.at("lr").get<double>();
  o.lambda_lb = j.at("lambda_lb").get<double>();
  o.kappa_init = j.at("kappa_init").get<double>();
  o.batch_size = j.at("batch_size").get<int>();
  o.max_epochs = j.at("max_epochs").get<int>();
  o.patience = j.at("patience").get<int>();
  o.split = j.at("split").get<std::vector<double>>();
  o.seed = j.at("seed").get<std::uint64_t>();
  return o;
}

void check_experts_divide(const std::string& head, int hidden, int experts) {
  if (head != "personalized" || experts <= 0 || hidden % experts == 0) return;
  std::string valid;
  for (int k = 2; k <= 20; ++k)
    if (hidden % k == 0) valid += (valid.empty() ? "" : ", ") + std::to_string(k);
  throw UsageError("personalized head needs --hidden-dim divisible by --experts (" +
                   std::to_string(hidden) + " % " + std::to_string(experts) +
                   " != 0); valid expert counts for this width: " + valid);
}

int cmd_train(const TrainOpts& opts) {
  Stopwatch watch;
  check_split(opts.split);
  check_experts_divide(opts.head, opts.hidden_dim, opts.experts);
  const fs::path dir =
      prepare_out_dir(opts.out, opts.force, {"checkpoint.json", "history.csv", "manifest.json"});

  PreparedData prep = prepare_training_data(opts.data, opts.schema, opts.split, opts.bins,
                                            opts.seed);

  model::ModelConfig mcfg;
  mcfg.head = model::head_from_string(opts.head);
  mcfg.experts = opts.experts;
  mcfg.hidden_dim = opts.hidden_dim;
  mcfg.layers = opts.layers;
  mcfg.bins = opts.bins;
  mcfg.kappa_init = opts.kappa_init;
  model::SurvivalModel mod = model::SurvivalModel::init(mcfg, prep.schema, prep.grid, opts.seed);
  const long param_count = mod.params.total_scalars();

  train::TrainConfig tcfg;
  tcfg.learning_rate = opts.lr;
  tcfg.batch_size = opts.batch_size;
  tcfg.lambda_lb = opts.lambda_lb;
  tcfg.max_epochs = opts.max_epochs;
  tcfg.patience = opts.patience;
  tcfg.seed = opts.seed;

  std::printf("train: head=%s experts=%d hidden=%d layers=%d params=%ld train/val/test=%d/%d/%d\n",
              opts.head.c_str(), opts.experts, opts.hidden_dim, opts.layers, param_count,
              prep.splits.train.size(), prep.splits.val.size(), prep.splits.test.size());

  train::TrainResult result = train::train(std::move(mod), prep.splits.train, prep.splits.val,
                                           tcfg);

  model::save_checkpoint(result.model, (dir / "checkpoint.json").string());
  std::string hist = "epoch,train_loss,val_loss\n";
  for (std::size_t e = 0; e < result.history.size(); ++e)
    hist += std::to_string(e) + "," + format_double(result.history[e].train_loss) + "," +
            format_double(result.history[e].val_loss) + "\n";
  manifest::write_file_atomic((dir / "history.csv").string(), hist);

  const double test_nll = train::dataset_nll(result.model, prep.splits.test);

  manifest::RunManifest man;
  man.command = "train";
  man.config = train_to_json(opts);
  man.seeds = {opts.seed};
  man.datasets = {manifest::fingerprint_csv(opts.data)};
  man.outputs = {"checkpoint.json", "history.csv"};
  man.metrics = json{{"parameter_count", param_count},
                     {"epochs_run", result.history.size()},
                     {"best_epoch", result.best_epoch},
                     {"best_val_loss", result.best_val_loss},
                     {"test_nll", test_nll}};
  man.runtime_seconds = watch.seconds();
  manifest::write_manifest(man, (dir / "manifest.json").string());

  std::printf("train: %zu epochs, best epoch %d, best val nll %.6g, test nll %.6g -> %s\n",
              result.history.size(), result.best_epoch, result.best_val_loss, test_nll,
              dir.string().c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// eval

struct EvalOpts {
  std::string model, data, out;
  std::string on = "test";  // comma list of train|val|test, or "all"
  std::vector<double> split{0.8, 0.1, 0.1};
  std::uint64_t seed = 42;
  bool force = false;
};

json eval_to_json(const EvalOpts& o) {
  return json{{"model", o.model}, {"data", o.data},   {"out", o.out},
              {"on", o.on},       {"split", o.split}, {"seed", o.seed}};
}

EvalOpts eval_from_json(const json& j) {
  EvalOpts o;
  o.model = j.at("model").get<std::string>();
  o.data = j.at("data").get<std::string>();
  o.out = j.at("out").get<std::string>();
  o.on = j.at("on").get<std::string>();
  o.split = j.at("split").get<std::vector<double>>();
  o.seed = j.at("seed").get<std::uint64_t>();
  return o;
}

int cmd_eval(const EvalOpts& opts) {
  Stopwatch watch;
  check_split(opts.split);
  const fs::path dir = prepare_out_dir(opts.out, opts.force, {"metrics.json", "manifest.json"});

  const model::SurvivalModel mod = model::load_checkpoint(opts.model);
  int unknown_warnings = 0;
  data::Dataset ds = data::load_csv(opts.data, mod.schema, &unknown_warnings);

  double min_time = std::numeric_limits<double>::infinity();
  for (const auto& r : ds.records) min_time = std::min(min_time, r.time);
  if (min_time > mod.grid.edges[mod.grid.m])
    throw UsageError("time grid mismatch: every record lies beyond the checkpoint horizon " +
                     format_double(mod.grid.edges[mod.grid.m]));

  data::Splits raw = data::split(ds, opts.split[0], opts.split[1], opts.split[2], opts.seed);

  std::vector<std::string> wanted =
      opts.on == "all" ? std::vector<std::string>{"train", "val", "test"} : split_list(opts.on);
  if (wanted.empty()) throw UsageError("--on selected no split");

  json all;
  for (const auto& name : wanted) {
    const data::Dataset* part = nullptr;
    if (name == "train")
      part = &raw.train;
    else if (name == "val")
      part = &raw.val;
    else if (name == "test")
      part = &raw.test;
    else
      throw UsageError("--on values must be train, val, test, or all (got '" + name + "')");
    const data::Dataset std_part = data::apply_standardizer(mod.schema, *part);
    all[name] = eval_metrics(mod, std_part);
  }
  all["unknown_level_warnings"] = unknown_warnings;

  manifest::write_file_atomic((dir / "metrics.json").string(), all.dump(2) + "\n");

  manifest::RunManifest man;
  man.command = "eval";
  man.config = eval_to_json(opts);
  man.seeds = {opts.seed};
  man.datasets = {manifest::fingerprint_csv(opts.data)};
  man.outputs = {"metrics.json"};
  man.metrics = all;
  man.runtime_seconds = watch.seconds();
  manifest::write_manifest(man, (dir / "manifest.json").string());

  for (const auto& name : wanted)
    std::printf("eval[%s]: nll %.6g harrell_c %.4f ipcw_c %.4f ece %.4f brier_50 %.4f (n=%d)\n",
                name.c_str(), all[name]["nll"].get<double>(),
                all[name]["harrell_c"].get<double>(), all[name]["ipcw_c"].get<double>(),
                all[name]["ece"].get<double>(), all[name]["brier_50"].get<double>(),
                all[name]["n"].get<int>());
  return 0;
}

// ---------------------------------------------------------------------------
// sweep-experts

struct SweepOpts {
  std::string data, schema, out;
  std::string heads = "fixed,adjustable,personalized";
  int min_experts = 2, max_experts = 10, step = 1;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  int hidden_dim = 120, layers = 1, bins = 100;
  double lr = 1e-3, lambda_lb = 0.01, kappa_init = 2.0;
  int batch_size = 64, max_epochs = 200, patience = 10;
  std::vector<double> split{0.8, 0.1, 0.1};
  bool force = false;
};

json sweep_to_json(const SweepOpts& o) {
  return json{{"data", o.data},
              {"schema", o.schema},
              {"out", o.out},
              {"heads", o.heads},
              {"min_experts", o.min_experts},
              {"max_experts", o.max_experts},
              {"step", o.step},
              {"seeds", o.seeds},
              {"hidden_dim", o.hidden_dim},
              {"layers", o.layers},
              {"bins", o.bins},
              {"lr", o.lr},
              {"lambda_lb", o.lambda_lb},
              {"kappa_init", o.kappa_init},
              {"batch_size", o.batch_size},
              {"max_epochs", o.max_epochs},
              {"patience", o.patience},
              {"split", o.split}};
}

SweepOpts sweep_from_json(const json& j) {
  SweepOpts o;
  o.data = j.at("data").get<std::string>();
  o.schema = j.at("schema").get<std::string>();
  o.out = j.at("out").get<std::string>();
  o.heads = j.at("heads").get<std::string>();
  o.min_experts = j.at("min_experts").get<int>();
  o.max_experts = j.at("max_experts").get<int>();
  o.step = j.at("step").get<int>();
  o.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  o.hidden_dim = j.at("hidden_dim").get<int>();
  o.layers = j.at("layers").get<int>();
  o.bins = j.at("bins").get<int>();
  o.lr = j.at("lr").get<double>();
  o.lambda_lb = j.at("lambda_lb").get<double>();
  o.kappa_init = j.at("kappa_init").get<double>();
  o.batch_size = j.at("batch_size").get<int>();
  o.max_epochs = j.at("max_epochs").get<int>();
  o.patience = j.at("patience").get<int>();
  o.split = j.at("split").get<std::vector<double>>();
  return o;
}

int cmd_sweep_experts(const SweepOpts& opts) {
  Stopwatch watch;
  check_split(opts.split);
  if (opts.min_experts < 2 || opts.max_experts < opts.min_experts || opts.step < 1)
    throw UsageError("invalid expert range");
  const std::vector<std::string> heads = split_list(opts.heads);
  if (heads.empty()) throw UsageError("--heads selected no head");
  for (const auto& h : heads)
    if (model::head_from_string(h) == model::HeadKind::kLinearMtlr)
      throw UsageError("the linear mtlr head has no expert count to sweep");
  const fs::path dir = prepare_out_dir(opts.out, opts.force, {"sweep.csv", "manifest.json"});

  std::string csv =
      "head,experts,seed,status,best_epoch,epochs,parameters,val_loss,test_nll,"
      "harrell_c,ipcw_c,ece,brier_25,brier_50,brier_75,error\n";
  int ok_rows = 0, error_rows = 0;

  for (const auto& head : heads) {
    for (int n = opts.min_experts; n <= opts.max_experts; n += opts.step) {
      for (const std::uint64_t seed : opts.seeds) {
        const std::string prefix =
            head + "," + std::to_string(n) + "," + std::to_string(seed);
        try {
          check_experts_divide(head, opts.hidden_dim, n);
          PreparedData prep = prepare_training_data(opts.data, opts.schema, opts.split,
                                                    opts.bins, seed);
          model::ModelConfig mcfg;
          mcfg.head = model::head_from_string(head);
          mcfg.experts = n;
          mcfg.hidden_dim = opts.hidden_dim;
          mcfg.layers = opts.layers;
          mcfg.bins = opts.bins;
          mcfg.kappa_init = opts.kappa_init;
          model::SurvivalModel mod =
              model::SurvivalModel::init(mcfg, prep.schema, prep.grid, seed);
          const long params = mod.params.total_scalars();

          train::TrainConfig tcfg;
          tcfg.learning_rate = opts.lr;
          tcfg.batch_size = opts.batch_size;
          tcfg.lambda_lb = opts.lambda_lb;
          tcfg.max_epochs = opts.max_epochs;
          tcfg.patience = opts.patience;
          tcfg.seed = seed;
          train::TrainResult result =
              train::train(std::move(mod), prep.splits.train, prep.splits.val, tcfg);

          const json m = eval_metrics(result.model, prep.splits.test);
          csv += prefix + ",ok," + std::to_string(result.best_epoch) + "," +
                 std::to_string(result.history.size()) + "," + std::to_string(params) + "," +
                 format_double(result.best_val_loss) + "," +
                 format_double(m["nll"].get<double>()) + "," +
                 format_double(m["harrell_c"].get<double>()) + "," +
                 format_double(m["ipcw_c"].get<double>()) + "," +
                 format_double(m["ece"].get<double>()) + "," +
                 format_double(m["brier_25"].get<double>()) + "," +
                 format_double(m["brier_50"].get<double>()) + "," +
                 format_double(m["brier_75"].get<double>()) + ",\n";
          ++ok_rows;
          std::printf("sweep: %s n=%d seed=%llu test_nll=%.6g\n", head.c_str(), n,
                      static_cast<unsigned long long>(seed), m["nll"].get<double>());
        } catch (const std::exception& e) {
          std::string msg = e.what();
          for (char& ch : msg)
            if (ch == ',' || ch == '\n') ch = ';';
          csv += prefix + ",error,,,,,,,,,,,," + msg + "\n";
          ++error_rows;
          std::printf("sweep: %s n=%d seed=%llu FAILED: %s\n", head.c_str(), n,
                      static_cast<unsigned long long>(seed), e.what());
        }
      }
    }
  }

  manifest::write_file_atomic((dir / "sweep.csv").string(), csv);

  manifest::RunManifest man;
  man.command = "sweep-experts";
  man.config = sweep_to_json(opts);
  man.seeds = opts.seeds;
  man.datasets = {manifest::fingerprint_csv(opts.data)};
  man.outputs = {"sweep.csv"};
  man.metrics = json{{"rows_ok", ok_rows}, {"rows_error", error_rows}};
  man.runtime_seconds = watch.seconds();
  manifest::write_manifest(man, (dir / "manifest.json").string());

  std::printf("sweep-experts: %d ok, %d failed -> %s\n", ok_rows, error_rows,
              dir.string().c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// cluster-report

struct ClusterOpts {
  std::vector<std::string> models;
  std::string data, labels, out;
  bool ari = false;
  bool force = false;
};

json cluster_to_json(const ClusterOpts& o) {
  return json{{"models", o.models},
              {"data", o.data},
              {"labels", o.labels},
              {"out", o.out},
              {"ari", o.ari}};
}

ClusterOpts cluster_from_json(const json& j) {
  ClusterOpts o;
  o.models = j.at("models").get<std::vector<std::string>>();
  o.data = j.at("data").get<std::string>();
  o.labels = j.value("labels", std::string());
  o.out = j.at("out").get<std::string>();
  o.ari = j.at("ari").get<bool>();
  return o;
}

int cmd_cluster_report(const ClusterOpts& opts) {
  Stopwatch watch;
  if (opts.models.empty()) throw UsageError("need at least one --model checkpoint");
  if (opts.ari && opts.models.size() < 2)
    throw UsageError("--ari needs at least two --model checkpoints");
  const fs::path dir = prepare_out_dir(
      opts.out, opts.force, {"report.json", "assignments.csv", "km_curves.csv", "manifest.json"});

  std::vector<int> labels;
  if (!opts.labels.empty()) labels = data::read_labels_csv(opts.labels);

  json report;
  report["models"] = json::array();
  std::vector<std::vector<int>> partitions;
  std::string km_csv = "model,cluster,time,survival\n";

  for (std::size_t mi = 0; mi < opts.models.size(); ++mi) {
    const model::SurvivalModel mod = model::load_checkpoint(opts.models[mi]);
    if (!mod.has_router())
      throw UsageError("checkpoint " + opts.models[mi] +
                       " is a linear mtlr model: it has no routing to report");
    data::Dataset raw = data::load_csv(opts.data, mod.schema);
    if (!labels.empty() && static_cast<int>(labels.size()) != raw.size())
      throw UsageError("--labels row count does not match --data");
    const data::Dataset ds = data::apply_standardizer(mod.schema, std::move(raw));

    const cluster::ClusterAssignment assign = cluster::top1_assign(mod.predict_alpha(ds));
    const int n_experts = mod.config.experts;
    partitions.push_back(assign.expert);

    json entry;
    entry["checkpoint"] = opts.models[mi];
    entry["head"] = model::head_to_string(mod.config.head);
    entry["experts"] = n_experts;

    std::vector<double> times;
    std::vector<int> events;
    for (const auto& r : ds.records) {
      times.push_back(r.time);
      events.push_back(r.event);
    }
    const cluster::ClusterKm km =
        cluster::km_by_cluster(assign.expert, times, events, n_experts);
    std::vector<int> sizes(n_experts, 0);
    for (std::size_t c = 0; c < km.cluster_ids.size(); ++c)
      sizes[km.cluster_ids[c]] = km.sizes[c];
    entry["sizes"] = sizes;
    entry["empty_clusters"] = km.empty_clusters;
    entry["assignments"] = assign.expert;

    entry["km"] = json::array();
    for (std::size_t c = 0; c < km.cluster_ids.size(); ++c) {
      entry["km"].push_back(json{{"cluster", km.cluster_ids[c]},
                                 {"size", km.sizes[c]},
                                 {"times", vec_json(km.curves[c].times)},
                                 {"survival", vec_json(km.curves[c].values)}});
      for (Eigen::Index s = 0; s < km.curves[c].times.size(); ++s)
        km_csv += std::to_string(mi) + "," + std::to_string(km.cluster_ids[c]) + "," +
                  format_double(km.curves[c].times[s]) + "," +
                  format_double(km.curves[c].values[s]) + "\n";
    }

    if (!labels.empty()) {
      int n_classes = 0;
      for (int c : labels) n_classes = std::max(n_classes, c + 1);
      const cluster::RoutingReport routing =
          cluster::routing_matrix(assign.expert, labels, n_experts, n_classes);
      entry["purity"] = routing.purity;
      json mat = json::array();
      for (int e = 0; e < n_experts; ++e) {
        json row = json::array();
        for (int c = 0; c < n_classes; ++c) row.push_back(routing.matrix(e, c));
        mat.push_back(row);
      }
      entry["routing_matrix"] = mat;
    }

    entry["haberman"] = json::array();
    for (std::size_t col = 0; col < mod.schema.categorical_names.size(); ++col) {
      std::vector<int> levels;
      for (const auto& r : ds.records) levels.push_back(r.categorical[col]);
      const cluster::ContingencyTable table = cluster::contingency(
          assign.expert, levels, n_experts, mod.schema.cardinality(static_cast<int>(col)));
      const cluster::HabermanResult hab = cluster::haberman_z(table);
      json flags = json::array();
      for (const auto& f : hab.flags)
        flags.push_back(json{{"cluster", f.row},
                             {"level", mod.schema.vocabularies[col][f.col]},
                             {"z", f.z}});
      entry["haberman"].push_back(
          json{{"feature", mod.schema.categorical_names[col]}, {"flags", flags}});
    }

    const cluster::QuantileTable qt =
        cluster::feature_quantiles(ds, assign.expert, n_experts);
    entry["feature_quantiles"] = json::array();
    for (std::size_t c = 0; c < qt.cluster_ids.size(); ++c) {
      json feats;
      for (std::size_t f = 0; f < mod.schema.continuous_names.size(); ++f) {
        json qs = json::array();
        for (int qi = 0; qi < 5; ++qi) qs.push_back(qt.tables[c](static_cast<Eigen::Index>(f), qi));
        feats[mod.schema.continuous_names[f]] = qs;
      }
      entry["feature_quantiles"].push_back(json{
          {"cluster", qt.cluster_ids[c]}, {"size", qt.sizes[c]}, {"features", feats}});
    }

    report["models"].push_back(std::move(entry));
  }

  if (opts.ari) {
    json pairs = json::array();
    double total = 0.0;
    int count = 0;
    for (std::size_t i = 0; i < partitions.size(); ++i)
      for (std::size_t j = i + 1; j < partitions.size(); ++j) {
        const double v = cluster::ari(partitions[i], partitions[j]);
        pairs.push_back(json{{"a", i}, {"b", j}, {"ari", v}});
        total += v;
        ++count;
      }
    report["ari"] = json{{"pairs", pairs}, {"mean", total / count}};
  }

  std::string assign_csv = "record";
  for (std::size_t mi = 0; mi < partitions.size(); ++mi)
    assign_csv += ",expert_" + std::to_string(mi);
  assign_csv += "\n";
  for (std::size_t i = 0; i < partitions.front().size(); ++i) {
    assign_csv += std::to_string(i);
    for (const auto& p : partitions) assign_csv += "," + std::to_string(p[i]);
    assign_csv += "\n";
  }

  manifest::write_file_atomic((dir / "report.json").string(), report.dump(2) + "\n");
  manifest::write_file_atomic((dir / "assignments.csv").string(), assign_csv);
  manifest::write_file_atomic((dir / "km_curves.csv").string(), km_csv);

  manifest::RunManifest man;
  man.command = "cluster-report";
  man.config = cluster_to_json(opts);
  man.datasets = {manifest::fingerprint_csv(opts.data)};
  man.outputs = {"report.json", "assignments.csv", "km_curves.csv"};
  if (!labels.empty()) man.metrics["purity_0"] = report["models"][0]["purity"];
  if (opts.ari) man.metrics["mean_ari"] = report["ari"]["mean"];
  man.runtime_seconds = watch.seconds();
  manifest::write_manifest(man, (dir / "manifest.json").string());

  std::printf("cluster-report: %zu model(s) -> %s\n", opts.models.size(), dir.string().c_str());
  if (!labels.empty())
    std::printf("cluster-report: purity[0] = %.4f\n",
                report["models"][0]["purity"].get<double>());
  if (opts.ari)
    std::printf("cluster-report: mean pairwise ARI = %.4f\n",
                report["ari"]["mean"].get<double>());
  return 0;
}

// ---------------------------------------------------------------------------
// grad-check

struct GradCheckOpts {
  std::string out;
  double epsilon = 1e-4;  // pass threshold on max relative error
  std::uint64_t seed = 42;
  bool inject_sign_flip = false;
  bool force = false;
};

json gradcheck_to_json(const GradCheckOpts& o) {
  return json{{"out", o.out},
              {"epsilon", o.epsilon},
              {"seed", o.seed},
              {"inject_sign_flip", o.inject_sign_flip}};
}

GradCheckOpts gradcheck_from_json(const json& j) {
  GradCheckOpts o;
  o.out = j.at("out").get<std::string>();
  o.epsilon = j.at("epsilon").get<double>();
  o.seed = j.at("seed").get<std::uint64_t>();
  o.inject_sign_flip = j.at("inject_sign_flip").get<bool>();
  return o;
}

int cmd_grad_check(const GradCheckOpts& opts) {
  Stopwatch watch;
  const fs::path dir = prepare_out_dir(opts.out, opts.force, {"manifest.json"});

  // Tiny fixture: 4 records, 3 continuous + 1 categorical feature, 6 bins.
  data::FeatureSchema schema;
  schema.time_col = "time";
  schema.event_col = "event";
  schema.continuous_names = {"x0", "x1", "x2"};
  schema.continuous_stats = {{0.0, 1.0}, {0.0, 1.0}, {0.0, 1.0}};
  schema.categorical_names = {"c0"};
  schema.vocabularies = {{"a", "b", "missing"}};

  Rng rng(opts.seed);
  std::normal_distribution<double> z(0.0, 1.0);
  data::Dataset ds;
  ds.records.resize(4);
  const double times[4] = {0.4, 1.1, 1.7, 0.9};
  const int events[4] = {1, 1, 0, 1};
  for (int i = 0; i < 4; ++i) {
    ds.records[i].continuous = Vec::NullaryExpr(3, [&](Eigen::Index) { return z(rng); });
    ds.records[i].categorical = {i % 3};
    ds.records[i].time = times[i];
    ds.records[i].event = events[i];
  }
  const data::TimeGrid grid = data::TimeGrid::fit(ds, 6);

  const std::pair<model::HeadKind, int> heads[] = {
      {model::HeadKind::kFixed, 4},
      {model::HeadKind::kAdjustable, 2},
      {model::HeadKind::kPersonalized, 4},
      {model::HeadKind::kLinearMtlr, 1},
  };

  json per_head;
  bool all_ok = true;
  for (const auto& [kind, n] : heads) {
    model::ModelConfig mcfg;
    mcfg.head = kind;
    mcfg.experts = n;
    mcfg.hidden_dim = 16;
    mcfg.layers = 1;
    mcfg.bins = grid.m;
    model::SurvivalModel mod = model::SurvivalModel::init(mcfg, schema, grid, opts.seed);
    const int flip = opts.inject_sign_flip ? 0 : -1;
    const auto reports = train::grad_check(std::move(mod), ds, 0.01, 1e-5, flip);
    double worst = 0.0;
    for (const auto& r : reports) worst = std::max(worst, r.max_rel_err);
    const bool ok = worst < opts.epsilon;
    all_ok = all_ok && ok;
    per_head[model::head_to_string(kind)] = json{{"max_rel_err", worst}, {"pass", ok}};
    std::printf("grad-check: %-13s max_rel_err %.3e  [%s]\n",
                model::head_to_string(kind).c_str(), worst, ok ? "ok" : "FAIL");
  }

  manifest::RunManifest man;
  man.command = "grad-check";
  man.config = gradcheck_to_json(opts);
  man.seeds = {opts.seed};
  man.outputs = {};
  man.metrics = json{{"heads", per_head}, {"pass", all_ok}};
  man.runtime_seconds = watch.seconds();
  manifest::write_manifest(man, (dir / "manifest.json").string());

  if (!all_ok) {
    std::fprintf(stderr, "grad-check: analytic gradients disagree with finite differences\n");
    return 2;
  }
  return 0;
}

// ---------------------------------------------------------------------------
// rerun

int cmd_rerun(const std::string& manifest_path, const std::string& out, bool force) {
  const manifest::RunManifest man = manifest::read_manifest(manifest_path);
  if (man.command == "gen-data") {
    GenDataOpts o = gen_from_json(man.config);
    o.out = out;
    o.force = force;
    return cmd_gen_data(o);
  }
  if (man.command == "train") {
    TrainOpts o = train_from_json(man.config);
    o.out = out;
    o.force = force;
    return cmd_train(o);
  }
  if (man.command == "eval") {
    EvalOpts o = eval_from_json(man.config);
    o.out = out;
    o.force = force;
    return cmd_eval(o);
  }
  if (man.command == "sweep-experts") {
    SweepOpts o = sweep_from_json(man.config);
    o.out = out;
    o.force = force;
    return cmd_sweep_experts(o);
  }
  if (man.command == "cluster-report") {
    ClusterOpts o = cluster_from_json(man.config);
    o.out = out;
    o.force = force;
    return cmd_cluster_report(o);
  }
  if (man.command == "grad-check") {
    GradCheckOpts o = gradcheck_from_json(man.config);
    o.out = out;
    o.force = force;
    return cmd_grad_check(o);
  }
  throw UsageError("cannot re-run command '" + man.command + "'");
}

void apply_preset(const CLI::App* sc, TrainOpts& o) {
  if (o.preset.empty()) return;
  const presets::Preset* p = presets::find_preset(o.preset);
  if (p == nullptr)
    throw UsageError("unknown preset '" + o.preset +
                     "'; available: " + presets::preset_names());
  if (sc->count("--head") == 0) o.head = model::head_to_string(p->head);
  if (sc->count("--experts") == 0) o.experts = std::max(p->experts, 1);
  if (sc->count("--hidden-dim") == 0) o.hidden_dim = p->hidden_dim;
  if (sc->count("--layers") == 0) o.layers = p->layers;
  if (sc->count("--lr") == 0) o.lr = p->learning_rate;
  if (sc->count("--batch-size") == 0) o.batch_size = p->batch_size;
  if (sc->count("--lambda-lb") == 0) o.lambda_lb = p->lambda_lb;
  if (sc->count("--kappa-init") == 0) o.kappa_init = p->kappa_init;
  if (sc->count("--bins") == 0) o.bins = p->bins;
  if (sc->count("--patience") == 0) o.patience = p->patience;
  if (sc->count("--max-epochs") == 0) o.max_epochs = p->max_epochs;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"survmoe: discrete-time survival analysis with mixture-of-experts heads"};
  app.set_version_flag("--version", manifest::kArtifactVersion);
  app.require_subcommand(1);

  GenDataOpts gen;
  auto* sc_gen = app.add_subcommand("gen-data", "generate the synthetic class-blob dataset");
  sc_gen->add_option("--means", gen.spec.class_means, "per-class event-time means")
      ->delimiter(',');
  sc_gen->add_option("--stds", gen.spec.class_stds, "per-class event-time standard deviations")
      ->delimiter(',');
  sc_gen->add_option("--censor-rate", gen.spec.censor_rate, "fraction of records censored")
      ->check(CLI::Range(0.0, 0.9999));
  sc_gen->add_option("--samples-per-class", gen.spec.samples_per_class)
      ->check(CLI::PositiveNumber);
  sc_gen->add_option("--feature-dim", gen.spec.feature_dim)->check(CLI::PositiveNumber);
  sc_gen->add_option("--seed", gen.spec.seed);
  sc_gen->add_option("--out", gen.out, "output directory")->required();
  sc_gen->add_flag("--force", gen.force, "overwrite existing outputs");

  TrainOpts tr;
  auto* sc_train = app.add_subcommand("train", "train a model and write a checkpoint");
  sc_train->add_option("--data", tr.data, "records CSV")->required();
  sc_train->add_option("--schema", tr.schema, "schema declaration JSON")->required();
  sc_train->add_option("--head", tr.head, "fixed | adjustable | personalized | mtlr");
  sc_train->add_option("--preset", tr.preset, "named hyperparameter preset");
  sc_train->add_option("--experts", tr.experts)->check(CLI::PositiveNumber);
  sc_train->add_option("--hidden-dim", tr.hidden_dim)->check(CLI::PositiveNumber);
  sc_train->add_option("--layers", tr.layers)->check(CLI::PositiveNumber);
  sc_train->add_option("--bins", tr.bins)->check(CLI::PositiveNumber);
  sc_train->add_option("--lr", tr.lr)->check(CLI::PositiveNumber);
  sc_train->add_option("--lambda-lb", tr.lambda_lb)->check(CLI::NonNegativeNumber);
  sc_train->add_option("--kappa-init", tr.kappa_init)->check(CLI::PositiveNumber);
  sc_train->add_option("--batch-size", tr.batch_size)->check(CLI::PositiveNumber);
  sc_train->add_option("--max-epochs", tr.max_epochs)->check(CLI::PositiveNumber);
  sc_train->add_option("--patience", tr.patience)->check(CLI::PositiveNumber);
  sc_train->add_option("--split", tr.split, "train,val,test fractions")->delimiter(',');
  sc_train->add_option("--seed", tr.seed);
  sc_train->add_option("--out", tr.out, "output directory")->required();
  sc_train->add_flag("--force", tr.force, "overwrite existing outputs");

  EvalOpts ev;
  auto* sc_eval = app.add_subcommand("eval", "evaluate a checkpoint");
  sc_eval->add_option("--model", ev.model, "checkpoint JSON")->required();
  sc_eval->add_option("--data", ev.data, "records CSV")->required();
  sc_eval->add_option("--on", ev.on, "train, val, test (comma list) or all");
  sc_eval->add_option("--split", ev.split, "train,val,test fractions")->delimiter(',');
  sc_eval->add_option("--seed", ev.seed, "split seed (match the training run)");
  sc_eval->add_option("--out", ev.out, "output directory")->required();
  sc_eval->add_flag("--force", ev.force, "overwrite existing outputs");

  SweepOpts sw;
  auto* sc_sweep = app.add_subcommand("sweep-experts", "train over a grid of expert counts");
  sc_sweep->add_option("--data", sw.data, "records CSV")->required();
  sc_sweep->add_option("--schema", sw.schema, "schema declaration JSON")->required();
  sc_sweep->add_option("--heads", sw.heads, "comma list of heads to sweep");
  sc_sweep->add_option("--min-experts", sw.min_experts);
  sc_sweep->add_option("--max-experts", sw.max_experts);
  sc_sweep->add_option("--step", sw.step);
  sc_sweep->add_option("--seeds", sw.seeds, "comma list of seeds")->delimiter(',');
  sc_sweep->add_option("--hidden-dim", sw.hidden_dim)->check(CLI::PositiveNumber);
  sc_sweep->add_option("--layers", sw.layers)->check(CLI::PositiveNumber);
  sc_sweep->add_option("--bins", sw.bins)->check(CLI::PositiveNumber);
  sc_sweep->add_option("--lr", sw.lr)->check(CLI::PositiveNumber);
  sc_sweep->add_option("--lambda-lb", sw.lambda_lb)->check(CLI::NonNegativeNumber);
  sc_sweep->add_option("--kappa-init", sw.kappa_init)->check(CLI::PositiveNumber);
  sc_sweep->add_option("--batch-size", sw.batch_size)->check(CLI::PositiveNumber);
  sc_sweep->add_option("--max-epochs", sw.max_epochs)->check(CLI::PositiveNumber);
  sc_sweep->add_option("--patience", sw.patience)->check(CLI::PositiveNumber);
  sc_sweep->add_option("--split", sw.split, "train,val,test fractions")->delimiter(',');
  sc_sweep->add_option("--out", sw.out, "output directory")->required();
  sc_sweep->add_flag("--force", sw.force, "overwrite existing outputs");

  ClusterOpts cr;
  auto* sc_cluster = app.add_subcommand("cluster-report", "routing-based cluster analysis");
  sc_cluster->add_option("--model", cr.models, "checkpoint JSON (repeatable)")->required();
  sc_cluster->add_option("--data", cr.data, "records CSV")->required();
  sc_cluster->add_option("--labels", cr.labels, "ground-truth labels CSV (optional)");
  sc_cluster->add_flag("--ari", cr.ari, "cross-checkpoint ARI (needs >= 2 models)");
  sc_cluster->add_option("--out", cr.out, "output directory")->required();
  sc_cluster->add_flag("--force", cr.force, "overwrite existing outputs");

  GradCheckOpts gc;
  auto* sc_grad = app.add_subcommand("grad-check", "finite-difference gradient verification");
  sc_grad->add_option("--epsilon", gc.epsilon, "max allowed relative error")
      ->check(CLI::PositiveNumber);
  sc_grad->add_option("--seed", gc.seed);
  sc_grad->add_option("--out", gc.out, "output directory")->required();
  sc_grad->add_flag("--force", gc.force, "overwrite existing outputs");
  sc_grad->add_flag("--inject-sign-flip", gc.inject_sign_flip)->group("");  // test harness hook

  std::string rerun_manifest, rerun_out;
  bool rerun_force = false;
  auto* sc_rerun = app.add_subcommand("rerun", "replay a run manifest into a new directory");
  sc_rerun->add_option("manifest", rerun_manifest, "manifest.json of a previous run")
      ->required();
  sc_rerun->add_option("--out", rerun_out, "output directory")->required();
  sc_rerun->add_flag("--force", rerun_force, "overwrite existing outputs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (sc_gen->parsed()) return cmd_gen_data(gen);
    if (sc_train->parsed()) {
      apply_preset(sc_train, tr);
      return cmd_train(tr);
    }
    if (sc_eval->parsed()) return cmd_eval(ev);
    if (sc_sweep->parsed()) return cmd_sweep_experts(sw);
    if (sc_cluster->parsed()) return cmd_cluster_report(cr);
    if (sc_grad->parsed()) return cmd_grad_check(gc);
    if (sc_rerun->parsed()) return cmd_rerun(rerun_manifest, rerun_out, rerun_force);
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
