#include "survmoe/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

#include <json.hpp>

#include "survmoe/csv_io.hpp"
#include "survmoe/warp.hpp"

namespace survmoe::model {

using nlohmann::json;

HeadKind head_from_string(const std::string& s) {
  if (s == "fixed") return HeadKind::kFixed;
  if (s == "adjustable") return HeadKind::kAdjustable;
  if (s == "personalized") return HeadKind::kPersonalized;
  if (s == "mtlr") return HeadKind::kLinearMtlr;
  throw std::invalid_argument("unknown head '" + s +
                              "' (expected fixed | adjustable | personalized | mtlr)");
}

std::string head_to_string(HeadKind k) {
  switch (k) {
    case HeadKind::kFixed: return "fixed";
    case HeadKind::kAdjustable: return "adjustable";
    case HeadKind::kPersonalized: return "personalized";
    case HeadKind::kLinearMtlr: return "mtlr";
  }
  return "?";
}

int ParameterSet::add(const std::string& name, Mat value) {
  names.push_back(name);
  values.push_back(std::move(value));
  return static_cast<int>(values.size()) - 1;
}

int ParameterSet::index_of(const std::string& name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  return it == names.end() ? -1 : static_cast<int>(it - names.begin());
}

long ParameterSet::total_scalars() const {
  long n = 0;
  for (const Mat& v : values) n += static_cast<long>(v.size());
  return n;
}

std::vector<Mat> ParameterSet::zeros_like() const {
  std::vector<Mat> out;
  out.reserve(values.size());
  for (const Mat& v : values) out.push_back(Mat::Zero(v.rows(), v.cols()));
  return out;
}

namespace {

Mat uniform_mat(Rng& rng, int rows, int cols, double bound) {
  std::uniform_real_distribution<double> u(-bound, bound);
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = u(rng);
  return m;
}

Mat fan_in_mat(Rng& rng, int rows, int cols) {
  return uniform_mat(rng, rows, cols, 1.0 / std::sqrt(static_cast<double>(cols)));
}

}  // namespace

SurvivalModel SurvivalModel::init(const ModelConfig& cfg, const data::FeatureSchema& schema,
                                  const data::TimeGrid& grid, std::uint64_t seed) {
  if (cfg.hidden_dim < 1 || cfg.layers < 1 || cfg.bins < 2)
    throw std::invalid_argument("model config: hidden_dim/layers/bins out of range");
  if (cfg.head != HeadKind::kLinearMtlr && cfg.experts < 1)
    throw std::invalid_argument("model config: experts must be positive");
  if (cfg.head == HeadKind::kPersonalized && cfg.hidden_dim % cfg.experts != 0)
    throw std::invalid_argument("personalized head needs hidden_dim divisible by experts");
  if (grid.m != cfg.bins) throw std::invalid_argument("time grid bins differ from config");

  SurvivalModel mod;
  mod.config = cfg;
  mod.schema = schema;
  mod.grid = grid;

  // Parameter creation order fixes both the RNG stream and gradient slots.
  Rng rng(seed);
  const int h = cfg.hidden_dim;
  const int n = cfg.experts;
  const int m = cfg.bins;

  int in_dim = static_cast<int>(schema.continuous_names.size());
  for (std::size_t c = 0; c < schema.categorical_names.size(); ++c) {
    const int card = schema.cardinality(static_cast<int>(c));
    const int dim = schema.embedding_dim(static_cast<int>(c));
    in_dim += dim;
    mod.params.add("embed/" + schema.categorical_names[c], uniform_mat(rng, card, dim, 0.05));
  }
  if (in_dim == 0) throw std::invalid_argument("schema declares no features");

  int prev = in_dim;
  for (int l = 0; l < cfg.layers; ++l) {
    mod.params.add("backbone/W" + std::to_string(l), fan_in_mat(rng, h, prev));
    mod.params.add("backbone/b" + std::to_string(l), Mat::Zero(1, h));
    prev = h;
  }

  if (mod.has_router()) {
    mod.params.add("router/W", fan_in_mat(rng, n, h));
    Mat kraw(1, 1);
    kraw(0, 0) = std::log(std::expm1(cfg.kappa_init));
    mod.params.add("router/kappa_raw", kraw);
  }
  switch (cfg.head) {
    case HeadKind::kFixed:
      mod.params.add("head/M", uniform_mat(rng, n, m, 0.05));
      break;
    case HeadKind::kAdjustable: {
      mod.params.add("head/M", uniform_mat(rng, n, m, 0.05));
      mod.params.add("head/Wg", Mat::Zero(6 * n, h));
      Mat bg = Mat::Zero(1, 6 * n);
      for (int k = 0; k < n; ++k) {
        bg(0, 6 * k + 2) = moe::kSlopeRawInit;
        bg(0, 6 * k + 3) = moe::kSlopeRawInit;
      }
      mod.params.add("head/bg", bg);
      break;
    }
    case HeadKind::kPersonalized: {
      mod.params.add("head/Wr", fan_in_mat(rng, h, h));
      mod.params.add("head/We", fan_in_mat(rng, h, h));
      for (int k = 0; k < n; ++k)
        mod.params.add("head/L" + std::to_string(k), fan_in_mat(rng, m, h / n));
      break;
    }
    case HeadKind::kLinearMtlr:
      mod.params.add("head/Wz", fan_in_mat(rng, m, h));
      mod.params.add("head/bz", Mat::Zero(1, m));
      break;
  }
  return mod;
}

int SurvivalModel::input_dim() const {
  int d = static_cast<int>(schema.continuous_names.size());
  for (std::size_t c = 0; c < schema.categorical_names.size(); ++c)
    d += schema.embedding_dim(static_cast<int>(c));
  return d;
}

moe::HeadGraph SurvivalModel::build_graph(
    ad::Tape& t, const std::vector<const data::SurvivalRecord*>& batch,
    ad::Var* hidden_out) const {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  const int b = static_cast<int>(batch.size());
  const int n_cat = static_cast<int>(schema.categorical_names.size());
  const int n_cont = static_cast<int>(schema.continuous_names.size());

  std::vector<ad::Var> p;
  p.reserve(params.count());
  for (int i = 0; i < params.count(); ++i) p.push_back(t.param(params.values[i], i));
  auto var_of = [&](const std::string& name) {
    const int i = params.index_of(name);
    if (i < 0) throw std::logic_error("missing parameter block " + name);
    return p[i];
  };

  std::vector<ad::Var> parts;
  for (int c = 0; c < n_cat; ++c) {
    std::vector<int> idx(b);
    for (int i = 0; i < b; ++i) {
      if (static_cast<int>(batch[i]->categorical.size()) != n_cat)
        throw std::invalid_argument("record does not match schema: categorical count");
      idx[i] = batch[i]->categorical[c];
      if (idx[i] < 0 || idx[i] >= schema.cardinality(c))
        throw std::invalid_argument("record does not match schema: level index out of range");
    }
    parts.push_back(ad::gather_rows(var_of("embed/" + schema.categorical_names[c]), idx));
  }
  if (n_cont > 0) {
    Mat xc(b, n_cont);
    for (int i = 0; i < b; ++i) {
      if (batch[i]->continuous.size() != n_cont)
        throw std::invalid_argument("record does not match schema: continuous count");
      xc.row(i) = batch[i]->continuous.transpose();
    }
    parts.push_back(t.constant(xc));
  }
  ad::Var x = parts.size() == 1 ? parts[0] : ad::concat_cols(parts);

  for (int l = 0; l < config.layers; ++l) {
    x = ad::relu(ad::add_rowvec(ad::matmul_nt(x, var_of("backbone/W" + std::to_string(l))),
                                var_of("backbone/b" + std::to_string(l))));
  }
  if (hidden_out) *hidden_out = x;

  switch (config.head) {
    case HeadKind::kFixed:
      return moe::fixed_head_graph(t, x, var_of("router/W"), var_of("router/kappa_raw"),
                                   var_of("head/M"));
    case HeadKind::kAdjustable:
      return moe::adjustable_head_graph(t, x, var_of("router/W"), var_of("router/kappa_raw"),
                                        var_of("head/M"), var_of("head/Wg"),
                                        var_of("head/bg"), warp::canonical_grid(config.bins));
    case HeadKind::kPersonalized: {
      std::vector<ad::Var> proj;
      for (int k = 0; k < config.experts; ++k)
        proj.push_back(var_of("head/L" + std::to_string(k)));
      return moe::personalized_head_graph(t, x, var_of("router/W"), var_of("router/kappa_raw"),
                                          var_of("head/Wr"), var_of("head/We"), proj);
    }
    case HeadKind::kLinearMtlr:
      return moe::linear_mtlr_head_graph(t, x, var_of("head/Wz"), var_of("head/bz"));
  }
  throw std::logic_error("unreachable head kind");
}

namespace {

Mat predict_rows(const SurvivalModel& mod, const data::Dataset& ds, int chunk, bool alpha) {
  if (ds.size() == 0) throw std::invalid_argument("empty dataset");
  Mat out;
  for (int begin = 0; begin < ds.size(); begin += chunk) {
    const int b = std::min(chunk, ds.size() - begin);
    std::vector<const data::SurvivalRecord*> batch(b);
    for (int i = 0; i < b; ++i) batch[i] = &ds.records[begin + i];
    ad::Tape t;
    const moe::HeadGraph g = mod.build_graph(t, batch);
    const Mat& rows = alpha ? t.val(g.alpha) : t.val(g.pmf);
    if (out.size() == 0) out = Mat(ds.size(), rows.cols());
    out.middleRows(begin, b) = rows;
  }
  return out;
}

}  // namespace

Mat SurvivalModel::predict_pmf(const data::Dataset& ds, int chunk) const {
  return predict_rows(*this, ds, chunk, false);
}

Mat SurvivalModel::predict_alpha(const data::Dataset& ds, int chunk) const {
  if (!has_router()) throw std::logic_error("head has no router");
  return predict_rows(*this, ds, chunk, true);
}

void save_checkpoint(const SurvivalModel& mod, const std::string& path) {
  json blocks = json::array();
  for (int i = 0; i < mod.params.count(); ++i) {
    const Mat& v = mod.params.values[i];
    json data = json::array();
    for (int r = 0; r < v.rows(); ++r)
      for (int c = 0; c < v.cols(); ++c) data.push_back(v(r, c));
    blocks.push_back({{"name", mod.params.names[i]},
                      {"rows", v.rows()},
                      {"cols", v.cols()},
                      {"data", std::move(data)}});
  }
  const json j{{"format", "survmoe-checkpoint-v1"},
               {"config",
                {{"head", head_to_string(mod.config.head)},
                 {"experts", mod.config.experts},
                 {"hidden_dim", mod.config.hidden_dim},
                 {"layers", mod.config.layers},
                 {"bins", mod.config.bins},
                 {"kappa_init", mod.config.kappa_init}}},
               {"schema", data::schema_to_json(mod.schema)},
               {"grid", data::grid_to_json(mod.grid)},
               {"params", std::move(blocks)}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << '\n';
}

SurvivalModel load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  const json j = json::parse(in);
  if (j.value("format", "") != std::string("survmoe-checkpoint-v1"))
    throw std::runtime_error(path + ": not a survmoe checkpoint");
  SurvivalModel mod;
  const json& cfg = j.at("config");
  mod.config.head = head_from_string(cfg.at("head").get<std::string>());
  mod.config.experts = cfg.at("experts").get<int>();
  mod.config.hidden_dim = cfg.at("hidden_dim").get<int>();
  mod.config.layers = cfg.at("layers").get<int>();
  mod.config.bins = cfg.at("bins").get<int>();
  mod.config.kappa_init = cfg.at("kappa_init").get<double>();
  mod.schema = data::schema_from_json(j.at("schema"));
  mod.grid = data::grid_from_json(j.at("grid"));
  for (const auto& blk : j.at("params")) {
    Mat v(blk.at("rows").get<int>(), blk.at("cols").get<int>());
    const auto& data = blk.at("data");
    int k = 0;
    for (int r = 0; r < v.rows(); ++r)
      for (int c = 0; c < v.cols(); ++c) v(r, c) = data[k++].get<double>();
    mod.params.add(blk.at("name").get<std::string>(), std::move(v));
  }
  return mod;
}

}  // namespace survmoe::model
