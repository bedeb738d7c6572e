#include "survmoe/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

namespace survmoe::cluster {

ClusterAssignment top1_assign(const Mat& alphas) {
  ClusterAssignment out;
  out.alpha = alphas;
  out.expert.resize(static_cast<std::size_t>(alphas.rows()));
  for (Eigen::Index i = 0; i < alphas.rows(); ++i) {
    int best = 0;
    for (Eigen::Index k = 1; k < alphas.cols(); ++k)
      if (alphas(i, k) > alphas(i, best)) best = static_cast<int>(k);
    out.expert[static_cast<std::size_t>(i)] = best;
  }
  return out;
}

RoutingReport routing_matrix(const std::vector<int>& assignment,
                             const std::vector<int>& labels, int n_experts,
                             int n_classes) {
  if (assignment.size() != labels.size())
    throw std::invalid_argument("routing_matrix: assignment/label size mismatch");
  const int n = static_cast<int>(assignment.size());
  if (n == 0) throw std::invalid_argument("routing_matrix: empty input");

  Mat counts = Mat::Zero(n_experts, n_classes);
  for (int i = 0; i < n; ++i) {
    const int e = assignment[i], c = labels[i];
    if (e < 0 || e >= n_experts || c < 0 || c >= n_classes)
      throw std::invalid_argument("routing_matrix: index out of range");
    counts(e, c) += 1.0;
  }

  RoutingReport rep;
  rep.matrix = Mat::Zero(n_experts, n_classes);
  rep.sizes.resize(static_cast<std::size_t>(n_experts));
  double hits = 0.0;
  for (int e = 0; e < n_experts; ++e) {
    const double row = counts.row(e).sum();
    rep.sizes[static_cast<std::size_t>(e)] = static_cast<int>(row);
    if (row > 0.0) {
      rep.matrix.row(e) = counts.row(e) / row;
      hits += counts.row(e).maxCoeff();
    }
  }
  rep.purity = hits / n;
  return rep;
}

ContingencyTable contingency(const std::vector<int>& clusters,
                             const std::vector<int>& levels, int n_clusters,
                             int n_levels) {
  if (clusters.size() != levels.size())
    throw std::invalid_argument("contingency: size mismatch");
  ContingencyTable t;
  t.counts = Mat::Zero(n_clusters, n_levels);
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    const int c = clusters[i], k = levels[i];
    if (c < 0 || c >= n_clusters || k < 0 || k >= n_levels)
      throw std::invalid_argument("contingency: index out of range");
    t.counts(c, k) += 1.0;
  }
  t.row_totals = t.counts.rowwise().sum();
  t.col_totals = t.counts.colwise().sum().transpose();
  t.total = t.counts.sum();
  return t;
}

HabermanResult haberman_z(const ContingencyTable& table) {
  const double n = table.total;
  if (!(n > 0.0)) throw std::invalid_argument("haberman_z: empty table");
  HabermanResult res;
  res.z = Mat::Constant(table.counts.rows(), table.counts.cols(),
                        std::numeric_limits<double>::quiet_NaN());
  for (Eigen::Index c = 0; c < table.counts.rows(); ++c) {
    const double rc = table.row_totals[c];
    for (Eigen::Index k = 0; k < table.counts.cols(); ++k) {
      const double ck = table.col_totals[k];
      const double e = rc * ck / n;
      if (e <= 0.0) continue;  // degenerate margin: skip with NaN marker
      const double denom = std::sqrt(e * (1.0 - rc / n) * (1.0 - ck / n));
      if (denom <= 0.0) continue;  // a full row or column: residual undefined
      const double z = (table.counts(c, k) - e) / denom;
      res.z(c, k) = z;
      if (std::abs(z) > 2.0)
        res.flags.push_back({static_cast<int>(c), static_cast<int>(k), z});
    }
  }
  return res;
}

namespace {

double comb2(double x) { return x * (x - 1.0) / 2.0; }

// Densify arbitrary integer labels to 0..K-1.
std::vector<int> densify(const std::vector<int>& labels, int& k_out) {
  std::map<int, int> remap;
  std::vector<int> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto [it, fresh] = remap.emplace(labels[i], static_cast<int>(remap.size()));
    (void)fresh;
    out[i] = it->second;
  }
  k_out = static_cast<int>(remap.size());
  return out;
}

}  // namespace

double ari(const std::vector<int>& labels_a, const std::vector<int>& labels_b) {
  if (labels_a.size() != labels_b.size())
    throw std::invalid_argument("ari: partition length mismatch");
  const double n = static_cast<double>(labels_a.size());
  if (n < 2.0) throw std::invalid_argument("ari: need at least two records");

  int ka = 0, kb = 0;
  const auto a = densify(labels_a, ka);
  const auto b = densify(labels_b, kb);
  Mat counts = Mat::Zero(ka, kb);
  for (std::size_t i = 0; i < a.size(); ++i) counts(a[i], b[i]) += 1.0;

  double index = 0.0;
  for (Eigen::Index i = 0; i < counts.rows(); ++i)
    for (Eigen::Index j = 0; j < counts.cols(); ++j) index += comb2(counts(i, j));
  double sum_a = 0.0, sum_b = 0.0;
  for (Eigen::Index i = 0; i < counts.rows(); ++i) sum_a += comb2(counts.row(i).sum());
  for (Eigen::Index j = 0; j < counts.cols(); ++j) sum_b += comb2(counts.col(j).sum());

  const double expected = sum_a * sum_b / comb2(n);
  const double max_index = 0.5 * (sum_a + sum_b);
  const double denom = max_index - expected;
  // Both partitions trivial in the same way (all-singletons or one cluster):
  // no pair carries information and the partitions agree on every pair.
  if (denom == 0.0) return 1.0;
  return (index - expected) / denom;
}

double mean_pairwise_ari(const std::vector<std::vector<int>>& partitions) {
  const std::size_t k = partitions.size();
  if (k < 2) throw std::invalid_argument("mean_pairwise_ari: need at least two partitions");
  double total = 0.0;
  int pairs = 0;
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i + 1; j < k; ++j) {
      total += ari(partitions[i], partitions[j]);
      ++pairs;
    }
  return total / pairs;
}

ClusterKm km_by_cluster(const std::vector<int>& assignment,
                        const std::vector<double>& times,
                        const std::vector<int>& events, int n_clusters) {
  if (assignment.size() != times.size() || times.size() != events.size())
    throw std::invalid_argument("km_by_cluster: size mismatch");
  ClusterKm out;
  for (int c = 0; c < n_clusters; ++c) {
    std::vector<double> t;
    std::vector<int> e;
    for (std::size_t i = 0; i < assignment.size(); ++i) {
      if (assignment[i] != c) continue;
      t.push_back(times[i]);
      e.push_back(events[i]);
    }
    if (t.empty()) {
      out.empty_clusters.push_back(c);
      continue;
    }
    out.cluster_ids.push_back(c);
    out.sizes.push_back(static_cast<int>(t.size()));
    out.curves.push_back(metrics::kaplan_meier(t, e));
  }
  return out;
}

namespace {

double quantile_lin(const std::vector<double>& sorted, double q) {
  const std::size_t n = sorted.size();
  if (n == 1) return sorted[0];
  const double pos = q * static_cast<double>(n - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, n - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace

QuantileTable feature_quantiles(const data::Dataset& ds,
                                const std::vector<int>& assignment,
                                int n_clusters) {
  if (static_cast<int>(assignment.size()) != ds.size())
    throw std::invalid_argument("feature_quantiles: size mismatch");
  const Eigen::Index d =
      ds.records.empty() ? 0 : ds.records.front().continuous.size();
  const double qs[5] = {0.0, 0.25, 0.5, 0.75, 1.0};

  QuantileTable out;
  for (int c = 0; c < n_clusters; ++c) {
    std::vector<int> members;
    for (std::size_t i = 0; i < assignment.size(); ++i)
      if (assignment[i] == c) members.push_back(static_cast<int>(i));
    if (members.empty()) continue;
    Mat table(d, 5);
    std::vector<double> col(members.size());
    for (Eigen::Index f = 0; f < d; ++f) {
      for (std::size_t i = 0; i < members.size(); ++i)
        col[i] = ds.records[static_cast<std::size_t>(members[i])].continuous[f];
      std::sort(col.begin(), col.end());
      for (int qi = 0; qi < 5; ++qi) table(f, qi) = quantile_lin(col, qs[qi]);
    }
    out.cluster_ids.push_back(c);
    out.sizes.push_back(static_cast<int>(members.size()));
    out.tables.push_back(std::move(table));
  }
  return out;
}

}  // namespace survmoe::cluster
