#pragma once

// Routing-based cluster analysis: Top-1 expert assignment, routing/label
// confusion with purity, Haberman adjusted residuals for categorical
// over-representation, adjusted Rand index, per-cluster Kaplan-Meier curves,
// and per-cluster continuous-feature quantile tables.

#include <utility>
#include <vector>

#include "survmoe/common.hpp"
#include "survmoe/dataset.hpp"
#include "survmoe/metrics.hpp"

namespace survmoe::cluster {

struct ClusterAssignment {
  std::vector<int> expert;  // Top-1 routing index per record
  Mat alpha;                // full routing weights kept for diagnostics
};

/// Argmax per row; ties break to the lowest expert index.
ClusterAssignment top1_assign(const Mat& alphas);

struct RoutingReport {
  Mat matrix;             // experts x classes; each non-empty row sums to 1
  std::vector<int> sizes; // records per expert
  double purity = 0.0;    // size-weighted mean of row maxima
};

RoutingReport routing_matrix(const std::vector<int>& assignment,
                             const std::vector<int>& labels, int n_experts,
                             int n_classes);

struct ContingencyTable {
  Mat counts;  // clusters x category levels
  Vec row_totals, col_totals;
  double total = 0.0;
};

ContingencyTable contingency(const std::vector<int>& clusters,
                             const std::vector<int>& levels, int n_clusters,
                             int n_levels);

struct HabermanFlag {
  int row = 0;
  int col = 0;
  double z = 0.0;
};

struct HabermanResult {
  Mat z;  // NaN marks cells skipped for zero expected count
  std::vector<HabermanFlag> flags;  // cells with |z| > 2
};

/// Adjusted Pearson residuals z = (n - e) / sqrt(e (1 - r/N)(1 - c/N)) with
/// e = r c / N; cells with e = 0 are skipped (NaN marker, never flagged).
HabermanResult haberman_z(const ContingencyTable& table);

/// Adjusted Rand index by pair counting; 1 when both partitions are trivial
/// in the same way (the expected-index correction degenerates to 0/0 there).
double ari(const std::vector<int>& labels_a, const std::vector<int>& labels_b);

/// Mean ARI over all unordered pairs of partitions (stability across seeds).
double mean_pairwise_ari(const std::vector<std::vector<int>>& partitions);

struct ClusterKm {
  std::vector<int> cluster_ids;  // non-empty clusters, ascending
  std::vector<int> sizes;
  std::vector<metrics::StepFn> curves;
  std::vector<int> empty_clusters;  // omitted from curves, reported as a note
};

ClusterKm km_by_cluster(const std::vector<int>& assignment,
                        const std::vector<double>& times,
                        const std::vector<int>& events, int n_clusters);

/// Per-cluster min/25/50/75/max of each continuous feature column
/// (linear-interpolation quantiles over the cluster's records).
struct QuantileTable {
  std::vector<int> cluster_ids;  // non-empty clusters, ascending
  std::vector<int> sizes;
  std::vector<Mat> tables;  // one per listed cluster: features x 5
};

QuantileTable feature_quantiles(const data::Dataset& ds,
                                const std::vector<int>& assignment,
                                int n_clusters);

}  // namespace survmoe::cluster
