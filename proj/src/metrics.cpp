#include "survmoe/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace survmoe::metrics {

double StepFn::at(double t) const {
  t = std::min(t, tau);
  if (times.size() == 0 || t < times[0]) return 1.0;
  const double* begin = times.data();
  const double* end = begin + times.size();
  const auto it = std::upper_bound(begin, end, t);
  return values[static_cast<Eigen::Index>(it - begin) - 1];
}

StepFn kaplan_meier(const std::vector<double>& times, const std::vector<int>& indicators) {
  const int n = static_cast<int>(times.size());
  if (n == 0 || indicators.size() != times.size())
    throw std::invalid_argument("kaplan_meier: empty input or size mismatch");
  for (int i = 0; i < n; ++i) {
    if (!(times[i] > 0.0)) throw std::invalid_argument("kaplan_meier: times must be positive");
    if (indicators[i] != 0 && indicators[i] != 1)
      throw std::invalid_argument("kaplan_meier: indicators must be 0/1");
  }
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) { return times[a] < times[b]; });

  StepFn f;
  f.tau = times[idx.back()];
  std::vector<double> ts, vs;
  double s = 1.0;
  int at_risk = n;
  int i = 0;
  while (i < n) {
    const double t = times[idx[i]];
    int drops = 0, tied = 0;
    while (i < n && times[idx[i]] == t) {
      drops += indicators[idx[i]];
      ++tied;
      ++i;
    }
    if (drops > 0) {
      s *= 1.0 - static_cast<double>(drops) / at_risk;
      ts.push_back(t);
      vs.push_back(s);
    }
    at_risk -= tied;
  }
  f.times = Eigen::Map<const Vec>(ts.data(), static_cast<Eigen::Index>(ts.size()));
  f.values = Eigen::Map<const Vec>(vs.data(), static_cast<Eigen::Index>(vs.size()));
  return f;
}

StepFn censoring_survival(const data::Dataset& ds) {
  std::vector<double> times;
  std::vector<int> censored;
  times.reserve(ds.records.size());
  censored.reserve(ds.records.size());
  for (const auto& r : ds.records) {
    times.push_back(r.time);
    censored.push_back(1 - r.event);
  }
  return kaplan_meier(times, censored);
}

double ipcw_weight(const StepFn& g, double t, double time_i, int event_i) {
  if (time_i <= t)
    return event_i == 1 ? 1.0 / std::max(g.at(std::min(time_i, g.tau)), kWeightFloor) : 0.0;
  return 1.0 / std::max(g.at(t), kWeightFloor);
}

Mat cdf_rows(const Mat& pmf_rows) {
  Mat out(pmf_rows.rows(), pmf_rows.cols());
  for (Eigen::Index i = 0; i < pmf_rows.rows(); ++i) {
    double cum = 0.0;
    for (Eigen::Index j = 0; j < pmf_rows.cols(); ++j) {
      cum += pmf_rows(i, j);
      out(i, j) = std::clamp(cum, 0.0, 1.0);
    }
  }
  return out;
}

int percentile_bin(int m, double q) {
  return static_cast<int>(std::floor(q * (m - 1)));
}

double brier_ipcw(const Mat& cdf, const data::Dataset& ds, const StepFn& g,
                  const data::TimeGrid& grid, int j) {
  const int n = ds.size();
  if (n == 0 || cdf.rows() != n || j < 0 || j >= grid.m)
    throw std::invalid_argument("brier_ipcw: bad inputs");
  const double tj = grid.edges[j + 1];
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto& r = ds.records[i];
    const double w = ipcw_weight(g, tj, r.time, r.event);
    const double y = r.time <= tj ? 1.0 : 0.0;
    const double resid = cdf(i, j) - y;
    total += w * resid * resid;
  }
  return total / n;
}

Vec brier_curve(const Mat& cdf, const data::Dataset& ds, const StepFn& g,
                const data::TimeGrid& grid) {
  Vec out(grid.m);
  for (int j = 0; j < grid.m; ++j) out[j] = brier_ipcw(cdf, ds, g, grid, j);
  return out;
}

EceReport ece_equal_mass(const Mat& cdf, const data::Dataset& ds, const StepFn& g,
                         const data::TimeGrid& grid, int q) {
  const int n = ds.size();
  if (q < 1) throw std::invalid_argument("ece_equal_mass: Q must be positive");
  if (n < q) throw std::invalid_argument("ece_equal_mass: need at least Q records");
  if (cdf.rows() != n || cdf.cols() != grid.m)
    throw std::invalid_argument("ece_equal_mass: prediction shape mismatch");

  EceReport rep;
  rep.q = q;
  rep.per_time = Vec::Zero(grid.m);
  rep.fbar = Mat::Zero(grid.m, q);
  rep.ybar = Mat::Zero(grid.m, q);
  rep.counts = Mat::Zero(grid.m, q);

  const int base = n / q;
  const int extra = n % q;  // first `extra` bins take one more record
  std::vector<int> order(n);

  for (int j = 0; j < grid.m; ++j) {
    const double tj = grid.edges[j + 1];
    const double w_surv = 1.0 / std::max(g.at(tj), kWeightFloor);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return cdf(a, j) < cdf(b, j); });

    int pos = 0;
    double ece_j = 0.0;
    for (int b = 0; b < q; ++b) {
      const int size = base + (b < extra ? 1 : 0);
      double fsum = 0.0, num = 0.0, den = 0.0;
      for (int k = pos; k < pos + size; ++k) {
        const int i = order[k];
        const auto& r = ds.records[i];
        fsum += cdf(i, j);
        if (r.event == 1 && r.time <= tj)
          num += 1.0 / std::max(g.at(std::min(r.time, g.tau)), kWeightFloor);
        else if (r.time > tj)
          den += w_surv;
      }
      den += num;
      const double fbar = fsum / size;
      const double ybar = den > 0.0 ? num / den : 0.0;
      rep.fbar(j, b) = fbar;
      rep.ybar(j, b) = ybar;
      rep.counts(j, b) = size;
      if (den > 0.0) ece_j += (static_cast<double>(size) / n) * std::abs(fbar - ybar);
      pos += size;
    }
    rep.per_time[j] = ece_j;
  }
  rep.average = rep.per_time.mean();
  return rep;
}

double median_survival_risk(const VecRef& pmf, const data::TimeGrid& grid) {
  if (pmf.size() != grid.m) throw std::invalid_argument("median_survival_risk: size mismatch");
  double prev_t = 0.0, prev_s = 1.0;
  double cum = 0.0;
  for (int j = 0; j < grid.m; ++j) {
    cum += pmf[j];
    const double s = 1.0 - cum;
    const double t = grid.edges[j + 1];
    if (s < 0.5)
      return -(prev_t + (prev_s - 0.5) * (t - prev_t) / (prev_s - s));
    prev_t = t;
    prev_s = s;
  }
  return -grid.edges[grid.m];  // never reached 0.5: clamp to the horizon
}

Vec median_survival_risks(const Mat& pmf_rows, const data::TimeGrid& grid) {
  Vec out(pmf_rows.rows());
  for (Eigen::Index i = 0; i < pmf_rows.rows(); ++i)
    out[i] = median_survival_risk(pmf_rows.row(i).transpose(), grid);
  return out;
}

double concordance_harrell(const Vec& risks, const std::vector<double>& times,
                           const std::vector<int>& events) {
  const int n = static_cast<int>(times.size());
  if (n < 2 || risks.size() != n || events.size() != times.size())
    throw std::invalid_argument("concordance: bad inputs");
  double num = 0.0;
  long pairs = 0;
  for (int i = 0; i < n; ++i) {
    if (events[i] != 1) continue;
    for (int j = 0; j < n; ++j) {
      if (!(times[i] < times[j])) continue;
      ++pairs;
      if (risks[i] > risks[j])
        num += 1.0;
      else if (risks[i] == risks[j])
        num += 0.5;
    }
  }
  if (pairs == 0) throw std::runtime_error("concordance undefined: no comparable pairs");
  return num / static_cast<double>(pairs);
}

double concordance_ipcw(const Vec& risks, const std::vector<double>& times,
                        const std::vector<int>& events, const StepFn& g) {
  const int n = static_cast<int>(times.size());
  if (n < 2 || risks.size() != n || events.size() != times.size())
    throw std::invalid_argument("concordance: bad inputs");
  double num = 0.0, den = 0.0;
  for (int i = 0; i < n; ++i) {
    if (events[i] != 1 || !(times[i] < g.tau)) continue;
    const double gi = std::max(g.at(times[i]), kWeightFloor);
    const double w = 1.0 / (gi * gi);
    for (int j = 0; j < n; ++j) {
      if (!(times[i] < times[j])) continue;
      den += w;
      if (risks[i] > risks[j])
        num += w;
      else if (risks[i] == risks[j])
        num += 0.5 * w;
    }
  }
  if (den == 0.0) throw std::runtime_error("concordance undefined: no comparable pairs");
  return num / den;
}

}  // namespace survmoe::metrics
