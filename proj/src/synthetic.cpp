#include "survmoe/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace survmoe::data {

std::pair<double, double> lognormal_params(double m, double s) {
  if (!(m > 0.0) || !(s > 0.0))
    throw std::invalid_argument("lognormal_params: mean and std must be positive");
  const double mu = std::log(m * m / std::sqrt(s * s + m * m));
  const double sigma = std::sqrt(std::log1p(s * s / (m * m)));
  return {mu, sigma};
}

Dataset generate_synthetic(const SyntheticSpec& spec) {
  const int classes = static_cast<int>(spec.class_means.size());
  if (classes == 0 || spec.class_stds.size() != spec.class_means.size())
    throw std::invalid_argument("class means and stds must have equal, nonzero length");
  if (!(spec.censor_rate >= 0.0 && spec.censor_rate < 1.0))
    throw std::invalid_argument("censor rate must lie in [0, 1)");
  if (spec.samples_per_class < 1 || spec.feature_dim < 1)
    throw std::invalid_argument("samples per class and feature dim must be positive");

  Rng rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  // Class centers on a sphere of radius 4, redrawn per seed. With unit
  // within-class noise this keeps nearest-center accuracy near 0.96 for 10
  // classes in 16 dimensions, so latent-group recovery is hard but not
  // noise-bound.
  Mat centers(classes, spec.feature_dim);
  for (int k = 0; k < classes; ++k) {
    Vec g(spec.feature_dim);
    for (int d = 0; d < spec.feature_dim; ++d) g[d] = normal(rng);
    centers.row(k) = (4.0 / g.norm()) * g.transpose();
  }

  const int n = classes * spec.samples_per_class;
  Dataset ds;
  ds.records.reserve(n);
  ds.class_labels.reserve(n);
  ds.raw_event_times.reserve(n);
  for (int k = 0; k < classes; ++k) {
    const auto [mu, sigma] = lognormal_params(spec.class_means[k], spec.class_stds[k]);
    for (int i = 0; i < spec.samples_per_class; ++i) {
      SurvivalRecord r;
      r.continuous = Vec(spec.feature_dim);
      for (int d = 0; d < spec.feature_dim; ++d)
        r.continuous[d] = centers(k, d) + normal(rng);
      const double t_star = std::exp(mu + sigma * normal(rng));
      r.time = t_star;
      r.event = 1;
      ds.records.push_back(std::move(r));
      ds.class_labels.push_back(k);
      ds.raw_event_times.push_back(t_star);
    }
  }

  // Censor a uniformly random subset of exactly floor(p_c * n) records.
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  const int n_cens = static_cast<int>(std::floor(spec.censor_rate * n));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int c = 0; c < n_cens; ++c) {
    auto& r = ds.records[idx[c]];
    double u = unif(rng);
    while (u == 0.0) u = unif(rng);  // keep censoring times strictly positive
    r.time = u * ds.raw_event_times[idx[c]];
    r.event = 0;
  }
  return ds;
}

}  // namespace survmoe::data
