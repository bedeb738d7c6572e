#pragma once

// Class-structured synthetic survival data: log-normal event times per latent
// class, isotropic Gaussian blob features, uniform right-censoring of a fixed
// fraction of records.

#include <cstdint>
#include <utility>
#include <vector>

#include "survmoe/dataset.hpp"

namespace survmoe::data {

struct SyntheticSpec {
  std::vector<double> class_means = {1, 5, 9, 13, 17, 21, 25, 29, 33, 37};
  std::vector<double> class_stds = {1, 2, 3, 1, 2, 3, 1, 1, 1, 1};
  double censor_rate = 0.15;
  int samples_per_class = 625;
  int feature_dim = 16;
  std::uint64_t seed = 42;
};

/// (mu, sigma) of the log-normal whose mean is m and standard deviation is s.
std::pair<double, double> lognormal_params(double m, double s);

/// Ground-truth class labels and raw (uncensored) event times are retained on
/// the returned dataset for cluster evaluation.
Dataset generate_synthetic(const SyntheticSpec& spec);

}  // namespace survmoe::data
