#pragma once

// Survival evaluation metrics with inverse-probability-of-censoring weights:
// Kaplan-Meier, IPCW Brier score, equal-mass calibration error, median-survival
// risk scores, and Harrell / IPCW concordance.
//
// Column j of a prediction matrix is evaluated at t_j = edges[j+1], the right
// boundary of time bin j.

#include <vector>

#include "survmoe/common.hpp"
#include "survmoe/dataset.hpp"

namespace survmoe::metrics {

inline constexpr double kWeightFloor = 1e-8;

/// Right-continuous non-increasing step function starting at 1; evaluation
/// clamps its argument to tau (the largest observed time of the fit sample).
struct StepFn {
  Vec times;   // ascending distinct drop times
  Vec values;  // value at and right of each drop
  double tau = 0.0;

  double at(double t) const;
};

/// Product-limit estimator; indicator 1 marks the modeled event.
StepFn kaplan_meier(const std::vector<double>& times, const std::vector<int>& indicators);

/// Kaplan-Meier fit of the censoring process (indicator = 1 - event flag).
StepFn censoring_survival(const data::Dataset& ds);

/// w_i(t) = 1{T_i <= t} delta_i / G(min(T_i, tau)) + 1{T_i > t} / G(t),
/// denominators floored at kWeightFloor.
double ipcw_weight(const StepFn& g, double t, double time_i, int event_i);

/// Row-wise cumulative sums of pmf rows, clamped into [0, 1].
Mat cdf_rows(const Mat& pmf_rows);

/// Headline percentile column: floor(q * (m - 1)).
int percentile_bin(int m, double q);

double brier_ipcw(const Mat& cdf, const data::Dataset& ds, const StepFn& g,
                  const data::TimeGrid& grid, int j);
Vec brier_curve(const Mat& cdf, const data::Dataset& ds, const StepFn& g,
                const data::TimeGrid& grid);

struct EceReport {
  int q = 10;
  Vec per_time;          // ECE(t_j), length m
  double average = 0.0;  // mean over all time columns
  Mat fbar, ybar;        // m x Q bin tables
  Mat counts;            // m x Q bin sizes
};

EceReport ece_equal_mass(const Mat& cdf, const data::Dataset& ds, const StepFn& g,
                         const data::TimeGrid& grid, int q = 10);

/// Negated median survival time; the survival curve is interpolated linearly
/// through (0, 1), (edges[j+1], S_j) and clamped to the horizon when it never
/// reaches 0.5.
double median_survival_risk(const VecRef& pmf, const data::TimeGrid& grid);
Vec median_survival_risks(const Mat& pmf_rows, const data::TimeGrid& grid);

double concordance_harrell(const Vec& risks, const std::vector<double>& times,
                           const std::vector<int>& events);

/// Uno-style IPCW concordance: pairs anchored at uncensored i with
/// T_i < tau_G, weighted by G(T_i)^-2.
double concordance_ipcw(const Vec& risks, const std::vector<double>& times,
                        const std::vector<int>& events, const StepFn& g);

}  // namespace survmoe::metrics
