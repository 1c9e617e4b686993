#ifndef MTEM_SAMPLER_HPP
#define MTEM_SAMPLER_HPP

// Annealed pseudo-label generation: a sigmoid temperature scheduler and
// categorical sampling from the tempered prediction.

#include "mtem/rng.hpp"
#include "mtem/types.hpp"

namespace mtem {

/// Annealing schedule: temperature decays from kappa_max to kappa_min
/// over t_max iterations along a sigmoid ramp of sharpness s.
struct TemperatureSchedule {
  double kappa_max;
  double kappa_min;
  double s;
  int t_max;

  TemperatureSchedule(double kappa_max_, double kappa_min_, double s_, int t_max_);
};

/// kappa_max - (kappa_max - kappa_min) * sigma(s - 2s*t/t_max) with
/// sigma(x) = 1/(1 + exp(x)). Non-increasing in t.
double temperature_at(const TemperatureSchedule& sched, int t);

/// softmax(log(p) / kappa); the identity at kappa = 1.
PredictionProbs temper(const PredictionProbs& p, double kappa);

/// Draws class k with probability p_k (inverse CDF, one uniform draw).
ClassIndex sample_pseudo_label(const PredictionProbs& p, RngState& rng);

/// argmax with ties broken toward the lowest index.
ClassIndex greedy_pseudo_label(const PredictionProbs& p);

}  // namespace mtem

#endif  // MTEM_SAMPLER_HPP
