#include "mtem/sampler.hpp"

#include <cmath>
#include <stdexcept>

namespace mtem {

TemperatureSchedule::TemperatureSchedule(double kappa_max_, double kappa_min_, double s_,
                                         int t_max_)
    : kappa_max(kappa_max_), kappa_min(kappa_min_), s(s_), t_max(t_max_) {
  if (!(kappa_min > 0.0) || kappa_max < kappa_min) {
    throw std::invalid_argument("TemperatureSchedule: need kappa_max >= kappa_min > 0");
  }
  // s >= 5 keeps the sigmoid saturated at both endpoints, so the
  // schedule actually spans [kappa_min, kappa_max].
  if (!(s >= 5.0)) throw std::invalid_argument("TemperatureSchedule: need s >= 5");
  if (t_max < 1) throw std::invalid_argument("TemperatureSchedule: need t_max >= 1");
}

double temperature_at(const TemperatureSchedule& sched, int t) {
  if (t < 0 || t > sched.t_max) {
    throw std::out_of_range("temperature_at: t outside [0, t_max]");
  }
  const double x = sched.s - 2.0 * sched.s * static_cast<double>(t) / sched.t_max;
  const double sigma = 1.0 / (1.0 + std::exp(x));
  return sched.kappa_max - (sched.kappa_max - sched.kappa_min) * sigma;
}

PredictionProbs temper(const PredictionProbs& p, double kappa) {
  if (!(kappa > 0.0)) throw std::invalid_argument("temper: kappa must be positive");
  Eigen::VectorXd logits = p.vec().array().log() / kappa;
  const Eigen::VectorXd e = (logits.array() - logits.maxCoeff()).exp();
  return PredictionProbs(e / e.sum());
}

ClassIndex sample_pseudo_label(const PredictionProbs& p, RngState& rng) {
  const double u = rng.uniform();
  double cum = 0.0;
  for (Eigen::Index k = 0; k < p.numClasses(); ++k) {
    cum += p[k];
    if (u < cum) return ClassIndex(k);
  }
  return ClassIndex(p.numClasses() - 1);
}

ClassIndex greedy_pseudo_label(const PredictionProbs& p) {
  Eigen::Index best = 0;
  p.vec().maxCoeff(&best);
  return ClassIndex(best);
}

}  // namespace mtem
