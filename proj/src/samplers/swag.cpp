#include "bnn/samplers/swag.hpp"

#include <cmath>

#include "bnn/core/minibatch.hpp"
#include "bnn/errors.hpp"
#include "bnn/rng.hpp"

namespace bnn {

SwagAccumulator::SwagAccumulator(std::size_t rank) : rank_(rank) {
  if (rank == 0) throw std::invalid_argument("SwagAccumulator: rank must be >= 1");
}

void SwagAccumulator::collect(const ParamVector& w) {
  if (count_ == 0) {
    mean_ = ParamVector::Zero(w.size());
    sq_mean_ = ParamVector::Zero(w.size());
  } else if (w.size() != mean_.size()) {
    throw DimensionError("SwagAccumulator: iterate length changed");
  }
  ++count_;
  const double n = static_cast<double>(count_);
  mean_ += (w - mean_) / n;
  sq_mean_ += (w.cwiseAbs2() - sq_mean_) / n;
  deviations_.push_back(w - mean_);
  if (deviations_.size() > rank_) deviations_.pop_front();
}

SwagModel SwagAccumulator::model() const {
  if (count_ == 0) throw ContractError("SwagAccumulator: no iterates collected");
  SwagModel m;
  m.mean = mean_;
  m.diag_variance = (sq_mean_ - mean_.cwiseAbs2()).cwiseMax(0.0);
  m.collected = count_;
  m.deviations.resize(mean_.size(), static_cast<Eigen::Index>(deviations_.size()));
  for (std::size_t j = 0; j < deviations_.size(); ++j) m.deviations.col(static_cast<Eigen::Index>(j)) = deviations_[j];
  if (deviations_.size() < rank_) {
    m.notes.push_back("swag: only " + std::to_string(deviations_.size()) + " iterates collected, rank reduced from " +
                      std::to_string(rank_));
  }
  return m;
}

SwagModel swag_fit(const Potential& potential, const ParamVector& map_params, const SwagConfig& config) {
  if (static_cast<std::size_t>(map_params.size()) != potential.dim()) throw DimensionError("swag_fit: MAP length");
  MinibatchSampler sampler(potential.num_data(),
                           MinibatchSchedule{std::min(config.batch_size, potential.num_data()), config.seed});
  SwagAccumulator acc(config.rank);
  ParamVector w = map_params;
  for (std::size_t k = 0; k < config.iterations; ++k) {
    w -= config.step_size * stochastic_grad(potential, w, sampler);
    if (!w.allFinite()) throw DivergenceError("swag_fit: SGD diverged", k + 1);
    acc.collect(w);
  }
  return acc.model();
}

SampleSet swag_sample(const SwagModel& model, std::size_t n, std::uint64_t seed) {
  const Eigen::Index d = model.mean.size();
  const Eigen::Index k = model.deviations.cols();
  Rng rng(seed);
  SampleSet out;
  out.algorithm = "swag";
  out.seed = seed;
  out.notes = model.notes;
  out.samples.resize(static_cast<Eigen::Index>(n), d);
  const ParamVector diag_scale = (0.5 * model.diag_variance).cwiseSqrt();
  const double low_rank_scale = k >= 2 ? 1.0 / std::sqrt(2.0 * static_cast<double>(k - 1)) : 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ParamVector w = model.mean + diag_scale.cwiseProduct(standard_normal(d, rng));
    if (k >= 2) w += low_rank_scale * (model.deviations * standard_normal(k, rng));
    out.samples.row(static_cast<Eigen::Index>(i)) = w.transpose();
  }
  return out;
}

}  // namespace bnn
