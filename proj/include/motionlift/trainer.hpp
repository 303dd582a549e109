#pragma once

// Optimizer loop for the single- and multi-view denoisers, with state that
// can be checkpointed and resumed bit-exactly.

#include <sstream>
#include <string>
#include <vector>

#include "motionlift/training.hpp"

namespace motionlift {

struct TrainerConfig {
  int steps = 2000;
  int batch_size = 64;
  double lr = 1e-4;
  double lr_floor = 1.0;  // final lr as a fraction of lr; 1 keeps it constant
  double line_weight = 0.1;

  void validate() const {
    require(steps >= 0 && batch_size >= 1 && lr > 0.0, "TrainerConfig: invalid settings");
    require(lr_floor >= 0.0 && lr_floor <= 1.0, "TrainerConfig: lr_floor must lie in [0, 1]");
    require(line_weight >= 0.0, "TrainerConfig: line_weight must be >= 0");
  }
};

/// Everything needed to continue a run: parameters, Adam moments, the
/// minibatch/noise RNG and the step counter.
struct TrainerState {
  DenoiserParams params;
  AdamState adam;
  Rng rng;
  long step = 0;

  static TrainerState fresh(const DenoiserShape& shape, std::uint64_t seed) {
    TrainerState s;
    Rng init(seed);
    s.params = DenoiserParams::random(shape, init);
    s.adam = AdamState::zeros(s.params.theta().size());
    s.rng = Rng(seed ^ 0x9e3779b97f4a7c15ULL);
    return s;
  }

  std::string rng_state() const {
    std::ostringstream os;
    os << rng;
    return os.str();
  }

  void set_rng_state(const std::string& text) {
    std::istringstream is(text);
    is >> rng;
    if (is.fail()) throw SchemaError("TrainerState: unreadable rng state");
  }
};

namespace detail {

/// Indices of a minibatch: the whole pool in order when it fits, else a
/// draw without replacement.
inline std::vector<std::size_t> minibatch_indices(std::size_t pool, int batch_size, Rng& rng) {
  std::vector<std::size_t> idx(pool);
  for (std::size_t i = 0; i < pool; ++i) idx[i] = i;
  if (pool <= static_cast<std::size_t>(batch_size)) return idx;
  for (int i = 0; i < batch_size; ++i) {
    const int j = uniform_int(rng, i, static_cast<int>(pool) - 1);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(batch_size);
  return idx;
}

inline void apply_update(TrainerState& st, const VecX& grad, const TrainerConfig& cfg) {
  const double lr = cosine_lr(cfg.lr, static_cast<int>(st.step), cfg.steps, cfg.lr_floor);
  adam_step(st.params.theta(), grad, st.adam, {lr});
  if (!st.params.theta().allFinite()) throw NumericalError("training diverged: non-finite parameters");
  ++st.step;
}

}  // namespace detail

/// One optimizer step on a minibatch drawn from `pool`. Returns the loss.
inline double train_step(TrainerState& st, const TrainingBatch& pool, const NoiseSchedule& sched,
                         const TrainerConfig& cfg) {
  const auto idx = detail::minibatch_indices(pool.items.size(), cfg.batch_size, st.rng);
  TrainingBatch batch;
  batch.skeleton = pool.skeleton;
  for (auto i : idx) batch.items.push_back(pool.items[i]);
  const auto r = training_loss(st.params, batch, sched, st.rng, cfg.line_weight);
  detail::apply_update(st, r.grad, cfg);
  return r.loss;
}

inline double train_step(TrainerState& st, const std::vector<MultiViewItem>& pool,
                         const NoiseSchedule& sched, const TrainerConfig& cfg) {
  const auto idx = detail::minibatch_indices(pool.size(), cfg.batch_size, st.rng);
  std::vector<MultiViewItem> batch;
  for (auto i : idx) batch.push_back(pool[i]);
  const auto r = multiview_training_loss(st.params, batch, sched, st.rng);
  detail::apply_update(st, r.grad, cfg);
  return r.loss;
}

/// Loss over the full pool with noise drawn from a fixed seed, averaged over
/// `repeats` draws. Comparable across parameter values.
inline double evaluation_loss(const DenoiserParams& params, const TrainingBatch& pool,
                              const NoiseSchedule& sched, double line_weight,
                              std::uint64_t seed = 12345, int repeats = 4) {
  Rng rng(seed);
  double sum = 0.0;
  for (int r = 0; r < repeats; ++r) sum += training_loss(params, pool, sched, rng, line_weight).loss;
  return sum / repeats;
}

inline double evaluation_loss(const DenoiserParams& params, const std::vector<MultiViewItem>& pool,
                              const NoiseSchedule& sched, std::uint64_t seed = 12345,
                              int repeats = 4) {
  Rng rng(seed);
  double sum = 0.0;
  for (int r = 0; r < repeats; ++r) sum += multiview_training_loss(params, pool, sched, rng).loss;
  return sum / repeats;
}

}  // namespace motionlift
