#include "psched/pruner.hpp"

#include <algorithm>
#include <limits>

namespace psched {

namespace {

double chain_chance(const Pmf& prefix, const Pmf& pet, Time deadline,
                    std::size_t compact_limit) {
  if (compact_limit > 0) return fast_success_chance(pet, prefix, deadline);
  return success_chance(convolve_no_drop(prefix, pet), deadline);
}

Pmf advance_chain(const Pmf& prefix, const Pmf& pet, Time deadline,
                  DropRegime regime, std::size_t compact_limit) {
  Pmf next = convolve_dropping(prefix, pet, deadline, regime);
  if (compact_limit > 0) next = compact_to_count(next, compact_limit);
  return next;
}

}  // namespace

double update_oversubscription(PrunerState& state, double misses, double lambda) {
  state.d = misses * lambda + state.d * (1.0 - lambda);
  return state.d;
}

bool toggle_dropping(PrunerState& state, const SchmittConfig& schmitt) {
  if (!schmitt.enabled) {
    state.dropping_active = state.d >= schmitt.on_level;
    return state.dropping_active;
  }
  if (!state.dropping_active && state.d >= schmitt.on_level) {
    state.dropping_active = true;
  } else if (state.dropping_active && state.d <= schmitt.off_level()) {
    state.dropping_active = false;
  }
  return state.dropping_active;
}

double adjusted_drop_threshold(double base, double skew, int position, double rho) {
  const double offset = (-skew * rho) / (static_cast<double>(position) + 1.0);
  return std::clamp(base + offset, 0.0, 1.0);
}

std::vector<double> queue_chances(const MachineQueue& queue, Time now,
                                  DropRegime regime, std::size_t compact_limit) {
  std::vector<double> out;
  out.reserve(queue.tasks.size());
  Pmf chain = Pmf::delta(now);
  for (const QueuedTask& t : queue.tasks) {
    out.push_back(chain_chance(chain, *t.pet, t.deadline, compact_limit));
    chain = advance_chain(chain, *t.pet, t.deadline, regime, compact_limit);
  }
  return out;
}

std::vector<std::int64_t> drop_pass(std::vector<MachineQueue>& queues, Time now,
                                    const PrunerConfig& cfg,
                                    std::size_t compact_limit,
                                    const SufferageMap* sufferage) {
  std::vector<std::int64_t> dropped;
  if (cfg.regime == DropRegime::None) return dropped;
  for (MachineQueue& q : queues) {
    Pmf chain = Pmf::delta(now);
    std::size_t i = 0;
    while (i < q.tasks.size()) {
      const QueuedTask& t = q.tasks[i];
      const double chance = chain_chance(chain, *t.pet, t.deadline, compact_limit);
      const double base =
          cfg.base_drop_threshold - (sufferage ? sufferage->value(t.type) : 0.0);
      const double threshold = adjusted_drop_threshold(
          base, skewness(*t.pet), static_cast<int>(i), cfg.rho);
      const bool protected_head =
          t.executing && cfg.regime == DropRegime::PendingOnly;
      if (!protected_head && chance <= threshold) {
        dropped.push_back(t.id);
        q.tasks.erase(q.tasks.begin() + static_cast<std::ptrdiff_t>(i));
        continue;  // successors re-evaluated on the shortened chain
      }
      chain = advance_chain(chain, *t.pet, t.deadline, cfg.regime, compact_limit);
      ++i;
    }
  }
  return dropped;
}

double selective_factor(std::int64_t batch_len, int free_slots) {
  if (free_slots <= 0) return std::numeric_limits<double>::infinity();
  return static_cast<double>(batch_len) / static_cast<double>(free_slots);
}

double competency_level(const std::vector<double>& max_chances, double threshold) {
  if (max_chances.empty()) return 0.0;
  std::size_t n = 0;
  for (double c : max_chances) {
    if (c >= threshold) ++n;
  }
  return static_cast<double>(n) / static_cast<double>(max_chances.size());
}

double instantaneous_robustness(const std::vector<double>& chances, int machines,
                                int capacity) {
  if (machines <= 0 || capacity <= 0) return 0.0;
  double sum = 0.0;
  for (double c : chances) sum += c;
  return sum / (static_cast<double>(machines) * static_cast<double>(capacity));
}

double instantaneous_robustness(const std::vector<MachineQueue>& queues, Time now,
                                int capacity, DropRegime regime,
                                std::size_t compact_limit) {
  std::vector<double> chances;
  for (const MachineQueue& q : queues) {
    const std::vector<double> per = queue_chances(q, now, regime, compact_limit);
    chances.insert(chances.end(), per.begin(), per.end());
  }
  return instantaneous_robustness(chances, static_cast<int>(queues.size()), capacity);
}

double update_defer_threshold(PrunerState& state, double delta, double gamma,
                              double psi, double theta) {
  double next;
  if (delta < 1.0) {
    next = state.defer_threshold - theta;
  } else if (gamma != 0.0) {
    next = psi - theta;
  } else {
    next = state.defer_threshold - theta;
  }
  state.defer_threshold = std::clamp(next, 0.0, 1.0);
  return state.defer_threshold;
}

DeferSplit defer_pass(const std::vector<double>& max_chances,
                      const std::vector<double>& thresholds) {
  DeferSplit split;
  for (std::size_t i = 0; i < max_chances.size(); ++i) {
    if (max_chances[i] < thresholds[i]) {
      split.deferred.push_back(i);
    } else {
      split.eligible.push_back(i);
    }
  }
  return split;
}

}  // namespace psched
