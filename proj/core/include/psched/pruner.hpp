#pragma once

#include <cstdint>
#include <vector>

#include "psched/heuristics.hpp"
#include "psched/pmf.hpp"

namespace psched {

struct SchmittConfig {
  bool enabled = true;
  double on_level = 1.0;
  double off_level() const { return 0.8 * on_level; }
};

struct PrunerConfig {
  double base_drop_threshold = 0.50;
  double initial_defer_threshold = 0.0;
  double rho = 0.2;     // skew scale in the per-position threshold offset
  double lambda = 0.9;  // EWMA weight for the oversubscription level
  double theta = 0.05;  // deferring threshold adjustment step
  SchmittConfig schmitt;
  DropRegime regime = DropRegime::None;
  bool dynamic_defer = true;

  bool dropping_enabled() const { return regime != DropRegime::None; }
  bool deferring_enabled() const { return initial_defer_threshold > 0.0; }
};

struct PrunerState {
  double d = 0.0;            // EWMA oversubscription level
  bool dropping_active = false;
  double defer_threshold = 0.0;  // current deferring threshold
  std::int64_t misses_since_event = 0;
};

// One machine queue as the pruner sees it: head first, PMFs non-owning.
// The head's pet is its remaining execution distribution when executing.
struct QueuedTask {
  std::int64_t id = 0;
  int type = 0;
  Time deadline = 0;
  const Pmf* pet = nullptr;
  bool executing = false;
};

struct MachineQueue {
  std::vector<QueuedTask> tasks;
};

double update_oversubscription(PrunerState& state, double misses, double lambda);

bool toggle_dropping(PrunerState& state, const SchmittConfig& schmitt);

// clamp(base + (-skew * rho) / (position + 1), 0, 1); position 0 is the head
double adjusted_drop_threshold(double base, double skew, int position, double rho);

// Per-position success chances along the queue chain. A task's own chance
// never counts regime-truncated mass: the prefix uses the drop regime, the
// final step is a plain convolution. compact_limit 0 keeps chains exact.
std::vector<double> queue_chances(const MachineQueue& queue, Time now,
                                  DropRegime regime, std::size_t compact_limit = 0);

// Head-to-tail sweep dropping tasks whose chance <= adjusted threshold;
// downstream chances are recomputed on the shortened chain. PendingOnly
// never drops the executing head. Mutates the queues.
std::vector<std::int64_t> drop_pass(std::vector<MachineQueue>& queues, Time now,
                                    const PrunerConfig& cfg,
                                    std::size_t compact_limit = 0,
                                    const SufferageMap* sufferage = nullptr);

// batch pressure per free slot; +inf when nothing is free
double selective_factor(std::int64_t batch_len, int free_slots);

// fraction of tasks whose best chance clears the threshold
double competency_level(const std::vector<double>& max_chances, double threshold);

double instantaneous_robustness(const std::vector<double>& chances, int machines,
                                int capacity);
double instantaneous_robustness(const std::vector<MachineQueue>& queues, Time now,
                                int capacity, DropRegime regime,
                                std::size_t compact_limit = 0);

double update_defer_threshold(PrunerState& state, double delta, double gamma,
                              double psi, double theta);

struct DeferSplit {
  std::vector<std::size_t> eligible;
  std::vector<std::size_t> deferred;
};

// strict comparison: a task defers only when chance < its threshold
DeferSplit defer_pass(const std::vector<double>& max_chances,
                      const std::vector<double>& thresholds);

}  // namespace psched
