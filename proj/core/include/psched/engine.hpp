#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "psched/heuristics.hpp"
#include "psched/merger.hpp"
#include "psched/metrics.hpp"
#include "psched/pmf.hpp"
#include "psched/pruner.hpp"
#include "psched/workload.hpp"

namespace psched {

// Exact mode rebuilds every queue's completion-time chain from scratch at
// each mapping event; approximate mode reuses cached tails for untouched
// queues and compacts them to a bounded impulse count.
enum class ChanceMode { Exact, Approximate };

struct PruningOptions {
  bool enabled = false;
  PrunerConfig config;
};

struct MergingOptions {
  bool enabled = false;
  MergeConfig config;
  SavingModel saving = SavingModel::defaults();
};

struct SimConfig {
  std::vector<int> machine_types;  // one machine per entry
  int queue_capacity = 3;          // counts the executing task
  HeuristicId heuristic;
  PruningOptions pruning;
  MergingOptions merging;
  ChanceMode chance_mode = ChanceMode::Approximate;
  std::size_t compact_limit = 128;  // tail impulse budget in approximate mode
  double fairness_theta = 0.10;     // sufferage step for the fairness variant
  bool drop_expired = true;         // off lets late tasks run to completion
  std::uint64_t seed = 1;
};

std::vector<int> heterogeneous_machines(int count, int machine_types);
std::vector<int> homogeneous_machines(int count, int machine_type = 0);

// One queue position for chain_tail_pct: the executing head carries its
// remaining-duration distribution, everything else its full PET.
struct ChainTask {
  const Pmf* pet = nullptr;
  Time deadline = 0;
  bool executing = false;
};

// Completion-time distribution of the last queue slot at `now`: delta(now)
// for an empty queue, the head's remaining distribution shifted to now,
// then one convolution per queued task under `regime`. compact_limit 0
// keeps the chain exact.
Pmf chain_tail_pct(const std::vector<ChainTask>& queue, Time now,
                   DropRegime regime, std::size_t compact_limit = 0);

struct RunResult {
  RunStats stats;
  double mapping_seconds = 0.0;  // wall clock spent inside mapping events
};

// Single-threaded deterministic event loop. Validates config, trace and
// PET up front and throws std::invalid_argument; never fails mid-run.
// When event_log is given, one JSON line is written per event.
RunResult run(const SimConfig& cfg, const std::vector<TaskSpec>& trace,
              const PetMatrix& pet, std::ostream* event_log = nullptr);

}  // namespace psched
