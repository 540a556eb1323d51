#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "psched/pmf.hpp"

namespace psched {

enum class HeuristicKind {
  RoundRobin,
  MinExecution,
  MinCompletion,
  KPercentBest,
  MinMin,
  MinSoonestDeadline,
  MinMaxUrgency,
  MaxOntimeCompletions,
  FcfsRoundRobin,
  EarliestDeadlineFirst,
  ShortestJobFirst,
  MaxUrgency,
  Pam,
  Pamf,
};

struct HeuristicId {
  HeuristicKind kind = HeuristicKind::MinCompletion;
  double k_percent = 25.0;  // candidate share for KPercentBest
};

// Accepts: rr, met, mct, kpb:<k>, mm, msd, mmu, moc, fcfs-rr, edf, sjf,
// mu, pam, pamf. Throws std::invalid_argument otherwise.
HeuristicId parse_heuristic(const std::string& id);
std::string to_string(const HeuristicId& id);

bool is_immediate(HeuristicKind kind);
bool is_batch(HeuristicKind kind);
bool is_homogeneous(HeuristicKind kind);
bool is_probabilistic(HeuristicKind kind);

struct BatchTask {
  std::int64_t id = 0;
  int type = 0;
  Time arrival = 0;
  Time deadline = 0;
};

struct Assignment {
  std::int64_t task = 0;
  int machine = 0;
};

// Snapshot of machines and queue tails that mapping decisions read and
// provisionally write. assign() must fold the task into the machine's
// backlog so later queries see it; fork() yields an isolated copy for
// what-if probes that never touch the live state.
class SystemView {
 public:
  virtual ~SystemView() = default;
  virtual int machine_count() const = 0;
  virtual bool has_free_slot(int machine) const = 0;
  virtual double mean_exec(const BatchTask& task, int machine) const = 0;
  virtual double expected_completion(const BatchTask& task, int machine) const = 0;
  virtual double success_chance(const BatchTask& task, int machine) const = 0;
  virtual void assign(const BatchTask& task, int machine) = 0;
  virtual std::unique_ptr<SystemView> fork() const = 0;
};

bool any_free_slot(const SystemView& view);

// Per-type fairness pressure: grows when a type misses or gets dropped,
// shrinks when it lands on time; subtracted from pruning thresholds.
class SufferageMap {
 public:
  SufferageMap() = default;
  SufferageMap(int task_types, double fairness_factor);
  void record_ontime(int type);
  void record_missed(int type);
  double value(int type) const;
  double fairness_factor() const { return theta_; }
  int size() const { return static_cast<int>(eps_.size()); }

 private:
  std::vector<double> eps_;
  double theta_ = 0.10;
};

// Per-type deferring threshold; an empty function disables deferring.
using DeferThreshold = std::function<double(int type)>;

// Returns the chosen machine, or -1 when the task has to wait.
int map_immediate(const HeuristicId& h, const BatchTask& task,
                  const SystemView& view, int& rr_cursor);

// Batch-mode mappers remove assigned tasks from the batch; everything
// else stays queued for the next mapping event.
std::vector<Assignment> map_batch(HeuristicKind kind,
                                  std::vector<BatchTask>& batch,
                                  SystemView& view);

std::vector<Assignment> map_homogeneous(HeuristicKind kind,
                                        std::vector<BatchTask>& batch,
                                        SystemView& view, int& rr_cursor);

std::vector<Assignment> map_pam(std::vector<BatchTask>& batch,
                                SystemView& view,
                                const DeferThreshold& defer_threshold);

std::vector<Assignment> map_pamf(std::vector<BatchTask>& batch,
                                 SystemView& view,
                                 const DeferThreshold& base_threshold,
                                 const SufferageMap& sufferage);

struct MappingContext {
  int rr_cursor = 0;
  DeferThreshold defer_threshold;
  const SufferageMap* sufferage = nullptr;
};

std::vector<Assignment> dispatch_mapping(const HeuristicId& h,
                                         std::vector<BatchTask>& batch,
                                         SystemView& view,
                                         MappingContext& ctx);

}  // namespace psched
