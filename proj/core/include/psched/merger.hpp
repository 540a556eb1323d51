#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "psched/pmf.hpp"
#include "psched/workload.hpp"

namespace psched {

enum class SimilarityLevel { Task, DataOp, DataOnly };
enum class MergePolicy { Conservative, Aggressive, Adaptive };
enum class PositionFinder { Off, Logarithmic, Linear };
enum class QueuingPolicy { Fcfs, Edf, MaxUrgency };

const char* to_string(SimilarityLevel level);
MergePolicy parse_merge_policy(const std::string& s);
PositionFinder parse_position_finder(const std::string& s);
QueuingPolicy parse_queuing_policy(const std::string& s);

// Similarity keys derived from what a task reads and computes.
std::string task_key(const TaskSpec& t);
std::string data_op_key(const TaskSpec& t);
std::string data_key(const TaskSpec& t);

// Three-level lookup: exact task signature, then data + operation, then
// data only. Entries reference live batch-queue entries by id.
class SimilarityTables {
 public:
  struct Hit {
    SimilarityLevel level;
    std::int64_t task;
  };

  std::optional<Hit> find(const TaskSpec& sig) const;
  void on_new(const TaskSpec& t);
  void on_merged(const TaskSpec& j, std::int64_t merged_id);
  void on_declined(const TaskSpec& j);
  void on_removed(std::int64_t task_id);

  std::size_t entry_count() const;
  bool points_to(std::int64_t task_id) const;

 private:
  std::unordered_map<std::string, std::int64_t> task_;
  std::unordered_map<std::string, std::int64_t> data_op_;
  std::unordered_map<std::string, std::int64_t> data_;
};

// Fraction of summed work saved by merging, by similarity level and group
// size. Sizes above the table are capped at the largest configured size.
class SavingModel {
 public:
  static SavingModel defaults();
  static SavingModel load_csv_file(const std::string& path);

  void set(SimilarityLevel level, int group_size, double ratio);
  double ratio(SimilarityLevel level, int group_size) const;

 private:
  std::unordered_map<int, double> data_op_;
  std::unordered_map<int, double> data_only_;
};

struct MergeMember {
  TaskSpec spec;
  double mu = 0.0;
  double sigma = 0.0;
};

// One batch-queue entry: a single task until something merges into it.
// The id stays the first member's id so table references survive merges.
struct MergedTask {
  std::int64_t id = 0;
  std::vector<MergeMember> members;
  SimilarityLevel level = SimilarityLevel::Task;  // weakest join so far
  double mu = 0.0;
  double sigma = 0.0;
  Time effective_deadline = 0;
  Time arrival = 0;

  static MergedTask single(const TaskSpec& spec, double mu, double sigma);
};

struct ExecModel {
  double mu = 0.0;
  double sigma = 0.0;
};

// Task level runs one representative; other levels sum the means of
// distinct task signatures and scale by (1 - saving ratio), sigma by
// root-sum-square with the same scale.
ExecModel merged_exec_model(const std::vector<MergeMember>& members,
                            SimilarityLevel level, const SavingModel& model);

double worst_case_exec(double mu, double sigma, double alpha);

struct SnapshotTask {
  double mu = 0.0;
  double sigma = 0.0;
  Time deadline = 0;
  Time arrival = 0;
};

struct MachineSnapshot {
  double executing_remaining = 0.0;  // worst-case leftover of the running task
  std::vector<SnapshotTask> pending;
};

// now + leftover + worst-case pending backlog + the task's own worst case
double estimate_completion(const MachineSnapshot& machine, double mu,
                           double sigma, double alpha, Time now);

struct ImpactResult {
  int misses_with = 0;
  int misses_without = 0;
  bool merged_meets_deadline = false;
};

// Schedules both scenarios on a throwaway copy: the batch as-is plus the
// incoming task standing alone, versus the batch with the candidate group
// in place of the existing entry. Capacity is ignored; every entry goes to
// the machine finishing it soonest under the queuing order.
ImpactResult evaluate_merge_impact(const std::vector<MachineSnapshot>& machines,
                                   const std::vector<MergedTask>& batch,
                                   std::size_t existing_index,
                                   const MergedTask& merged,
                                   const MergedTask& incoming,
                                   QueuingPolicy queuing, double alpha, Time now);

// Average miss severity over queued work: 0 for on-time or unwaitable
// tasks, (C - deadline) / waitable otherwise.
double compute_osl(const std::vector<MachineSnapshot>& machines,
                   const std::vector<MergedTask>& batch, double alpha, Time now);

double adapt_alpha(double osl);

bool decide_merge(MergePolicy policy, const ImpactResult& impact);

struct PositionResult {
  bool accepted = false;
  std::size_t position = 0;
  int probes = 0;
};

// Front-to-back scan for the last position where the merged entry meets
// its deadline, then one impact check against the unmerged baseline.
PositionResult position_linear(const std::vector<MachineSnapshot>& machines,
                               const std::vector<MergedTask>& batch,
                               std::size_t existing_index,
                               const MergedTask& merged,
                               const MergedTask& incoming, double alpha,
                               Time now);

// Binary probe: accept when the position hurts nobody, walk toward the
// front when the merged entry misses, toward the back when others do.
PositionResult position_logarithmic(const std::vector<MachineSnapshot>& machines,
                                    const std::vector<MergedTask>& batch,
                                    std::size_t existing_index,
                                    const MergedTask& merged, double alpha,
                                    Time now);

struct MergeConfig {
  MergePolicy policy = MergePolicy::Adaptive;
  PositionFinder position_finder = PositionFinder::Off;
  QueuingPolicy queuing = QueuingPolicy::Fcfs;
  int max_group_size = 5;
};

struct MergeCounters {
  std::int64_t task_level = 0;
  std::int64_t data_op = 0;
  std::int64_t data_only = 0;
  std::int64_t rejected = 0;
  std::int64_t members_absorbed = 0;
};

// Admission control: decides on every arrival whether it joins an existing
// batch entry or queues on its own, and keeps the lookup tables consistent.
class Merger {
 public:
  Merger(MergeConfig cfg, SavingModel model);

  struct Outcome {
    bool merged = false;
    std::int64_t group = -1;
    SimilarityLevel level = SimilarityLevel::Task;
  };

  Outcome on_arrival(const TaskSpec& spec, double mu, double sigma,
                     std::vector<MergedTask>& batch,
                     const std::vector<MachineSnapshot>& machines, Time now);

  // A batch entry left the queue (dispatched or pruned).
  void on_leave_queue(std::int64_t id);

  const MergeCounters& counters() const { return counters_; }
  const SimilarityTables& tables() const { return tables_; }
  double alpha() const { return alpha_; }

 private:
  MergeConfig cfg_;
  SavingModel model_;
  SimilarityTables tables_;
  MergeCounters counters_;
  double alpha_ = 2.0;
};

}  // namespace psched
