#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "psched/pmf.hpp"

namespace psched {

struct TaskType {
  int id = 0;
  std::string name;
  std::map<int, double> mean_exec;  // machine type -> mean execution time
};

// Execution-time distributions for every (task type, machine type) pair,
// stored row-major by task type.
struct PetMatrix {
  std::vector<std::string> task_type_names;
  std::vector<std::string> machine_type_names;
  std::vector<Pmf> pmfs;

  int task_types() const { return static_cast<int>(task_type_names.size()); }
  int machine_types() const { return static_cast<int>(machine_type_names.size()); }
  const Pmf& at(int task_type, int machine_type) const {
    return pmfs[static_cast<std::size_t>(task_type) * machine_type_names.size() +
                static_cast<std::size_t>(machine_type)];
  }
  // Mean execution time of the task type averaged over machine types,
  // rounded half-up; used for deadline slack.
  Time avg_exec(int task_type) const;
  Time avg_exec_all() const;
};

struct TaskSpec {
  std::int64_t id = 0;
  int type = 0;
  Time arrival = 0;
  Time deadline = 0;
  std::string data_id;
  std::string operation;
  std::string params;
  int priority = 0;

  bool operator==(const TaskSpec&) const = default;
};

enum class ArrivalPattern { Constant, Spiky, BaseHigh };

struct ArrivalConfig {
  int total_tasks = 1200;
  Time span = 10000;
  ArrivalPattern pattern = ArrivalPattern::Constant;
  // Spiky: short bursts at the configured multiple of the lull rate, each
  // burst lasting spike_fraction of the lull period.
  double spike_multiplier = 3.0;
  double spike_fraction = 1.0 / 3.0;
  // BaseHigh: alternating base and elevated periods, base periods
  // base_to_high_ratio times longer.
  double high_multiplier = 2.0;
  double base_to_high_ratio = 3.0;
  int cycles = 10;
  double beta_min = 0.8;
  double beta_max = 2.5;
  // Mergeable signatures: 0 streams disables signature synthesis. When
  // enabled, tasks arrive in groups of group_size consecutive segments of a
  // stream picked from a Zipf-like popularity distribution.
  int signature_streams = 0;
  int segments_per_stream = 24;
  int group_size = 5;
  std::uint64_t seed = 1;
};

// Per-entry PMFs built from gamma samples: shape drawn uniformly from
// shape_range, scale fixed by the requested mean, `samples` draws rounded to
// whole time units and histogrammed at unit width.
PetMatrix generate_pet(const std::vector<std::vector<double>>& means,
                       std::uint64_t seed, double shape_min = 1.0,
                       double shape_max = 20.0, int samples = 500);

// Uniformly random mean matrix in [lo, hi]; convenience for default setups.
std::vector<std::vector<double>> random_means(int task_types, int machine_types,
                                              double lo, double hi,
                                              std::uint64_t seed);

Time assign_deadline(Time arrival, Time avg_type, Time avg_all, double beta);

std::vector<TaskSpec> generate_trace(const ArrivalConfig& cfg,
                                     const PetMatrix& pet);

// CSV with header id,type,arrival,deadline,data_id,operation,params,priority.
void save_trace(const std::vector<TaskSpec>& trace, std::ostream& out);
void save_trace_file(const std::vector<TaskSpec>& trace, const std::string& path);
// Throws std::runtime_error with the offending line/column; type ids are
// validated against num_types when non-negative.
std::vector<TaskSpec> load_trace(std::istream& in, int num_types = -1);
std::vector<TaskSpec> load_trace_file(const std::string& path, int num_types = -1);

void save_pet_file(const PetMatrix& pet, const std::string& path);
// Entries whose mass strays from 1 are reported in `warnings` (one line per
// entry), not treated as errors.
PetMatrix load_pet_file(const std::string& path,
                        std::vector<std::string>* warnings = nullptr);

}  // namespace psched
