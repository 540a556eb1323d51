#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "psched/pmf.hpp"

namespace psched {

struct MachineRates {
  double price_per_unit = 1e-4;  // currency per busy time unit
  double rated_power = 250.0;    // watts
  double active_fraction = 0.70;
  double idle_fraction = 0.25;
};

struct RatesTable {
  std::vector<MachineRates> per_machine_type;
  // Tiers loosely modeled on public cloud instance classes; inputs, not
  // constants, and overridable from the run config.
  static RatesTable defaults(int machine_types);
  const MachineRates& at(int machine_type) const {
    return per_machine_type[static_cast<std::size_t>(machine_type) %
                            per_machine_type.size()];
  }
};

enum class TerminalKind { OnTime, Late, DroppedExpired, DroppedPruned };

struct TerminalRecord {
  Time time = 0;
  std::int64_t task = 0;
  int type = 0;
  TerminalKind kind = TerminalKind::OnTime;
};

struct MachineUsage {
  int machine_type = 0;
  Time busy = 0;
  Time idle = 0;
};

// Raw tallies out of one simulation run, in event order.
struct RunStats {
  std::int64_t total_tasks = 0;
  int task_types = 0;
  std::vector<TerminalRecord> terminals;
  std::int64_t deferred_end = 0;
  Time makespan = 0;
  std::vector<MachineUsage> machines;
  std::int64_t defer_events = 0;
  std::int64_t drop_toggle_on = 0;
  std::int64_t merges_task_level = 0;
  std::int64_t merges_data_op = 0;
  std::int64_t merges_data_only = 0;
  std::int64_t merged_members = 0;
  std::int64_t merge_rejected = 0;
  std::int64_t mapping_events = 0;
};

struct MetricsReport {
  std::int64_t total_tasks = 0;
  std::int64_t window_tasks = 0;  // terminal events inside the exclusion window
  double robustness = 0.0;        // on-time fraction over the window
  double miss_rate = 0.0;         // late fraction over the window
  double dropped_fraction = 0.0;  // dropped fraction over the window
  std::int64_t ontime = 0;        // raw counts over the whole run
  std::int64_t late = 0;
  std::int64_t dropped_expired = 0;
  std::int64_t dropped_pruned = 0;
  std::int64_t deferred_end = 0;
  Time makespan = 0;
  std::vector<double> per_type_ontime;            // windowed, -1 when unseen
  std::vector<std::int64_t> per_type_window_total;
  double fairness_std = 0.0;
  std::vector<MachineUsage> machines;
  double total_cost = 0.0;
  double total_energy = 0.0;  // watt x time unit
  double cost_per_ontime = 0.0;
  double energy_per_ontime = 0.0;
  std::int64_t defer_events = 0;
  std::int64_t drop_toggle_on = 0;
  std::int64_t merges_task_level = 0;
  std::int64_t merges_data_op = 0;
  std::int64_t merges_data_only = 0;
  std::int64_t merged_members = 0;
  std::int64_t merge_rejected = 0;
  std::int64_t mapping_events = 0;
  std::uint64_t seed = 0;
  std::string config_hash;
};

// Population standard deviation; ignores entries < 0 (unseen types).
double fairness_std(const std::vector<double>& fractions);

MetricsReport finalize(const RunStats& stats, const RatesTable& rates);

// Flattened numeric view used by the CSV writer and the trial aggregator.
std::vector<std::pair<std::string, double>> numeric_fields(const MetricsReport& r);
std::string csv_header(const MetricsReport& sample);
std::string csv_row(const MetricsReport& r, int trial);
std::string report_json(const MetricsReport& r, int indent = 1);

}  // namespace psched
