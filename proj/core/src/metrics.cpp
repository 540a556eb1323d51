#include "psched/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include "json.hpp"

namespace psched {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

}  // namespace

RatesTable RatesTable::defaults(int machine_types) {
  static const MachineRates kTiers[] = {
      {0.70e-4, 180.0, 0.70, 0.25}, {0.90e-4, 220.0, 0.70, 0.25},
      {1.00e-4, 250.0, 0.70, 0.25}, {1.10e-4, 280.0, 0.70, 0.25},
      {1.20e-4, 300.0, 0.70, 0.25}, {1.30e-4, 320.0, 0.70, 0.25},
      {1.50e-4, 350.0, 0.70, 0.25}, {1.80e-4, 400.0, 0.70, 0.25},
  };
  RatesTable out;
  for (int m = 0; m < machine_types; ++m) {
    out.per_machine_type.push_back(kTiers[m % 8]);
  }
  return out;
}

double fairness_std(const std::vector<double>& fractions) {
  double sum = 0.0;
  int n = 0;
  for (double f : fractions) {
    if (f >= 0.0) {
      sum += f;
      ++n;
    }
  }
  if (n == 0) return 0.0;
  const double mu = sum / n;
  double acc = 0.0;
  for (double f : fractions) {
    if (f >= 0.0) acc += (f - mu) * (f - mu);
  }
  return std::sqrt(acc / n);
}

MetricsReport finalize(const RunStats& stats, const RatesTable& rates) {
  MetricsReport r;
  r.total_tasks = stats.total_tasks;
  r.deferred_end = stats.deferred_end;
  r.makespan = stats.makespan;
  r.machines = stats.machines;
  r.defer_events = stats.defer_events;
  r.drop_toggle_on = stats.drop_toggle_on;
  r.merges_task_level = stats.merges_task_level;
  r.merges_data_op = stats.merges_data_op;
  r.merges_data_only = stats.merges_data_only;
  r.merged_members = stats.merged_members;
  r.merge_rejected = stats.merge_rejected;
  r.mapping_events = stats.mapping_events;

  for (const TerminalRecord& t : stats.terminals) {
    switch (t.kind) {
      case TerminalKind::OnTime: ++r.ontime; break;
      case TerminalKind::Late: ++r.late; break;
      case TerminalKind::DroppedExpired: ++r.dropped_expired; break;
      case TerminalKind::DroppedPruned: ++r.dropped_pruned; break;
    }
  }

  // Warm-up and drain exclusion: drop the first and last 100 terminal
  // events, shrunk to 5% per end for small traces.
  const std::int64_t excl =
      stats.total_tasks >= 400 ? 100 : stats.total_tasks / 20;
  const auto& ts = stats.terminals;
  const std::int64_t n = static_cast<std::int64_t>(ts.size());
  std::int64_t w_on = 0, w_late = 0, w_drop = 0;
  std::vector<std::int64_t> type_on(stats.task_types, 0);
  std::vector<std::int64_t> type_all(stats.task_types, 0);
  for (std::int64_t i = excl; i < n - excl; ++i) {
    const TerminalRecord& t = ts[static_cast<std::size_t>(i)];
    switch (t.kind) {
      case TerminalKind::OnTime: ++w_on; break;
      case TerminalKind::Late: ++w_late; break;
      default: ++w_drop; break;
    }
    if (t.type >= 0 && t.type < stats.task_types) {
      ++type_all[t.type];
      if (t.kind == TerminalKind::OnTime) ++type_on[t.type];
    }
  }
  r.window_tasks = w_on + w_late + w_drop;
  if (r.window_tasks > 0) {
    const double wn = static_cast<double>(r.window_tasks);
    r.robustness = w_on / wn;
    r.miss_rate = w_late / wn;
    r.dropped_fraction = w_drop / wn;
  }
  r.per_type_ontime.assign(stats.task_types, -1.0);
  r.per_type_window_total.assign(stats.task_types, 0);
  for (int f = 0; f < stats.task_types; ++f) {
    r.per_type_window_total[f] = type_all[f];
    if (type_all[f] > 0) {
      r.per_type_ontime[f] =
          static_cast<double>(type_on[f]) / static_cast<double>(type_all[f]);
    }
  }
  r.fairness_std = fairness_std(r.per_type_ontime);

  for (const MachineUsage& m : stats.machines) {
    const MachineRates& mr = rates.at(m.machine_type);
    r.total_cost += static_cast<double>(m.busy) * mr.price_per_unit;
    r.total_energy += (static_cast<double>(m.busy) * mr.active_fraction +
                       static_cast<double>(m.idle) * mr.idle_fraction) *
                      mr.rated_power;
  }
  if (r.robustness > 0.0) {
    r.cost_per_ontime = r.total_cost / r.robustness;
    r.energy_per_ontime = r.total_energy / r.robustness;
  } else {
    r.cost_per_ontime = std::numeric_limits<double>::infinity();
    r.energy_per_ontime = std::numeric_limits<double>::infinity();
  }
  return r;
}

std::vector<std::pair<std::string, double>> numeric_fields(const MetricsReport& r) {
  return {
      {"total_tasks", static_cast<double>(r.total_tasks)},
      {"window_tasks", static_cast<double>(r.window_tasks)},
      {"robustness", r.robustness},
      {"miss_rate", r.miss_rate},
      {"dropped_fraction", r.dropped_fraction},
      {"ontime", static_cast<double>(r.ontime)},
      {"late", static_cast<double>(r.late)},
      {"dropped_expired", static_cast<double>(r.dropped_expired)},
      {"dropped_pruned", static_cast<double>(r.dropped_pruned)},
      {"deferred_end", static_cast<double>(r.deferred_end)},
      {"makespan", static_cast<double>(r.makespan)},
      {"fairness_std", r.fairness_std},
      {"total_cost", r.total_cost},
      {"total_energy", r.total_energy},
      {"cost_per_ontime", r.cost_per_ontime},
      {"energy_per_ontime", r.energy_per_ontime},
      {"defer_events", static_cast<double>(r.defer_events)},
      {"drop_toggle_on", static_cast<double>(r.drop_toggle_on)},
      {"merges_task_level", static_cast<double>(r.merges_task_level)},
      {"merges_data_op", static_cast<double>(r.merges_data_op)},
      {"merges_data_only", static_cast<double>(r.merges_data_only)},
      {"merged_members", static_cast<double>(r.merged_members)},
      {"merge_rejected", static_cast<double>(r.merge_rejected)},
      {"mapping_events", static_cast<double>(r.mapping_events)},
  };
}

std::string csv_header(const MetricsReport& sample) {
  std::string out = "trial,seed";
  for (const auto& [name, v] : numeric_fields(sample)) {
    out += ',';
    out += name;
  }
  out += ",config_hash\n";
  return out;
}

std::string csv_row(const MetricsReport& r, int trial) {
  std::string out = std::to_string(trial) + ',' + std::to_string(r.seed);
  for (const auto& [name, v] : numeric_fields(r)) {
    out += ',';
    out += fmt(v);
  }
  out += ',';
  out += r.config_hash;
  out += '\n';
  return out;
}

std::string report_json(const MetricsReport& r, int indent) {
  nlohmann::json j;
  for (const auto& [name, v] : numeric_fields(r)) j[name] = v;
  j["seed"] = r.seed;
  j["config_hash"] = r.config_hash;
  j["per_type_ontime"] = r.per_type_ontime;
  j["per_type_window_total"] = r.per_type_window_total;
  auto& ms = j["machines"] = nlohmann::json::array();
  for (const MachineUsage& m : r.machines) {
    ms.push_back({{"machine_type", m.machine_type},
                  {"busy", m.busy},
                  {"idle", m.idle}});
  }
  return j.dump(indent);
}

}  // namespace psched
