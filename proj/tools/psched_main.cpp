#include <atomic>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "nlohmann/json.hpp"
#include "psched/engine.hpp"
#include "psched/metrics.hpp"
#include "psched/stats.hpp"
#include "psched/workload.hpp"

namespace {

using nlohmann::json;
using namespace psched;

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    fail("config " + path + ": " + e.what());
  }
  if (!j.is_object()) fail("config " + path + ": top level must be an object");
  return j;
}

void check_keys(const json& j, const std::vector<std::string>& allowed,
                const std::string& block) {
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      fail("config " + block + ": unknown field \"" + key + "\"");
    }
  }
}

// "a.b.c=value": value is parsed as JSON when possible, kept verbatim otherwise.
void apply_override(json& cfg, const std::string& kv) {
  const std::size_t eq = kv.find('=');
  if (eq == std::string::npos || eq == 0) fail("--set expects path=value, got: " + kv);
  const std::string path = kv.substr(0, eq);
  const std::string raw = kv.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;
  }
  json* node = &cfg;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = path.find('.', start);
    const std::string key = path.substr(start, dot - start);
    if (key.empty()) fail("--set path has an empty segment: " + path);
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    node = &(*node)[key];
    if (!node->is_object() && !node->is_null()) {
      fail("--set path " + path + ": \"" + key + "\" is not an object");
    }
    start = dot + 1;
  }
}

ArrivalPattern parse_pattern(const std::string& s) {
  if (s == "constant") return ArrivalPattern::Constant;
  if (s == "spiky") return ArrivalPattern::Spiky;
  if (s == "base-high") return ArrivalPattern::BaseHigh;
  fail("unknown arrival pattern \"" + s + "\" (constant, spiky, base-high)");
}

DropRegime parse_regime(const std::string& s) {
  if (s == "none") return DropRegime::None;
  if (s == "pending") return DropRegime::PendingOnly;
  if (s == "evict") return DropRegime::Evict;
  fail("unknown drop regime \"" + s + "\" (none, pending, evict)");
}

ArrivalConfig parse_trace_gen(const json& j) {
  check_keys(j,
             {"tasks", "span", "pattern", "spike_multiplier", "spike_fraction",
              "high_multiplier", "base_to_high_ratio", "cycles", "beta_min",
              "beta_max", "signature_streams", "segments_per_stream", "group_size"},
             "trace_gen");
  ArrivalConfig ac;
  ac.total_tasks = j.value("tasks", ac.total_tasks);
  ac.span = j.value("span", ac.span);
  ac.pattern = parse_pattern(j.value("pattern", std::string("constant")));
  ac.spike_multiplier = j.value("spike_multiplier", ac.spike_multiplier);
  ac.spike_fraction = j.value("spike_fraction", ac.spike_fraction);
  ac.high_multiplier = j.value("high_multiplier", ac.high_multiplier);
  ac.base_to_high_ratio = j.value("base_to_high_ratio", ac.base_to_high_ratio);
  ac.cycles = j.value("cycles", ac.cycles);
  ac.beta_min = j.value("beta_min", ac.beta_min);
  ac.beta_max = j.value("beta_max", ac.beta_max);
  ac.signature_streams = j.value("signature_streams", ac.signature_streams);
  ac.segments_per_stream = j.value("segments_per_stream", ac.segments_per_stream);
  ac.group_size = j.value("group_size", ac.group_size);
  return ac;
}

PetMatrix build_pet(const json& cfg) {
  if (cfg.contains("pet") && cfg.contains("pet_gen")) {
    fail("config: give either pet or pet_gen, not both");
  }
  if (cfg.contains("pet")) {
    std::vector<std::string> warnings;
    PetMatrix pet = load_pet_file(cfg.at("pet").get<std::string>(), &warnings);
    for (const std::string& w : warnings) std::cerr << "pet: " << w << "\n";
    return pet;
  }
  if (!cfg.contains("pet_gen")) fail("config: needs pet (path) or pet_gen (block)");
  const json& j = cfg.at("pet_gen");
  check_keys(j,
             {"task_types", "machine_types", "mean_lo", "mean_hi", "shape_min",
              "shape_max", "samples", "seed"},
             "pet_gen");
  const int tt = j.value("task_types", 12);
  const int mt = j.value("machine_types", 8);
  const double lo = j.value("mean_lo", 10.0);
  const double hi = j.value("mean_hi", 40.0);
  const std::uint64_t seed = j.value("seed", 7ULL);
  return generate_pet(random_means(tt, mt, lo, hi, seed), seed,
                      j.value("shape_min", 1.0), j.value("shape_max", 20.0),
                      j.value("samples", 500));
}

std::vector<int> parse_machines(const json& cfg, int pet_machine_types) {
  if (!cfg.contains("machines")) fail("config: needs a machines block");
  const json& j = cfg.at("machines");
  if (j.is_array()) return j.get<std::vector<int>>();
  check_keys(j, {"count", "layout", "machine_types", "type"}, "machines");
  const int count = j.value("count", 8);
  const std::string layout = j.value("layout", std::string("heterogeneous"));
  if (layout == "heterogeneous") {
    return heterogeneous_machines(count, j.value("machine_types", pet_machine_types));
  }
  if (layout == "homogeneous") {
    return homogeneous_machines(count, j.value("type", 0));
  }
  fail("config machines.layout: \"" + layout + "\" (heterogeneous, homogeneous)");
}

SimConfig parse_sim(const json& cfg, int pet_machine_types) {
  SimConfig sim;
  sim.machine_types = parse_machines(cfg, pet_machine_types);
  sim.queue_capacity = cfg.value("queue_capacity", sim.queue_capacity);
  sim.heuristic = parse_heuristic(cfg.value("heuristic", std::string("mct")));
  sim.drop_expired = cfg.value("drop_expired", sim.drop_expired);
  sim.compact_limit = cfg.value("compact_limit", sim.compact_limit);
  sim.fairness_theta = cfg.value("fairness_theta", sim.fairness_theta);
  const std::string mode = cfg.value("chance_mode", std::string("approximate"));
  if (mode == "approximate") {
    sim.chance_mode = ChanceMode::Approximate;
  } else if (mode == "exact") {
    sim.chance_mode = ChanceMode::Exact;
  } else {
    fail("config chance_mode: \"" + mode + "\" (approximate, exact)");
  }

  if (cfg.contains("pruning")) {
    const json& j = cfg.at("pruning");
    check_keys(j,
               {"enabled", "drop_threshold", "defer_threshold", "rho", "lambda",
                "theta", "schmitt_on", "schmitt_enabled", "regime", "dynamic_defer"},
               "pruning");
    sim.pruning.enabled = j.value("enabled", true);
    PrunerConfig& pc = sim.pruning.config;
    pc.base_drop_threshold = j.value("drop_threshold", pc.base_drop_threshold);
    pc.initial_defer_threshold = j.value("defer_threshold", pc.initial_defer_threshold);
    pc.rho = j.value("rho", pc.rho);
    pc.lambda = j.value("lambda", pc.lambda);
    pc.theta = j.value("theta", pc.theta);
    pc.schmitt.on_level = j.value("schmitt_on", pc.schmitt.on_level);
    pc.schmitt.enabled = j.value("schmitt_enabled", pc.schmitt.enabled);
    pc.regime = parse_regime(j.value("regime", std::string("none")));
    pc.dynamic_defer = j.value("dynamic_defer", pc.dynamic_defer);
  }

  if (cfg.contains("merging")) {
    const json& j = cfg.at("merging");
    check_keys(j,
               {"enabled", "policy", "position_finder", "queuing", "max_group_size",
                "saving_table_path"},
               "merging");
    sim.merging.enabled = j.value("enabled", true);
    MergeConfig& mc = sim.merging.config;
    mc.policy = parse_merge_policy(j.value("policy", std::string("adaptive")));
    mc.position_finder =
        parse_position_finder(j.value("position_finder", std::string("off")));
    mc.queuing = parse_queuing_policy(j.value("queuing", std::string("fcfs")));
    mc.max_group_size = j.value("max_group_size", mc.max_group_size);
    if (j.contains("saving_table_path")) {
      sim.merging.saving =
          SavingModel::load_csv_file(j.at("saving_table_path").get<std::string>());
    }
  }
  return sim;
}

RatesTable parse_rates(const json& cfg, int machine_types) {
  if (!cfg.contains("rates")) return RatesTable::defaults(machine_types);
  RatesTable rates;
  for (const json& j : cfg.at("rates")) {
    check_keys(j, {"price", "power", "active_fraction", "idle_fraction"}, "rates");
    MachineRates r;
    r.price_per_unit = j.value("price", r.price_per_unit);
    r.rated_power = j.value("power", r.rated_power);
    r.active_fraction = j.value("active_fraction", r.active_fraction);
    r.idle_fraction = j.value("idle_fraction", r.idle_fraction);
    rates.per_machine_type.push_back(r);
  }
  if (rates.per_machine_type.empty()) fail("config rates: needs at least one entry");
  return rates;
}

const std::vector<std::string> kTopLevelKeys = {
    "pet",           "pet_gen",  "trace",   "trace_gen",     "machines",
    "queue_capacity", "heuristic", "pruning", "merging",       "chance_mode",
    "compact_limit", "fairness_theta", "drop_expired", "rates", "trials",
    "seed",          "output",   "event_log"};

std::string hash_hex(const std::string& bytes) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a(bytes)));
  return buf;
}

void write_file(const std::string& path, const std::string& content) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p);
  if (!out) fail("cannot write " + path);
  out << content;
}

struct TrialSet {
  std::vector<MetricsReport> reports;
  std::vector<double> mapping_seconds;
};

TrialSet run_trials(const json& cfg, int jobs, const std::string& event_log_path) {
  check_keys(cfg, kTopLevelKeys, "top level");
  const int trials = cfg.value("trials", 30);
  if (trials < 1) fail("config trials: must be >= 1");
  const std::uint64_t seed_base = cfg.value("seed", 1ULL);

  const PetMatrix pet = build_pet(cfg);
  if (cfg.contains("trace") && cfg.contains("trace_gen")) {
    fail("config: give either trace or trace_gen, not both");
  }
  std::optional<std::vector<TaskSpec>> fixed_trace;
  std::optional<ArrivalConfig> trace_gen;
  if (cfg.contains("trace")) {
    fixed_trace = load_trace_file(cfg.at("trace").get<std::string>(), pet.task_types());
  } else if (cfg.contains("trace_gen")) {
    trace_gen = parse_trace_gen(cfg.at("trace_gen"));
  } else {
    fail("config: needs trace (path) or trace_gen (block)");
  }
  const SimConfig base_sim = parse_sim(cfg, pet.machine_types());
  const RatesTable rates = parse_rates(cfg, pet.machine_types());
  const std::string config_hash = hash_hex(cfg.dump());

  TrialSet set;
  set.reports.resize(static_cast<std::size_t>(trials));
  set.mapping_seconds.resize(static_cast<std::size_t>(trials));
  std::atomic<int> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;

  auto worker = [&]() {
    for (int t = next.fetch_add(1); t < trials; t = next.fetch_add(1)) {
      try {
        const std::uint64_t seed = seed_base + static_cast<std::uint64_t>(t);
        std::vector<TaskSpec> trace;
        if (fixed_trace) {
          trace = *fixed_trace;
        } else {
          ArrivalConfig ac = *trace_gen;
          ac.seed = seed;
          trace = generate_trace(ac, pet);
        }
        SimConfig sim = base_sim;
        sim.seed = seed;
        RunResult result;
        if (t == 0 && !event_log_path.empty()) {
          std::ofstream log(event_log_path);
          if (!log) fail("cannot write " + event_log_path);
          result = run(sim, trace, pet, &log);
        } else {
          result = run(sim, trace, pet);
        }
        MetricsReport rep = finalize(result.stats, rates);
        rep.seed = seed;
        rep.config_hash = config_hash;
        set.reports[static_cast<std::size_t>(t)] = std::move(rep);
        set.mapping_seconds[static_cast<std::size_t>(t)] = result.mapping_seconds;
      } catch (...) {
        const std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };

  const int workers = std::max(1, std::min(jobs, trials));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
    for (std::thread& th : pool) th.join();
  }
  if (error) std::rethrow_exception(error);
  return set;
}

json aggregate_reports(const std::vector<MetricsReport>& reports) {
  json out;
  out["trials"] = reports.size();
  out["config_hash"] = reports.front().config_hash;
  json metrics = json::object();
  const auto names = numeric_fields(reports.front());
  for (std::size_t f = 0; f < names.size(); ++f) {
    std::vector<double> xs;
    xs.reserve(reports.size());
    for (const MetricsReport& r : reports) xs.push_back(numeric_fields(r)[f].second);
    const CiSummary ci = ci95(xs);
    metrics[names[f].first] = {
        {"mean", ci.mean}, {"ci95", ci.half_width}, {"degenerate", ci.degenerate}};
  }
  out["metrics"] = metrics;
  return out;
}

std::string trials_csv(const std::vector<MetricsReport>& reports) {
  std::string out = csv_header(reports.front());
  for (std::size_t t = 0; t < reports.size(); ++t) {
    out += csv_row(reports[t], static_cast<int>(t));
  }
  return out;
}

void print_summary(const json& aggregate, const std::string& label) {
  const json& m = aggregate.at("metrics");
  auto line = [&](const char* name) {
    const json& v = m.at(name);
    std::printf("  %-18s %.6g +/- %.6g\n", name, v.at("mean").get<double>(),
                v.at("ci95").get<double>());
  };
  std::printf("%s: %lld trial(s), config %s\n", label.c_str(),
              static_cast<long long>(aggregate.at("trials").get<std::int64_t>()),
              aggregate.at("config_hash").get<std::string>().c_str());
  line("robustness");
  line("miss_rate");
  line("dropped_fraction");
  line("makespan");
  line("fairness_std");
  line("cost_per_ontime");
  line("energy_per_ontime");
}

double mean_of_vec(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return xs.empty() ? 0.0 : s / static_cast<double>(xs.size());
}

int cmd_run(const std::string& config_path, const std::vector<std::string>& sets,
            int jobs, bool quiet, const std::string& out_override,
            const std::string& event_log_path) {
  json cfg = load_json_file(config_path);
  for (const std::string& kv : sets) apply_override(cfg, kv);
  const std::string prefix =
      !out_override.empty() ? out_override : cfg.value("output", std::string("psched"));

  const TrialSet set = run_trials(cfg, jobs, event_log_path);
  const json aggregate = aggregate_reports(set.reports);

  write_file(prefix + "_trials.csv", trials_csv(set.reports));
  write_file(prefix + "_aggregate.json", aggregate.dump(1) + "\n");
  std::cerr << "wrote " << prefix << "_trials.csv and " << prefix
            << "_aggregate.json (mean mapping wall clock "
            << mean_of_vec(set.mapping_seconds) << " s/trial)\n";
  if (quiet) {
    std::printf("%s\n", aggregate.dump(1).c_str());
  } else {
    print_summary(aggregate, "run");
  }
  return 0;
}

int cmd_sweep(const std::string& config_path, const std::vector<std::string>& sets,
              const std::string& axis, const std::vector<std::string>& values,
              int jobs, bool quiet, const std::string& out_override) {
  if (values.empty()) fail("sweep: needs at least one --values entry");
  const std::string head = axis.substr(0, axis.find('.'));
  if (std::find(kTopLevelKeys.begin(), kTopLevelKeys.end(), head) ==
      kTopLevelKeys.end()) {
    fail("sweep: unknown axis \"" + axis + "\"");
  }
  json base = load_json_file(config_path);
  for (const std::string& kv : sets) apply_override(base, kv);
  const std::string prefix =
      !out_override.empty() ? out_override : base.value("output", std::string("psched"));

  json combined = json::array();
  std::string csv;
  for (std::size_t i = 0; i < values.size(); ++i) {
    json cfg = base;
    apply_override(cfg, axis + "=" + values[i]);
    std::cerr << "sweep point " << i + 1 << "/" << values.size() << ": " << axis
              << "=" << values[i] << "\n";
    const TrialSet set = run_trials(cfg, jobs, "");
    const json aggregate = aggregate_reports(set.reports);
    combined.push_back({{"axis", axis}, {"value", values[i]}, {"aggregate", aggregate}});

    if (i == 0) {
      csv = "axis,value,trials";
      for (const auto& [name, v] : numeric_fields(set.reports.front())) {
        csv += ',' + name + "_mean," + name + "_ci95";
      }
      csv += '\n';
    }
    std::string row = axis + ',' + values[i] + ',' + std::to_string(set.reports.size());
    const json& metrics = aggregate.at("metrics");
    for (const auto& [name, v] : numeric_fields(set.reports.front())) {
      char buf[64];
      std::snprintf(buf, sizeof buf, ",%.12g,%.12g",
                    metrics.at(name).at("mean").get<double>(),
                    metrics.at(name).at("ci95").get<double>());
      row += buf;
    }
    csv += row + '\n';
    if (!quiet) print_summary(aggregate, axis + "=" + values[i]);
  }

  write_file(prefix + "_sweep.csv", csv);
  write_file(prefix + "_sweep.json", combined.dump(1) + "\n");
  std::cerr << "wrote " << prefix << "_sweep.csv and " << prefix << "_sweep.json\n";
  if (quiet) std::printf("%s\n", combined.dump(1).c_str());
  return 0;
}

std::vector<std::vector<double>> load_means_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open means file: " + path);
  std::vector<std::vector<double>> means;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        const double v = std::stod(cell, &used);
        if (used != cell.size() || v <= 0.0) throw std::invalid_argument(cell);
        row.push_back(v);
      } catch (const std::exception&) {
        fail("means file line " + std::to_string(line_no) +
             ": bad mean value \"" + cell + "\"");
      }
    }
    if (!means.empty() && row.size() != means.front().size()) {
      fail("means file line " + std::to_string(line_no) + ": ragged row");
    }
    means.push_back(std::move(row));
  }
  if (means.empty()) fail("means file " + path + " is empty");
  return means;
}

int cmd_gen_pet(const std::string& out, const std::string& means_path, int task_types,
                int machine_types, double mean_lo, double mean_hi, double shape_min,
                double shape_max, int samples, std::uint64_t seed) {
  std::vector<std::vector<double>> means;
  if (!means_path.empty()) {
    means = load_means_csv(means_path);
  } else {
    means = random_means(task_types, machine_types, mean_lo, mean_hi, seed);
  }
  const PetMatrix pet = generate_pet(means, seed, shape_min, shape_max, samples);
  save_pet_file(pet, out);
  std::cerr << "wrote " << out << " (" << pet.task_types() << " task types x "
            << pet.machine_types() << " machine types)\n";
  return 0;
}

int cmd_gen_trace(const std::string& pet_path, const std::string& out, int tasks,
                  Time span, const std::string& pattern, double spike_multiplier,
                  double spike_fraction, double high_multiplier,
                  double base_to_high_ratio, int cycles, double beta_min,
                  double beta_max, int streams, int segments, int group_size,
                  std::uint64_t seed) {
  const PetMatrix pet = load_pet_file(pet_path);
  ArrivalConfig ac;
  ac.total_tasks = tasks;
  ac.span = span;
  ac.pattern = parse_pattern(pattern);
  ac.spike_multiplier = spike_multiplier;
  ac.spike_fraction = spike_fraction;
  ac.high_multiplier = high_multiplier;
  ac.base_to_high_ratio = base_to_high_ratio;
  ac.cycles = cycles;
  ac.beta_min = beta_min;
  ac.beta_max = beta_max;
  ac.signature_streams = streams;
  ac.segments_per_stream = segments;
  ac.group_size = group_size;
  ac.seed = seed;
  const std::vector<TaskSpec> trace = generate_trace(ac, pet);
  save_trace_file(trace, out);
  std::cerr << "wrote " << out << " (" << trace.size() << " tasks)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"oversubscribed scheduling simulator"};
  app.require_subcommand(1);
  int rc = 0;

  std::string config_path;
  std::vector<std::string> sets;
  int jobs = 1;
  bool quiet = false;
  std::string out_override;
  std::string event_log_path;

  CLI::App* run_cmd = app.add_subcommand("run", "run one configuration");
  run_cmd->add_option("-c,--config", config_path, "JSON run config")->required();
  run_cmd->add_option("--set", sets, "override a config field (dotted.path=value)");
  run_cmd->add_option("-j,--jobs", jobs, "parallel trials");
  run_cmd->add_flag("-q,--quiet", quiet, "machine-readable stdout only");
  run_cmd->add_option("-o,--out", out_override, "output path prefix");
  run_cmd->add_option("--event-log", event_log_path,
                      "write trial 0's event log (JSON lines)");
  run_cmd->callback([&]() {
    rc = cmd_run(config_path, sets, jobs, quiet, out_override, event_log_path);
  });

  std::string axis;
  std::vector<std::string> values;
  CLI::App* sweep_cmd = app.add_subcommand("sweep", "run one config across axis values");
  sweep_cmd->add_option("-c,--config", config_path, "JSON run config")->required();
  sweep_cmd->add_option("--axis", axis, "config path to vary")->required();
  sweep_cmd->add_option("--values", values, "axis values")->required()->delimiter(',');
  sweep_cmd->add_option("--set", sets, "override a config field (dotted.path=value)");
  sweep_cmd->add_option("-j,--jobs", jobs, "parallel trials");
  sweep_cmd->add_flag("-q,--quiet", quiet, "machine-readable stdout only");
  sweep_cmd->add_option("-o,--out", out_override, "output path prefix");
  sweep_cmd->callback([&]() {
    rc = cmd_sweep(config_path, sets, axis, values, jobs, quiet, out_override);
  });

  std::string out_path;
  std::string means_path;
  int task_types = 12;
  int machine_types = 8;
  double mean_lo = 10.0;
  double mean_hi = 40.0;
  double shape_min = 1.0;
  double shape_max = 20.0;
  int samples = 500;
  std::uint64_t seed = 7;
  CLI::App* pet_cmd = app.add_subcommand("gen-pet", "generate an execution-time matrix");
  pet_cmd->add_option("-o,--out", out_path, "output PET JSON path")->required();
  pet_cmd->add_option("--means", means_path, "CSV of mean execution times");
  pet_cmd->add_option("--task-types", task_types, "task type count");
  pet_cmd->add_option("--machine-types", machine_types, "machine type count");
  pet_cmd->add_option("--mean-lo", mean_lo, "lower mean bound");
  pet_cmd->add_option("--mean-hi", mean_hi, "upper mean bound");
  pet_cmd->add_option("--shape-min", shape_min, "gamma shape lower bound");
  pet_cmd->add_option("--shape-max", shape_max, "gamma shape upper bound");
  pet_cmd->add_option("--samples", samples, "draws per matrix entry");
  pet_cmd->add_option("--seed", seed, "generator seed");
  pet_cmd->callback([&]() {
    rc = cmd_gen_pet(out_path, means_path, task_types, machine_types, mean_lo,
                     mean_hi, shape_min, shape_max, samples, seed);
  });

  std::string pet_path;
  int tasks = 1200;
  Time span = 10000;
  std::string pattern = "constant";
  double spike_multiplier = 3.0;
  double spike_fraction = 1.0 / 3.0;
  double high_multiplier = 2.0;
  double base_to_high_ratio = 3.0;
  int cycles = 10;
  double beta_min = 0.8;
  double beta_max = 2.5;
  int streams = 0;
  int segments = 24;
  int group_size = 5;
  CLI::App* trace_cmd = app.add_subcommand("gen-trace", "generate an arrival trace");
  trace_cmd->add_option("--pet", pet_path, "PET JSON (for deadline slack)")->required();
  trace_cmd->add_option("-o,--out", out_path, "output trace CSV path")->required();
  trace_cmd->add_option("--tasks", tasks, "task count");
  trace_cmd->add_option("--span", span, "arrival span (time units)");
  trace_cmd->add_option("--pattern", pattern, "constant, spiky or base-high");
  trace_cmd->add_option("--spike-multiplier", spike_multiplier, "spike rate multiple");
  trace_cmd->add_option("--spike-fraction", spike_fraction, "spike share of a cycle");
  trace_cmd->add_option("--high-multiplier", high_multiplier, "elevated rate multiple");
  trace_cmd->add_option("--base-ratio", base_to_high_ratio, "base to high length ratio");
  trace_cmd->add_option("--cycles", cycles, "pattern cycles over the span");
  trace_cmd->add_option("--beta-min", beta_min, "deadline slack lower bound");
  trace_cmd->add_option("--beta-max", beta_max, "deadline slack upper bound");
  trace_cmd->add_option("--streams", streams, "mergeable signature streams (0 = off)");
  trace_cmd->add_option("--segments", segments, "segments per stream");
  trace_cmd->add_option("--group-size", group_size, "arrivals per signature burst");
  trace_cmd->add_option("--seed", seed, "generator seed");
  trace_cmd->callback([&]() {
    rc = cmd_gen_trace(pet_path, out_path, tasks, span, pattern, spike_multiplier,
                       spike_fraction, high_multiplier, base_to_high_ratio, cycles,
                       beta_min, beta_max, streams, segments, group_size, seed);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return rc;
}
