#include "psched/engine.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "nlohmann/json.hpp"
#include "psched/metrics.hpp"

using namespace psched;

namespace {

PetMatrix make_pet(const std::vector<std::vector<Pmf>>& rows) {
  PetMatrix pet;
  for (std::size_t t = 0; t < rows.size(); ++t) {
    pet.task_type_names.push_back("t" + std::to_string(t));
  }
  for (std::size_t m = 0; m < rows[0].size(); ++m) {
    pet.machine_type_names.push_back("m" + std::to_string(m));
  }
  for (const auto& row : rows) {
    for (const Pmf& p : row) pet.pmfs.push_back(p);
  }
  return pet;
}

PetMatrix delta_pet(Time t) { return make_pet({{Pmf::delta(t)}}); }

TaskSpec tsk(std::int64_t id, Time arrival, Time deadline, int type = 0) {
  TaskSpec s;
  s.id = id;
  s.type = type;
  s.arrival = arrival;
  s.deadline = deadline;
  s.data_id = "d" + std::to_string(id);
  s.operation = "op";
  s.params = "p";
  return s;
}

SimConfig base_cfg(const std::string& heuristic, std::vector<int> machines,
                   int capacity = 3) {
  SimConfig cfg;
  cfg.machine_types = std::move(machines);
  cfg.queue_capacity = capacity;
  cfg.heuristic = parse_heuristic(heuristic);
  return cfg;
}

std::map<TerminalKind, int> kind_counts(const RunStats& stats) {
  std::map<TerminalKind, int> counts;
  for (const TerminalRecord& rec : stats.terminals) ++counts[rec.kind];
  return counts;
}

void check_conservation(const RunStats& stats) {
  CHECK(static_cast<std::int64_t>(stats.terminals.size()) + stats.deferred_end ==
        stats.total_tasks);
  std::set<std::int64_t> ids;
  for (const TerminalRecord& rec : stats.terminals) {
    CHECK(ids.insert(rec.task).second);
    CHECK(rec.time <= stats.makespan);
  }
  for (const MachineUsage& m : stats.machines) {
    CHECK(m.busy >= 0);
    CHECK(m.idle >= 0);
    CHECK(m.busy + m.idle == stats.makespan);
  }
}

std::string fingerprint(const RunStats& stats) {
  std::ostringstream out;
  for (const TerminalRecord& rec : stats.terminals) {
    out << rec.time << ':' << rec.task << ':' << rec.type << ':'
        << static_cast<int>(rec.kind) << ';';
  }
  for (const MachineUsage& m : stats.machines) {
    out << m.machine_type << ':' << m.busy << ':' << m.idle << ';';
  }
  out << stats.defer_events << ';' << stats.drop_toggle_on << ';'
      << stats.mapping_events << ';' << stats.deferred_end;
  return out.str();
}

}  // namespace

TEST_CASE("machine layout helpers cycle and repeat types") {
  CHECK(heterogeneous_machines(5, 3) == std::vector<int>{0, 1, 2, 0, 1});
  CHECK(heterogeneous_machines(2, 4) == std::vector<int>{0, 1});
  CHECK(homogeneous_machines(3) == std::vector<int>{0, 0, 0});
  CHECK(homogeneous_machines(2, 4) == std::vector<int>{4, 4});
  CHECK_THROWS_AS(heterogeneous_machines(0, 1), std::invalid_argument);
  CHECK_THROWS_AS(homogeneous_machines(-1), std::invalid_argument);
}

TEST_CASE("chain tail of an empty queue is a point at now") {
  const Pmf tail = chain_tail_pct({}, 42, DropRegime::None);
  REQUIRE(tail.size() == 1);
  CHECK(tail.impulses()[0].time == 42);
  CHECK(tail.impulses()[0].prob == doctest::Approx(1.0));
}

TEST_CASE("chain tail shifts the executing head's remaining time to now") {
  const Pmf rem = Pmf::from_pairs({{2, 0.5}, {7, 0.5}});
  const Pmf tail = chain_tail_pct({{&rem, 100, true}}, 10, DropRegime::None);
  REQUIRE(tail.size() == 2);
  CHECK(tail.impulses()[0].time == 12);
  CHECK(tail.impulses()[1].time == 17);
}

TEST_CASE("chain tail matches the step-by-step convolution oracle") {
  const Pmf rem = Pmf::from_pairs({{3, 0.5}, {9, 0.5}});
  const Pmf pet_b = Pmf::from_pairs({{4, 0.25}, {6, 0.75}});
  const Pmf pet_c = Pmf::from_pairs({{2, 1.0}});
  const Time now = 20;

  for (DropRegime regime :
       {DropRegime::None, DropRegime::PendingOnly, DropRegime::Evict}) {
    CAPTURE(static_cast<int>(regime));
    Pmf oracle = shift(rem, now);
    oracle = convolve_dropping(oracle, pet_b, 31, regime);
    oracle = convolve_dropping(oracle, pet_c, 33, regime);

    const Pmf tail = chain_tail_pct(
        {{&rem, 27, true}, {&pet_b, 31, false}, {&pet_c, 33, false}}, now, regime);
    REQUIRE(tail.size() == oracle.size());
    for (std::size_t i = 0; i < tail.size(); ++i) {
      CHECK(tail.impulses()[i].time == oracle.impulses()[i].time);
      CHECK(tail.impulses()[i].prob ==
            doctest::Approx(oracle.impulses()[i].prob).epsilon(1e-12));
    }
  }
}

TEST_CASE("empty trace yields an empty run") {
  const auto r = run(base_cfg("mct", {0}), {}, delta_pet(5));
  CHECK(r.stats.total_tasks == 0);
  CHECK(r.stats.terminals.empty());
  CHECK(r.stats.makespan == 0);
  CHECK(r.stats.mapping_events == 0);
  REQUIRE(r.stats.machines.size() == 1);
  CHECK(r.stats.machines[0].busy == 0);
  CHECK(r.stats.machines[0].idle == 0);
  CHECK(r.mapping_seconds == 0.0);
}

TEST_CASE("single deterministic task finishes on time") {
  const auto r = run(base_cfg("mct", {0}), {tsk(7, 3, 13)}, delta_pet(5));
  REQUIRE(r.stats.terminals.size() == 1);
  const TerminalRecord& rec = r.stats.terminals[0];
  CHECK(rec.time == 8);
  CHECK(rec.task == 7);
  CHECK(rec.kind == TerminalKind::OnTime);
  CHECK(r.stats.makespan == 8);
  CHECK(r.stats.machines[0].busy == 5);
  CHECK(r.stats.machines[0].idle == 3);
  CHECK(r.stats.mapping_events >= 1);
  CHECK(r.stats.deferred_end == 0);
}

TEST_CASE("fifo chain on one machine completes in arrival order") {
  const std::vector<TaskSpec> trace{tsk(1, 0, 4), tsk(2, 0, 8), tsk(3, 0, 12)};
  const auto r = run(base_cfg("fcfs-rr", {0}), trace, delta_pet(4));
  REQUIRE(r.stats.terminals.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(r.stats.terminals[i].time == static_cast<Time>(4 * (i + 1)));
    CHECK(r.stats.terminals[i].task == static_cast<std::int64_t>(i + 1));
    CHECK(r.stats.terminals[i].kind == TerminalKind::OnTime);
  }
  CHECK(r.stats.makespan == 12);
  CHECK(r.stats.machines[0].busy == 12);
  CHECK(r.stats.machines[0].idle == 0);
}

TEST_CASE("late completion is recorded when expiry is disabled") {
  SimConfig cfg = base_cfg("fcfs-rr", {0});
  cfg.drop_expired = false;
  const std::vector<TaskSpec> trace{tsk(1, 0, 4), tsk(2, 0, 7), tsk(3, 0, 12)};
  const auto r = run(cfg, trace, delta_pet(4));
  const auto counts = kind_counts(r.stats);
  CHECK(counts.at(TerminalKind::OnTime) == 2);
  CHECK(counts.at(TerminalKind::Late) == 1);
  CHECK(r.stats.terminals[1].task == 2);
  CHECK(r.stats.terminals[1].time == 8);
}

TEST_CASE("queued task expires without touching the executing head") {
  const std::vector<TaskSpec> trace{tsk(1, 0, 100), tsk(2, 0, 5)};
  const auto r = run(base_cfg("fcfs-rr", {0}), trace, delta_pet(10));
  REQUIRE(r.stats.terminals.size() == 2);
  CHECK(r.stats.terminals[0].task == 2);
  CHECK(r.stats.terminals[0].time == 5);
  CHECK(r.stats.terminals[0].kind == TerminalKind::DroppedExpired);
  CHECK(r.stats.terminals[1].task == 1);
  CHECK(r.stats.terminals[1].time == 10);
  CHECK(r.stats.terminals[1].kind == TerminalKind::OnTime);
  CHECK(r.stats.machines[0].busy == 10);
}

TEST_CASE("executing task is evicted at its deadline") {
  const std::vector<TaskSpec> trace{tsk(1, 0, 6), tsk(2, 0, 100)};
  const auto r = run(base_cfg("fcfs-rr", {0}), trace, delta_pet(10));
  REQUIRE(r.stats.terminals.size() == 2);
  CHECK(r.stats.terminals[0].task == 1);
  CHECK(r.stats.terminals[0].time == 6);
  CHECK(r.stats.terminals[0].kind == TerminalKind::DroppedExpired);
  CHECK(r.stats.terminals[1].task == 2);
  CHECK(r.stats.terminals[1].time == 16);
  CHECK(r.stats.terminals[1].kind == TerminalKind::OnTime);
  CHECK(r.stats.machines[0].busy == 16);
  CHECK(r.stats.machines[0].idle == 0);
  CHECK(r.stats.makespan == 16);
}

TEST_CASE("capacity blocks the fourth task until a slot frees") {
  const std::vector<TaskSpec> trace{tsk(1, 0, 1000), tsk(2, 0, 1000),
                                    tsk(3, 0, 1000), tsk(4, 0, 1000)};
  const auto r = run(base_cfg("mct", {0}, 3), trace, delta_pet(4));
  REQUIRE(r.stats.terminals.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(r.stats.terminals[i].time == static_cast<Time>(4 * (i + 1)));
    CHECK(r.stats.terminals[i].kind == TerminalKind::OnTime);
  }
  CHECK(r.stats.machines[0].busy == 16);
  CHECK(r.stats.machines[0].idle == 0);
}

TEST_CASE("round robin cursor persists across mapping events") {
  const std::vector<TaskSpec> trace{tsk(1, 0, 1000), tsk(2, 100, 1000),
                                    tsk(3, 200, 1000), tsk(4, 300, 1000)};
  const PetMatrix pet = make_pet({{Pmf::delta(5), Pmf::delta(5)}});
  const auto r = run(base_cfg("rr", {0, 1}), trace, pet);
  REQUIRE(r.stats.machines.size() == 2);
  CHECK(r.stats.machines[0].busy == 10);
  CHECK(r.stats.machines[1].busy == 10);
}

TEST_CASE("two runs of the same config are identical") {
  ArrivalConfig ac;
  ac.total_tasks = 120;
  ac.span = 500;
  ac.seed = 9;
  const PetMatrix pet = generate_pet(random_means(3, 2, 10, 40, 5), 11);
  const std::vector<TaskSpec> trace = generate_trace(ac, pet);

  SimConfig cfg = base_cfg("mm", {0, 1, 0});
  cfg.pruning.enabled = true;
  cfg.pruning.config.regime = DropRegime::Evict;
  cfg.pruning.config.initial_defer_threshold = 0.5;
  cfg.seed = 3;

  const auto a = run(cfg, trace, pet);
  const auto b = run(cfg, trace, pet);
  CHECK(fingerprint(a.stats) == fingerprint(b.stats));
  check_conservation(a.stats);

  cfg.seed = 4;
  const auto c = run(cfg, trace, pet);
  CHECK(fingerprint(a.stats) != fingerprint(c.stats));
}

TEST_CASE("terminal accounting is conserved across heuristics") {
  ArrivalConfig ac;
  ac.total_tasks = 150;
  ac.span = 600;
  ac.seed = 21;
  const PetMatrix pet = generate_pet(random_means(4, 3, 8, 30, 6), 22);
  const std::vector<TaskSpec> trace = generate_trace(ac, pet);

  for (const char* id : {"rr", "met", "mct", "kpb:30"}) {
    CAPTURE(id);
    SimConfig cfg = base_cfg(id, {0, 1, 2, 0, 1, 2}, 2);
    cfg.pruning.enabled = true;
    cfg.pruning.config.regime = DropRegime::Evict;
    const auto r = run(cfg, trace, pet);
    check_conservation(r.stats);
    CHECK(r.stats.total_tasks == 150);
  }
  for (const char* id : {"mm", "msd", "mmu", "moc", "pam", "pamf"}) {
    CAPTURE(id);
    SimConfig cfg = base_cfg(id, {0, 1, 2, 0, 1, 2}, 2);
    cfg.pruning.enabled = true;
    cfg.pruning.config.regime = DropRegime::PendingOnly;
    cfg.pruning.config.initial_defer_threshold = 0.4;
    const auto r = run(cfg, trace, pet);
    check_conservation(r.stats);
  }
  for (const char* id : {"fcfs-rr", "edf", "sjf", "mu"}) {
    CAPTURE(id);
    SimConfig cfg = base_cfg(id, {1, 1, 1, 1}, 2);
    const auto r = run(cfg, trace, pet);
    check_conservation(r.stats);
  }
}

TEST_CASE("inert pruning config leaves the run untouched") {
  ArrivalConfig ac;
  ac.total_tasks = 100;
  ac.span = 400;
  ac.seed = 31;
  const PetMatrix pet = generate_pet(random_means(3, 2, 10, 30, 7), 32);
  const std::vector<TaskSpec> trace = generate_trace(ac, pet);

  SimConfig off = base_cfg("msd", {0, 1});
  off.seed = 5;
  SimConfig noop = off;
  noop.pruning.enabled = true;
  noop.pruning.config.regime = DropRegime::None;
  noop.pruning.config.initial_defer_threshold = 0.0;

  const auto a = run(off, trace, pet);
  const auto b = run(noop, trace, pet);
  CHECK(fingerprint(a.stats) == fingerprint(b.stats));
  CHECK(a.stats.drop_toggle_on == 0);
  CHECK(b.stats.drop_toggle_on == 0);
}

TEST_CASE("oversubscription dropping prunes doomed work") {
  std::vector<TaskSpec> trace;
  for (int i = 0; i < 40; ++i) trace.push_back(tsk(i + 1, i, i + 25));
  SimConfig cfg = base_cfg("mct", {0, 0}, 3);
  cfg.pruning.enabled = true;
  cfg.pruning.config.regime = DropRegime::Evict;
  const auto r = run(cfg, trace, delta_pet(20));
  check_conservation(r.stats);
  const auto counts = kind_counts(r.stats);
  CHECK(counts.count(TerminalKind::DroppedPruned));
  CHECK(r.stats.drop_toggle_on >= 1);

  SimConfig pending = cfg;
  pending.pruning.config.regime = DropRegime::PendingOnly;
  const auto rp = run(pending, trace, delta_pet(20));
  check_conservation(rp.stats);
}

TEST_CASE("static deferring holds weak tasks back until they expire") {
  const Pmf bimodal = Pmf::from_pairs({{5, 0.5}, {50, 0.5}});
  const PetMatrix pet = make_pet({{bimodal}});
  const std::vector<TaskSpec> trace{tsk(1, 0, 1000), tsk(2, 0, 40),
                                    tsk(3, 0, 1000), tsk(4, 0, 40)};
  SimConfig cfg = base_cfg("mm", {0}, 2);
  cfg.pruning.enabled = true;
  cfg.pruning.config.initial_defer_threshold = 0.99;
  cfg.pruning.config.dynamic_defer = false;
  const auto r = run(cfg, trace, pet);
  check_conservation(r.stats);
  CHECK(r.stats.defer_events >= 2);
  const auto counts = kind_counts(r.stats);
  CHECK(counts.at(TerminalKind::DroppedExpired) == 2);
  CHECK(counts.at(TerminalKind::OnTime) == 2);
}

TEST_CASE("zero threshold never defers") {
  const std::vector<TaskSpec> trace{tsk(1, 0, 100), tsk(2, 0, 100)};
  SimConfig cfg = base_cfg("mm", {0});
  const auto r = run(cfg, trace, delta_pet(5));
  CHECK(r.stats.defer_events == 0);
  CHECK(kind_counts(r.stats).at(TerminalKind::OnTime) == 2);
}

TEST_CASE("probabilistic mapper parks sub-threshold tasks") {
  const std::vector<TaskSpec> trace{tsk(1, 0, 1000), tsk(2, 0, 25),
                                    tsk(3, 0, 1000)};
  SimConfig cfg = base_cfg("pam", {0});
  cfg.pruning.enabled = true;
  cfg.pruning.config.initial_defer_threshold = 0.99;
  cfg.pruning.config.dynamic_defer = false;
  const auto r = run(cfg, trace, delta_pet(30));
  check_conservation(r.stats);
  CHECK(r.stats.defer_events >= 1);
  const auto counts = kind_counts(r.stats);
  CHECK(counts.at(TerminalKind::DroppedExpired) == 1);
  CHECK(counts.at(TerminalKind::OnTime) == 2);
}

TEST_CASE("dynamic deferring adapts without losing tasks") {
  ArrivalConfig ac;
  ac.total_tasks = 120;
  ac.span = 300;
  ac.seed = 41;
  const PetMatrix pet = generate_pet(random_means(3, 2, 10, 35, 8), 42);
  const std::vector<TaskSpec> trace = generate_trace(ac, pet);
  SimConfig cfg = base_cfg("pamf", {0, 1, 0, 1}, 2);
  cfg.pruning.enabled = true;
  cfg.pruning.config.regime = DropRegime::Evict;
  cfg.pruning.config.initial_defer_threshold = 0.5;
  const auto r = run(cfg, trace, pet);
  check_conservation(r.stats);
}

TEST_CASE("merging groups identical requests and completes them together") {
  std::vector<TaskSpec> trace;
  for (int i = 0; i < 10; ++i) {
    TaskSpec s = tsk(i + 1, 0, 100);
    s.data_id = "stream";
    trace.push_back(s);
  }
  SimConfig cfg = base_cfg("fcfs-rr", {0, 0});
  cfg.drop_expired = false;
  cfg.merging.enabled = true;
  cfg.merging.config.policy = MergePolicy::Aggressive;

  const auto r = run(cfg, trace, delta_pet(10));
  check_conservation(r.stats);
  REQUIRE(r.stats.terminals.size() == 10);
  for (const TerminalRecord& rec : r.stats.terminals) {
    CHECK(rec.kind == TerminalKind::OnTime);
    CHECK(rec.time == 10);
  }
  CHECK(r.stats.makespan == 10);
  CHECK(r.stats.merges_task_level == 8);
  CHECK(r.stats.merged_members == 8);
  CHECK(r.stats.merges_data_op == 0);
  CHECK(r.stats.merges_data_only == 0);
  CHECK(r.stats.merge_rejected == 1);
  CHECK(r.stats.machines[0].busy == 10);
  CHECK(r.stats.machines[1].busy == 10);
}

TEST_CASE("merging beats the unmerged baseline on identical work") {
  std::vector<TaskSpec> trace;
  for (int i = 0; i < 10; ++i) {
    TaskSpec s = tsk(i + 1, 0, 100);
    s.data_id = "stream";
    trace.push_back(s);
  }
  SimConfig cfg = base_cfg("fcfs-rr", {0, 0});
  cfg.drop_expired = false;
  const auto off = run(cfg, trace, delta_pet(10));
  cfg.merging.enabled = true;
  cfg.merging.config.policy = MergePolicy::Aggressive;
  const auto on = run(cfg, trace, delta_pet(10));
  CHECK(off.stats.makespan == 50);
  CHECK(on.stats.makespan == 10);
}

TEST_CASE("merge bookkeeping counters reconcile") {
  ArrivalConfig ac;
  ac.total_tasks = 80;
  ac.span = 200;
  ac.signature_streams = 4;
  ac.group_size = 4;
  ac.seed = 51;
  const PetMatrix pet = generate_pet(random_means(3, 1, 10, 30, 9), 52);
  const std::vector<TaskSpec> trace = generate_trace(ac, pet);

  for (MergePolicy policy :
       {MergePolicy::Conservative, MergePolicy::Aggressive, MergePolicy::Adaptive}) {
    CAPTURE(static_cast<int>(policy));
    SimConfig cfg = base_cfg("edf", {0, 0, 0});
    cfg.drop_expired = false;
    cfg.merging.enabled = true;
    cfg.merging.config.policy = policy;
    const auto r = run(cfg, trace, pet);
    check_conservation(r.stats);
    CHECK(static_cast<std::int64_t>(r.stats.terminals.size()) == 80);
    CHECK(r.stats.merges_task_level + r.stats.merges_data_op +
              r.stats.merges_data_only ==
          r.stats.merged_members);
  }
}

TEST_CASE("merging with a position finder keeps accounting intact") {
  ArrivalConfig ac;
  ac.total_tasks = 60;
  ac.span = 150;
  ac.signature_streams = 3;
  ac.group_size = 5;
  ac.seed = 61;
  const PetMatrix pet = generate_pet(random_means(2, 1, 12, 28, 10), 62);
  const std::vector<TaskSpec> trace = generate_trace(ac, pet);
  for (PositionFinder finder : {PositionFinder::Linear, PositionFinder::Logarithmic}) {
    CAPTURE(static_cast<int>(finder));
    SimConfig cfg = base_cfg("fcfs-rr", {0, 0});
    cfg.drop_expired = false;
    cfg.merging.enabled = true;
    cfg.merging.config.policy = MergePolicy::Adaptive;
    cfg.merging.config.position_finder = finder;
    const auto r = run(cfg, trace, pet);
    check_conservation(r.stats);
    CHECK(static_cast<std::int64_t>(r.stats.terminals.size()) == 60);
  }
}

TEST_CASE("event log emits one parseable line per event") {
  const std::vector<TaskSpec> trace{tsk(1, 0, 100), tsk(2, 2, 100), tsk(3, 4, 9)};
  SimConfig cfg = base_cfg("mct", {0});
  std::ostringstream log;
  const auto r = run(cfg, trace, delta_pet(6), &log);

  std::istringstream in(log.str());
  std::string line;
  std::map<std::string, int> events;
  while (std::getline(in, line)) {
    const nlohmann::json j = nlohmann::json::parse(line);
    REQUIRE(j.contains("t"));
    REQUIRE(j.contains("event"));
    REQUIRE(j.contains("task"));
    REQUIRE(j.contains("machine"));
    ++events[j["event"].get<std::string>()];
  }
  CHECK(events["arrival"] == 3);
  CHECK(events["mapping"] == r.stats.mapping_events);
  const auto counts = kind_counts(r.stats);
  CHECK(events["ontime"] == counts.at(TerminalKind::OnTime));
  CHECK(events["expired"] == counts.at(TerminalKind::DroppedExpired));
  CHECK(events["assign"] == 3);
  CHECK(events["completion"] == counts.at(TerminalKind::OnTime));
}

TEST_CASE("mapping wall clock is measured") {
  ArrivalConfig ac;
  ac.total_tasks = 100;
  ac.span = 300;
  ac.seed = 71;
  const PetMatrix pet = generate_pet(random_means(3, 2, 10, 30, 11), 72);
  const std::vector<TaskSpec> trace = generate_trace(ac, pet);
  const auto r = run(base_cfg("mm", {0, 1}), trace, pet);
  CHECK(r.mapping_seconds > 0.0);
}

TEST_CASE("exact and approximate modes both conserve accounting") {
  ArrivalConfig ac;
  ac.total_tasks = 90;
  ac.span = 250;
  ac.seed = 81;
  const PetMatrix pet = generate_pet(random_means(3, 2, 10, 25, 12), 82);
  const std::vector<TaskSpec> trace = generate_trace(ac, pet);

  SimConfig cfg = base_cfg("msd", {0, 1, 0});
  cfg.pruning.enabled = true;
  cfg.pruning.config.regime = DropRegime::Evict;
  cfg.pruning.config.initial_defer_threshold = 0.3;

  cfg.chance_mode = ChanceMode::Exact;
  const auto exact = run(cfg, trace, pet);
  check_conservation(exact.stats);

  cfg.chance_mode = ChanceMode::Approximate;
  cfg.compact_limit = 8;
  const auto approx = run(cfg, trace, pet);
  check_conservation(approx.stats);
}

TEST_CASE("heavy overload soak keeps every task accounted for") {
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    CAPTURE(seed);
    ArrivalConfig ac;
    ac.total_tasks = 300;
    ac.span = 400;
    ac.pattern = ArrivalPattern::Spiky;
    ac.seed = 90 + seed;
    const PetMatrix pet = generate_pet(random_means(4, 2, 15, 40, 13), 91 + seed);
    const std::vector<TaskSpec> trace = generate_trace(ac, pet);
    SimConfig cfg = base_cfg("mmu", {0, 1}, 4);
    cfg.pruning.enabled = true;
    cfg.pruning.config.regime = DropRegime::Evict;
    cfg.pruning.config.initial_defer_threshold = 0.2;
    cfg.seed = seed;
    const auto r = run(cfg, trace, pet);
    check_conservation(r.stats);
    CHECK(r.stats.total_tasks == 300);
  }
}

TEST_CASE("validation rejects malformed configs") {
  const PetMatrix pet = delta_pet(5);
  const std::vector<TaskSpec> ok{tsk(1, 0, 10)};

  SimConfig cfg = base_cfg("mct", {});
  CHECK_THROWS_AS(run(cfg, ok, pet), std::invalid_argument);

  cfg = base_cfg("mct", {1});
  CHECK_THROWS_AS(run(cfg, ok, pet), std::invalid_argument);

  cfg = base_cfg("mct", {0}, 0);
  CHECK_THROWS_AS(run(cfg, ok, pet), std::invalid_argument);

  cfg = base_cfg("mct", {0});
  cfg.compact_limit = 3;
  CHECK_THROWS_AS(run(cfg, ok, pet), std::invalid_argument);

  cfg = base_cfg("mct", {0});
  CHECK_THROWS_AS(run(cfg, {tsk(1, 0, 10), tsk(1, 1, 10)}, pet),
                  std::invalid_argument);
  CHECK_THROWS_AS(run(cfg, {tsk(1, 0, 10, 2)}, pet), std::invalid_argument);
  CHECK_THROWS_AS(run(cfg, {tsk(1, 5, 5)}, pet), std::invalid_argument);
  CHECK_THROWS_AS(run(cfg, {tsk(1, -1, 5)}, pet), std::invalid_argument);

  // deferring needs a batch-mode heuristic
  cfg = base_cfg("rr", {0});
  cfg.pruning.enabled = true;
  cfg.pruning.config.initial_defer_threshold = 0.5;
  CHECK_THROWS_AS(run(cfg, ok, pet), std::invalid_argument);

  const PetMatrix two = make_pet({{Pmf::delta(5), Pmf::delta(6)}});
  SimConfig merge = base_cfg("fcfs-rr", {0, 0});
  merge.drop_expired = false;
  merge.merging.enabled = true;

  SimConfig bad = merge;
  bad.machine_types = {0, 1};
  CHECK_THROWS_AS(run(bad, ok, two), std::invalid_argument);

  bad = merge;
  bad.pruning.enabled = true;
  bad.pruning.config.regime = DropRegime::Evict;
  CHECK_THROWS_AS(run(bad, ok, pet), std::invalid_argument);

  bad = merge;
  bad.drop_expired = true;
  CHECK_THROWS_AS(run(bad, ok, pet), std::invalid_argument);

  bad = merge;
  bad.heuristic = parse_heuristic("mct");
  CHECK_THROWS_AS(run(bad, ok, pet), std::invalid_argument);

  bad = merge;
  std::vector<TaskSpec> unsigned_trace{tsk(1, 0, 10)};
  unsigned_trace[0].data_id.clear();
  CHECK_THROWS_AS(run(bad, unsigned_trace, pet), std::invalid_argument);
}

TEST_CASE("metrics pipeline consumes engine output end to end") {
  ArrivalConfig ac;
  ac.total_tasks = 200;
  ac.span = 500;
  ac.seed = 101;
  const PetMatrix pet = generate_pet(random_means(3, 2, 10, 30, 14), 102);
  const std::vector<TaskSpec> trace = generate_trace(ac, pet);
  SimConfig cfg = base_cfg("mm", {0, 1, 0, 1});
  const auto r = run(cfg, trace, pet);

  const MetricsReport rep = finalize(r.stats, RatesTable::defaults(2));
  CHECK(rep.robustness >= 0.0);
  CHECK(rep.robustness <= 1.0);
  CHECK(rep.total_energy > 0.0);
  CHECK(rep.total_cost > 0.0);
  const std::string json = report_json(rep);
  CHECK(nlohmann::json::parse(json).contains("robustness"));
}
