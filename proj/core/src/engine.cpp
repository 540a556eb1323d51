#include "psched/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <deque>
#include <optional>
#include <ostream>
#include <queue>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>

namespace psched {

namespace {

enum class EventKind : int { Completion = 0, Expiry = 1, Arrival = 2, Mapping = 3 };

struct Event {
  Time time = 0;
  EventKind kind = EventKind::Mapping;
  std::int64_t id = 0;      // task index, or machine index for completions
  std::uint64_t epoch = 0;  // completion validity token

  bool operator>(const Event& o) const {
    if (time != o.time) return time > o.time;
    if (kind != o.kind) return static_cast<int>(kind) > static_cast<int>(o.kind);
    return id > o.id;
  }
};

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return mix64(seed ^ mix64(a ^ mix64(b)));
}

Time sample_pet_duration(const Pmf& pet, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const double u = std::uniform_real_distribution<double>(0.0, pet.mass())(rng);
  double acc = 0.0;
  for (const Impulse& imp : pet.impulses()) {
    acc += imp.prob;
    if (u <= acc) return imp.time;
  }
  return pet.max_time();
}

Time sample_group_duration(double mu, double sigma, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  double x = mu;
  if (sigma > 0.0) x = std::normal_distribution<double>(mu, sigma)(rng);
  return std::max<Time>(1, static_cast<Time>(std::llround(x)));
}

struct ViewMachine {
  int type = 0;
  int free = 0;
  Pmf tail;  // absolute completion chain of the current backlog
};

// Mapping view for the probabilistic engine: completions and chances come
// from the cached queue chains.
class ChanceView final : public SystemView {
 public:
  ChanceView(const PetMatrix& pet, std::vector<ViewMachine> machines,
             DropRegime regime, std::size_t compact_limit)
      : pet_(&pet),
        machines_(std::move(machines)),
        regime_(regime),
        compact_limit_(compact_limit) {}

  int machine_count() const override { return static_cast<int>(machines_.size()); }
  bool has_free_slot(int machine) const override {
    return machines_[static_cast<std::size_t>(machine)].free > 0;
  }
  double mean_exec(const BatchTask& task, int machine) const override {
    return pet_->at(task.type, machines_[static_cast<std::size_t>(machine)].type)
        .mean();
  }
  double expected_completion(const BatchTask& task, int machine) const override {
    const ViewMachine& vm = machines_[static_cast<std::size_t>(machine)];
    return vm.tail.mean() + pet_->at(task.type, vm.type).mean();
  }
  double success_chance(const BatchTask& task, int machine) const override {
    const ViewMachine& vm = machines_[static_cast<std::size_t>(machine)];
    return fast_success_chance(pet_->at(task.type, vm.type), vm.tail,
                               task.deadline);
  }
  void assign(const BatchTask& task, int machine) override {
    ViewMachine& vm = machines_[static_cast<std::size_t>(machine)];
    vm.tail = convolve_dropping(vm.tail, pet_->at(task.type, vm.type),
                                task.deadline, regime_);
    if (compact_limit_ > 0) vm.tail = compact_to_count(vm.tail, compact_limit_);
    --vm.free;
  }
  std::unique_ptr<SystemView> fork() const override {
    return std::make_unique<ChanceView>(*this);
  }

 private:
  const PetMatrix* pet_;
  std::vector<ViewMachine> machines_;
  DropRegime regime_;
  std::size_t compact_limit_;
};

// Mapping view for merging mode: homogeneous machines, backlog tracked as
// summed expected execution times of queued groups.
class LoadView final : public SystemView {
 public:
  LoadView(std::vector<double> loads, std::vector<int> free,
           const std::unordered_map<std::int64_t, const MergedTask*>* groups)
      : loads_(std::move(loads)), free_(std::move(free)), groups_(groups) {}

  int machine_count() const override { return static_cast<int>(loads_.size()); }
  bool has_free_slot(int machine) const override {
    return free_[static_cast<std::size_t>(machine)] > 0;
  }
  double mean_exec(const BatchTask& task, int) const override {
    return groups_->at(task.id)->mu;
  }
  double expected_completion(const BatchTask& task, int machine) const override {
    return loads_[static_cast<std::size_t>(machine)] + mean_exec(task, machine);
  }
  double success_chance(const BatchTask&, int) const override { return 0.0; }
  void assign(const BatchTask& task, int machine) override {
    loads_[static_cast<std::size_t>(machine)] += mean_exec(task, machine);
    --free_[static_cast<std::size_t>(machine)];
  }
  std::unique_ptr<SystemView> fork() const override {
    return std::make_unique<LoadView>(*this);
  }

 private:
  std::vector<double> loads_;
  std::vector<int> free_;
  const std::unordered_map<std::int64_t, const MergedTask*>* groups_;
};

enum class TaskPhase { Pending, Batch, Queued, Done };

struct TaskRt {
  TaskPhase phase = TaskPhase::Pending;
  int machine = -1;
};

struct MachineRt {
  int type = 0;
  std::vector<std::int64_t> queue;  // task ids, or group ids in merging mode
  Time exec_start = 0;
  Time exec_duration = 0;
  std::uint64_t epoch = 0;  // bumped whenever the executing slot is vacated
  Time busy = 0;
  Pmf tail;
  bool dirty = true;
};

const char* terminal_name(TerminalKind kind) {
  switch (kind) {
    case TerminalKind::OnTime: return "ontime";
    case TerminalKind::Late: return "late";
    case TerminalKind::DroppedExpired: return "expired";
    case TerminalKind::DroppedPruned: return "pruned";
  }
  return "?";
}

class Engine {
 public:
  Engine(const SimConfig& cfg, const std::vector<TaskSpec>& trace,
         const PetMatrix& pet, std::ostream* log)
      : cfg_(cfg), trace_(trace), pet_(pet), log_(log) {}

  RunResult run();

 private:
  const SimConfig& cfg_;
  const std::vector<TaskSpec>& trace_;
  const PetMatrix& pet_;
  std::ostream* log_;

  std::priority_queue<Event, std::vector<Event>, std::greater<Event>> events_;
  std::unordered_map<std::int64_t, std::size_t> index_of_;
  std::vector<TaskRt> tasks_;
  std::vector<MachineRt> machines_;
  std::vector<std::int64_t> batch_;  // waiting task ids, arrival order
  std::vector<MergedTask> groups_;   // merging mode batch queue
  std::unordered_map<std::int64_t, MergedTask> dispatched_groups_;
  std::optional<Merger> merger_;
  PrunerState pstate_;
  SufferageMap sufferage_;
  int rr_cursor_ = 0;
  std::set<Time> scheduled_mappings_;
  RunStats stats_;
  double mapping_seconds_ = 0.0;
  Time now_ = 0;

  bool merging() const { return cfg_.merging.enabled; }
  bool pamf() const { return cfg_.heuristic.kind == HeuristicKind::Pamf; }
  bool pam_family() const {
    return cfg_.heuristic.kind == HeuristicKind::Pam || pamf();
  }
  DropRegime regime() const {
    return cfg_.pruning.enabled ? cfg_.pruning.config.regime : DropRegime::None;
  }
  std::size_t compact_limit() const {
    return cfg_.chance_mode == ChanceMode::Approximate ? cfg_.compact_limit : 0;
  }
  const TaskSpec& spec_of(std::int64_t id) const {
    return trace_[index_of_.at(id)];
  }

  void validate() const;
  void log_line(const char* event, std::int64_t task, std::int64_t machine);
  void schedule_mapping(Time t);
  int total_free_slots() const;
  bool any_free_machine_slot() const;

  void terminal(std::size_t idx, TerminalKind kind);
  void start_next(std::size_t mi);
  void vacate_head(std::size_t mi, bool completed);
  void remove_from_machine(std::size_t idx);

  void handle_arrival(std::size_t idx);
  void handle_expiry(std::size_t idx);
  void handle_completion(std::size_t mi, std::uint64_t epoch);
  void handle_mapping();

  std::vector<MachineQueue> queue_views(std::deque<Pmf>& holder) const;
  void refresh_tail(std::size_t mi, Time latest_unmapped);
  Pmf budget_compact(const Pmf& tail, Time latest_unmapped) const;
  void run_drop_pass();
  void commit_assignment(std::int64_t id, int machine);

  void handle_arrival_merging(std::size_t idx);
  void handle_completion_merging(std::size_t mi);
  void handle_mapping_merging();
  std::vector<MachineSnapshot> merge_snapshots() const;
  Time group_duration(const MergedTask& group, std::size_t mi) const;
};

void Engine::validate() const {
  if (cfg_.machine_types.empty()) {
    throw std::invalid_argument("config machine_types: must list at least one machine");
  }
  for (int mt : cfg_.machine_types) {
    if (mt < 0 || mt >= pet_.machine_types()) {
      throw std::invalid_argument("config machine_types: type " + std::to_string(mt) +
                                  " outside the PET's " +
                                  std::to_string(pet_.machine_types()) + " machine types");
    }
  }
  if (cfg_.queue_capacity < 1) {
    throw std::invalid_argument("config queue_capacity: must be >= 1");
  }
  if (cfg_.chance_mode == ChanceMode::Approximate && cfg_.compact_limit < 4) {
    throw std::invalid_argument("config compact_limit: must be >= 4");
  }
  std::unordered_set<std::int64_t> seen;
  for (const TaskSpec& t : trace_) {
    if (!seen.insert(t.id).second) {
      throw std::invalid_argument("trace: duplicate task id " + std::to_string(t.id));
    }
    if (t.type < 0 || t.type >= pet_.task_types()) {
      throw std::invalid_argument("trace: task " + std::to_string(t.id) + " type " +
                                  std::to_string(t.type) + " outside the PET's " +
                                  std::to_string(pet_.task_types()) + " task types");
    }
    if (t.arrival < 0 || t.deadline <= t.arrival) {
      throw std::invalid_argument("trace: task " + std::to_string(t.id) +
                                  " needs 0 <= arrival < deadline");
    }
    if (cfg_.merging.enabled && t.data_id.empty()) {
      throw std::invalid_argument("config merging: task " + std::to_string(t.id) +
                                  " has no data_id signature");
    }
  }
  if (cfg_.merging.enabled) {
    if (cfg_.pruning.enabled) {
      throw std::invalid_argument("config merging: cannot combine with pruning");
    }
    if (cfg_.drop_expired) {
      throw std::invalid_argument(
          "config merging: requires drop_expired=false (late tasks run to completion)");
    }
    for (int mt : cfg_.machine_types) {
      if (mt != cfg_.machine_types.front()) {
        throw std::invalid_argument("config merging: requires homogeneous machines");
      }
    }
    const HeuristicKind k = cfg_.heuristic.kind;
    if (!is_homogeneous(k) && k != HeuristicKind::MaxUrgency) {
      throw std::invalid_argument(
          "config heuristic: merging mode needs fcfs-rr, edf, sjf or mu");
    }
  }
  if (cfg_.pruning.enabled && cfg_.pruning.config.deferring_enabled() &&
      is_immediate(cfg_.heuristic.kind)) {
    throw std::invalid_argument(
        "config pruning: deferring needs a batch-mode heuristic");
  }
}

void Engine::log_line(const char* event, std::int64_t task, std::int64_t machine) {
  if (!log_) return;
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "{\"t\":%lld,\"event\":\"%s\",\"task\":%lld,\"machine\":%lld}\n",
                static_cast<long long>(now_), event, static_cast<long long>(task),
                static_cast<long long>(machine));
  *log_ << buf;
}

void Engine::schedule_mapping(Time t) {
  if (scheduled_mappings_.insert(t).second) {
    events_.push({t, EventKind::Mapping, 0, 0});
  }
}

int Engine::total_free_slots() const {
  int free = 0;
  for (const MachineRt& m : machines_) {
    free += std::max(0, cfg_.queue_capacity - static_cast<int>(m.queue.size()));
  }
  return free;
}

bool Engine::any_free_machine_slot() const {
  for (const MachineRt& m : machines_) {
    if (static_cast<int>(m.queue.size()) < cfg_.queue_capacity) return true;
  }
  return false;
}

void Engine::terminal(std::size_t idx, TerminalKind kind) {
  tasks_[idx].phase = TaskPhase::Done;
  const TaskSpec& s = trace_[idx];
  stats_.terminals.push_back({now_, s.id, s.type, kind});
  if (pamf()) {
    if (kind == TerminalKind::OnTime) {
      sufferage_.record_ontime(s.type);
    } else {
      sufferage_.record_missed(s.type);
    }
  }
  log_line(terminal_name(kind), s.id, tasks_[idx].machine);
}

void Engine::start_next(std::size_t mi) {
  MachineRt& m = machines_[mi];
  if (m.queue.empty()) return;
  const std::int64_t id = m.queue.front();
  m.exec_start = now_;
  if (merging()) {
    m.exec_duration = group_duration(dispatched_groups_.at(id), mi);
  } else {
    const TaskSpec& s = spec_of(id);
    m.exec_duration = sample_pet_duration(
        pet_.at(s.type, m.type),
        mix_seed(cfg_.seed, static_cast<std::uint64_t>(s.id), mi));
  }
  events_.push({now_ + m.exec_duration, EventKind::Completion,
                static_cast<std::int64_t>(mi), m.epoch});
}

// Frees the executing slot: on completion the full sampled duration counts
// as busy, on eviction only the elapsed part.
void Engine::vacate_head(std::size_t mi, bool completed) {
  MachineRt& m = machines_[mi];
  m.busy += completed ? m.exec_duration : now_ - m.exec_start;
  ++m.epoch;
  m.queue.erase(m.queue.begin());
  m.dirty = true;
}

void Engine::remove_from_machine(std::size_t idx) {
  TaskRt& rt = tasks_[idx];
  MachineRt& m = machines_[static_cast<std::size_t>(rt.machine)];
  const std::int64_t id = trace_[idx].id;
  auto it = std::find(m.queue.begin(), m.queue.end(), id);
  if (it == m.queue.begin()) {
    vacate_head(static_cast<std::size_t>(rt.machine), false);
    start_next(static_cast<std::size_t>(rt.machine));
  } else {
    m.queue.erase(it);
    m.dirty = true;
  }
}

void Engine::handle_arrival(std::size_t idx) {
  const TaskSpec& s = trace_[idx];
  log_line("arrival", s.id, -1);
  if (cfg_.drop_expired) {
    events_.push({s.deadline, EventKind::Expiry, static_cast<std::int64_t>(idx), 0});
  }
  if (merging()) {
    handle_arrival_merging(idx);
    return;
  }
  tasks_[idx].phase = TaskPhase::Batch;
  batch_.push_back(s.id);
  if (is_immediate(cfg_.heuristic.kind) || any_free_machine_slot()) {
    schedule_mapping(now_);
  }
}

void Engine::handle_expiry(std::size_t idx) {
  TaskRt& rt = tasks_[idx];
  if (rt.phase == TaskPhase::Done || rt.phase == TaskPhase::Pending) return;
  ++pstate_.misses_since_event;
  const bool freed_slot = rt.phase == TaskPhase::Queued;
  if (rt.phase == TaskPhase::Batch) {
    batch_.erase(std::find(batch_.begin(), batch_.end(), trace_[idx].id));
  } else {
    remove_from_machine(idx);
  }
  terminal(idx, TerminalKind::DroppedExpired);
  if (freed_slot) schedule_mapping(now_);
}

void Engine::handle_completion(std::size_t mi, std::uint64_t epoch) {
  MachineRt& m = machines_[mi];
  if (epoch != m.epoch || m.queue.empty()) return;  // execution was cancelled
  if (merging()) {
    handle_completion_merging(mi);
    return;
  }
  const std::int64_t id = m.queue.front();
  const std::size_t idx = index_of_.at(id);
  log_line("completion", id, static_cast<std::int64_t>(mi));
  vacate_head(mi, true);
  terminal(idx, now_ <= trace_[idx].deadline ? TerminalKind::OnTime
                                             : TerminalKind::Late);
  start_next(mi);
  schedule_mapping(now_);
}

std::vector<MachineQueue> Engine::queue_views(std::deque<Pmf>& holder) const {
  std::vector<MachineQueue> views(machines_.size());
  for (std::size_t mi = 0; mi < machines_.size(); ++mi) {
    const MachineRt& m = machines_[mi];
    for (std::size_t pos = 0; pos < m.queue.size(); ++pos) {
      const TaskSpec& s = spec_of(m.queue[pos]);
      const Pmf& pet = pet_.at(s.type, m.type);
      const Pmf* dist = &pet;
      if (pos == 0) {
        holder.push_back(condition_beyond(pet, now_ - m.exec_start));
        dist = &holder.back();
      }
      views[mi].tasks.push_back({s.id, s.type, s.deadline, dist, pos == 0});
    }
  }
  return views;
}

Pmf Engine::budget_compact(const Pmf& tail, Time latest_unmapped) const {
  const std::size_t limit = compact_limit();
  if (limit == 0 || tail.size() <= limit) return tail;
  Time max_t = tail.max_time();
  if (latest_unmapped >= tail.min_time() && latest_unmapped < max_t) {
    max_t = latest_unmapped;  // outcomes past every open deadline are equivalent
  }
  const Time span = max_t - tail.min_time();
  if (span <= 0) return compact_to_count(tail, limit);
  const Time slots = static_cast<Time>(limit) - 2;
  const Time bucket = std::max<Time>(1, (span + slots - 1) / slots);
  return compact(tail, bucket, tail.min_time(), max_t);
}

void Engine::refresh_tail(std::size_t mi, Time latest_unmapped) {
  MachineRt& m = machines_[mi];
  if (m.queue.empty()) {
    m.tail = Pmf::delta(now_);
    m.dirty = false;
    return;
  }
  // Approximate mode trusts the cached chain of an untouched queue.
  if (compact_limit() > 0 && !m.dirty) return;
  std::deque<Pmf> holder;
  std::vector<ChainTask> chain;
  chain.reserve(m.queue.size());
  for (std::size_t pos = 0; pos < m.queue.size(); ++pos) {
    const TaskSpec& s = spec_of(m.queue[pos]);
    const Pmf& pet = pet_.at(s.type, m.type);
    if (pos == 0) {
      holder.push_back(condition_beyond(pet, now_ - m.exec_start));
      chain.push_back({&holder.back(), s.deadline, true});
    } else {
      chain.push_back({&pet, s.deadline, false});
    }
  }
  m.tail = chain_tail_pct(chain, now_, regime(), compact_limit());
  m.tail = budget_compact(m.tail, latest_unmapped);
  m.dirty = false;
}

void Engine::run_drop_pass() {
  std::deque<Pmf> holder;
  std::vector<MachineQueue> views = queue_views(holder);
  const std::vector<std::int64_t> dropped =
      drop_pass(views, now_, cfg_.pruning.config, compact_limit(),
                pamf() ? &sufferage_ : nullptr);
  for (std::int64_t id : dropped) {
    const std::size_t idx = index_of_.at(id);
    remove_from_machine(idx);
    terminal(idx, TerminalKind::DroppedPruned);
  }
}

void Engine::commit_assignment(std::int64_t id, int machine) {
  batch_.erase(std::find(batch_.begin(), batch_.end(), id));
  const std::size_t idx = index_of_.at(id);
  tasks_[idx].phase = TaskPhase::Queued;
  tasks_[idx].machine = machine;
  MachineRt& m = machines_[static_cast<std::size_t>(machine)];
  const TaskSpec& s = trace_[idx];
  const bool was_empty = m.queue.empty();
  m.queue.push_back(id);
  m.tail = convolve_dropping(m.tail, pet_.at(s.type, m.type), s.deadline, regime());
  if (compact_limit() > 0) m.tail = compact_to_count(m.tail, compact_limit());
  if (was_empty) start_next(static_cast<std::size_t>(machine));
  log_line("assign", id, machine);
}

void Engine::handle_mapping() {
  scheduled_mappings_.erase(now_);
  if (merging()) {
    handle_mapping_merging();
    return;
  }
  const auto t0 = std::chrono::steady_clock::now();
  ++stats_.mapping_events;

  const bool pruning = cfg_.pruning.enabled;
  const PrunerConfig& pc = cfg_.pruning.config;
  if (pruning && pc.dropping_enabled()) {
    update_oversubscription(pstate_, static_cast<double>(pstate_.misses_since_event),
                            pc.lambda);
    pstate_.misses_since_event = 0;
    const bool was_active = pstate_.dropping_active;
    toggle_dropping(pstate_, pc.schmitt);
    if (!was_active && pstate_.dropping_active) ++stats_.drop_toggle_on;
    if (pstate_.dropping_active) run_drop_pass();
  }

  Time latest_unmapped = -1;
  for (std::int64_t id : batch_) {
    latest_unmapped = std::max(latest_unmapped, spec_of(id).deadline);
  }
  for (std::size_t mi = 0; mi < machines_.size(); ++mi) {
    refresh_tail(mi, latest_unmapped);
  }

  std::vector<BatchTask> bt;
  bt.reserve(batch_.size());
  for (std::int64_t id : batch_) {
    const TaskSpec& s = spec_of(id);
    bt.push_back({s.id, s.type, s.arrival, s.deadline});
  }

  std::vector<ViewMachine> vms(machines_.size());
  for (std::size_t mi = 0; mi < machines_.size(); ++mi) {
    vms[mi].type = machines_[mi].type;
    vms[mi].free =
        std::max(0, cfg_.queue_capacity - static_cast<int>(machines_[mi].queue.size()));
    vms[mi].tail = machines_[mi].tail;
  }
  ChanceView view(pet_, std::move(vms), regime(), compact_limit());

  MappingContext ctx;
  ctx.rr_cursor = rr_cursor_;
  if (pamf()) ctx.sufferage = &sufferage_;

  if (pruning && pc.deferring_enabled()) {
    std::vector<double> max_chances(bt.size(), 0.0);
    for (std::size_t i = 0; i < bt.size(); ++i) {
      for (int mc = 0; mc < view.machine_count(); ++mc) {
        max_chances[i] = std::max(max_chances[i], view.success_chance(bt[i], mc));
      }
    }
    if (pc.dynamic_defer) {
      const double delta = selective_factor(static_cast<std::int64_t>(bt.size()),
                                            total_free_slots());
      const double gamma = competency_level(max_chances, pstate_.defer_threshold);
      std::deque<Pmf> holder;
      const double psi =
          instantaneous_robustness(queue_views(holder), now_, cfg_.queue_capacity,
                                   regime(), compact_limit());
      update_defer_threshold(pstate_, delta, gamma, psi, pc.theta);
    }
    const double threshold = pstate_.defer_threshold;
    if (pam_family()) {
      ctx.defer_threshold = [threshold](int) { return threshold; };
    } else {
      const DeferSplit split =
          defer_pass(max_chances, std::vector<double>(bt.size(), threshold));
      stats_.defer_events += static_cast<std::int64_t>(split.deferred.size());
      std::vector<BatchTask> eligible;
      eligible.reserve(split.eligible.size());
      for (std::size_t i : split.eligible) eligible.push_back(bt[i]);
      bt = std::move(eligible);
    }
  } else if (pam_family()) {
    ctx.defer_threshold = [](int) { return 0.0; };
  }

  const std::vector<Assignment> assignments = dispatch_mapping(cfg_.heuristic, bt, view, ctx);
  rr_cursor_ = ctx.rr_cursor;
  for (const Assignment& a : assignments) {
    commit_assignment(a.task, a.machine);
  }
  if (pam_family() && !bt.empty() && any_free_machine_slot()) {
    stats_.defer_events += static_cast<std::int64_t>(bt.size());
  }

  mapping_seconds_ +=
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  log_line("mapping", static_cast<std::int64_t>(assignments.size()), -1);
}

std::vector<MachineSnapshot> Engine::merge_snapshots() const {
  std::vector<MachineSnapshot> snaps(machines_.size());
  for (std::size_t mi = 0; mi < machines_.size(); ++mi) {
    const MachineRt& m = machines_[mi];
    for (std::size_t pos = 0; pos < m.queue.size(); ++pos) {
      const MergedTask& g = dispatched_groups_.at(m.queue[pos]);
      if (pos == 0) {
        const double elapsed = static_cast<double>(now_ - m.exec_start);
        snaps[mi].executing_remaining = std::max(0.0, g.mu - elapsed);
      } else {
        snaps[mi].pending.push_back({g.mu, g.sigma, g.effective_deadline, g.arrival});
      }
    }
  }
  return snaps;
}

Time Engine::group_duration(const MergedTask& group, std::size_t mi) const {
  if (group.members.size() == 1) {
    const TaskSpec& s = group.members[0].spec;
    return sample_pet_duration(
        pet_.at(s.type, machines_[mi].type),
        mix_seed(cfg_.seed, static_cast<std::uint64_t>(s.id), mi));
  }
  return sample_group_duration(
      group.mu, group.sigma,
      mix_seed(cfg_.seed, static_cast<std::uint64_t>(group.id), mi));
}

void Engine::handle_arrival_merging(std::size_t idx) {
  const TaskSpec& s = trace_[idx];
  tasks_[idx].phase = TaskPhase::Batch;
  const Pmf& pet = pet_.at(s.type, machines_[0].type);
  const std::vector<MachineSnapshot> snaps = merge_snapshots();
  merger_->on_arrival(s, pet.mean(), pet.stddev(), groups_, snaps, now_);
  if (any_free_machine_slot()) schedule_mapping(now_);
}

void Engine::handle_completion_merging(std::size_t mi) {
  MachineRt& m = machines_[mi];
  const std::int64_t gid = m.queue.front();
  log_line("completion", gid, static_cast<std::int64_t>(mi));
  vacate_head(mi, true);
  const MergedTask group = std::move(dispatched_groups_.at(gid));
  dispatched_groups_.erase(gid);
  for (const MergeMember& member : group.members) {
    const std::size_t idx = index_of_.at(member.spec.id);
    terminal(idx, now_ <= member.spec.deadline ? TerminalKind::OnTime
                                               : TerminalKind::Late);
  }
  start_next(mi);
  schedule_mapping(now_);
}

void Engine::handle_mapping_merging() {
  const auto t0 = std::chrono::steady_clock::now();
  ++stats_.mapping_events;

  std::vector<BatchTask> bt;
  bt.reserve(groups_.size());
  std::unordered_map<std::int64_t, const MergedTask*> by_id;
  by_id.reserve(groups_.size());
  for (const MergedTask& g : groups_) {
    bt.push_back({g.id, g.members[0].spec.type, g.arrival, g.effective_deadline});
    by_id[g.id] = &g;
  }
  std::vector<double> loads(machines_.size());
  std::vector<int> free(machines_.size());
  for (std::size_t mi = 0; mi < machines_.size(); ++mi) {
    const MachineRt& m = machines_[mi];
    double load = static_cast<double>(now_);
    for (std::size_t pos = 0; pos < m.queue.size(); ++pos) {
      const MergedTask& g = dispatched_groups_.at(m.queue[pos]);
      if (pos == 0) {
        load += std::max(0.0, g.mu - static_cast<double>(now_ - m.exec_start));
      } else {
        load += g.mu;
      }
    }
    loads[mi] = load;
    free[mi] = std::max(0, cfg_.queue_capacity - static_cast<int>(m.queue.size()));
  }
  LoadView view(std::move(loads), std::move(free), &by_id);

  MappingContext ctx;
  ctx.rr_cursor = rr_cursor_;
  const std::vector<Assignment> assignments = dispatch_mapping(cfg_.heuristic, bt, view, ctx);
  rr_cursor_ = ctx.rr_cursor;

  for (const Assignment& a : assignments) {
    auto it = std::find_if(groups_.begin(), groups_.end(),
                           [&](const MergedTask& g) { return g.id == a.task; });
    MergedTask group = std::move(*it);
    groups_.erase(it);
    merger_->on_leave_queue(group.id);
    MachineRt& m = machines_[static_cast<std::size_t>(a.machine)];
    const bool was_empty = m.queue.empty();
    m.queue.push_back(group.id);
    for (const MergeMember& member : group.members) {
      const std::size_t idx = index_of_.at(member.spec.id);
      tasks_[idx].phase = TaskPhase::Queued;
      tasks_[idx].machine = a.machine;
    }
    log_line("assign", group.id, a.machine);
    dispatched_groups_.emplace(group.id, std::move(group));
    if (was_empty) start_next(static_cast<std::size_t>(a.machine));
  }

  mapping_seconds_ +=
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  log_line("mapping", static_cast<std::int64_t>(assignments.size()), -1);
}

RunResult Engine::run() {
  validate();

  machines_.resize(cfg_.machine_types.size());
  for (std::size_t mi = 0; mi < machines_.size(); ++mi) {
    machines_[mi].type = cfg_.machine_types[mi];
    machines_[mi].tail = Pmf::delta(0);
  }
  tasks_.resize(trace_.size());
  index_of_.reserve(trace_.size());
  for (std::size_t i = 0; i < trace_.size(); ++i) {
    index_of_[trace_[i].id] = i;
    events_.push({trace_[i].arrival, EventKind::Arrival, static_cast<std::int64_t>(i), 0});
  }
  pstate_.defer_threshold = cfg_.pruning.config.initial_defer_threshold;
  sufferage_ = SufferageMap(pet_.task_types(), cfg_.fairness_theta);
  if (merging()) merger_.emplace(cfg_.merging.config, cfg_.merging.saving);

  while (!events_.empty()) {
    const Event e = events_.top();
    events_.pop();
    now_ = e.time;
    switch (e.kind) {
      case EventKind::Completion:
        handle_completion(static_cast<std::size_t>(e.id), e.epoch);
        break;
      case EventKind::Expiry:
        handle_expiry(static_cast<std::size_t>(e.id));
        break;
      case EventKind::Arrival:
        handle_arrival(static_cast<std::size_t>(e.id));
        break;
      case EventKind::Mapping:
        handle_mapping();
        break;
    }
  }

  stats_.total_tasks = static_cast<std::int64_t>(trace_.size());
  stats_.task_types = pet_.task_types();
  for (const TaskRt& rt : tasks_) {
    if (rt.phase == TaskPhase::Batch) ++stats_.deferred_end;
  }
  Time makespan = 0;
  for (const TerminalRecord& rec : stats_.terminals) {
    makespan = std::max(makespan, rec.time);
  }
  stats_.makespan = makespan;
  stats_.machines.clear();
  for (const MachineRt& m : machines_) {
    stats_.machines.push_back({m.type, m.busy, std::max<Time>(0, makespan - m.busy)});
  }
  if (merging()) {
    const MergeCounters& c = merger_->counters();
    stats_.merges_task_level = c.task_level;
    stats_.merges_data_op = c.data_op;
    stats_.merges_data_only = c.data_only;
    stats_.merged_members = c.members_absorbed;
    stats_.merge_rejected = c.rejected;
  }
  return {std::move(stats_), mapping_seconds_};
}

}  // namespace

std::vector<int> heterogeneous_machines(int count, int machine_types) {
  if (count < 1 || machine_types < 1) {
    throw std::invalid_argument("machine layout: counts must be positive");
  }
  std::vector<int> out(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) out[static_cast<std::size_t>(i)] = i % machine_types;
  return out;
}

std::vector<int> homogeneous_machines(int count, int machine_type) {
  if (count < 1) throw std::invalid_argument("machine layout: counts must be positive");
  return std::vector<int>(static_cast<std::size_t>(count), machine_type);
}

Pmf chain_tail_pct(const std::vector<ChainTask>& queue, Time now,
                   DropRegime regime, std::size_t compact_limit) {
  Pmf tail = Pmf::delta(now);
  for (std::size_t pos = 0; pos < queue.size(); ++pos) {
    const ChainTask& ct = queue[pos];
    if (pos == 0 && ct.executing) {
      tail = shift(*ct.pet, now);
    } else {
      tail = convolve_dropping(tail, *ct.pet, ct.deadline, regime);
    }
    if (compact_limit > 0) tail = compact_to_count(tail, compact_limit);
  }
  return tail;
}

RunResult run(const SimConfig& cfg, const std::vector<TaskSpec>& trace,
              const PetMatrix& pet, std::ostream* event_log) {
  Engine engine(cfg, trace, pet, event_log);
  return engine.run();
}

}  // namespace psched
