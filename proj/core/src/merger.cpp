#include "psched/merger.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace psched {

namespace {

constexpr char kSep = '\x1f';

SimilarityLevel weaker(SimilarityLevel a, SimilarityLevel b) {
  return static_cast<int>(a) >= static_cast<int>(b) ? a : b;
}

std::vector<const MergedTask*> ordered(std::vector<const MergedTask*> entries,
                                       QueuingPolicy queuing, double alpha) {
  if (queuing == QueuingPolicy::Edf) {
    std::stable_sort(entries.begin(), entries.end(),
                     [](const MergedTask* a, const MergedTask* b) {
                       if (a->effective_deadline != b->effective_deadline)
                         return a->effective_deadline < b->effective_deadline;
                       return a->id < b->id;
                     });
  } else if (queuing == QueuingPolicy::MaxUrgency) {
    std::stable_sort(entries.begin(), entries.end(),
                     [alpha](const MergedTask* a, const MergedTask* b) {
                       const double sa = static_cast<double>(a->effective_deadline) -
                                         worst_case_exec(a->mu, a->sigma, alpha);
                       const double sb = static_cast<double>(b->effective_deadline) -
                                         worst_case_exec(b->mu, b->sigma, alpha);
                       if (sa != sb) return sa < sb;
                       return a->id < b->id;
                     });
  }
  return entries;
}

// Capacity-ignoring schedule: every entry goes to the machine that would
// finish it soonest given the load committed so far.
std::vector<double> schedule_completions(const std::vector<MachineSnapshot>& machines,
                                         const std::vector<const MergedTask*>& entries,
                                         double alpha, Time now) {
  std::vector<double> loads;
  if (machines.empty()) {
    loads.push_back(static_cast<double>(now));
  } else {
    for (const MachineSnapshot& m : machines) {
      double load = static_cast<double>(now) + m.executing_remaining;
      for (const SnapshotTask& p : m.pending) {
        load += worst_case_exec(p.mu, p.sigma, alpha);
      }
      loads.push_back(load);
    }
  }
  std::vector<double> done;
  done.reserve(entries.size());
  for (const MergedTask* e : entries) {
    std::size_t best = 0;
    for (std::size_t m = 1; m < loads.size(); ++m) {
      if (loads[m] < loads[best]) best = m;
    }
    loads[best] += worst_case_exec(e->mu, e->sigma, alpha);
    done.push_back(loads[best]);
  }
  return done;
}

int count_member_misses(const std::vector<const MergedTask*>& entries,
                        const std::vector<double>& completions) {
  int misses = 0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    for (const MergeMember& m : entries[i]->members) {
      if (completions[i] > static_cast<double>(m.spec.deadline)) ++misses;
    }
  }
  return misses;
}

struct Scenario {
  std::vector<const MergedTask*> entries;
  std::vector<double> completions;

  int misses() const { return count_member_misses(entries, completions); }
  double completion_of(const MergedTask* e) const {
    for (std::size_t i = 0; i < entries.size(); ++i) {
      if (entries[i] == e) return completions[i];
    }
    return std::numeric_limits<double>::infinity();
  }
};

Scenario run_scenario(const std::vector<MachineSnapshot>& machines,
                      std::vector<const MergedTask*> entries,
                      QueuingPolicy queuing, double alpha, Time now) {
  Scenario s;
  s.entries = ordered(std::move(entries), queuing, alpha);
  s.completions = schedule_completions(machines, s.entries, alpha, now);
  return s;
}

}  // namespace

const char* to_string(SimilarityLevel level) {
  switch (level) {
    case SimilarityLevel::Task: return "task";
    case SimilarityLevel::DataOp: return "data-op";
    case SimilarityLevel::DataOnly: return "data-only";
  }
  return "?";
}

MergePolicy parse_merge_policy(const std::string& s) {
  if (s == "conservative") return MergePolicy::Conservative;
  if (s == "aggressive") return MergePolicy::Aggressive;
  if (s == "adaptive") return MergePolicy::Adaptive;
  throw std::invalid_argument("unknown merge policy '" + s + "'");
}

PositionFinder parse_position_finder(const std::string& s) {
  if (s == "off") return PositionFinder::Off;
  if (s == "logarithmic") return PositionFinder::Logarithmic;
  if (s == "linear") return PositionFinder::Linear;
  throw std::invalid_argument("unknown position finder '" + s + "'");
}

QueuingPolicy parse_queuing_policy(const std::string& s) {
  if (s == "fcfs") return QueuingPolicy::Fcfs;
  if (s == "edf") return QueuingPolicy::Edf;
  if (s == "mu") return QueuingPolicy::MaxUrgency;
  throw std::invalid_argument("unknown queuing policy '" + s + "'");
}

std::string task_key(const TaskSpec& t) {
  std::string k = t.data_id;
  k += kSep;
  k += t.operation;
  k += kSep;
  k += t.params;
  return k;
}

std::string data_op_key(const TaskSpec& t) {
  std::string k = t.data_id;
  k += kSep;
  k += t.operation;
  return k;
}

std::string data_key(const TaskSpec& t) { return t.data_id; }

std::optional<SimilarityTables::Hit> SimilarityTables::find(const TaskSpec& sig) const {
  if (auto it = task_.find(task_key(sig)); it != task_.end()) {
    return Hit{SimilarityLevel::Task, it->second};
  }
  if (auto it = data_op_.find(data_op_key(sig)); it != data_op_.end()) {
    return Hit{SimilarityLevel::DataOp, it->second};
  }
  if (auto it = data_.find(data_key(sig)); it != data_.end()) {
    return Hit{SimilarityLevel::DataOnly, it->second};
  }
  return std::nullopt;
}

void SimilarityTables::on_new(const TaskSpec& t) {
  task_[task_key(t)] = t.id;
  data_op_[data_op_key(t)] = t.id;
  data_[data_key(t)] = t.id;
}

void SimilarityTables::on_merged(const TaskSpec& j, std::int64_t merged_id) {
  task_[task_key(j)] = merged_id;
  data_op_[data_op_key(j)] = merged_id;
  data_[data_key(j)] = merged_id;
}

void SimilarityTables::on_declined(const TaskSpec& j) { on_new(j); }

void SimilarityTables::on_removed(std::int64_t task_id) {
  auto sweep = [task_id](std::unordered_map<std::string, std::int64_t>& map) {
    for (auto it = map.begin(); it != map.end();) {
      if (it->second == task_id) {
        it = map.erase(it);
      } else {
        ++it;
      }
    }
  };
  sweep(task_);
  sweep(data_op_);
  sweep(data_);
}

std::size_t SimilarityTables::entry_count() const {
  return task_.size() + data_op_.size() + data_.size();
}

bool SimilarityTables::points_to(std::int64_t task_id) const {
  auto scan = [task_id](const std::unordered_map<std::string, std::int64_t>& map) {
    for (const auto& [k, v] : map) {
      if (v == task_id) return true;
    }
    return false;
  };
  return scan(task_) || scan(data_op_) || scan(data_);
}

SavingModel SavingModel::defaults() {
  SavingModel m;
  m.set(SimilarityLevel::DataOp, 2, 0.26);
  m.set(SimilarityLevel::DataOp, 3, 0.37);
  m.set(SimilarityLevel::DataOp, 4, 0.40);
  m.set(SimilarityLevel::DataOp, 5, 0.40);
  for (int n = 2; n <= 5; ++n) m.set(SimilarityLevel::DataOnly, n, 0.10);
  return m;
}

void SavingModel::set(SimilarityLevel level, int group_size, double ratio) {
  if (group_size < 2) throw std::invalid_argument("saving table: group size must be >= 2");
  if (!(ratio >= 0.0 && ratio < 1.0)) {
    throw std::invalid_argument("saving table: ratio must be in [0, 1)");
  }
  if (level == SimilarityLevel::DataOp) {
    data_op_[group_size] = ratio;
  } else if (level == SimilarityLevel::DataOnly) {
    data_only_[group_size] = ratio;
  } else {
    throw std::invalid_argument("saving table: task level saving is implicit");
  }
}

double SavingModel::ratio(SimilarityLevel level, int group_size) const {
  if (level == SimilarityLevel::Task) return 0.0;
  const auto& table = level == SimilarityLevel::DataOp ? data_op_ : data_only_;
  if (table.empty()) return 0.0;
  // exact size, else the largest configured size below it (caps the top)
  int best = -1;
  for (const auto& [size, r] : table) {
    if (size <= group_size && size > best) best = size;
    if (size == group_size) return r;
  }
  if (best < 0) {
    for (const auto& [size, r] : table) {
      if (best < 0 || size < best) best = size;
    }
  }
  return table.at(best);
}

SavingModel SavingModel::load_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("saving table: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("saving table: empty file");
  if (line != "level,group_size,ratio") {
    throw std::runtime_error("saving table: expected header 'level,group_size,ratio'");
  }
  SavingModel m;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string level_s, size_s, ratio_s;
    if (!std::getline(row, level_s, ',') || !std::getline(row, size_s, ',') ||
        !std::getline(row, ratio_s)) {
      throw std::runtime_error("saving table line " + std::to_string(line_no) +
                               ": expected 3 fields");
    }
    SimilarityLevel level;
    if (level_s == "data-op") {
      level = SimilarityLevel::DataOp;
    } else if (level_s == "data-only") {
      level = SimilarityLevel::DataOnly;
    } else {
      throw std::runtime_error("saving table line " + std::to_string(line_no) +
                               ": unknown level '" + level_s + "'");
    }
    try {
      m.set(level, std::stoi(size_s), std::stod(ratio_s));
    } catch (const std::invalid_argument& e) {
      throw std::runtime_error("saving table line " + std::to_string(line_no) +
                               ": " + e.what());
    }
  }
  return m;
}

MergedTask MergedTask::single(const TaskSpec& spec, double mu, double sigma) {
  MergedTask t;
  t.id = spec.id;
  t.members.push_back({spec, mu, sigma});
  t.level = SimilarityLevel::Task;
  t.mu = mu;
  t.sigma = sigma;
  t.effective_deadline = spec.deadline;
  t.arrival = spec.arrival;
  return t;
}

ExecModel merged_exec_model(const std::vector<MergeMember>& members,
                            SimilarityLevel level, const SavingModel& model) {
  if (members.empty()) return {};
  if (level == SimilarityLevel::Task) return {members[0].mu, members[0].sigma};
  std::unordered_set<std::string> seen;
  double sum_mu = 0.0, sum_var = 0.0;
  int distinct = 0;
  for (const MergeMember& m : members) {
    if (seen.insert(task_key(m.spec)).second) {
      sum_mu += m.mu;
      sum_var += m.sigma * m.sigma;
      ++distinct;
    }
  }
  if (distinct <= 1) return {members[0].mu, members[0].sigma};
  const double keep = 1.0 - model.ratio(level, distinct);
  return {keep * sum_mu, keep * std::sqrt(sum_var)};
}

double worst_case_exec(double mu, double sigma, double alpha) {
  return mu + alpha * sigma;
}

double estimate_completion(const MachineSnapshot& machine, double mu,
                           double sigma, double alpha, Time now) {
  double c = static_cast<double>(now) + machine.executing_remaining;
  for (const SnapshotTask& p : machine.pending) {
    c += worst_case_exec(p.mu, p.sigma, alpha);
  }
  return c + worst_case_exec(mu, sigma, alpha);
}

ImpactResult evaluate_merge_impact(const std::vector<MachineSnapshot>& machines,
                                   const std::vector<MergedTask>& batch,
                                   std::size_t existing_index,
                                   const MergedTask& merged,
                                   const MergedTask& incoming,
                                   QueuingPolicy queuing, double alpha, Time now) {
  std::vector<const MergedTask*> without;
  without.reserve(batch.size() + 1);
  for (const MergedTask& e : batch) without.push_back(&e);
  without.push_back(&incoming);

  std::vector<const MergedTask*> with;
  with.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    with.push_back(i == existing_index ? &merged : &batch[i]);
  }

  const Scenario a = run_scenario(machines, std::move(without), queuing, alpha, now);
  const Scenario b = run_scenario(machines, std::move(with), queuing, alpha, now);

  ImpactResult r;
  r.misses_without = a.misses();
  r.misses_with = b.misses();
  r.merged_meets_deadline =
      b.completion_of(&merged) <= static_cast<double>(merged.effective_deadline);
  return r;
}

double compute_osl(const std::vector<MachineSnapshot>& machines,
                   const std::vector<MergedTask>& batch, double alpha, Time now) {
  double sum = 0.0;
  std::int64_t count = 0;

  auto severity = [&](double completion, double exec, Time deadline, Time arrival) {
    const double waitable =
        static_cast<double>(deadline) - static_cast<double>(arrival) - exec;
    if (waitable <= 0.0) return 0.0;
    if (completion <= static_cast<double>(deadline)) return 0.0;
    return (completion - static_cast<double>(deadline)) / waitable;
  };

  for (const MachineSnapshot& m : machines) {
    double c = static_cast<double>(now) + m.executing_remaining;
    for (const SnapshotTask& p : m.pending) {
      const double exec = worst_case_exec(p.mu, p.sigma, alpha);
      c += exec;
      sum += severity(c, exec, p.deadline, p.arrival);
      ++count;
    }
  }
  for (const MergedTask& e : batch) {
    double best = std::numeric_limits<double>::infinity();
    if (machines.empty()) {
      best = estimate_completion({}, e.mu, e.sigma, alpha, now);
    }
    for (const MachineSnapshot& m : machines) {
      best = std::min(best, estimate_completion(m, e.mu, e.sigma, alpha, now));
    }
    sum += severity(best, worst_case_exec(e.mu, e.sigma, alpha),
                    e.effective_deadline, e.arrival);
    ++count;
  }
  if (count == 0) return 0.0;
  return sum / static_cast<double>(count);
}

double adapt_alpha(double osl) {
  return std::clamp(2.0 - 4.0 * osl, -2.0, 2.0);
}

bool decide_merge(MergePolicy policy, const ImpactResult& impact) {
  if (policy == MergePolicy::Aggressive) return true;
  return impact.misses_with <= impact.misses_without;
}

PositionResult position_linear(const std::vector<MachineSnapshot>& machines,
                               const std::vector<MergedTask>& batch,
                               std::size_t existing_index,
                               const MergedTask& merged,
                               const MergedTask& incoming, double alpha,
                               Time now) {
  std::vector<const MergedTask*> reduced;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (i != existing_index) reduced.push_back(&batch[i]);
  }

  PositionResult result;
  bool feasible = false;
  std::size_t last = 0;
  for (std::size_t k = 0; k <= reduced.size(); ++k) {
    std::vector<const MergedTask*> probe = reduced;
    probe.insert(probe.begin() + static_cast<std::ptrdiff_t>(k), &merged);
    const std::vector<double> done =
        schedule_completions(machines, probe, alpha, now);
    ++result.probes;
    if (done[k] <= static_cast<double>(merged.effective_deadline)) {
      feasible = true;
      last = k;
    }
  }
  if (!feasible) return result;

  std::vector<const MergedTask*> chosen = reduced;
  chosen.insert(chosen.begin() + static_cast<std::ptrdiff_t>(last), &merged);
  const int with_misses =
      count_member_misses(chosen, schedule_completions(machines, chosen, alpha, now));

  std::vector<const MergedTask*> baseline;
  for (const MergedTask& e : batch) baseline.push_back(&e);
  baseline.push_back(&incoming);
  const int without_misses = count_member_misses(
      baseline, schedule_completions(machines, baseline, alpha, now));

  result.accepted = with_misses <= without_misses;
  result.position = last;
  return result;
}

PositionResult position_logarithmic(const std::vector<MachineSnapshot>& machines,
                                    const std::vector<MergedTask>& batch,
                                    std::size_t existing_index,
                                    const MergedTask& merged, double alpha,
                                    Time now) {
  std::vector<const MergedTask*> reduced;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (i != existing_index) reduced.push_back(&batch[i]);
  }

  // which entries were on time before the merge touched anything
  std::vector<const MergedTask*> base;
  for (const MergedTask& e : batch) base.push_back(&e);
  const std::vector<double> base_done =
      schedule_completions(machines, base, alpha, now);
  std::unordered_set<std::int64_t> was_ontime;
  for (std::size_t i = 0; i < base.size(); ++i) {
    if (i == existing_index) continue;
    if (base_done[i] <= static_cast<double>(base[i]->effective_deadline)) {
      was_ontime.insert(base[i]->id);
    }
  }

  PositionResult result;
  std::ptrdiff_t lo = 0;
  std::ptrdiff_t hi = static_cast<std::ptrdiff_t>(reduced.size());
  while (lo <= hi) {
    const std::ptrdiff_t mid = lo + (hi - lo) / 2;
    std::vector<const MergedTask*> probe = reduced;
    probe.insert(probe.begin() + mid, &merged);
    const std::vector<double> done =
        schedule_completions(machines, probe, alpha, now);
    ++result.probes;

    const bool merged_ok =
        done[static_cast<std::size_t>(mid)] <=
        static_cast<double>(merged.effective_deadline);
    bool others_harmed = false;
    for (std::size_t i = 0; i < probe.size(); ++i) {
      if (probe[i] == &merged) continue;
      if (was_ontime.count(probe[i]->id) &&
          done[i] > static_cast<double>(probe[i]->effective_deadline)) {
        others_harmed = true;
        break;
      }
    }

    if (merged_ok && !others_harmed) {
      result.accepted = true;
      result.position = static_cast<std::size_t>(mid);
      return result;
    }
    if (!merged_ok && !others_harmed) {
      hi = mid - 1;  // earlier start could save the merged entry
    } else if (merged_ok && others_harmed) {
      lo = mid + 1;  // later position delays fewer tasks
    } else {
      return result;  // hopeless both ways
    }
  }
  return result;
}

Merger::Merger(MergeConfig cfg, SavingModel model)
    : cfg_(cfg), model_(std::move(model)) {
  if (cfg_.position_finder != PositionFinder::Off &&
      cfg_.queuing != QueuingPolicy::Fcfs) {
    throw std::invalid_argument(
        "position finder needs fcfs queuing: other policies reorder the queue");
  }
}

Merger::Outcome Merger::on_arrival(const TaskSpec& spec, double mu, double sigma,
                                   std::vector<MergedTask>& batch,
                                   const std::vector<MachineSnapshot>& machines,
                                   Time now) {
  auto hit = tables_.find(spec);
  std::size_t existing_index = batch.size();
  while (hit) {
    existing_index = batch.size();
    for (std::size_t i = 0; i < batch.size(); ++i) {
      if (batch[i].id == hit->task) {
        existing_index = i;
        break;
      }
    }
    if (existing_index < batch.size()) break;
    tables_.on_removed(hit->task);  // stale reference, drop and retry
    hit = tables_.find(spec);
  }

  auto queue_alone = [&]() {
    batch.push_back(MergedTask::single(spec, mu, sigma));
  };

  if (!hit) {
    tables_.on_new(spec);
    queue_alone();
    return {};
  }

  const MergedTask& existing = batch[existing_index];
  if (static_cast<int>(existing.members.size()) >= cfg_.max_group_size) {
    ++counters_.rejected;
    tables_.on_declined(spec);
    queue_alone();
    return {};
  }

  MergedTask merged = existing;
  merged.members.push_back({spec, mu, sigma});
  merged.level = merged.members.size() == 2 ? hit->level
                                            : weaker(existing.level, hit->level);
  const ExecModel exec = merged_exec_model(merged.members, merged.level, model_);
  merged.mu = exec.mu;
  merged.sigma = exec.sigma;
  merged.effective_deadline = std::min(existing.effective_deadline, spec.deadline);
  merged.arrival = std::min(existing.arrival, spec.arrival);

  const MergedTask incoming = MergedTask::single(spec, mu, sigma);

  bool accept = true;
  double alpha_used = 2.0;
  if (cfg_.policy != MergePolicy::Aggressive) {
    if (cfg_.policy == MergePolicy::Adaptive) {
      alpha_ = adapt_alpha(compute_osl(machines, batch, alpha_, now));
      alpha_used = alpha_;
    }
    const ImpactResult impact =
        evaluate_merge_impact(machines, batch, existing_index, merged, incoming,
                              cfg_.queuing, alpha_used, now);
    accept = decide_merge(cfg_.policy, impact);
  }

  std::size_t place = existing_index;
  bool placed_by_finder = false;
  if (accept && cfg_.position_finder != PositionFinder::Off) {
    PositionResult pos;
    if (cfg_.position_finder == PositionFinder::Linear) {
      pos = position_linear(machines, batch, existing_index, merged, incoming,
                            alpha_used, now);
    } else {
      pos = position_logarithmic(machines, batch, existing_index, merged,
                                 alpha_used, now);
    }
    if (pos.accepted) {
      place = pos.position;
      placed_by_finder = true;
    } else if (cfg_.policy != MergePolicy::Aggressive) {
      accept = false;  // aggressive merging falls back to the existing slot
    }
  }

  if (!accept) {
    ++counters_.rejected;
    tables_.on_declined(spec);
    queue_alone();
    return {};
  }

  batch.erase(batch.begin() + static_cast<std::ptrdiff_t>(existing_index));
  if (!placed_by_finder) place = existing_index;
  batch.insert(batch.begin() + static_cast<std::ptrdiff_t>(place), merged);

  tables_.on_merged(spec, merged.id);
  switch (hit->level) {
    case SimilarityLevel::Task: ++counters_.task_level; break;
    case SimilarityLevel::DataOp: ++counters_.data_op; break;
    case SimilarityLevel::DataOnly: ++counters_.data_only; break;
  }
  ++counters_.members_absorbed;

  Outcome out;
  out.merged = true;
  out.group = merged.id;
  out.level = hit->level;
  return out;
}

void Merger::on_leave_queue(std::int64_t id) { tables_.on_removed(id); }

}  // namespace psched
