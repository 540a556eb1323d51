#include "psched/heuristics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace psched {

namespace {

constexpr double kMocCullChance = 0.30;

const std::pair<const char*, HeuristicKind> kNames[] = {
    {"rr", HeuristicKind::RoundRobin},
    {"met", HeuristicKind::MinExecution},
    {"mct", HeuristicKind::MinCompletion},
    {"kpb", HeuristicKind::KPercentBest},
    {"mm", HeuristicKind::MinMin},
    {"msd", HeuristicKind::MinSoonestDeadline},
    {"mmu", HeuristicKind::MinMaxUrgency},
    {"moc", HeuristicKind::MaxOntimeCompletions},
    {"fcfs-rr", HeuristicKind::FcfsRoundRobin},
    {"edf", HeuristicKind::EarliestDeadlineFirst},
    {"sjf", HeuristicKind::ShortestJobFirst},
    {"mu", HeuristicKind::MaxUrgency},
    {"pam", HeuristicKind::Pam},
    {"pamf", HeuristicKind::Pamf},
};

int next_round_robin(const SystemView& view, int& cursor) {
  const int m = view.machine_count();
  for (int i = 0; i < m; ++i) {
    const int mid = (cursor + i) % m;
    if (view.has_free_slot(mid)) {
      cursor = (mid + 1) % m;
      return mid;
    }
  }
  return -1;
}

// argmin over free machines; ties go to the lower machine id
template <typename Key>
int best_free_machine(const SystemView& view, Key&& key) {
  int best = -1;
  double best_v = 0.0;
  for (int m = 0; m < view.machine_count(); ++m) {
    if (!view.has_free_slot(m)) continue;
    const double v = key(m);
    if (best < 0 || v < best_v) {
      best = m;
      best_v = v;
    }
  }
  return best;
}

void erase_taken(std::vector<BatchTask>& batch, const std::vector<char>& taken) {
  std::size_t w = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (!taken[i]) batch[w++] = batch[i];
  }
  batch.resize(w);
}

std::vector<Assignment> map_moc(std::vector<BatchTask>& batch, SystemView& view) {
  std::vector<Assignment> out;
  std::vector<char> taken(batch.size(), 0);
  std::size_t left = batch.size();
  while (left > 0 && any_free_slot(view)) {
    struct Pair {
      std::size_t i;
      int m;
      double chance;
    };
    std::vector<Pair> pairs;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      if (taken[i]) continue;
      int bm = -1;
      double bc = -1.0;
      for (int m = 0; m < view.machine_count(); ++m) {
        if (!view.has_free_slot(m)) continue;
        const double c = view.success_chance(batch[i], m);
        if (c > bc) {
          bc = c;
          bm = m;
        }
      }
      if (bm >= 0 && bc >= kMocCullChance) pairs.push_back({i, bm, bc});
    }
    if (pairs.empty()) break;
    std::sort(pairs.begin(), pairs.end(), [&](const Pair& a, const Pair& b) {
      if (a.chance != b.chance) return a.chance > b.chance;
      if (a.m != b.m) return a.m < b.m;
      return batch[a.i].id < batch[b.i].id;
    });
    const std::size_t k = std::min<std::size_t>(3, pairs.size());
    pairs.resize(k);

    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), 0);
    double best_sum = -1.0;
    Pair commit = pairs[0];
    do {
      auto probe = view.fork();
      double sum = 0.0;
      for (std::size_t idx : order) {
        const Pair& p = pairs[idx];
        if (!probe->has_free_slot(p.m)) continue;
        sum += probe->success_chance(batch[p.i], p.m);
        probe->assign(batch[p.i], p.m);
      }
      if (sum > best_sum) {
        best_sum = sum;
        commit = pairs[order[0]];
      }
    } while (std::next_permutation(order.begin(), order.end()));

    view.assign(batch[commit.i], commit.m);
    out.push_back({batch[commit.i].id, commit.m});
    taken[commit.i] = 1;
    --left;
  }
  erase_taken(batch, taken);
  return out;
}

}  // namespace

HeuristicId parse_heuristic(const std::string& id) {
  if (id.rfind("kpb:", 0) == 0) {
    const std::string arg = id.substr(4);
    double k = 0.0;
    const char* first = arg.data();
    const char* last = arg.data() + arg.size();
    auto [p, ec] = std::from_chars(first, last, k);
    if (ec != std::errc() || p != last || !(k > 0.0) || k > 100.0) {
      throw std::invalid_argument("heuristic 'kpb' needs a percentage in (0, 100]: '" + id + "'");
    }
    return {HeuristicKind::KPercentBest, k};
  }
  for (const auto& [name, kind] : kNames) {
    if (id == name) {
      if (kind == HeuristicKind::KPercentBest) {
        throw std::invalid_argument("heuristic 'kpb' needs a percentage, e.g. kpb:25");
      }
      return {kind, 25.0};
    }
  }
  throw std::invalid_argument("unknown heuristic '" + id + "'");
}

std::string to_string(const HeuristicId& id) {
  if (id.kind == HeuristicKind::KPercentBest) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "kpb:%g", id.k_percent);
    return buf;
  }
  for (const auto& [name, kind] : kNames) {
    if (kind == id.kind) return name;
  }
  return "?";
}

bool is_immediate(HeuristicKind kind) {
  switch (kind) {
    case HeuristicKind::RoundRobin:
    case HeuristicKind::MinExecution:
    case HeuristicKind::MinCompletion:
    case HeuristicKind::KPercentBest:
      return true;
    default:
      return false;
  }
}

bool is_batch(HeuristicKind kind) {
  switch (kind) {
    case HeuristicKind::MinMin:
    case HeuristicKind::MinSoonestDeadline:
    case HeuristicKind::MinMaxUrgency:
    case HeuristicKind::MaxOntimeCompletions:
      return true;
    default:
      return false;
  }
}

bool is_homogeneous(HeuristicKind kind) {
  switch (kind) {
    case HeuristicKind::FcfsRoundRobin:
    case HeuristicKind::EarliestDeadlineFirst:
    case HeuristicKind::ShortestJobFirst:
    case HeuristicKind::MaxUrgency:
      return true;
    default:
      return false;
  }
}

bool is_probabilistic(HeuristicKind kind) {
  return kind == HeuristicKind::Pam || kind == HeuristicKind::Pamf;
}

bool any_free_slot(const SystemView& view) {
  for (int m = 0; m < view.machine_count(); ++m) {
    if (view.has_free_slot(m)) return true;
  }
  return false;
}

SufferageMap::SufferageMap(int task_types, double fairness_factor)
    : eps_(static_cast<std::size_t>(task_types), 0.0), theta_(fairness_factor) {}

void SufferageMap::record_ontime(int type) {
  double& e = eps_.at(static_cast<std::size_t>(type));
  e = std::max(0.0, e - theta_);
}

void SufferageMap::record_missed(int type) {
  double& e = eps_.at(static_cast<std::size_t>(type));
  e = std::min(1.0, e + theta_);
}

double SufferageMap::value(int type) const {
  return eps_.at(static_cast<std::size_t>(type));
}

int map_immediate(const HeuristicId& h, const BatchTask& task,
                  const SystemView& view, int& rr_cursor) {
  switch (h.kind) {
    case HeuristicKind::RoundRobin:
      return next_round_robin(view, rr_cursor);
    case HeuristicKind::MinExecution:
      return best_free_machine(view, [&](int m) { return view.mean_exec(task, m); });
    case HeuristicKind::MinCompletion:
      return best_free_machine(view, [&](int m) { return view.expected_completion(task, m); });
    case HeuristicKind::KPercentBest: {
      const int mc = view.machine_count();
      std::vector<std::pair<double, int>> ranked;
      ranked.reserve(static_cast<std::size_t>(mc));
      for (int m = 0; m < mc; ++m) ranked.emplace_back(view.mean_exec(task, m), m);
      std::sort(ranked.begin(), ranked.end());
      const int k = static_cast<int>(
          std::ceil(h.k_percent * static_cast<double>(mc) / 100.0));
      const int cut = std::clamp(k, 1, mc);
      int best = -1;
      double best_c = 0.0;
      for (int i = 0; i < cut; ++i) {
        const int m = ranked[static_cast<std::size_t>(i)].second;
        if (!view.has_free_slot(m)) continue;
        const double c = view.expected_completion(task, m);
        if (best < 0 || c < best_c || (c == best_c && m < best)) {
          best = m;
          best_c = c;
        }
      }
      return best;
    }
    default:
      throw std::invalid_argument("not an immediate-mode heuristic: " + to_string(h));
  }
}

std::vector<Assignment> map_batch(HeuristicKind kind,
                                  std::vector<BatchTask>& batch,
                                  SystemView& view) {
  if (kind == HeuristicKind::MaxOntimeCompletions) return map_moc(batch, view);
  if (!is_batch(kind) && kind != HeuristicKind::MaxUrgency) {
    throw std::invalid_argument("not a batch-mode heuristic");
  }
  std::vector<Assignment> out;
  std::vector<char> taken(batch.size(), 0);
  std::size_t left = batch.size();
  const double inf = std::numeric_limits<double>::infinity();
  while (left > 0 && any_free_slot(view)) {
    bool have = false;
    std::size_t sel_i = 0;
    int sel_m = -1;
    double sel_primary = 0.0, sel_secondary = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      if (taken[i]) continue;
      const BatchTask& t = batch[i];
      const int m = best_free_machine(
          view, [&](int mm) { return view.expected_completion(t, mm); });
      if (m < 0) continue;
      const double c = view.expected_completion(t, m);
      double primary = 0.0, secondary = 0.0;
      switch (kind) {
        case HeuristicKind::MinMin:
          primary = c;
          break;
        case HeuristicKind::MinSoonestDeadline:
          primary = static_cast<double>(t.deadline);
          secondary = c;
          break;
        case HeuristicKind::MinMaxUrgency:
        case HeuristicKind::MaxUrgency: {
          // urgency 1/(deadline - completion); infeasible ranks first
          const double slack = static_cast<double>(t.deadline) - c;
          primary = slack <= 0.0 ? -inf : slack;
          break;
        }
        default:
          break;
      }
      const bool better =
          !have || primary < sel_primary ||
          (primary == sel_primary &&
           (secondary < sel_secondary ||
            (secondary == sel_secondary &&
             (m < sel_m || (m == sel_m && t.id < batch[sel_i].id)))));
      if (better) {
        have = true;
        sel_i = i;
        sel_m = m;
        sel_primary = primary;
        sel_secondary = secondary;
      }
    }
    if (!have) break;
    view.assign(batch[sel_i], sel_m);
    out.push_back({batch[sel_i].id, sel_m});
    taken[sel_i] = 1;
    --left;
  }
  erase_taken(batch, taken);
  return out;
}

std::vector<Assignment> map_homogeneous(HeuristicKind kind,
                                        std::vector<BatchTask>& batch,
                                        SystemView& view, int& rr_cursor) {
  if (kind == HeuristicKind::MaxUrgency) return map_batch(kind, batch, view);
  std::vector<Assignment> out;
  std::vector<char> taken(batch.size(), 0);
  std::vector<std::size_t> order(batch.size());
  std::iota(order.begin(), order.end(), 0);
  if (kind == HeuristicKind::EarliestDeadlineFirst) {
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (batch[a].deadline != batch[b].deadline)
        return batch[a].deadline < batch[b].deadline;
      return batch[a].id < batch[b].id;
    });
  } else if (kind == HeuristicKind::ShortestJobFirst) {
    auto shortest = [&](std::size_t i) {
      double best = std::numeric_limits<double>::infinity();
      for (int m = 0; m < view.machine_count(); ++m) {
        best = std::min(best, view.mean_exec(batch[i], m));
      }
      return best;
    };
    std::vector<double> key(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) key[i] = shortest(i);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (key[a] != key[b]) return key[a] < key[b];
      return batch[a].id < batch[b].id;
    });
  } else if (kind != HeuristicKind::FcfsRoundRobin) {
    throw std::invalid_argument("not a homogeneous-mode heuristic");
  }

  for (std::size_t i : order) {
    const BatchTask& t = batch[i];
    int m = -1;
    if (kind == HeuristicKind::FcfsRoundRobin) {
      m = next_round_robin(view, rr_cursor);
    } else {
      m = best_free_machine(view,
                            [&](int mm) { return view.expected_completion(t, mm); });
    }
    if (m < 0) break;
    view.assign(t, m);
    out.push_back({t.id, m});
    taken[i] = 1;
  }
  erase_taken(batch, taken);
  return out;
}

std::vector<Assignment> map_pam(std::vector<BatchTask>& batch,
                                SystemView& view,
                                const DeferThreshold& defer_threshold) {
  std::vector<Assignment> out;
  std::vector<char> taken(batch.size(), 0);
  std::vector<char> parked(batch.size(), 0);
  while (any_free_slot(view)) {
    bool have = false;
    std::size_t sel_i = 0;
    int sel_m = -1;
    double sel_c = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      if (taken[i] || parked[i]) continue;
      const BatchTask& t = batch[i];
      int bm = -1;
      double bc = -1.0;
      for (int m = 0; m < view.machine_count(); ++m) {
        if (!view.has_free_slot(m)) continue;
        const double c = view.success_chance(t, m);
        if (c > bc) {
          bc = c;
          bm = m;
        }
      }
      if (bm < 0) continue;
      if (defer_threshold && bc < defer_threshold(t.type)) {
        parked[i] = 1;
        continue;
      }
      const double comp = view.expected_completion(t, bm);
      const bool better = !have || comp < sel_c ||
                          (comp == sel_c && (bm < sel_m || (bm == sel_m &&
                                             t.id < batch[sel_i].id)));
      if (better) {
        have = true;
        sel_i = i;
        sel_m = bm;
        sel_c = comp;
      }
    }
    if (!have) break;
    view.assign(batch[sel_i], sel_m);
    out.push_back({batch[sel_i].id, sel_m});
    taken[sel_i] = 1;
  }
  erase_taken(batch, taken);
  return out;
}

std::vector<Assignment> map_pamf(std::vector<BatchTask>& batch,
                                 SystemView& view,
                                 const DeferThreshold& base_threshold,
                                 const SufferageMap& sufferage) {
  if (!base_threshold) return map_pam(batch, view, base_threshold);
  return map_pam(batch, view, [&](int type) {
    return base_threshold(type) - sufferage.value(type);
  });
}

std::vector<Assignment> dispatch_mapping(const HeuristicId& h,
                                         std::vector<BatchTask>& batch,
                                         SystemView& view,
                                         MappingContext& ctx) {
  if (is_immediate(h.kind)) {
    std::vector<Assignment> out;
    std::vector<char> taken(batch.size(), 0);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const int m = map_immediate(h, batch[i], view, ctx.rr_cursor);
      if (m < 0) break;  // strict arrival order: a blocked head waits
      view.assign(batch[i], m);
      out.push_back({batch[i].id, m});
      taken[i] = 1;
    }
    erase_taken(batch, taken);
    return out;
  }
  if (is_batch(h.kind)) return map_batch(h.kind, batch, view);
  if (is_homogeneous(h.kind)) return map_homogeneous(h.kind, batch, view, ctx.rr_cursor);
  if (h.kind == HeuristicKind::Pamf && ctx.sufferage) {
    return map_pamf(batch, view, ctx.defer_threshold, *ctx.sufferage);
  }
  return map_pam(batch, view, ctx.defer_threshold);
}

}  // namespace psched
