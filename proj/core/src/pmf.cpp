#include "psched/pmf.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace psched {

namespace {

// Impulses lighter than this are dropped after convolutions to bound growth.
constexpr double kPruneEps = 1e-15;
constexpr double kMassSlack = 1e-9;
// Widest time span accumulated in a flat array before falling back to a map.
constexpr Time kDenseLimit = Time(1) << 22;

// Collects (time, prob) contributions and emits a sorted, pruned impulse list.
class MassAccumulator {
 public:
  MassAccumulator(Time lo, Time hi) : lo_(lo) {
    if (hi >= lo && hi - lo < kDenseLimit) {
      dense_.assign(static_cast<std::size_t>(hi - lo + 1), 0.0);
    }
  }

  void add(Time t, double p) {
    if (!dense_.empty()) {
      dense_[static_cast<std::size_t>(t - lo_)] += p;
    } else {
      sparse_[t] += p;
    }
  }

  std::vector<Impulse> take() {
    std::vector<Impulse> out;
    if (!dense_.empty()) {
      for (std::size_t i = 0; i < dense_.size(); ++i) {
        if (dense_[i] >= kPruneEps) {
          out.push_back({lo_ + static_cast<Time>(i), dense_[i]});
        }
      }
    } else {
      out.reserve(sparse_.size());
      for (const auto& [t, p] : sparse_) {
        if (p >= kPruneEps) out.push_back({t, p});
      }
    }
    return out;
  }

 private:
  Time lo_;
  std::vector<double> dense_;
  std::map<Time, double> sparse_;
};

}  // namespace

Pmf Pmf::delta(Time t) { return trusted({{t, 1.0}}); }

Pmf Pmf::from_impulses(std::vector<Impulse> imps) {
  std::vector<Impulse> kept;
  kept.reserve(imps.size());
  double mass = 0.0;
  Time prev_time = -1;
  for (const Impulse& imp : imps) {
    if (imp.time < 0) throw std::invalid_argument("pmf: negative impulse time");
    if (imp.time <= prev_time) {
      throw std::invalid_argument("pmf: impulse times must be strictly increasing");
    }
    prev_time = imp.time;
    if (imp.prob < 0.0) throw std::invalid_argument("pmf: negative probability");
    if (imp.prob == 0.0) continue;
    mass += imp.prob;
    kept.push_back(imp);
  }
  if (kept.empty()) throw std::invalid_argument("pmf: no probability mass");
  if (mass > 1.0 + kMassSlack) throw std::invalid_argument("pmf: total mass exceeds 1");
  return trusted(std::move(kept));
}

Pmf Pmf::from_pairs(const std::vector<std::pair<Time, double>>& pairs) {
  std::vector<Impulse> imps;
  imps.reserve(pairs.size());
  for (const auto& [t, p] : pairs) imps.push_back({t, p});
  return from_impulses(std::move(imps));
}

double Pmf::mass() const {
  double w = 0.0;
  for (const Impulse& imp : imps_) w += imp.prob;
  return w;
}

double Pmf::mean() const {
  double w = 0.0, m = 0.0;
  for (const Impulse& imp : imps_) {
    w += imp.prob;
    m += imp.prob * static_cast<double>(imp.time);
  }
  return w > 0.0 ? m / w : 0.0;
}

double Pmf::variance() const {
  if (imps_.empty()) return 0.0;
  const double mu = mean();
  double w = 0.0, v = 0.0;
  for (const Impulse& imp : imps_) {
    const double d = static_cast<double>(imp.time) - mu;
    w += imp.prob;
    v += imp.prob * d * d;
  }
  return w > 0.0 ? v / w : 0.0;
}

double Pmf::stddev() const { return std::sqrt(variance()); }

std::vector<std::pair<Time, double>> Pmf::to_pairs() const {
  std::vector<std::pair<Time, double>> out;
  out.reserve(imps_.size());
  for (const Impulse& imp : imps_) out.emplace_back(imp.time, imp.prob);
  return out;
}

bool operator==(const Pmf& a, const Pmf& b) {
  if (a.imps_.size() != b.imps_.size()) return false;
  for (std::size_t i = 0; i < a.imps_.size(); ++i) {
    if (a.imps_[i].time != b.imps_[i].time) return false;
    if (a.imps_[i].prob != b.imps_[i].prob) return false;
  }
  return true;
}

Pmf shift(const Pmf& p, Time offset) {
  if (offset < 0) throw std::invalid_argument("pmf: negative shift");
  std::vector<Impulse> out = p.imps_;
  for (Impulse& imp : out) imp.time += offset;
  return Pmf::trusted(std::move(out));
}

Pmf convolve_no_drop(const Pmf& prev, const Pmf& pet) {
  if (prev.empty() || pet.empty()) return {};
  MassAccumulator acc(prev.min_time() + pet.min_time(),
                      prev.max_time() + pet.max_time());
  for (const Impulse& a : prev.imps_) {
    for (const Impulse& b : pet.imps_) {
      acc.add(a.time + b.time, a.prob * b.prob);
    }
  }
  return Pmf::trusted(acc.take());
}

Pmf convolve_pending_drop(const Pmf& prev, const Pmf& pet, Time deadline) {
  if (prev.empty() || pet.empty()) return {};
  const double pet_mass = pet.mass();
  const Time lo = std::min(prev.min_time() + pet.min_time(), deadline);
  const Time hi = std::max(prev.max_time() + pet.max_time(), prev.max_time());
  MassAccumulator acc(lo, hi);
  for (const Impulse& a : prev.imps_) {
    if (a.time < deadline) {
      for (const Impulse& b : pet.imps_) {
        acc.add(a.time + b.time, a.prob * b.prob);
      }
    } else {
      // Predecessor finishing at or past the deadline leaves the new task
      // shed from the queue; its mass carries over at the predecessor's
      // completion time.
      acc.add(a.time, a.prob * pet_mass);
    }
  }
  return Pmf::trusted(acc.take());
}

Pmf convolve_evict_drop(const Pmf& prev, const Pmf& pet, Time deadline) {
  if (prev.empty() || pet.empty()) return {};
  const double pet_mass = pet.mass();
  const Time lo = std::min(prev.min_time() + pet.min_time(), deadline);
  const Time hi = std::max(prev.max_time(), deadline);
  MassAccumulator acc(lo, hi);
  for (const Impulse& a : prev.imps_) {
    if (a.time < deadline) {
      for (const Impulse& b : pet.imps_) {
        const Time t = a.time + b.time;
        acc.add(t < deadline ? t : deadline, a.prob * b.prob);
      }
    } else {
      acc.add(a.time, a.prob * pet_mass);
    }
  }
  return Pmf::trusted(acc.take());
}

Pmf convolve_dropping(const Pmf& prev, const Pmf& pet, Time deadline,
                      DropRegime regime) {
  switch (regime) {
    case DropRegime::PendingOnly:
      return convolve_pending_drop(prev, pet, deadline);
    case DropRegime::Evict:
      return convolve_evict_drop(prev, pet, deadline);
    case DropRegime::None:
    default:
      return convolve_no_drop(prev, pet);
  }
}

double success_chance(const Pmf& pct, Time deadline) {
  double p = 0.0;
  for (const Impulse& imp : pct.impulses()) {
    if (imp.time > deadline) break;
    p += imp.prob;
  }
  return std::clamp(p, 0.0, 1.0);
}

double fast_success_chance(const Pmf& pet, const Pmf& tail_pct, Time deadline) {
  if (pet.empty() || tail_pct.empty()) return 0.0;
  const auto& es = pet.impulses();
  const auto& cs = tail_pct.impulses();
  // Walk the execution impulses from slowest to fastest; the admissible
  // completion prefix of the tail only grows, so one shared cursor suffices.
  double chance = 0.0, prefix = 0.0;
  std::size_t c = 0;
  for (std::size_t i = es.size(); i-- > 0;) {
    const Time budget = deadline - es[i].time;
    while (c < cs.size() && cs[c].time <= budget) {
      prefix += cs[c].prob;
      ++c;
    }
    chance += es[i].prob * prefix;
  }
  return std::clamp(chance, 0.0, 1.0);
}

double skewness(const Pmf& p) {
  if (p.size() < 2) return 0.0;
  const double w = p.mass();
  if (w <= 0.0) return 0.0;
  const double mu = p.mean();
  double m2 = 0.0, m3 = 0.0;
  for (const Impulse& imp : p.impulses()) {
    const double d = static_cast<double>(imp.time) - mu;
    m2 += imp.prob * d * d;
    m3 += imp.prob * d * d * d;
  }
  m2 /= w;
  m3 /= w;
  if (m2 <= 0.0) return 0.0;
  const double s = m3 / (m2 * std::sqrt(m2));
  return std::clamp(s, -1.0, 1.0);
}

Pmf compact(const Pmf& p, Time bucket, Time min_t, Time max_t) {
  if (bucket < 1) throw std::invalid_argument("compact: bucket must be >= 1");
  if (min_t > max_t) throw std::invalid_argument("compact: min_t > max_t");
  if (p.empty()) return {};
  std::map<Time, double> acc;
  for (const Impulse& imp : p.imps_) {
    Time key;
    if (imp.time < min_t) {
      key = min_t;
    } else if (imp.time > max_t) {
      key = max_t;
    } else {
      const Time idx = (imp.time - min_t) / bucket;
      key = std::min(min_t + (idx + 1) * bucket - 1, max_t);
    }
    acc[key] += imp.prob;
  }
  std::vector<Impulse> out;
  out.reserve(acc.size());
  for (const auto& [t, q] : acc) out.push_back({t, q});
  return Pmf::trusted(std::move(out));
}

Pmf compact_to_count(const Pmf& p, std::size_t max_count) {
  if (max_count < 3 || p.size() <= max_count) return p;
  const Time span = p.max_time() - p.min_time();
  if (span <= 0) return p;
  const Time slots = static_cast<Time>(max_count) - 2;
  const Time bucket = (span + slots - 1) / slots;
  return compact(p, std::max<Time>(1, bucket), p.min_time(), p.max_time());
}

Pmf condition_beyond(const Pmf& p, Time elapsed) {
  double tail = 0.0;
  for (const Impulse& imp : p.imps_) {
    if (imp.time > elapsed) tail += imp.prob;
  }
  if (tail <= 0.0) return {};
  std::vector<Impulse> out;
  for (const Impulse& imp : p.imps_) {
    if (imp.time > elapsed) out.push_back({imp.time - elapsed, imp.prob / tail});
  }
  return Pmf::trusted(std::move(out));
}

}  // namespace psched
