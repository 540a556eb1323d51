#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace psched {

// Simulation time in integer units (1 unit = 1 ms).
using Time = std::int64_t;

struct Impulse {
  Time time = 0;
  double prob = 0.0;
};

// Which tasks a queue is allowed to shed when deadlines pass. Parameterizes
// the convolution used to chain completion-time distributions.
enum class DropRegime { None, PendingOnly, Evict };

// Discrete probability mass function over integer time, stored as impulses
// with strictly increasing times and positive probabilities. Total mass is
// at most 1; less than 1 when some outcomes have been dropped elsewhere.
// Immutable after construction; a default-constructed Pmf is an empty
// sentinel with zero mass.
class Pmf {
 public:
  Pmf() = default;

  static Pmf delta(Time t);
  // Validates ordering, positivity and total mass; throws std::invalid_argument.
  static Pmf from_impulses(std::vector<Impulse> imps);
  static Pmf from_pairs(const std::vector<std::pair<Time, double>>& pairs);

  const std::vector<Impulse>& impulses() const { return imps_; }
  bool empty() const { return imps_.empty(); }
  std::size_t size() const { return imps_.size(); }
  Time min_time() const { return imps_.front().time; }
  Time max_time() const { return imps_.back().time; }

  double mass() const;
  // Moments are normalized by total mass, so they describe the conditional
  // distribution given the outcome happens at all.
  double mean() const;
  double variance() const;
  double stddev() const;

  std::vector<std::pair<Time, double>> to_pairs() const;

  friend bool operator==(const Pmf& a, const Pmf& b);

 private:
  explicit Pmf(std::vector<Impulse> imps) : imps_(std::move(imps)) {}
  // Builds without validation; callers guarantee invariants.
  static Pmf trusted(std::vector<Impulse> imps) { return Pmf(std::move(imps)); }
  std::vector<Impulse> imps_;

  friend Pmf shift(const Pmf&, Time);
  friend Pmf convolve_no_drop(const Pmf&, const Pmf&);
  friend Pmf convolve_pending_drop(const Pmf&, const Pmf&, Time);
  friend Pmf convolve_evict_drop(const Pmf&, const Pmf&, Time);
  friend Pmf compact(const Pmf&, Time, Time, Time);
  friend Pmf condition_beyond(const Pmf&, Time);
};

// All impulse times increased by offset (>= 0); mass unchanged.
Pmf shift(const Pmf& p, Time offset);

// Plain convolution: the new task always runs after its predecessor.
Pmf convolve_no_drop(const Pmf& prev, const Pmf& pet);

// Pending tasks may be shed: predecessor outcomes at or past the deadline
// leave the new task unexecuted, so the predecessor's late mass is carried
// over unconvolved.
Pmf convolve_pending_drop(const Pmf& prev, const Pmf& pet, Time deadline);

// Any task, executing included, is removed once its deadline passes: all
// outcome mass that would land past the deadline aggregates into a single
// impulse at the deadline; only the predecessor's own late mass appears
// beyond it.
Pmf convolve_evict_drop(const Pmf& prev, const Pmf& pet, Time deadline);

Pmf convolve_dropping(const Pmf& prev, const Pmf& pet, Time deadline,
                      DropRegime regime);

// Probability of completing at or before the deadline.
double success_chance(const Pmf& pct, Time deadline);

// Equals success_chance(convolve_no_drop(tail_pct, pet), deadline) without
// materializing the convolution; single pass over both impulse lists.
double fast_success_chance(const Pmf& pet, const Pmf& tail_pct, Time deadline);

// Third standardized central moment clamped to [-1, 1]. A distribution with
// zero variance (fewer than two distinct times) is degenerate and yields 0.
double skewness(const Pmf& p);

// Groups impulses into fixed-width buckets over [min_t, max_t]: each bucket's
// mass sits at the bucket's upper edge (capped at max_t), everything below
// min_t collapses to one impulse at min_t and everything above max_t to one
// at max_t. Mass is preserved.
Pmf compact(const Pmf& p, Time bucket, Time min_t, Time max_t);

// Compacts over the PMF's own support with the smallest bucket width that
// brings the impulse count within max_count; identity when already small.
Pmf compact_to_count(const Pmf& p, std::size_t max_count);

// Remaining-duration distribution given the duration exceeded `elapsed`,
// renormalized to unit mass and expressed relative to `elapsed`.
Pmf condition_beyond(const Pmf& p, Time elapsed);

}  // namespace psched
