#include "psched/stats.hpp"

#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <stdexcept>

namespace psched {

double mean_of(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  double acc = 0.0;
  for (double x : xs) acc += x;
  return acc / static_cast<double>(xs.size());
}

double sample_std(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double mu = mean_of(xs);
  double acc = 0.0;
  for (double x : xs) acc += (x - mu) * (x - mu);
  return std::sqrt(acc / static_cast<double>(xs.size() - 1));
}

CiSummary ci95(const std::vector<double>& xs) {
  CiSummary out;
  out.mean = mean_of(xs);
  if (xs.size() < 2) {
    out.degenerate = true;
    return out;
  }
  const double sd = sample_std(xs);
  if (sd == 0.0) return out;
  const boost::math::students_t dist(static_cast<double>(xs.size() - 1));
  const double t = boost::math::quantile(dist, 0.975);
  out.half_width = t * sd / std::sqrt(static_cast<double>(xs.size()));
  return out;
}

double paired_lower_bound95(const std::vector<double>& a,
                            const std::vector<double>& b) {
  if (a.size() != b.size() || a.empty()) {
    throw std::invalid_argument("paired comparison needs equal-size samples");
  }
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  const double mu = mean_of(d);
  if (d.size() < 2) return mu;
  const double sd = sample_std(d);
  if (sd == 0.0) return mu;
  const boost::math::students_t dist(static_cast<double>(d.size() - 1));
  const double t = boost::math::quantile(dist, 0.95);
  return mu - t * sd / std::sqrt(static_cast<double>(d.size()));
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace psched
