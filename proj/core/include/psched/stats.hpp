#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace psched {

struct CiSummary {
  double mean = 0.0;
  double half_width = 0.0;  // 95% confidence, Student's t
  bool degenerate = false;  // fewer than 2 finite samples
};

double mean_of(const std::vector<double>& xs);
double sample_std(const std::vector<double>& xs);
CiSummary ci95(const std::vector<double>& xs);

// One-sided paired comparison: lower bound of the 95% confidence interval
// for mean(a - b). Positive means a exceeds b with 95% confidence.
double paired_lower_bound95(const std::vector<double>& a,
                            const std::vector<double>& b);

std::uint64_t fnv1a(const std::string& bytes);

}  // namespace psched
