#include "psched/workload.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "psched/rng.hpp"

namespace psched {

namespace {

constexpr std::uint64_t kPetStream = 0x7065745full;
constexpr std::uint64_t kMeansStream = 0x6d65616eull;
constexpr std::uint64_t kArrivalStream = 0x61727256ull;
constexpr std::uint64_t kBetaStream = 0x62657461ull;
constexpr std::uint64_t kSigStream = 0x73696773ull;

Time round_time(double x) {
  return static_cast<Time>(std::floor(x + 0.5));
}

// Piecewise-constant arrival intensity over [0, span], normalized so the
// cumulative mass equals span. Arrival counts are shaped by mapping uniform
// progress through the inverse cumulative curve.
struct Intensity {
  struct Segment {
    double t0, t1, rate, cum;  // cum = cumulative mass before t0
  };
  std::vector<Segment> segments;
  double total = 0.0;

  static Intensity build(const ArrivalConfig& cfg) {
    Intensity out;
    const double span = static_cast<double>(cfg.span);
    std::vector<std::pair<double, double>> lens;  // (length, multiplier)
    switch (cfg.pattern) {
      case ArrivalPattern::Constant:
        lens.emplace_back(span, 1.0);
        break;
      case ArrivalPattern::Spiky: {
        const double cycle = span / cfg.cycles;
        const double lull = cycle / (1.0 + cfg.spike_fraction);
        const double spike = cycle - lull;
        for (int c = 0; c < cfg.cycles; ++c) {
          lens.emplace_back(lull, 1.0);
          lens.emplace_back(spike, cfg.spike_multiplier);
        }
        break;
      }
      case ArrivalPattern::BaseHigh: {
        const double cycle = span / cfg.cycles;
        const double base = cycle * cfg.base_to_high_ratio / (1.0 + cfg.base_to_high_ratio);
        const double high = cycle - base;
        for (int c = 0; c < cfg.cycles; ++c) {
          lens.emplace_back(base, 1.0);
          lens.emplace_back(high, cfg.high_multiplier);
        }
        break;
      }
    }
    double mass = 0.0;
    for (const auto& [len, mult] : lens) mass += len * mult;
    const double norm = span / mass;
    double t = 0.0, cum = 0.0;
    for (const auto& [len, mult] : lens) {
      const double rate = mult * norm;
      out.segments.push_back({t, t + len, rate, cum});
      cum += len * rate;
      t += len;
    }
    out.total = cum;
    return out;
  }

  double invert(double w) const {
    for (const auto& s : segments) {
      const double seg_mass = (s.t1 - s.t0) * s.rate;
      if (w <= s.cum + seg_mass || &s == &segments.back()) {
        return s.t0 + (w - s.cum) / s.rate;
      }
    }
    return segments.back().t1;
  }
};

// Arrival instants for one stream: n gamma-distributed gaps (variance 10% of
// the mean) normalized to the span and warped through the intensity curve.
std::vector<Time> arrival_instants(int n, const ArrivalConfig& cfg,
                                   std::mt19937_64& rng) {
  const Intensity curve = Intensity::build(cfg);
  const double mean_gap = static_cast<double>(cfg.span) / n;
  const double scale = 0.1;
  std::gamma_distribution<double> gap(mean_gap / scale, scale);
  std::vector<double> cum(static_cast<std::size_t>(n) + 1);
  double w = 0.0;
  for (auto& c : cum) {
    w += gap(rng);
    c = w;
  }
  std::vector<Time> out;
  out.reserve(n);
  const double span = static_cast<double>(cfg.span);
  for (int i = 0; i < n; ++i) {
    const double warped = curve.invert(span * cum[i] / cum.back());
    Time t = static_cast<Time>(std::floor(warped));
    out.push_back(std::clamp<Time>(t, 0, cfg.span - 1));
  }
  return out;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

std::int64_t parse_int(const std::string& s, int line_no, const char* column) {
  std::int64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw std::runtime_error("trace line " + std::to_string(line_no) +
                             ": bad integer in column '" + column + "'");
  }
  return v;
}

}  // namespace

Time PetMatrix::avg_exec(int task_type) const {
  double acc = 0.0;
  for (int m = 0; m < machine_types(); ++m) acc += at(task_type, m).mean();
  return std::max<Time>(1, round_time(acc / machine_types()));
}

Time PetMatrix::avg_exec_all() const {
  double acc = 0.0;
  for (int f = 0; f < task_types(); ++f) {
    acc += static_cast<double>(avg_exec(f));
  }
  return std::max<Time>(1, round_time(acc / task_types()));
}

PetMatrix generate_pet(const std::vector<std::vector<double>>& means,
                       std::uint64_t seed, double shape_min, double shape_max,
                       int samples) {
  if (means.empty() || means.front().empty()) {
    throw std::invalid_argument("pet: empty means matrix");
  }
  const int T = static_cast<int>(means.size());
  const int M = static_cast<int>(means.front().size());
  PetMatrix pet;
  for (int f = 0; f < T; ++f) {
    if (static_cast<int>(means[f].size()) != M) {
      throw std::invalid_argument("pet: ragged means matrix");
    }
    pet.task_type_names.push_back("type" + std::to_string(f));
  }
  for (int m = 0; m < M; ++m) {
    pet.machine_type_names.push_back("machine" + std::to_string(m));
  }
  pet.pmfs.reserve(static_cast<std::size_t>(T) * M);
  for (int f = 0; f < T; ++f) {
    for (int m = 0; m < M; ++m) {
      const double mean = means[f][m];
      if (!(mean > 0.0)) throw std::invalid_argument("pet: non-positive mean");
      std::mt19937_64 rng(mix_seed(seed, kPetStream, f, m));
      const double shape =
          std::uniform_real_distribution<double>(shape_min, shape_max)(rng);
      std::gamma_distribution<double> gamma(shape, mean / shape);
      std::map<Time, double> hist;
      const double unit = 1.0 / samples;
      for (int s = 0; s < samples; ++s) {
        hist[std::max<Time>(1, round_time(gamma(rng)))] += unit;
      }
      std::vector<std::pair<Time, double>> pairs(hist.begin(), hist.end());
      pet.pmfs.push_back(Pmf::from_pairs(pairs));
    }
  }
  return pet;
}

std::vector<std::vector<double>> random_means(int task_types, int machine_types,
                                              double lo, double hi,
                                              std::uint64_t seed) {
  std::mt19937_64 rng(mix_seed(seed, kMeansStream));
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<std::vector<double>> out(task_types,
                                       std::vector<double>(machine_types));
  for (auto& row : out) {
    for (auto& v : row) v = dist(rng);
  }
  return out;
}

Time assign_deadline(Time arrival, Time avg_type, Time avg_all, double beta) {
  return arrival + avg_type +
         static_cast<Time>(std::floor(beta * static_cast<double>(avg_all)));
}

std::vector<TaskSpec> generate_trace(const ArrivalConfig& cfg,
                                     const PetMatrix& pet) {
  if (pet.task_types() == 0) throw std::invalid_argument("trace: no task types");
  if (cfg.total_tasks <= 0) throw std::invalid_argument("trace: total_tasks must be positive");
  if (cfg.span <= 0) throw std::invalid_argument("trace: span must be positive");
  const int T = pet.task_types();
  const Time avg_all = pet.avg_exec_all();
  std::vector<Time> avg_type(T);
  for (int f = 0; f < T; ++f) avg_type[f] = pet.avg_exec(f);

  struct Draft {
    TaskSpec spec;
    std::int64_t seq;
  };
  std::vector<Draft> drafts;
  drafts.reserve(cfg.total_tasks);
  std::int64_t seq = 0;

  if (cfg.signature_streams > 0) {
    // Grouped arrivals: each group requests group_size consecutive segments
    // of one stream under a single operation, so overlapping requests from
    // later groups form mergeable pairs.
    const int group = std::max(1, cfg.group_size);
    const int groups = (cfg.total_tasks + group - 1) / group;
    std::mt19937_64 arr_rng(mix_seed(cfg.seed, kArrivalStream));
    const std::vector<Time> at = arrival_instants(groups, cfg, arr_rng);
    std::mt19937_64 sig_rng(mix_seed(cfg.seed, kSigStream));
    std::mt19937_64 beta_rng(mix_seed(cfg.seed, kBetaStream));
    std::uniform_real_distribution<double> beta(cfg.beta_min, cfg.beta_max);
    std::uniform_int_distribution<int> type_dist(0, T - 1);
    const int segs = std::max(cfg.segments_per_stream, group);
    std::uniform_int_distribution<int> seg_dist(0, segs - group);
    static const char* kOps[] = {"resolution", "bitrate", "framerate", "codec"};
    static const char* kParams[] = {"a", "b"};
    // Zipf-like stream popularity with harmonic weights.
    std::vector<double> cdf(cfg.signature_streams);
    double wsum = 0.0;
    for (int s = 0; s < cfg.signature_streams; ++s) {
      wsum += 1.0 / (s + 1);
      cdf[s] = wsum;
    }
    std::uniform_real_distribution<double> unif(0.0, wsum);
    int remaining = cfg.total_tasks;
    for (int g = 0; g < groups; ++g) {
      const double u = unif(sig_rng);
      const int stream = static_cast<int>(
          std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
      const int seg0 = seg_dist(sig_rng);
      const int op = std::uniform_int_distribution<int>(0, 3)(sig_rng);
      const int par = std::uniform_int_distribution<int>(0, 1)(sig_rng);
      const int members = std::min(group, remaining);
      for (int k = 0; k < members; ++k) {
        TaskSpec t;
        t.type = type_dist(sig_rng);
        t.arrival = at[g];
        t.deadline = assign_deadline(t.arrival, avg_type[t.type], avg_all,
                                     beta(beta_rng));
        t.data_id = "s" + std::to_string(stream) + "_" + std::to_string(seg0 + k);
        t.operation = kOps[op];
        t.params = kParams[par];
        drafts.push_back({t, seq++});
      }
      remaining -= members;
    }
  } else {
    // Independent per-type arrival streams splitting the total uniformly.
    for (int f = 0; f < T; ++f) {
      const int n_f = cfg.total_tasks / T + (f < cfg.total_tasks % T ? 1 : 0);
      if (n_f == 0) continue;
      std::mt19937_64 arr_rng(mix_seed(cfg.seed, kArrivalStream, f));
      std::mt19937_64 beta_rng(mix_seed(cfg.seed, kBetaStream, f));
      std::uniform_real_distribution<double> beta(cfg.beta_min, cfg.beta_max);
      for (Time at : arrival_instants(n_f, cfg, arr_rng)) {
        TaskSpec t;
        t.type = f;
        t.arrival = at;
        t.deadline = assign_deadline(at, avg_type[f], avg_all, beta(beta_rng));
        drafts.push_back({t, seq++});
      }
    }
  }

  std::sort(drafts.begin(), drafts.end(), [](const Draft& a, const Draft& b) {
    if (a.spec.arrival != b.spec.arrival) return a.spec.arrival < b.spec.arrival;
    return a.seq < b.seq;
  });
  std::vector<TaskSpec> out;
  out.reserve(drafts.size());
  for (std::size_t i = 0; i < drafts.size(); ++i) {
    drafts[i].spec.id = static_cast<std::int64_t>(i);
    out.push_back(drafts[i].spec);
  }
  return out;
}

void save_trace(const std::vector<TaskSpec>& trace, std::ostream& out) {
  out << "id,type,arrival,deadline,data_id,operation,params,priority\n";
  for (const TaskSpec& t : trace) {
    out << t.id << ',' << t.type << ',' << t.arrival << ',' << t.deadline << ','
        << t.data_id << ',' << t.operation << ',' << t.params << ','
        << t.priority << '\n';
  }
}

void save_trace_file(const std::vector<TaskSpec>& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("trace: cannot write " + path);
  save_trace(trace, out);
}

std::vector<TaskSpec> load_trace(std::istream& in, int num_types) {
  static const char* kColumns[] = {"id",      "type",      "arrival", "deadline",
                                   "data_id", "operation", "params",  "priority"};
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("trace: empty file");
  const std::vector<std::string> header = split_csv(line);
  for (std::size_t i = 0; i < 8; ++i) {
    if (i >= header.size() || header[i] != kColumns[i]) {
      throw std::runtime_error(std::string("trace: missing column '") +
                               kColumns[i] + "'");
    }
  }
  std::vector<TaskSpec> out;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::vector<std::string> f = split_csv(line);
    if (f.size() != 8) {
      throw std::runtime_error("trace line " + std::to_string(line_no) +
                               ": expected 8 fields, got " +
                               std::to_string(f.size()));
    }
    TaskSpec t;
    t.id = parse_int(f[0], line_no, "id");
    t.type = static_cast<int>(parse_int(f[1], line_no, "type"));
    t.arrival = parse_int(f[2], line_no, "arrival");
    t.deadline = parse_int(f[3], line_no, "deadline");
    t.data_id = f[4];
    t.operation = f[5];
    t.params = f[6];
    t.priority = static_cast<int>(parse_int(f[7], line_no, "priority"));
    if (num_types >= 0 && (t.type < 0 || t.type >= num_types)) {
      throw std::runtime_error("trace line " + std::to_string(line_no) +
                               ": unknown task type " + std::to_string(t.type));
    }
    if (t.deadline <= t.arrival) {
      throw std::runtime_error("trace line " + std::to_string(line_no) +
                               ": deadline not after arrival");
    }
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<TaskSpec> load_trace_file(const std::string& path, int num_types) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("trace: cannot open " + path);
  return load_trace(in, num_types);
}

void save_pet_file(const PetMatrix& pet, const std::string& path) {
  nlohmann::json j;
  j["task_types"] = pet.task_type_names;
  j["machine_types"] = pet.machine_type_names;
  auto& pmfs = j["pmfs"] = nlohmann::json::array();
  for (const Pmf& p : pet.pmfs) {
    nlohmann::json entry = nlohmann::json::array();
    for (const auto& [t, q] : p.to_pairs()) {
      entry.push_back(nlohmann::json::array({t, q}));
    }
    pmfs.push_back(std::move(entry));
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("pet: cannot write " + path);
  out << j.dump(1) << '\n';
}

PetMatrix load_pet_file(const std::string& path,
                        std::vector<std::string>* warnings) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("pet: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("pet: invalid JSON in " + path + ": " + e.what());
  }
  for (const char* key : {"task_types", "machine_types", "pmfs"}) {
    if (!j.contains(key)) {
      throw std::runtime_error(std::string("pet: missing field '") + key + "'");
    }
  }
  PetMatrix pet;
  pet.task_type_names = j["task_types"].get<std::vector<std::string>>();
  pet.machine_type_names = j["machine_types"].get<std::vector<std::string>>();
  const std::size_t want =
      pet.task_type_names.size() * pet.machine_type_names.size();
  if (j["pmfs"].size() != want) {
    throw std::runtime_error("pet: expected " + std::to_string(want) +
                             " pmfs, got " + std::to_string(j["pmfs"].size()));
  }
  std::size_t idx = 0;
  for (const auto& entry : j["pmfs"]) {
    std::vector<std::pair<Time, double>> pairs;
    for (const auto& ip : entry) {
      pairs.emplace_back(ip.at(0).get<Time>(), ip.at(1).get<double>());
    }
    Pmf p;
    try {
      p = Pmf::from_pairs(pairs);
    } catch (const std::invalid_argument& e) {
      throw std::runtime_error("pet: entry " + std::to_string(idx) + ": " + e.what());
    }
    if (warnings && std::fabs(p.mass() - 1.0) > 1e-6) {
      const int M = static_cast<int>(pet.machine_type_names.size());
      warnings->push_back("pet entry task_type=" + std::to_string(idx / M) +
                          " machine_type=" + std::to_string(idx % M) +
                          " mass=" + std::to_string(p.mass()) +
                          " is not normalized");
    }
    pet.pmfs.push_back(std::move(p));
    ++idx;
  }
  return pet;
}

}  // namespace psched
