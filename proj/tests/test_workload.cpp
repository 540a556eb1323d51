#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "psched/workload.hpp"

using namespace psched;

namespace {

std::string trace_bytes(const std::vector<TaskSpec>& trace) {
  std::ostringstream out;
  save_trace(trace, out);
  return out.str();
}

PetMatrix tiny_pet(std::uint64_t seed = 5, int T = 3, int M = 2) {
  return generate_pet(random_means(T, M, 10.0, 40.0, seed), seed);
}

}  // namespace

TEST_CASE("pet generation produces normalized per-entry distributions") {
  const auto means = std::vector<std::vector<double>>{{100.0}};
  const PetMatrix pet = generate_pet(means, 42);
  REQUIRE(pet.pmfs.size() == 1);
  const Pmf& p = pet.at(0, 0);
  CHECK(std::fabs(p.mass() - 1.0) <= 1e-9);
  CHECK(p.mean() == doctest::Approx(100.0).epsilon(0.10));
  CHECK(p.min_time() >= 1);

  CHECK_THROWS(generate_pet({{0.0}}, 1));
  CHECK_THROWS(generate_pet({{-5.0}}, 1));
  CHECK_THROWS(generate_pet({}, 1));
}

TEST_CASE("pet generation: larger gamma shape concentrates the distribution") {
  const auto means = std::vector<std::vector<double>>{{80.0}};
  const PetMatrix narrow = generate_pet(means, 9, 20.0, 20.0);
  const PetMatrix wide = generate_pet(means, 9, 1.0, 1.0);
  CHECK(narrow.at(0, 0).variance() < wide.at(0, 0).variance());
}

TEST_CASE("pet generation is deterministic per seed") {
  const auto means = random_means(4, 3, 20.0, 60.0, 77);
  const PetMatrix a = generate_pet(means, 123);
  const PetMatrix b = generate_pet(means, 123);
  REQUIRE(a.pmfs.size() == b.pmfs.size());
  for (std::size_t i = 0; i < a.pmfs.size(); ++i) CHECK(a.pmfs[i] == b.pmfs[i]);
  const PetMatrix c = generate_pet(means, 124);
  CHECK_FALSE(a.pmfs[0] == c.pmfs[0]);
}

TEST_CASE("deadline formula adds type mean plus slack") {
  CHECK(assign_deadline(100, 50, 100, 2.0) == 350);
  CHECK(assign_deadline(0, 10, 10, 0.8) == 18);
}

TEST_CASE("constant trace: exact count, monotone arrivals, valid deadlines") {
  const PetMatrix pet = tiny_pet();
  ArrivalConfig cfg;
  cfg.total_tasks = 1200;
  cfg.span = 6000;
  cfg.seed = 3;
  const auto trace = generate_trace(cfg, pet);
  REQUIRE(trace.size() == 1200);
  Time prev = 0;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    CHECK(trace[i].id == static_cast<std::int64_t>(i));
    CHECK(trace[i].arrival >= prev);
    prev = trace[i].arrival;
    CHECK(trace[i].arrival >= 0);
    CHECK(trace[i].arrival < cfg.span);
    CHECK(trace[i].deadline > trace[i].arrival);
    CHECK(trace[i].type >= 0);
    CHECK(trace[i].type < pet.task_types());
  }
  CHECK(trace_bytes(trace) == trace_bytes(generate_trace(cfg, pet)));
  cfg.seed = 4;
  CHECK(trace_bytes(trace) != trace_bytes(generate_trace(cfg, pet)));
}

TEST_CASE("deadline slack stays in the configured beta band") {
  const PetMatrix pet = tiny_pet(11);
  const Time avg_all = pet.avg_exec_all();
  ArrivalConfig cfg;
  cfg.total_tasks = 600;
  cfg.span = 3000;
  cfg.seed = 12;
  for (const TaskSpec& t : generate_trace(cfg, pet)) {
    const Time slack = t.deadline - t.arrival - pet.avg_exec(t.type);
    CHECK(slack >= static_cast<Time>(std::floor(0.8 * avg_all)));
    CHECK(slack <= static_cast<Time>(std::floor(2.5 * avg_all)));
  }
}

TEST_CASE("spiky trace: spike windows carry roughly triple the lull rate") {
  const PetMatrix pet = tiny_pet(21);
  ArrivalConfig cfg;
  cfg.total_tasks = 9000;
  cfg.span = 12000;
  cfg.pattern = ArrivalPattern::Spiky;
  cfg.cycles = 8;
  cfg.seed = 21;
  const auto trace = generate_trace(cfg, pet);
  REQUIRE(trace.size() == 9000);
  const double cycle = static_cast<double>(cfg.span) / cfg.cycles;
  const double lull = cycle / (1.0 + cfg.spike_fraction);
  double in_spike = 0, in_lull = 0;
  for (const TaskSpec& t : trace) {
    const double pos = std::fmod(static_cast<double>(t.arrival), cycle);
    (pos < lull ? in_lull : in_spike) += 1.0;
  }
  const double spike_len = cycle - lull;
  const double ratio = (in_spike / (spike_len * cfg.cycles)) /
                       (in_lull / (lull * cfg.cycles));
  CHECK(ratio == doctest::Approx(3.0).epsilon(0.20));
}

TEST_CASE("base-high trace alternates double-rate periods") {
  const PetMatrix pet = tiny_pet(22);
  ArrivalConfig cfg;
  cfg.total_tasks = 9000;
  cfg.span = 12000;
  cfg.pattern = ArrivalPattern::BaseHigh;
  cfg.cycles = 6;
  cfg.seed = 8;
  const auto trace = generate_trace(cfg, pet);
  const double cycle = static_cast<double>(cfg.span) / cfg.cycles;
  const double base = cycle * cfg.base_to_high_ratio / (1.0 + cfg.base_to_high_ratio);
  double in_high = 0, in_base = 0;
  for (const TaskSpec& t : trace) {
    const double pos = std::fmod(static_cast<double>(t.arrival), cycle);
    (pos < base ? in_base : in_high) += 1.0;
  }
  const double ratio = (in_high / (cycle - base)) / (in_base / base);
  CHECK(ratio == doctest::Approx(2.0).epsilon(0.20));
}

TEST_CASE("signature mode groups consecutive segments of one stream") {
  const PetMatrix pet = tiny_pet(31);
  ArrivalConfig cfg;
  cfg.total_tasks = 500;
  cfg.span = 5000;
  cfg.signature_streams = 6;
  cfg.seed = 19;
  const auto trace = generate_trace(cfg, pet);
  REQUIRE(trace.size() == 500);
  for (const TaskSpec& t : trace) {
    CHECK_FALSE(t.data_id.empty());
    CHECK_FALSE(t.operation.empty());
    CHECK_FALSE(t.params.empty());
  }
  // Some overlap must exist for merging to ever trigger.
  std::map<std::string, int> by_data;
  for (const TaskSpec& t : trace) by_data[t.data_id]++;
  int shared = 0;
  for (const auto& [k, n] : by_data) shared += (n > 1) ? n : 0;
  CHECK(shared > 25);
}

TEST_CASE("trace files round-trip and reject malformed input") {
  const PetMatrix pet = tiny_pet(41);
  ArrivalConfig cfg;
  cfg.total_tasks = 64;
  cfg.span = 800;
  cfg.signature_streams = 4;
  cfg.seed = 6;
  const auto trace = generate_trace(cfg, pet);

  std::stringstream buf;
  save_trace(trace, buf);
  const auto loaded = load_trace(buf, pet.task_types());
  CHECK(loaded == trace);

  std::stringstream missing("id,type,arrival,data_id,operation,params,priority\n");
  CHECK_THROWS_WITH_AS(load_trace(missing), doctest::Contains("deadline"),
                       std::runtime_error);

  std::stringstream short_row(
      "id,type,arrival,deadline,data_id,operation,params,priority\n1,0,5\n");
  CHECK_THROWS_WITH_AS(load_trace(short_row), doctest::Contains("line 2"),
                       std::runtime_error);

  std::stringstream bad_int(
      "id,type,arrival,deadline,data_id,operation,params,priority\n"
      "1,0,x,9,d,o,p,0\n");
  CHECK_THROWS_WITH_AS(load_trace(bad_int), doctest::Contains("arrival"),
                       std::runtime_error);

  std::stringstream bad_type(
      "id,type,arrival,deadline,data_id,operation,params,priority\n"
      "1,7,3,9,d,o,p,0\n");
  CHECK_THROWS_WITH_AS(load_trace(bad_type, 3), doctest::Contains("unknown task type"),
                       std::runtime_error);
}

TEST_CASE("pet files round-trip and flag non-normalized entries") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "psched_test_pet";
  fs::create_directories(dir);
  const std::string path = (dir / "pet.json").string();

  const PetMatrix pet = tiny_pet(51);
  save_pet_file(pet, path);
  std::vector<std::string> warnings;
  const PetMatrix loaded = load_pet_file(path, &warnings);
  CHECK(warnings.empty());
  REQUIRE(loaded.pmfs.size() == pet.pmfs.size());
  for (std::size_t i = 0; i < pet.pmfs.size(); ++i) {
    CHECK(loaded.pmfs[i] == pet.pmfs[i]);
  }

  PetMatrix skewed = pet;
  skewed.pmfs[1] = Pmf::from_pairs({{5, 0.5}, {9, 0.25}});
  const std::string path2 = (dir / "pet2.json").string();
  save_pet_file(skewed, path2);
  warnings.clear();
  load_pet_file(path2, &warnings);
  REQUIRE(warnings.size() == 1);
  CHECK(warnings[0].find("machine_type=1") != std::string::npos);

  std::ofstream(path2) << "{\"task_types\": [\"a\"]}";
  CHECK_THROWS_WITH_AS(load_pet_file(path2), doctest::Contains("machine_types"),
                       std::runtime_error);
  fs::remove_all(dir);
}
