#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "cli.hpp"
#include "doctest.h"
#include "loceq/io.hpp"
#include <nlohmann/json.hpp>

namespace fs = std::filesystem;
using loceq::cli::run;

namespace {

struct Scratch {
  fs::path dir;
  explicit Scratch(const std::string& name) : dir(fs::temp_directory_path() / ("loceq_cli_" + name)) {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Scratch() { fs::remove_all(dir); }
};

int call(std::vector<std::string> args, std::string* out_text = nullptr) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  if (out_text) *out_text = out.str() + err.str();
  return code;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("integer lists") {
  using loceq::cli::parse_int_list;
  CHECK(parse_int_list("8") == std::vector<int>{8});
  CHECK(parse_int_list("4..7") == std::vector<int>{4, 5, 6, 7});
  CHECK(parse_int_list("4,6,8") == std::vector<int>{4, 6, 8});
  CHECK(parse_int_list("4..5,9") == std::vector<int>{4, 5, 9});
  CHECK(call({"teq-scan", "--L", "x"}) == 2);
  CHECK(call({"teq-scan", "--L", "6..4"}) == 2);
}

TEST_CASE("usage errors exit with 2") {
  CHECK(call({}) == 2);
  CHECK(call({"nonsense"}) == 2);
  CHECK(call({"teq-scan", "--bogus"}) == 2);
  CHECK(call({"teq-scan", "--obs-mode", "striped"}) == 2);
  CHECK(call({"teq-scan", "--variant", "xyz"}) == 2);
  CHECK(call({"--help"}) == 0);
}

TEST_CASE("empty grid is a usage error") {
  Scratch s("grid");
  // d must be below L, so L=3 with d=5 admits no cell.
  CHECK(call({"flow-scan", "--L", "4", "--n", "2", "--d", "5", "--out", s.dir.string()}) == 2);
}

TEST_CASE("generate is reproducible") {
  Scratch a("gen_a"), b("gen_b");
  for (const auto* s : {&a, &b})
    REQUIRE(call({"generate", "--variant", "exh", "--L", "5", "--n", "2", "--d", "1", "--seed", "7",
                  "--samples", "2", "--out", s->dir.string()}) == 0);
  for (const char* name : {"exh_L5_n2_d1_i0.bin", "exh_L5_n2_d1_i1.bin", "exh_L5_n2_d1_i0.bin.meta"}) {
    const auto x = slurp(a.dir / name), y = slurp(b.dir / name);
    CHECK(!x.empty());
    CHECK(x == y);
  }
  CHECK(slurp(a.dir / "exh_L5_n2_d1_i0.bin") != slurp(a.dir / "exh_L5_n2_d1_i1.bin"));
}

TEST_CASE("variants share the nonzero count") {
  Scratch s("variants");
  REQUIRE(call({"generate", "--variant", "all", "--L", "6", "--seed", "3", "--calibration-samples",
                "10", "--out", s.dir.string()}) == 0);
  std::string count;
  for (const char* v : {"exh", "exa", "brf", "bvf", "brc", "reg"}) {
    const auto meta = loceq::read_metadata(s.dir / (std::string(v) + "_L6_n2_d1_i0.bin.meta"));
    if (count.empty()) count = meta.at("nonzeros");
    CHECK_MESSAGE(meta.at("nonzeros") == count, v);
  }
}

TEST_CASE("infeasible construction is a domain error") {
  Scratch s("infeasible");
  // The band windows at L=5 hold far fewer than 30 partners.
  std::string text;
  CHECK(call({"generate", "--variant", "brf", "--L", "5", "--rho", "30",
              "--calibration-samples", "10", "--out", s.dir.string()}, &text) == 1);
  CHECK(text.find("error") != std::string::npos);
  CHECK(call({"generate", "--variant", "exh", "--L", "5", "--rho", "4", "--out", s.dir.string()}) == 1);
}

TEST_CASE("validate reports corrupted matrices") {
  Scratch s("validate");
  REQUIRE(call({"generate", "--L", "4", "--out", s.dir.string()}) == 0);
  const auto path = s.dir / "exh_L4_n2_d1_i0.bin";
  CHECK(call({"validate", "--matrix", path.string()}) == 0);
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(40 + 8);  // first record: col field below row makes it lower-triangular
    const char zero[8] = {};
    f.write(zero, 8);
    f.seekp(40);
    const char big[8] = {5, 0, 0, 0, 0, 0, 0, 0};
    f.write(big, 8);
  }
  std::string text;
  CHECK(call({"validate", "--matrix", path.string()}, &text) == 1);
  CHECK(text.find("FAIL") != std::string::npos);
}

TEST_CASE("analyze and evolve outputs") {
  Scratch s("single");
  REQUIRE(call({"analyze", "--L", "5", "--out", s.dir.string()}) == 0);
  for (const char* f : {"analysis.json", "bandwidth.csv", "edges.txt", "mask.pbm"})
    CHECK(fs::exists(s.dir / f));
  CHECK(slurp(s.dir / "mask.pbm").rfind("P4\n32 32\n", 0) == 0);
  REQUIRE(call({"evolve", "--L", "5", "--out", s.dir.string(), "--horizon", "20"}) == 0);
  const auto traj = slurp(s.dir / "trajectory.csv");
  CHECK(traj.rfind("# loceq", 0) == 0);
  CHECK(traj.find("t,exp_O,exp_O2,norm") != std::string::npos);
  CHECK(fs::exists(s.dir / "equilibration.json"));
}

TEST_CASE("scan, fit and extrapolate pipeline") {
  Scratch s("pipeline");
  const auto dir = s.dir.string();
  REQUIRE(call({"flow-scan", "--variant", "exh", "--L", "4..6", "--samples", "4", "--out", dir}) == 0);
  CHECK(fs::exists(s.dir / "flow_scan.csv"));
  CHECK(fs::exists(s.dir / "flow_groups.csv"));
  CHECK(fs::exists(s.dir / "correlation.json"));
  REQUIRE(fs::exists(s.dir / "fit_exh_n2_d1.json"));
  const auto fit = (s.dir / "fit_exh_n2_d1.json").string();
  const auto refit = (s.dir / "refit.json").string();
  REQUIRE(call({"fit", "--scan", (s.dir / "flow_scan.csv").string(), "--output", refit}) == 0);
  // Refitting the scan reproduces the fit of the scan itself.
  std::ifstream a(fit), b(refit);
  auto ja = nlohmann::json::parse(a), jb = nlohmann::json::parse(b);
  CHECK(ja["slope"].get<double>() == doctest::Approx(jb["slope"].get<double>()).epsilon(1e-9));
  std::string text;
  CHECK(call({"extrapolate", "--fit", fit, "--fmax", "100"}, &text) == 0);
  CHECK(text.find("untrusted") != std::string::npos);
  CHECK(call({"extrapolate", "--fit", fit, "--L", "7", "--samples", "2", "--out", dir}) == 0);
  CHECK(call({"teq-scan", "--L", "4", "--samples", "3", "--out", dir}) == 0);
  CHECK(fs::exists(s.dir / "teq_summary.csv"));
}

TEST_CASE("configuration file") {
  Scratch s("config");
  {
    std::ofstream f(s.dir / "run.ini");
    f << "[generate]\nL=4\nseed=9\nout=" << s.dir.string() << "\n";
  }
  CHECK(call({"--config", (s.dir / "run.ini").string(), "generate"}) == 0);
  CHECK(fs::exists(s.dir / "exh_L4_n2_d1_i0.bin"));
}

TEST_CASE("thread count") {
  setenv("LOCEQ_THREADS", "3", 1);
  CHECK(loceq::cli::thread_count() == 3);
  setenv("LOCEQ_THREADS", "zero", 1);
  CHECK(loceq::cli::thread_count() >= 1);
  unsetenv("LOCEQ_THREADS");
}

}
