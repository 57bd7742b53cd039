#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "doctest.h"
#include "hrve/config.hpp"

using namespace hrve;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("hrve_cfg_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

RunConfig parse(std::initializer_list<std::string> a) {
  const std::vector<std::string> args(a);
  return parse_config(args);
}

ErrorCode code_of(std::initializer_list<std::string> a, std::string* message = nullptr) {
  try {
    parse(a);
  } catch (const Error& e) {
    if (message) *message = e.what();
    return e.code();
  }
  return ErrorCode::invalid_argument;
}

std::vector<std::string> small_sweep(const fs::path& out) {
  return {"rve-sweep",          "--out",         out.string(),  "--epsilon",
          "2",                  "--L_over_eps",  "8,12,16",     "--samples",
          "30",                 "--reference_cells", "128",     "--reference_samples",
          "3",                  "--preconditioner", "multigrid", "--verbosity", "0"};
}

ExitStatus run(const std::vector<std::string>& args, std::string* err_text = nullptr) {
  std::ostringstream out, err;
  const auto s = dispatch(parse_config(args), out, err);
  if (err_text) *err_text = err.str();
  return s;
}

} // namespace

TEST_CASE("defaults file with no flags reproduces the default configuration") {
  TempDir t;
  const RunConfig defaults("rve-sweep");
  {
    std::ofstream f(t.path / "defaults.cfg");
    f << "# defaults\ncommand = rve-sweep\n";
    for (const auto& [k, v] : defaults.effective()) f << k << " = " << v << '\n';
  }
  const auto cfg = parse({"--config", (t.path / "defaults.cfg").string()});
  CHECK(cfg.command() == "rve-sweep");
  CHECK(cfg.effective() == defaults.effective());
  CHECK(defaults.real("kappa") == 0.25);
  CHECK(defaults.real("tol") == 1e-10);
  CHECK(defaults.list("L_over_eps") == std::vector<double>{8, 16, 32});
  CHECK(defaults.sweep().samples == 200);
}

TEST_CASE("kappa above one quarter is rejected naming the key and the range") {
  std::string msg;
  CHECK(code_of({"rve-sweep", "--kappa", "0.3"}, &msg) == ErrorCode::usage);
  CHECK(msg.find("kappa") != std::string::npos);
  CHECK(msg.find("κ ∈ (0, 1/4]") != std::string::npos);
  CHECK(code_of({"rve-sweep", "--kappa", "0"}) == ErrorCode::usage);
  CHECK(parse({"rve-sweep", "--kappa=0.125"}).real("kappa") == 0.125);
}

TEST_CASE("flags override file values") {
  TempDir t;
  std::ofstream(t.path / "c.cfg") << "samples = 100\nkappa = 0.125\n";
  const auto cfg = parse({"rve-sweep", "--config", (t.path / "c.cfg").string(), "--samples", "200"});
  CHECK(cfg.integer("samples") == 200);
  CHECK(cfg.real("kappa") == 0.125);
  const auto later = parse({"rve-sweep", "--samples", "200", "--config", (t.path / "c.cfg").string()});
  CHECK(later.integer("samples") == 200);
}

TEST_CASE("unknown keys, type mismatches and bad subcommands are usage errors") {
  std::string msg;
  CHECK(code_of({"rve-sweep", "--bogus", "1"}, &msg) == ErrorCode::usage);
  CHECK(msg.find("bogus") != std::string::npos);
  CHECK(code_of({"rve-sweep", "--samples", "many"}, &msg) == ErrorCode::usage);
  CHECK(msg.find("samples") != std::string::npos);
  CHECK(code_of({"rve-sweep", "--L_over_eps", "8,x"}, &msg) == ErrorCode::usage);
  CHECK(msg.find("L_over_eps") != std::string::npos);
  CHECK(code_of({"rve-sweep", "--preconditioner", "ilu"}, &msg) == ErrorCode::usage);
  CHECK(code_of({"frobnicate"}) == ErrorCode::usage);
  CHECK(code_of({"rve-sweep", "--samples"}) == ErrorCode::usage);
  CHECK(code_of({"rve-sweep", "--L_over_eps", "4,8,16"}, &msg) == ErrorCode::usage);
  CHECK(msg.find("L_over_eps") != std::string::npos);
  CHECK(parse({"two-scale", "--eps-over-L", "1/8,1/16"}).list("eps_over_L") ==
        std::vector<double>{0.125, 0.0625});
}

TEST_CASE("HRVE_THREADS caps the thread count") {
  ::setenv("HRVE_THREADS", "2", 1);
  CHECK(parse({"rve-sweep", "--threads", "8"}).threads() == 2);
  CHECK(parse({"rve-sweep", "--threads", "1"}).threads() == 1);
  CHECK(parse({"rve-sweep"}).threads() <= 2);
  ::unsetenv("HRVE_THREADS");
  CHECK(parse({"rve-sweep", "--threads", "8"}).threads() == 8);
}

TEST_CASE("sweep run, manifest replay and report") {
  TempDir t;
  const fs::path a = t.path / "a", b = t.path / "b", r = t.path / "r";
  REQUIRE(run(small_sweep(a)) == ExitStatus::ok);
  const std::string csv = slurp(a / "rve_sweep.csv");
  const std::string manifest = slurp(a / "manifest.txt");
  CHECK(manifest.find("command = rve-sweep") != std::string::npos);
  CHECK(manifest.find("kappa = 0.25") != std::string::npos);
  CHECK(manifest.find("manifest.status = ok") != std::string::npos);
  CHECK(manifest.find("manifest.output.rve_sweep.csv") != std::string::npos);

  SUBCASE("replaying the manifest reproduces the CSV byte for byte") {
    REQUIRE(run({"--config", (a / "manifest.txt").string(), "--out", b.string()}) == ExitStatus::ok);
    CHECK(slurp(b / "rve_sweep.csv") == csv);
  }
  SUBCASE("a manifest cannot be replayed under another subcommand") {
    std::string msg;
    CHECK(code_of({"bl-decay", "--config", (a / "manifest.txt").string()}, &msg) == ErrorCode::usage);
    CHECK(msg.find("rve-sweep") != std::string::npos);
  }
  SUBCASE("report is pure and lists slopes with standard errors") {
    const std::vector<std::string> args{"report", "--input", (a / "rve_sweep.csv").string(),
                                        "--out", r.string(), "--verbosity", "0"};
    REQUIRE(run(args) == ExitStatus::ok);
    const std::string first = slurp(r / "report.txt");
    REQUIRE(run(args) == ExitStatus::ok);
    CHECK(slurp(r / "report.txt") == first);
    CHECK(slurp(a / "rve_sweep.csv") == csv);
    CHECK(first.find("+-") != std::string::npos);
    CHECK(first.find("slope") != std::string::npos);
  }
}

TEST_CASE("exit statuses") {
  TempDir t;
  SUBCASE("constant ensemble sweep succeeds with zero errors") {
    const fs::path o = t.path / "const";
    std::vector<std::string> args = small_sweep(o);
    args.insert(args.end(), {"--kind", "constant", "--assert"});
    REQUIRE(run(args) == ExitStatus::ok);
    std::istringstream is(slurp(o / "rve_sweep.csv"));
    for (const auto& row : read_sweep_csv(is)) CHECK(row.tensor(0, 0) == doctest::Approx(1.0));
  }
  SUBCASE("broken tolerance band gives 3") {
    std::vector<std::string> args = small_sweep(t.path / "broken");
    args.insert(args.end(), {"--assert", "--band_scale", "1e-9"});
    CHECK(run(args) == ExitStatus::assertion);
  }
  SUBCASE("iteration cap gives 2 and a failed manifest") {
    const fs::path o = t.path / "capped";
    std::vector<std::string> args = small_sweep(o);
    args.insert(args.end(), {"--max_iters", "1"});
    std::string err;
    CHECK(run(args, &err) == ExitStatus::numerical);
    CHECK(err.find("error") != std::string::npos);
    CHECK(slurp(o / "manifest.txt").find("manifest.status = failed") != std::string::npos);
  }
  SUBCASE("invalid experiment parameters give 1 before anything is written") {
    const fs::path o = t.path / "invalid";
    std::vector<std::string> args = small_sweep(o);
    args.insert(args.end(), {"--reference_cells", "64"});
    CHECK(run(args) == ExitStatus::usage);
    CHECK_FALSE(fs::exists(o / "rve_sweep.csv"));
  }
}

TEST_CASE("subcommands write only inside the output directory") {
  TempDir t;
  const fs::path old = fs::current_path();
  fs::current_path(t.path);
  const fs::path o = t.path / "out";
  const std::vector<std::vector<std::string>> runs{
      {"gen-field", "--out", (o / "f.hrve").string(), "--n", "16", "--epsilon", "2"},
      {"corrector", "--out", (o / "corr").string(), "--n", "16", "--epsilon", "2"},
      {"bl-decay", "--out", (o / "decay").string(), "--epsilon", "2", "--height_over_eps", "16",
       "--width_over_eps", "8", "--samples", "2"},
      {"two-scale", "--out", (o / "ts").string(), "--epsilon", "2", "--eps_over_L", "1/4,1/8",
       "--samples", "2"},
      {"localize", "--out", (o / "loc").string(), "--epsilon", "1", "--height_over_eps", "32",
       "--width_over_eps", "32", "--T_list", "4,16", "--gamma", "0.1"}};
  for (auto args : runs) {
    args.insert(args.end(), {"--verbosity", "0"});
    INFO(args[0]);
    CHECK(run(args) == ExitStatus::ok);
  }
  std::vector<fs::path> top;
  for (const auto& e : fs::directory_iterator(t.path)) top.push_back(e.path().filename());
  fs::current_path(old);
  REQUIRE(top.size() == 1);
  CHECK(top[0] == "out");
}
