#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "doctest.h"
#include "halfdirac/error.hpp"

namespace fs = std::filesystem;
using halfdirac::cli::json;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("halfdirac_cli_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

int run_main(std::vector<std::string> args) {
  args.insert(args.begin(), "halfdirac");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return halfdirac::cli::main(static_cast<int>(argv.size()), argv.data());
}

fs::path write_config(const fs::path& dir, const json& cfg) {
  fs::create_directories(dir);
  const fs::path p = dir / "config.json";
  std::ofstream(p, std::ios::binary) << cfg.dump();
  return p;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("number format") {
    using halfdirac::cli::format_number;
    CHECK(format_number(0.5) == "5.00000000000e-01");
    CHECK(format_number(-1.0 / 3) == "-3.33333333333e-01");
    CHECK(format_number(-0.0) == "0.00000000000e+00");
    CHECK(format_number(0.0) == "0.00000000000e+00");
    CHECK(format_number(12345.678) == "1.23456780000e+04");
  }

  TEST_CASE("subcommand list") {
    const std::vector<std::string> want{"spectrum", "flow", "chern", "dd", "gapfill", "fermi", "arc3d", "selftest"};
    CHECK(halfdirac::cli::subcommands() == want);
  }

  TEST_CASE("spectrum rows and headers") {
    const fs::path dir = scratch("spectrum");
    json cfg;
    cfg["out"] = dir.string();
    cfg["operator"] = {{"type", "sp1"}, {"q", {0.5, std::sqrt(0.75), 0, 0}}};
    halfdirac::cli::run("spectrum", cfg);
    const std::string text = slurp(dir / "spectrum.csv");
    CHECK(text.rfind("# halfdirac ", 0) == 0);
    CHECK(text.find("# config: ") != std::string::npos);
    CHECK(text.find('\r') == std::string::npos);
    CHECK(text.find("exact,5.00000000000e-01") != std::string::npos);
    CHECK(text.find("evans,5.0000000000") != std::string::npos);
    CHECK(text.find("matrix,") != std::string::npos);

    // q = 1: header and column row only.
    cfg["operator"]["q"] = {1, 0, 0, 0};
    halfdirac::cli::run("spectrum", cfg);
    std::istringstream lines(slurp(dir / "spectrum.csv"));
    int data = 0;
    for (std::string l; std::getline(lines, l);) data += !l.empty() && l[0] != '#';
    CHECK(data == 1);
  }

  TEST_CASE("output is byte deterministic") {
    const fs::path dir = scratch("determinism");
    json cfg;
    cfg["out"] = dir.string();
    cfg["samples"] = 5;
    cfg["seed"] = 7;
    halfdirac::cli::run("selftest", cfg);
    const std::string a = slurp(dir / "selftest.csv");
    CHECK(a.find("hopf_chern,1,") != std::string::npos);
    halfdirac::cli::run("selftest", cfg);
    CHECK(a == slurp(dir / "selftest.csv"));

    json flow;
    flow["out"] = dir.string();
    flow["samples"] = 16;
    halfdirac::cli::run("flow", flow);
    const std::string f = slurp(dir / "flow.csv");
    halfdirac::cli::run("flow", flow);
    CHECK(f == slurp(dir / "flow.csv"));
    CHECK(json::parse(slurp(dir / "flow.json"))["flow"] == 1);
    CHECK(json::parse(slurp(dir / "flow.json"))["header"]["command"] == "flow");
  }

  TEST_CASE("exit codes") {
    const fs::path dir = scratch("exit");
    json bad;
    bad["out"] = (dir / "out").string();
    bad["no_such_key"] = 1;
    CHECK(run_main({"spectrum", "--config", write_config(dir, bad).string()}) == halfdirac::cli::kExitValidation);

    json omega;
    omega["operator"] = {{"type", "u1"}, {"omega", {2, 0}}};
    CHECK(run_main({"spectrum", "--config", write_config(dir, omega).string(), "--out", (dir / "out").string()}) ==
          halfdirac::cli::kExitValidation);

    // q_r = -0.1 sits inside the spectral band of the DD cover.
    json cover;
    cover["family"] = "constant";
    cover["q"] = {-0.1, std::sqrt(0.99), 0, 0};
    cover["grid"] = {{"n_lat", 4}, {"n_lon", 8}, {"n_chi", 4}};
    cover["matrix_n"] = 400;
    CHECK(run_main({"dd", "--config", write_config(dir, cover).string(), "--out", (dir / "out").string()}) ==
          halfdirac::cli::kExitComputation);

    CHECK(run_main({"arc3d", "--config", (dir / "missing.json").string()}) == halfdirac::cli::kExitValidation);
    CHECK(run_main({"nonsense"}) == halfdirac::cli::kExitValidation);

    json ok;
    ok["family"] = "hopf";
    ok["grid"] = {{"n_lat", 12}, {"n_lon", 24}};
    CHECK(run_main({"chern", "--config", write_config(dir, ok).string(), "--out", (dir / "out").string(), "--seed",
                    "3"}) == halfdirac::cli::kExitOk);
    const json r = json::parse(slurp(dir / "out" / "chern.json"));
    CHECK(std::abs(r["chern"].get<int>()) == 1);
    CHECK(r["header"]["config"]["seed"] == 3);
  }

  TEST_CASE("arc3d zero modes lie on the ray") {
    const fs::path dir = scratch("arc3d");
    json cfg;
    cfg["out"] = dir.string();
    cfg["n_rho"] = 2;
    cfg["n_arg"] = 8;
    halfdirac::cli::run("arc3d", cfg);
    const json r = json::parse(slurp(dir / "arc3d.json"));
    CHECK(r["mismatches_with_ray"] == 0);
    CHECK(r["zero_mode_cells"] == 2);
  }
}
