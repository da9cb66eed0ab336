// End-to-end tests that drive the installed command-line binary. The binary
// path is injected by the build as PCADDREACH_CLI_PATH.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

fs::path scratch_root() {
  static const fs::path root = [] {
    fs::path p = fs::temp_directory_path() / "pcaddreach_cli_test";
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return root;
}

// Runs the binary with the given arguments, returns the process exit code.
// Stderr is captured into *err_out when requested.
int run_cli(const std::string& args, std::string* err_out = nullptr) {
  const fs::path err_file = scratch_root() / "stderr.txt";
  std::ostringstream cmd;
  cmd << '"' << PCADDREACH_CLI_PATH << "\" " << args << " 2> \"" << err_file.string() << '"';
  const int status = std::system(cmd.str().c_str());
  if (err_out) {
    std::ifstream in(err_file);
    std::ostringstream buf;
    buf << in.rdbuf();
    *err_out = buf.str();
  }
  if (status < 0) return -1;
#ifdef WEXITSTATUS
  return WEXITSTATUS(status);
#else
  return status;
#endif
}

void write_file(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path);
  out << text;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// A configuration small enough that a full run takes about a second.
std::string tiny_config(double delta, double tau, int calibration_count) {
  nlohmann::json j = {
      {"system", {{"name", "linear2d"}}},
      {"plan", {{"horizon", 4}, {"segment_length", 1}}},
      {"train",
       {{"count", 200}, {"seed", 1}, {"hidden_widths", {8}}, {"epochs", 30}}},
      {"reach", {{"mode", "approx"}}},
      {"conformal",
       {{"delta", delta},
        {"tau", tau},
        {"residual", "pca"},
        {"calibration_count", calibration_count},
        {"seed", 2}}},
      {"validate", {{"trials", 200}, {"seed", 3}}},
  };
  return j.dump(2);
}

const std::vector<std::string> kExpectedArtifacts = {
    "datasets/train.csv",           "datasets/train.meta.json",
    "datasets/calibration.csv",     "datasets/calibration.meta.json",
    "models/segment_0000.json",     "models/segment_0001.json",
    "models/segment_0002.json",     "models/segment_0003.json",
    "models/summary.json",          "flowpipe_surrogate.json",
    "error_model.json",             "flowpipe_confident.json",
    "coverage.json",                "report/bounds.csv",
    "timings.json",
};

// Relative path -> file bytes for every regular file, minus timings.json
// (wall-clock measurements are the one artifact allowed to vary).
std::map<std::string, std::string> tree_bytes(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    const std::string rel = fs::relative(entry.path(), root).generic_string();
    if (rel == "timings.json") continue;
    out[rel] = read_file(entry.path());
  }
  return out;
}

}  // namespace

TEST_CASE("full run writes every artifact") {
  const fs::path dir = scratch_root() / "full";
  const fs::path cfg = dir / "config.json";
  write_file(cfg, tiny_config(0.9, 0.0, 100));

  std::string err;
  const int code =
      run_cli("run --config \"" + cfg.string() + "\" --out \"" + (dir / "out").string() + "\"",
              &err);
  CAPTURE(err);
  REQUIRE(code == 0);

  for (const auto& rel : kExpectedArtifacts) {
    CAPTURE(rel);
    CHECK(fs::exists(dir / "out" / rel));
  }

  // bounds.csv: one header line plus state_dim rows per active step.
  std::istringstream bounds(read_file(dir / "out" / "report" / "bounds.csv"));
  std::string line;
  int lines = 0;
  while (std::getline(bounds, line)) {
    if (!line.empty()) ++lines;
  }
  CHECK(lines == 1 + 4 * 2);

  const auto coverage = nlohmann::json::parse(read_file(dir / "out" / "coverage.json"));
  CHECK(coverage.at("trials").get<int>() == 200);
  const double rate = coverage.at("coverage").get<double>();
  CHECK(rate >= 0.0);
  CHECK(rate <= 1.0);
}

TEST_CASE("chained phases reproduce a single run byte for byte") {
  const fs::path dir = scratch_root() / "phases";
  const fs::path cfg = dir / "config.json";
  write_file(cfg, tiny_config(0.9, 0.0, 100));

  const std::string out_a = (dir / "out_run").string();
  REQUIRE(run_cli("run --config \"" + cfg.string() + "\" --out \"" + out_a + "\"") == 0);

  const std::string out_b = (dir / "out_chain").string();
  for (const std::string phase :
       {"simulate", "train", "reach", "calibrate", "inflate", "validate", "report"}) {
    std::string err;
    const int code =
        run_cli(phase + " --config \"" + cfg.string() + "\" --out \"" + out_b + "\"", &err);
    CAPTURE(phase);
    CAPTURE(err);
    REQUIRE(code == 0);
  }

  CHECK(tree_bytes(out_a) == tree_bytes(out_b));
}

TEST_CASE("rerunning into the same directory is idempotent") {
  const fs::path dir = scratch_root() / "idempotent";
  const fs::path cfg = dir / "config.json";
  write_file(cfg, tiny_config(0.9, 0.0, 100));

  const std::string out = (dir / "out").string();
  REQUIRE(run_cli("run --config \"" + cfg.string() + "\" --out \"" + out + "\"") == 0);
  const auto first = tree_bytes(out);
  REQUIRE(run_cli("run --config \"" + cfg.string() + "\" --out \"" + out + "\"") == 0);
  CHECK(first == tree_bytes(out));
}

TEST_CASE("thread count does not change artifacts") {
  const fs::path dir = scratch_root() / "threads";
  const fs::path cfg = dir / "config.json";
  write_file(cfg, tiny_config(0.9, 0.0, 100));

  const std::string out1 = (dir / "out1").string();
  const std::string out4 = (dir / "out4").string();
  REQUIRE(run_cli("run --config \"" + cfg.string() + "\" --out \"" + out1 +
                  "\" --threads 1") == 0);
  REQUIRE(run_cli("run --config \"" + cfg.string() + "\" --out \"" + out4 +
                  "\" --threads 4") == 0);
  CHECK(tree_bytes(out1) == tree_bytes(out4));
}

TEST_CASE("infeasible calibration exits with code 4 and names the numbers") {
  const fs::path dir = scratch_root() / "infeasible";
  const fs::path cfg = dir / "config.json";
  // delta + tau >= 1 can never be calibrated; required rank 13 > 10 samples.
  write_file(cfg, tiny_config(0.95, 0.1, 10));

  std::string err;
  const int code =
      run_cli("run --config \"" + cfg.string() + "\" --out \"" + (dir / "out").string() + "\"",
              &err);
  CAPTURE(err);
  CHECK(code == 4);
  CHECK(err.find("13") != std::string::npos);
  CHECK(err.find("10") != std::string::npos);
  CHECK(err.find("calibration") != std::string::npos);
}

TEST_CASE("schema violations exit with code 2 and name the offending key") {
  const fs::path dir = scratch_root() / "schema";

  SUBCASE("unknown key") {
    const fs::path cfg = dir / "unknown.json";
    nlohmann::json j = nlohmann::json::parse(tiny_config(0.9, 0.0, 100));
    j["plann"] = 7;
    write_file(cfg, j.dump(2));
    std::string err;
    const int code = run_cli(
        "run --config \"" + cfg.string() + "\" --out \"" + (dir / "out_a").string() + "\"", &err);
    CHECK(code == 2);
    CHECK(err.find("plann") != std::string::npos);
    CHECK(err.find("unknown key") != std::string::npos);
  }

  SUBCASE("bad enum value") {
    const fs::path cfg = dir / "badmode.json";
    nlohmann::json j = nlohmann::json::parse(tiny_config(0.9, 0.0, 100));
    j["reach"]["mode"] = "sloppy";
    write_file(cfg, j.dump(2));
    std::string err;
    const int code = run_cli(
        "run --config \"" + cfg.string() + "\" --out \"" + (dir / "out_b").string() + "\"", &err);
    CHECK(code == 2);
    CHECK(err.find("reach.mode") != std::string::npos);
    CHECK(err.find("expected exact or approx") != std::string::npos);
  }

  SUBCASE("missing config file is rejected") {
    const int code =
        run_cli("run --config \"" + (dir / "nope.json").string() + "\" --out \"" +
                (dir / "out_c").string() + "\"");
    CHECK(code != 0);
  }
}

TEST_CASE("phases demand their upstream artifacts") {
  const fs::path dir = scratch_root() / "missing";
  const fs::path cfg = dir / "config.json";
  write_file(cfg, tiny_config(0.9, 0.0, 100));

  std::string err;
  const int code = run_cli(
      "report --config \"" + cfg.string() + "\" --out \"" + (dir / "out").string() + "\"", &err);
  CAPTURE(err);
  CHECK(code == 3);
  CHECK(err.find("missing artifact") != std::string::npos);
  CHECK(err.find("inflate") != std::string::npos);
}
