#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code = -1;
  std::string err;
};

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("cornerbie_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

CliResult run(const std::string& sub, const fs::path& config, const fs::path& out) {
  const fs::path err = out / "stderr.txt";
  const std::string cmd = std::string("\"") + CORNERBIE_CLI + "\" " + sub + " --config \"" + config.string() + "\" --out \"" +
                          out.string() + "\" > \"" + (out / "stdout.txt").string() + "\" 2> \"" + err.string() + "\"";
  const int st = std::system(cmd.c_str());
  CliResult r;
  r.code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  r.err = slurp(err);
  return r;
}

fs::path bundled(const std::string& name) { return fs::path(CORNERBIE_SOURCE_DIR) / "examples_cfg" / (name + ".json"); }

nlohmann::json summary(const fs::path& out) { return nlohmann::json::parse(slurp(out / "summary.json")); }

}  // namespace

TEST(Cli, TriangleScatteringConfig) {
  const fs::path out = scratch("scatter");
  const CliResult r = run("run-experiment", bundled("triangle-scattering"), out);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto s = summary(out);
  EXPECT_TRUE(s["pass"].get<bool>());
  EXPECT_LE(s["evaluate"]["max_error_by_class"]["far"].get<double>(), 5e-13);
  EXPECT_TRUE(fs::exists(out / "density.csv"));
  EXPECT_TRUE(fs::exists(out / "polarization.json"));
}

TEST(Cli, SquareDirichletConfig) {
  const fs::path out = scratch("square");
  const CliResult r = run("run-experiment", bundled("square-dirichlet-harmonic"), out);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto s = summary(out);
  double worst = 0;
  for (const auto& [k, v] : s["evaluate"]["max_error_by_class"].items()) worst = std::max(worst, v.get<double>());
  EXPECT_LE(worst, 1e-12);
}

TEST(Cli, TriangleCompareConfig) {
  const fs::path out = scratch("compare");
  const CliResult r = run("run-experiment", bundled("triangle-compare"), out);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(summary(out)["pass"].get<bool>());
  EXPECT_TRUE(fs::exists(out / "reference_density.csv"));
  EXPECT_TRUE(fs::exists(out / "resolve_corner1.csv"));
}

TEST(Cli, MalformedConfigNamesField) {
  const fs::path out = scratch("bad");
  const fs::path cfg = out / "bad.json";
  std::ofstream(cfg) << R"({"polygon": {"vertices": [[0,0],[1,0],[0,1]]}, "bie": "interior_dirichlet",
                            "data": {"type": "harmonic", "degree": 3}, "mesh": {"order": "sixteen"}})";
  CliResult r = run("solve", cfg, out);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("mesh.order"), std::string::npos) << r.err;

  std::ofstream(cfg) << R"({"polygon": [[0,0],[1,0],[0,1]], "bie": "sideways"})";
  r = run("solve", cfg, out);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("bie"), std::string::npos) << r.err;

  std::ofstream(cfg) << "{\"polygon\": [[0,0],";
  r = run("mesh", cfg, out);
  EXPECT_EQ(r.code, 2);

  r = run("mesh", out / "missing.json", out);
  EXPECT_EQ(r.code, 2);
}

TEST(Cli, DeterministicOutputs) {
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  const fs::path cfg = a / "charges.json";
  std::ofstream(cfg) << R"({"polygon": [[0,0],[1,0],[0.3,0.8]], "bie": "exterior_neumann", "seed": 5,
                            "data": {"type": "charges", "random": {"count": 4, "center": [0.45, 0.27], "radius": 0.05}},
                            "targets": {"circle": {"count": 50, "factor": 1.0}}})";
  ASSERT_EQ(run("eval", cfg, a).code, 0) << slurp(a / "stderr.txt");
  ASSERT_EQ(run("eval", cfg, b).code, 0) << slurp(b / "stderr.txt");
  for (const char* f : {"density.csv", "potential_circle.csv"}) {
    const std::string x = slurp(a / f), y = slurp(b / f);
    EXPECT_FALSE(x.empty()) << f;
    EXPECT_EQ(x, y) << f;
  }
}
