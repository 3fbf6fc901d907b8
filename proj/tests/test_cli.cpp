#include "bfe/bfe.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace bfe;
namespace fs = std::filesystem;

namespace {

const std::string kDir = BFE_SOURCE_DIR;

fs::path scratch() {
  static const fs::path p = [] {
    auto d = fs::temp_directory_path() / ("bfe_cli_" + std::to_string(::getpid()));
    fs::create_directories(d);
    return d;
  }();
  return p;
}

int run(const std::string& args, std::string* output = nullptr) {
  const auto log = scratch() / "last.log";
  const std::string cmd = std::string(BFE_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  if (output) {
    std::ifstream in(log);
    std::stringstream ss;
    ss << in.rdbuf();
    *output = ss.str();
  }
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int count_lines(const fs::path& p) {
  std::ifstream in(p);
  int n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

const std::string kConfig = kDir + "/configs/sample.cfg";
const std::string kBall = kDir + "/meshes/ball1.mesh";

}  // namespace

TEST(Cli, UsageErrorsExitTwo) {
  std::string out;
  EXPECT_EQ(run("", &out), 2);
  EXPECT_EQ(run("verify bogus", &out), 2);
  EXPECT_NE(out.find("unknown suite"), std::string::npos);
  EXPECT_EQ(run("verify", &out), 2);
  EXPECT_EQ(run("no-such-command"), 2);
  EXPECT_EQ(run("solve-laplace --config " + kConfig + " --mesh " + kBall + " --s -1,2", &out), 2);
  EXPECT_NE(out.find("right half plane"), std::string::npos);
  EXPECT_EQ(run("solve-laplace --config " + kConfig + " --mesh /no/such.mesh --s 1,2"), 2);
  EXPECT_EQ(run("reconstruct --config " + kConfig + " --mesh " + kBall), 2);
  EXPECT_EQ(run("estimate-symbol --operator X"), 2);
}

TEST(Cli, HelpListsSubcommands) {
  std::string out;
  EXPECT_EQ(run("--help", &out), 0);
  for (const char* sub : {"solve-laplace", "solve-time", "verify", "estimate-symbol", "reconstruct"})
    EXPECT_NE(out.find(sub), std::string::npos) << sub;
}

TEST(Cli, VerifyNormsOnShippedCube) {
  const auto report = scratch() / "norms.json";
  std::string out;
  ASSERT_EQ(run("verify norms --mesh " + kDir + "/meshes/cube.mesh --report " + report.string(), &out), 0) << out;
  const auto j = nlohmann::json::parse(slurp(report));
  EXPECT_EQ(j["suite"], "norms");
  EXPECT_TRUE(j["pass"].get<bool>());
  ASSERT_FALSE(j["entries"].empty());
  for (const auto& e : j["entries"]) {
    ASSERT_TRUE(e.contains("pass"));
    ASSERT_TRUE(e["pass"].is_boolean());
    ASSERT_TRUE(e["slack"].is_number());
    EXPECT_FALSE(e["tag"].get<std::string>().empty());
  }
}

TEST(Cli, VerifyIsDeterministicForAFixedSeed) {
  const auto a = scratch() / "det_a.json", b = scratch() / "det_b.json", c = scratch() / "det_c.json";
  ASSERT_EQ(run("verify interior --seed 3 --report " + a.string()), 0);
  ASSERT_EQ(run("verify interior --seed 3 --report " + b.string()), 0);
  ASSERT_EQ(run("verify interior --seed 4 --report " + c.string()), 0);
  EXPECT_EQ(slurp(a), slurp(b));
  EXPECT_NE(slurp(a), slurp(c));
}

TEST(Cli, MakeMeshRoundTrip) {
  const auto path = scratch() / "c2.mesh";
  ASSERT_EQ(run("make-mesh --shape cube --n 2 --out " + path.string()), 0);
  const auto m = load_mesh(path.string());
  EXPECT_EQ(m.num_vertices(), 27);
  EXPECT_EQ(m.num_tets(), 48);
  EXPECT_EQ(run("make-mesh --shape torus --out " + path.string()), 2);
}

TEST(Cli, SolveLaplaceWritesSolutionAndPressure) {
  const auto dir = scratch() / "sl";
  std::string out;
  ASSERT_EQ(run("solve-laplace --config " + kConfig + " --mesh " + kBall + " --s 1,2 --dump-matrix --out " +
                    dir.string(),
                &out),
            0)
      << out;
  // 85 vertices, 42 boundary vertices, 80 boundary faces
  EXPECT_EQ(count_lines(dir / "solution.csv"), 1 + 5 * 85 + 1 + 42 + 80);
  EXPECT_EQ(count_lines(dir / "pressure.csv"), 1 + 2);  // the centre probe is interior
  EXPECT_TRUE(fs::exists(dir / "matrix.mtx"));
  const auto j = nlohmann::json::parse(slurp(dir / "report.json"));
  EXPECT_TRUE(j["pass"].get<bool>());

  // the same pressure through the library
  const auto cfg = load_config(kConfig);
  const auto ctx = CoupledContext::build(load_mesh(kBall), cfg.material);
  const LaplaceParameter s(1, 2);
  const auto sol = solve(assemble_system(ctx, s), assemble_rhs(ctx, cfg, s));
  const auto p = reconstruct_pressure(ctx, sol, ProbeSet::build(ctx, {cfg.probes[0], cfg.probes[1]}));
  std::ifstream in(dir / "pressure.csv");
  std::string line;
  std::getline(in, line);
  for (int k = 0; k < 2; ++k) {
    std::getline(in, line);
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string tok; std::getline(ss, tok, ',');) f.push_back(tok);
    ASSERT_EQ(f.size(), 8u);
    EXPECT_NEAR(std::stod(f[6]), p[k].real(), 1e-10 * std::abs(p[k]));
    EXPECT_NEAR(std::stod(f[7]), p[k].imag(), 1e-10 * std::abs(p[k]));
  }
}

TEST(Cli, ProbeOnTheBoundaryIsAnInputError) {
  auto cfg = load_config(kConfig);
  const auto mesh = load_mesh(kBall);
  cfg.probes = {{"on", mesh.vertices()[mesh.boundary_vertices()[0]]}};
  const auto path = scratch() / "bad_probe.cfg";
  save_config(path.string(), cfg);
  std::string out;
  EXPECT_EQ(run("solve-laplace --config " + path.string() + " --mesh " + kBall + " --s 1,0", &out), 2);
  EXPECT_NE(out.find("'on'"), std::string::npos) << out;
}

TEST(Cli, ReconstructDerivedFields) {
  const auto dir = scratch() / "rc";
  std::string out;
  ASSERT_EQ(run("reconstruct --config " + kConfig + " --mesh " + kBall + " --s 0.5,1 --out " + dir.string(), &out), 0)
      << out;
  const auto mesh = load_mesh(kBall);
  EXPECT_EQ(count_lines(dir / "derived.csv"), 1 + 10 * mesh.num_tets());
  EXPECT_EQ(count_lines(dir / "interior.csv"), 1 + 5);
  EXPECT_EQ(count_lines(dir / "pressure.csv"), 1 + 2);
}

TEST(Cli, SolveTimeWritesProbesAndAudit) {
  const auto dir = scratch() / "st";
  std::string out;
  ASSERT_EQ(run("solve-time --config " + kConfig + " --mesh " + kBall + " --rule bdf2 --dt 0.2 --steps 20 --out " +
                    dir.string(),
                &out),
            0)
      << out;
  // 21 samples x (2 exterior probes x p + 1 interior probe x 5 fields)
  EXPECT_EQ(count_lines(dir / "probes.csv"), 1 + 21 * 7);
  EXPECT_EQ(count_lines(dir / "audit.csv"), 1 + 21);
  const auto j = nlohmann::json::parse(slurp(dir / "audit.json"));
  EXPECT_TRUE(j["pass"].get<bool>()) << j.dump(2);
  EXPECT_EQ(run("solve-time --config " + kConfig + " --mesh " + kBall + " --rule rk4 --out " + dir.string()), 2);
}

TEST(Cli, EstimateSymbolWritesJson) {
  const auto path = scratch() / "sym.json";
  std::string out;
  ASSERT_EQ(run("estimate-symbol --operator Ainv --mesh " + kDir + "/meshes/cube.mesh --omega-max 4 --json " +
                    path.string(),
                &out),
            0)
      << out;
  const auto j = nlohmann::json::parse(slurp(path));
  EXPECT_EQ(j["operator"], "Ainv");
  EXPECT_TRUE(j["mu_hat"].is_number());
  EXPECT_EQ(j["lines"].size(), 1u);
  EXPECT_EQ(j["lines"][0]["norm"].size(), 8u);
  EXPECT_EQ(run("estimate-symbol --samples 3 --mesh " + kDir + "/meshes/cube.mesh"), 2);
}
