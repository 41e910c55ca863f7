#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = -1;
  std::string output;
};

Outcome run(const std::string& args) {
  std::string cmd = std::string(QFLDP_CLI_PATH) + " " + args + " 2>&1";
  Outcome o;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return o;
  char buf[4096];
  while (std::fgets(buf, sizeof buf, p)) o.output += buf;
  int st = pclose(p);
  o.code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  fs::path d = fs::temp_directory_path() / ("qfldp_cli_test_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string default_config() { return std::string(QFLDP_SOURCE_DIR) + "/configs/default.json"; }

}  // namespace

TEST(Cli, GeneratingCurveStartsAtZero) {
  auto out = scratch("generating");
  auto r = run("generating " + default_config() + " --out " + out.string());
  ASSERT_EQ(r.code, 0) << r.output;
  std::ifstream csv(out / "generating_curve.csv");
  std::string header, line;
  std::getline(csv, header);
  EXPECT_EQ(header.rfind("s,J", 0), 0u) << header;
  bool found = false;
  while (std::getline(csv, line)) {
    std::stringstream ss(line);
    std::string s, J;
    std::getline(ss, s, ',');
    std::getline(ss, J, ',');
    if (std::stod(s) == 0.0) {
      found = true;
      EXPECT_EQ(std::stod(J), 0.0);
    }
  }
  EXPECT_TRUE(found);
  auto bundle = nlohmann::json::parse(slurp(out / "bundle.json"));
  EXPECT_EQ(bundle["command"], "generating");
  EXPECT_TRUE(bundle["invariants_ok"].get<bool>());
}

TEST(Cli, BundleRerunIsBitwiseIdentical) {
  auto a = scratch("bundle_a"), b = scratch("bundle_b");
  auto r = run("ensemble " + default_config() + " --out " + a.string());
  ASSERT_EQ(r.code, 0) << r.output;
  r = run("ensemble " + (a / "bundle.json").string() + " --threads 3 --out " + b.string());
  ASSERT_EQ(r.code, 0) << r.output;
  auto bundle = nlohmann::json::parse(slurp(a / "bundle.json"));
  ASSERT_FALSE(bundle["files"].empty());
  for (const auto& f : bundle["files"]) {
    std::string name = f.get<std::string>();
    EXPECT_EQ(slurp(a / name), slurp(b / name)) << name;
  }
  auto mismatched = run("rate " + (a / "bundle.json").string() + " --out " + b.string());
  EXPECT_EQ(mismatched.code, 2) << mismatched.output;
}

TEST(Cli, MalformedConfigReportsLocation) {
  auto dir = scratch("malformed");
  {
    std::ofstream f(dir / "bad.json");
    f << "{\"schema_version\": 1,\n,}";
  }
  auto r = run("generating " + (dir / "bad.json").string() + " --out " + dir.string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("line 2"), std::string::npos) << r.output;
  {
    std::ofstream f(dir / "typo.json");
    f << R"({"schema_version": 1, "model": {"lamda": 1.0}})";
  }
  r = run("generating " + (dir / "typo.json").string() + " --out " + dir.string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("model.lamda"), std::string::npos) << r.output;
  r = run("generating --no-such-flag");
  EXPECT_EQ(r.code, 2);
}

TEST(Cli, DenseCapGivesResourceExit) {
  auto dir = scratch("cap");
  {
    std::ofstream f(dir / "big.json");
    f << R"({"schema_version": 1, "boxes": {"L": 3, "L_rho": 3, "L_tau": 2100}})";
  }
  auto r = run("ensemble " + (dir / "big.json").string() + " --out " + dir.string());
  EXPECT_EQ(r.code, 4) << r.output;
}

TEST(Cli, VerifyPassesOnDefaultConfig) {
  auto out = scratch("verify");
  auto r = run("verify " + default_config() + " --out " + out.string());
  EXPECT_EQ(r.code, 0) << r.output;
  EXPECT_EQ(r.output.find("FAIL"), std::string::npos) << r.output;
  EXPECT_NE(r.output.find("PASS"), std::string::npos);
  EXPECT_TRUE(fs::exists(out / "verify_report.csv"));
}
