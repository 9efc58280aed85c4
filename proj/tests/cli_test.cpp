#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "fppgeo/cli.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("fppgeo_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  int run(std::vector<std::string> args) {
    args.insert(args.begin(), "fppgeo");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    out_.str("");
    err_.str("");
    return fppgeo::cli::run(static_cast<int>(argv.size()), argv.data(), out_, err_);
  }

  fs::path dir_;
  std::ostringstream out_, err_;
};

std::vector<std::string> graph_args(const std::string& out) {
  return {"graph", "--dim", "2", "--box", "41", "--dist", "uniform:0,1", "--theta", "1,0", "--alpha", "15", "--seed", "7",
          "--out", out};
}

}  // namespace

TEST(Sha256, StandardVectors) {
  EXPECT_EQ(fppgeo::sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(fppgeo::sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_F(CliTest, GraphWritesCsvSummaryAndManifest) {
  ASSERT_EQ(run(graph_args(path("g.csv"))), 0) << err_.str();
  ASSERT_TRUE(fs::exists(path("g.csv")));
  ASSERT_TRUE(fs::exists(path("g.summary.json")));
  const json m = json::parse(fppgeo::read_file(path("g.manifest.json")));
  EXPECT_EQ(m.at("tool"), "fppgeo");
  EXPECT_EQ(m.at("command"), "graph");
  EXPECT_EQ(m.at("seeds"), json::array({7}));
  EXPECT_EQ(m.at("config").at("theta"), json::array({1, 0}));
  EXPECT_EQ(m.at("config").at("alpha"), 15);
  EXPECT_EQ(m.at("config").at("dist"), json({{"kind", "uniform"}, {"params", {0.0, 1.0}}}));
  ASSERT_EQ(m.at("outputs").size(), 2u);
  const auto& o = m.at("outputs")[0];
  EXPECT_EQ(o.at("path"), "g.csv");
  const std::string bytes = fppgeo::read_file(path("g.csv"));
  EXPECT_EQ(o.at("sha256"), fppgeo::sha256_hex(bytes));
  EXPECT_EQ(o.at("bytes"), bytes.size());
  // One row per vertex plus the header.
  EXPECT_EQ(std::count(bytes.begin(), bytes.end(), '\n'), 41 * 41 + 1);
}

TEST_F(CliTest, RepeatRunIsByteIdentical) {
  ASSERT_EQ(run(graph_args(path("a.csv"))), 0);
  ASSERT_EQ(run(graph_args(path("b.csv"))), 0);
  EXPECT_EQ(fppgeo::read_file(path("a.csv")), fppgeo::read_file(path("b.csv")));
  auto ma = json::parse(fppgeo::read_file(path("a.manifest.json")));
  auto mb = json::parse(fppgeo::read_file(path("b.manifest.json")));
  EXPECT_EQ(ma["outputs"][0]["sha256"], mb["outputs"][0]["sha256"]);
}

TEST_F(CliTest, InvalidDistributionIsConfigError) {
  auto args = graph_args(path("g.csv"));
  args[6] = "uniform:1,0";
  EXPECT_EQ(run(args), 2);
  EXPECT_NE(err_.str().find("dist"), std::string::npos) << err_.str();
  EXPECT_FALSE(fs::exists(path("g.csv")));
}

TEST_F(CliTest, UnknownKeyNamedInError) {
  fppgeo::write_file(path("cfg.json"), R"({"box": 21, "no_such_key": 3})");
  EXPECT_EQ(run({"graph", "--config", path("cfg.json"), "--out", path("g.csv")}), 2);
  EXPECT_NE(err_.str().find("no_such_key"), std::string::npos) << err_.str();
  EXPECT_EQ(run({"busemann", "--set", "grid=3", "--out", path("b.csv")}), 2);
  EXPECT_NE(err_.str().find("grid"), std::string::npos) << err_.str();
}

TEST_F(CliTest, BadValueNamesKey) {
  EXPECT_EQ(run({"graph", "--box", "abc", "--out", path("g.csv")}), 2);
  EXPECT_NE(err_.str().find("box"), std::string::npos);
  EXPECT_EQ(run({"graph", "--theta", "1,0,0", "--out", path("g.csv")}), 2);
  EXPECT_NE(err_.str().find("theta"), std::string::npos);
  EXPECT_EQ(run({"modify", "--epsilon", "-1", "--out", path("m.csv")}), 2);
  EXPECT_NE(err_.str().find("epsilon"), std::string::npos);
}

TEST_F(CliTest, FlagsOverrideConfigFile) {
  fppgeo::write_file(path("cfg.json"), R"({"box": 21, "alpha": 3, "theta": "e2"})");
  ASSERT_EQ(run({"graph", "--config", path("cfg.json"), "--alpha", "5", "--out", path("g.csv")}), 0) << err_.str();
  const json c = json::parse(fppgeo::read_file(path("g.manifest.json"))).at("config");
  EXPECT_EQ(c.at("box"), 21);
  EXPECT_EQ(c.at("alpha"), 5);
  EXPECT_EQ(c.at("theta"), json::array({0, 1}));
}

TEST_F(CliTest, MissingConfigFileIsIoError) {
  EXPECT_EQ(run({"graph", "--config", path("absent.json"), "--out", path("g.csv")}), 3);
}

TEST_F(CliTest, JsonExportRoundTripsAndMatchesCsv) {
  const std::vector<std::string> common = {"--box", "51", "--seeds", "2", "--window", "7"};
  auto a = std::vector<std::string>{"busemann"};
  a.insert(a.end(), common.begin(), common.end());
  auto b = a;
  a.insert(a.end(), {"--format", "json", "--out", path("b.json")});
  b.insert(b.end(), {"--out", path("b.csv")});
  ASSERT_EQ(run(a), 0) << err_.str();
  ASSERT_EQ(run(b), 0) << err_.str();
  const fppgeo::Report r = fppgeo::report_from_json(json::parse(fppgeo::read_file(path("b.json"))));
  std::ostringstream csv;
  fppgeo::write_report_csv(csv, r);
  EXPECT_EQ(csv.str(), fppgeo::read_file(path("b.csv")));
}

TEST_F(CliTest, UnsupportedFormat) {
  EXPECT_EQ(run({"busemann", "--box", "31", "--format", "xml", "--out", path("b.xml")}), 2);
  EXPECT_NE(err_.str().find("xml"), std::string::npos);
}

TEST_F(CliTest, JobsDoNotChangeOutput) {
  const std::vector<std::string> base = {"radii", "--box", "31", "--seeds", "3"};
  auto a = base, b = base;
  a.insert(a.end(), {"--jobs", "1", "--out", path("r1.csv")});
  b.insert(b.end(), {"--jobs", "2", "--out", path("r2.csv")});
  ASSERT_EQ(run(a), 0) << err_.str();
  ASSERT_EQ(run(b), 0) << err_.str();
  EXPECT_EQ(fppgeo::read_file(path("r1.csv")), fppgeo::read_file(path("r2.csv")));
}

TEST_F(CliTest, VerifyDetectsTampering) {
  ASSERT_EQ(run(graph_args(path("g.csv"))), 0);
  EXPECT_EQ(run({"verify", path("g.manifest.json")}), 0);
  EXPECT_EQ(out_.str(), "ok\n");
  fppgeo::write_file(path("g.summary.json"), "{}");
  EXPECT_EQ(run({"verify", path("g.manifest.json")}), 1);
  EXPECT_NE(err_.str().find("g.summary.json"), std::string::npos);
  EXPECT_EQ(err_.str().find("g.csv"), std::string::npos);
}

TEST_F(CliTest, ModifySeedFlagsMapToHalfOpenRange) {
  ASSERT_EQ(run({"modify", "--seed", "4", "--seeds", "2", "--n-list", "8", "--out", path("m.csv")}), 0) << err_.str();
  const json m = json::parse(fppgeo::read_file(path("m.manifest.json")));
  EXPECT_EQ(m.at("config").at("seed_range"), json::array({4, 6}));
  EXPECT_EQ(m.at("seeds"), json::array({4, 5}));
  EXPECT_EQ(m.at("config").at("N_list"), json::array({8}));
  const std::string csv = fppgeo::read_file(path("m.csv"));
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "seed,N,M,event_pass,severed,witness_level,runtime_ms");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
  EXPECT_TRUE(fs::exists(path("m.summary.json")));
}

TEST_F(CliTest, MassTransportOnTorus) {
  ASSERT_EQ(run({"masstransport", "--box", "12", "--seeds", "2", "--out", path("mt.csv")}), 0) << err_.str();
  EXPECT_NE(fppgeo::read_file(path("mt.csv")).find("total_out,1,,144"), std::string::npos);
}

TEST_F(CliTest, ManifestsMatchSchema) {
  if (std::system("python3 -c 'import jsonschema' >/dev/null 2>&1") != 0) GTEST_SKIP() << "python3 jsonschema not available";
  ASSERT_EQ(run(graph_args(path("g.csv"))), 0);
  ASSERT_EQ(run({"shape", "--radii", "4,8", "--seeds", "2", "--grid", "4", "--out", path("s.csv")}), 0) << err_.str();
  ASSERT_EQ(run({"modify", "--seeds", "1", "--n-list", "8", "--out", path("m.csv")}), 0) << err_.str();
  const std::string script = std::string(FPPGEO_SOURCE_DIR) + "/tools/validate_manifest.py";
  const std::string cmd = "python3 " + script + " " + path("g.manifest.json") + " " + path("s.manifest.json") + " " +
                          path("m.manifest.json");
  EXPECT_EQ(std::system(cmd.c_str()), 0);
  // A manifest missing its digests must be rejected.
  json bad = json::parse(fppgeo::read_file(path("g.manifest.json")));
  bad["outputs"][0].erase("sha256");
  fppgeo::write_file(path("bad.json"), bad.dump());
  EXPECT_NE(std::system(("python3 " + script + " " + path("bad.json") + " 2>/dev/null").c_str()), 0);
}
