#include <filesystem>
#include <fstream>
#include <sstream>

#include "eocntk/cli.hpp"
#include "eocntk/errors.hpp"
#include "gtest/gtest.h"

using namespace eocntk;
using namespace eocntk::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("eocntk_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  out << content;
}

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome invoke(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string idx_bytes(std::uint32_t magic, std::uint32_t n, std::uint32_t r, std::uint32_t c,
                      const std::vector<unsigned char>& payload) {
  std::string s;
  for (std::uint32_t v : {magic, n, r, c}) {
    for (int sh = 24; sh >= 0; sh -= 8) s.push_back(static_cast<char>((v >> sh) & 0xff));
  }
  s.append(payload.begin(), payload.end());
  return s;
}

}  // namespace

TEST(CliDescribeTest, ReportsWidthsAndConstants) {
  auto r = invoke({"describe", "--pattern", "quadratic", "--m", "4", "--l", "4", "--m0", "2",
                   "--ml", "3", "--a", "1", "--b", "1"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("widths    2,4,16,36,3"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("delta       0.5\n"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("kappa       1.41421356237309"), std::string::npos) << r.out;

  r = invoke({"describe", "--a", "0", "--b", "1"});
  ASSERT_EQ(r.code, kExitOk);
  EXPECT_NE(r.out.find("delta       1\n"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("kappa       1\n"), std::string::npos) << r.out;
}

TEST(CliDescribeTest, InvalidConfigIsUsageError) {
  auto r = invoke({"describe", "--l", "1"});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_FALSE(r.err.empty());
  r = invoke({"describe", "--a", "0", "--b", "0"});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_EQ(invoke({"describe", "--nope"}).code, kExitUsage);
  EXPECT_EQ(invoke({"frobnicate"}).code, kExitUsage);
}

TEST(CsvDatasetTest, ParsesPoints) {
  std::istringstream in("1,0\n0,1\n");
  const Dataset ds = parse_csv_dataset(in);
  ASSERT_EQ(ds.size(), 2);
  EXPECT_EQ(ds.dim(), 2);
  EXPECT_EQ(ds.points[0][0], 1.0);
  EXPECT_EQ(ds.points[1][1], 1.0);

  std::istringstream spaced(" 0.5 , -2e-3\r\n\n3,4\n");
  const Dataset s = parse_csv_dataset(spaced);
  ASSERT_EQ(s.size(), 2);
  EXPECT_EQ(s.points[0][1], -2e-3);
}

TEST(CsvDatasetTest, RaggedAndGarbageRowsNameTheLine) {
  std::istringstream ragged("1,0\n0,1,2\n");
  try {
    parse_csv_dataset(ragged, "d.csv");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
  std::istringstream garbage("1,x\n");
  EXPECT_THROW(parse_csv_dataset(garbage), ParseError);
  std::istringstream empty_cell("1,,2\n");
  EXPECT_THROW(parse_csv_dataset(empty_cell), ParseError);
  std::istringstream nothing("");
  EXPECT_THROW(parse_csv_dataset(nothing), ParseError);
}

TEST(IdxDatasetTest, ParsesThreeDimensionalBytes) {
  std::istringstream in(idx_bytes(0x00000803u, 2, 2, 2, {0, 255, 51, 102, 1, 2, 3, 4}));
  const Dataset ds = parse_idx_dataset(in);
  ASSERT_EQ(ds.size(), 2);
  EXPECT_EQ(ds.dim(), 4);
  EXPECT_EQ(ds.points[0][0], 0.0);
  EXPECT_EQ(ds.points[0][1], 1.0);
  EXPECT_DOUBLE_EQ(ds.points[0][2], 0.2);
  for (const auto& p : ds.points) {
    EXPECT_GE(p.minCoeff(), 0.0);
    EXPECT_LE(p.maxCoeff(), 1.0);
  }
}

TEST(IdxDatasetTest, LimitBadMagicAndTruncation) {
  std::istringstream limited(idx_bytes(0x00000803u, 3, 1, 2, {1, 2, 3, 4}));
  EXPECT_EQ(parse_idx_dataset(limited, 2).size(), 2);

  std::istringstream bad(idx_bytes(0x00000801u, 1, 1, 1, {0}));
  try {
    parse_idx_dataset(bad);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("magic"), std::string::npos);
  }
  std::istringstream shortfile(idx_bytes(0x00000803u, 2, 1, 2, {1, 2, 3}));
  try {
    parse_idx_dataset(shortfile);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("record 1"), std::string::npos) << e.what();
  }
}

TEST(LoadDatasetTest, NormalizeThenLift) {
  const fs::path dir = scratch_dir("load");
  spit(dir / "a.csv", "3,4\n0,2\n");
  const Dataset ds = load_dataset(dir / "a.csv", "csv", {true, 2.0, std::nullopt});
  ASSERT_EQ(ds.dim(), 3);
  EXPECT_DOUBLE_EQ(ds.points[0][0], 0.6);
  EXPECT_DOUBLE_EQ(ds.points[0][1], 0.8);
  EXPECT_EQ(ds.points[0][2], 2.0);
  EXPECT_EQ(ds.points[1][1], 1.0);

  EXPECT_EQ(load_dataset(dir / "a.csv", "csv", {false, std::nullopt, Index{1}}).size(), 1);
}

TEST(LoadDatasetTest, NormalizingZeroRowNamesTheLine) {
  const fs::path dir = scratch_dir("zero");
  spit(dir / "z.csv", "1,2\n0,0\n");
  try {
    load_dataset(dir / "z.csv", "csv", {true, std::nullopt, std::nullopt});
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
  EXPECT_THROW(load_dataset(dir / "missing.csv", "csv", {}), ParseError);
  EXPECT_THROW(load_dataset(dir / "z.csv", "npy", {}), ParseError);
}

TEST(ConfigTest, ParsesAndRejectsUnknownKeys) {
  const auto j = nlohmann::json::parse(
      R"({"kind":"gia","l":5,"m":[8,16],"a":1,"b":1,"trials":3,"seed":7,"inner_draws":50})");
  const RunConfig c = parse_config(j);
  EXPECT_EQ(c.kind, "gia");
  EXPECT_EQ(c.l, 5);
  EXPECT_EQ(c.m, (std::vector<Index>{8, 16}));
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(parse_config(nlohmann::json::parse(R"({"m":12})")).m, std::vector<Index>{12});

  EXPECT_THROW(parse_config(nlohmann::json::parse(R"({"widht":3})")), ParseError);
  EXPECT_THROW(parse_config(nlohmann::json::parse(R"({"l":"four"})")), ParseError);
  EXPECT_THROW(parse_config(nlohmann::json::parse(R"({"kind":"train"})")), ParseError);
  EXPECT_THROW(parse_config(nlohmann::json::parse(R"([1,2])")), ParseError);
}

TEST(ConfigTest, RevalidatesNetworkInvariants) {
  EXPECT_THROW(parse_config(nlohmann::json::parse(R"({"l":1})")), ParseError);
  EXPECT_THROW(parse_config(nlohmann::json::parse(R"({"m":0})")), ParseError);
  EXPECT_THROW(parse_config(nlohmann::json::parse(R"({"a":0,"b":0})")), ParseError);
  EXPECT_THROW(parse_config(nlohmann::json::parse(R"({"pattern":"cubic"})")), ParseError);
  EXPECT_THROW(parse_config(nlohmann::json::parse(R"({"trials":0})")), ParseError);
}

TEST(ConfigTest, RoundTripsThroughJson) {
  RunConfig c;
  c.kind = "concentration";
  c.m = {8, 32};
  c.lift = 0.5;
  c.m0 = 3;
  const RunConfig back = parse_config(nlohmann::json::parse(to_json(c).dump()));
  EXPECT_EQ(to_json(back), to_json(c));
}

TEST(CliRunTest, IcdWritesOneRowPerLayerAndManifest) {
  const fs::path dir = scratch_dir("icd");
  auto r = invoke({"icd", "--trials", "2", "--l", "4", "--m", "8", "--out", dir.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const std::string csv = slurp(dir / "icd_m8.csv");
  EXPECT_EQ(csv.rfind("Step,Value,Std\n2,", 0), 0u) << csv;
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);

  const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
  EXPECT_EQ(manifest["seed"], 0);
  EXPECT_EQ(manifest["config"]["trials"], 2);
  EXPECT_EQ(manifest["config"]["m0"], 2);
  EXPECT_FALSE(manifest["version"].get<std::string>().empty());
  for (const auto& e : fs::directory_iterator(dir)) {
    EXPECT_NE(e.path().extension(), ".tmp");
  }
}

TEST(CliRunTest, RerunAndThreadCountGiveIdenticalBytes) {
  const fs::path d1 = scratch_dir("det1"), d2 = scratch_dir("det2"), d3 = scratch_dir("det3");
  const std::vector<std::string> base = {"icd", "--trials", "6", "--l", "5", "--m", "4,8",
                                         "--seed", "11"};
  auto with = [&](const fs::path& d, const std::string& threads) {
    auto a = base;
    a.insert(a.end(), {"--out", d.string(), "--threads", threads});
    return invoke(a).code;
  };
  ASSERT_EQ(with(d1, "1"), kExitOk);
  ASSERT_EQ(with(d2, "1"), kExitOk);
  ASSERT_EQ(with(d3, "3"), kExitOk);
  for (const char* f : {"icd_m4.csv", "icd_m8.csv"}) {
    EXPECT_EQ(slurp(d1 / f), slurp(d2 / f));
    EXPECT_EQ(slurp(d1 / f), slurp(d3 / f));
  }
}

TEST(CliRunTest, FlagsOverrideConfigKeys) {
  const fs::path dir = scratch_dir("override");
  spit(dir / "run.json", R"({"kind":"icd","l":3,"trials":9,"seed":4,"m":6})");
  auto r = invoke({"icd", "--config", (dir / "run.json").string(), "--trials", "2", "--out",
                   (dir / "o").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto manifest = nlohmann::json::parse(slurp(dir / "o" / "manifest.json"));
  EXPECT_EQ(manifest["config"]["trials"], 2);
  EXPECT_EQ(manifest["config"]["seed"], 4);
  EXPECT_EQ(manifest["config"]["l"], 3);
  EXPECT_TRUE(fs::exists(dir / "o" / "icd_m6.csv"));

  EXPECT_EQ(invoke({"gia", "--config", (dir / "run.json").string()}).code, kExitUsage);
  spit(dir / "bad.json", R"({"kind":"icd","colour":1})");
  EXPECT_EQ(invoke({"icd", "--config", (dir / "bad.json").string()}).code, kExitUsage);
  spit(dir / "broken.json", "{");
  EXPECT_EQ(invoke({"icd", "--config", (dir / "broken.json").string()}).code, kExitUsage);
}

TEST(CliRunTest, GiaWritesOneFilePerFirstLayer) {
  const fs::path dir = scratch_dir("gia");
  auto r = invoke({"gia", "--l", "4", "--m", "8", "--trials", "2", "--inner-draws", "100", "--a",
                   "1", "--b", "1", "--out", dir.string(), "--check"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_TRUE(fs::exists(dir / "gia_m8_k1_2.csv"));
  EXPECT_TRUE(fs::exists(dir / "gia_m8_k1_3.csv"));
  const std::string detail = slurp(dir / "gia_m8_detail.csv");
  EXPECT_EQ(detail.rfind("k1,k2,trial,", 0), 0u);
}

TEST(CliRunTest, ConcentrationAndKernelOutputs) {
  const fs::path dir = scratch_dir("conc");
  auto r = invoke({"concentration", "--l", "3", "--m", "4,8", "--trials", "3", "--n", "3",
                   "--out", dir.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const std::string csv = slurp(dir / "concentration.csv");
  EXPECT_EQ(csv.rfind("Step,Value,Std\n4,", 0), 0u) << csv;
  EXPECT_NE(csv.find("\n8,"), std::string::npos);

  const fs::path kdir = scratch_dir("kernel");
  spit(kdir / "x.csv", "1,0\n0.6,0.8\n");
  r = invoke({"kernel", "--dataset", (kdir / "x.csv").string(), "--l", "3", "--m", "4", "--ml",
              "2", "--out", kdir.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const std::string lim = slurp(kdir / "kernel_limit.csv");
  EXPECT_EQ(std::count(lim.begin(), lim.end(), '\n'), 4);
  EXPECT_TRUE(fs::exists(kdir / "kernel_theta_m4.csv"));
}

TEST(CliRunTest, IncompleteCellsAndErrorsGiveNonzeroExit) {
  const fs::path dir = scratch_dir("fail");
  spit(dir / "par.csv", "1,0\n2,0\n");
  auto r = invoke({"icd", "--dataset", (dir / "par.csv").string(), "--trials", "2", "--out",
                   (dir / "o").string()});
  EXPECT_EQ(r.code, kExitCheck);

  r = invoke({"icd", "--dataset", (dir / "missing.csv").string(), "--out", (dir / "o").string()});
  EXPECT_EQ(r.code, kExitUsage);

  r = invoke({"icd", "--dataset", (dir / "par.csv").string(), "--m0", "5", "--out",
              (dir / "o").string()});
  EXPECT_EQ(r.code, kExitUsage);

  spit(dir / "blocker", "x");
  r = invoke({"icd", "--trials", "1", "--out", (dir / "blocker" / "sub").string()});
  EXPECT_EQ(r.code, kExitFailure);
}

TEST(StatsCsvTest, FullPrecisionRows) {
  std::vector<StatSummary> rows(1);
  rows[0].key = 3;
  rows[0].mean = 0.1;
  rows[0].median = 0.25;
  rows[0].std = 1.0 / 3.0;
  EXPECT_EQ(stats_csv(rows, false), "Step,Value,Std\n3,0.10000000000000001,0.33333333333333331\n");
  EXPECT_EQ(stats_csv(rows, true), "Step,Value,Std\n3,0.25,0.33333333333333331\n");
}
