#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "lapfield/covariance.hpp"
#include "lapfield/distributions.hpp"
#include "lapfield/io.hpp"

namespace fs = std::filesystem;
using namespace lapfield;

namespace {

const std::string kCli = LAPFIELD_CLI_PATH;
const fs::path kData = LAPFIELD_TEST_DATA_DIR;

struct Run {
  int rc = -1;
  std::string output;
};

Run run(const std::string& args) {
  const std::string cmd = "'" + kCli + "' " + args + " 2>&1";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), buf.size(), p)) r.output += buf.data();
  const int status = pclose(p);
  r.rc = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string data(const std::string& name) { return "'" + (kData / name).string() + "'"; }

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    std::random_device rd;
    dir_ = fs::temp_directory_path() / ("lapfield_cli_" + std::to_string(rd()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string out(const std::string& name) const { return "'" + (dir_ / name).string() + "'"; }
  fs::path path(const std::string& name) const { return dir_ / name; }
  fs::path dir_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> v;
  for (std::string s; std::getline(in, s);) v.push_back(s);
  return v;
}

}  // namespace

TEST_F(CliTest, FitMarginsWritesEstimatesAndBootstrap) {
  const auto r = run("fit-margins --data " + data("data.csv") + " --sites " + data("sites.csv") +
                     " --threshold-prob 0.95 --bootstrap 10 --out " + out("m.json"));
  ASSERT_EQ(r.rc, 0) << r.output;
  const auto j = io::read_json(path("m.json").string());
  EXPECT_EQ(j.at("schema_version"), io::kSchemaVersion);
  EXPECT_EQ(j.at("kind"), "margins");
  EXPECT_EQ(j.at("dropped_rows"), 3);
  const auto w = io::weibull_from_json(j.at("margins"));
  // Data were drawn with gamma 1.72, delta0 2.44.
  EXPECT_NEAR(w.gamma, 1.72, 0.2);
  EXPECT_NEAR(w.delta0, 2.44, 0.15);
  EXPECT_EQ(j.at("bootstrap").at("replicates"), 10);
  for (const char* k : {"gamma", "delta0", "delta1"}) {
    EXPECT_GT(j.at("bootstrap").at("se").at(k).get<double>(), 0.0);
    const auto ci = j.at("bootstrap").at("ci95").at(k);
    EXPECT_LT(ci[0].get<double>(), ci[1].get<double>());
  }
}

TEST_F(CliTest, MissingCovariateColumnIsSchemaError) {
  const auto r = run("fit-margins --data " + data("data.csv") + " --sites " + data("sites_no_covariate.csv") +
                     " --out " + out("m.json"));
  EXPECT_EQ(r.rc, 2);
  EXPECT_NE(r.output.find("covariate"), std::string::npos) << r.output;
  EXPECT_FALSE(fs::exists(path("m.json")));
}

TEST_F(CliTest, BadNumberReportsFileAndLine) {
  const auto r = run("fit-margins --data " + data("data_bad_number.csv") + " --sites " + data("sites.csv") +
                     " --out " + out("m.json"));
  EXPECT_EQ(r.rc, 2);
  EXPECT_NE(r.output.find("data_bad_number.csv:2"), std::string::npos) << r.output;
  EXPECT_NE(r.output.find("abc"), std::string::npos) << r.output;
}

TEST_F(CliTest, ThresholdAboveMaximumHasNoExceedances) {
  const auto r = run("fit-margins --data " + data("data.csv") + " --sites " + data("sites.csv") +
                     " --threshold 500 --out " + out("m.json"));
  EXPECT_EQ(r.rc, 2);
  EXPECT_NE(r.output.find("no exceedances"), std::string::npos) << r.output;
}

TEST_F(CliTest, UnknownOptionIsUsageError) {
  EXPECT_EQ(run("simulate --bogus 1").rc, 2);
  EXPECT_EQ(run("fit-margins --data " + out("missing.csv") + " --sites " + data("sites.csv")).rc, 2);
}

TEST_F(CliTest, FitDependencePrefersLaplaceOnLaplaceData) {
  const auto r = run("fit-dependence --data " + data("data.csv") + " --sites " + data("sites.csv") +
                     " --families exponential --types L,G --threshold-prob 0.95 --out " + out("model.json") +
                     " --table " + out("t.csv"));
  ASSERT_EQ(r.rc, 0) << r.output;
  const auto t = io::read_csv(path("t.csv").string());
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.header, (std::vector<std::string>{"family", "type", "anisotropic", "theta", "b", "scale", "shape",
                                                "loglik", "aic", "exceedances", "best", "status"}));
  const auto type = t.column("type"), best = t.column("best"), aic = t.column("aic");
  double aic_l = 0, aic_g = 0;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    (t.rows[i][type] == "L" ? aic_l : aic_g) = std::stod(t.rows[i][aic]);
    if (t.rows[i][type] == "L") {
      EXPECT_EQ(t.rows[i][best], "1");
    }
  }
  EXPECT_GT(aic_l, aic_g);

  const auto m = io::model_from_json(io::read_json(path("model.json").string()), "model.json");
  EXPECT_EQ(m.dep, DepType::laplace);
  EXPECT_EQ(m.spec.family, CorrelationFamily::exponential);
  EXPECT_EQ(m.sites.size(), 6u);
  // Data generated with scale 80.
  EXPECT_GT(m.spec.scale, 40.0);
  EXPECT_LT(m.spec.scale, 160.0);
  EXPECT_EQ(m.fit.at("pit"), "rank");
}

TEST_F(CliTest, SingleFamilyAndTypeGivesOneRow) {
  const auto r = run("fit-dependence --data " + data("data.csv") + " --sites " + data("sites.csv") +
                     " --families matern --types L --threshold-prob 0.95 --out " + out("model.json") + " --table " +
                     out("t.csv"));
  ASSERT_EQ(r.rc, 0) << r.output;
  const auto t = io::read_csv(path("t.csv").string());
  ASSERT_EQ(t.rows.size(), 1u);
  EXPECT_EQ(t.rows[0][t.column("family")], "matern");
  EXPECT_EQ(t.rows[0][t.column("best")], "1");
  EXPECT_NE(t.rows[0][t.column("shape")], "NA");

  const auto j = io::read_json(path("model.json").string());
  const auto grid = j.at("fit").at("matern_nu_grid");
  ASSERT_TRUE(grid.is_array());
  const auto expect = default_matern_nu_grid();
  ASSERT_EQ(grid.size(), expect.size());
  for (std::size_t i = 0; i < expect.size(); ++i) EXPECT_DOUBLE_EQ(grid[i].get<double>(), expect[i]);
  const double nu = io::model_from_json(j, "model.json").spec.shape;
  EXPECT_NE(std::find(expect.begin(), expect.end(), nu), expect.end());
}

TEST_F(CliTest, UnknownFamilyIsSchemaError) {
  const auto r = run("fit-dependence --data " + data("data.csv") + " --sites " + data("sites.csv") +
                     " --families cauchy --out " + out("model.json") + " --table " + out("t.csv"));
  EXPECT_EQ(r.rc, 2);
}

TEST_F(CliTest, DiagnoseTablesAndModelColumns) {
  const auto r = run("diagnose --data " + data("data.csv") + " --sites " + data("sites.csv") + " --model " +
                     data("model.json") + " --thresholds 0.9,0.95 --out-dir " + out("diag"));
  ASSERT_EQ(r.rc, 0) << r.output;
  const auto pairs = io::read_csv(path("diag/pairs.csv").string());
  EXPECT_EQ(pairs.header, (std::vector<std::string>{"site_i", "site_j", "distance", "rho_hill", "rho_model", "flagged"}));
  EXPECT_EQ(pairs.rows.size(), 15u);
  const auto lam = io::read_csv(path("diag/lambda.csv").string());
  EXPECT_EQ(lam.header, (std::vector<std::string>{"site_i", "site_j", "distance", "u", "lambda_emp", "joint", "flagged",
                                                  "lambda_model"}));
  ASSERT_EQ(lam.rows.size(), 30u);
  const auto cm = lam.column("lambda_model"), ce = lam.column("lambda_emp");
  double worst = 0.0;
  for (const auto& row : lam.rows) {
    const double lm = std::stod(row[cm]);
    EXPECT_GT(lm, 0.0);
    EXPECT_LE(lm, 1.0);
    worst = std::max(worst, std::fabs(lm - std::stod(row[ce])));
  }
  // 1500 days from the same model: empirical and model curves agree loosely.
  EXPECT_LT(worst, 0.3);
  EXPECT_TRUE(fs::exists(path("diag/qq.csv")));
  EXPECT_EQ(lines(path("diag/pairs.csv")).front().rfind("# {", 0), 0u);
}

TEST_F(CliTest, DiagnoseWithoutModelLeavesModelColumnsEmpty) {
  const auto r = run("diagnose --data " + data("data.csv") + " --sites " + data("sites.csv") +
                     " --thresholds 0.9 --out-dir " + out("diag"));
  ASSERT_EQ(r.rc, 0) << r.output;
  const auto pairs = io::read_csv(path("diag/pairs.csv").string());
  for (const auto& row : pairs.rows) EXPECT_EQ(row[pairs.column("rho_model")], "NA");
  EXPECT_FALSE(fs::exists(path("diag/qq.csv")));
}

TEST_F(CliTest, DiagnoseSingleSiteGivesEmptyTables) {
  {
    std::ofstream s(path("one_site.csv"));
    s << "id,x,y,covariate\nden_helder,0,0,2\n";
    std::ofstream d(path("one_data.csv"));
    d << "date,den_helder\n";
    for (int i = 0; i < 200; ++i) d << "d" << i << "," << 5 + (i * 37 % 101) * 0.1 << "\n";
  }
  const auto r = run("diagnose --data " + out("one_data.csv") + " --sites " + out("one_site.csv") + " --out-dir " +
                     out("diag"));
  ASSERT_EQ(r.rc, 0) << r.output;
  const auto pairs = io::read_csv(path("diag/pairs.csv").string());
  const auto lam = io::read_csv(path("diag/lambda.csv").string());
  EXPECT_EQ(pairs.header.size(), 6u);
  EXPECT_TRUE(pairs.rows.empty());
  EXPECT_TRUE(lam.rows.empty());
}

TEST_F(CliTest, SimulateFormatAndSeedDeterminism) {
  const std::string base = "simulate --model " + data("model.json") + " --n 50 --seed 9 --out " + out("s.csv");
  ASSERT_EQ(run(base).rc, 0);
  const auto first = slurp(path("s.csv"));
  ASSERT_EQ(run("--threads 3 " + base).rc, 0);
  EXPECT_EQ(first, slurp(path("s.csv")));
  ASSERT_EQ(run("simulate --model " + data("model.json") + " --n 50 --seed 10 --out " + out("s.csv")).rc, 0);
  EXPECT_NE(first, slurp(path("s.csv")));

  const auto ls = lines(path("s.csv"));
  ASSERT_EQ(ls.size(), 52u);
  const auto head = nlohmann::json::parse(ls[0].substr(2));
  EXPECT_EQ(head.at("schema_version"), io::kSchemaVersion);
  EXPECT_EQ(head.at("model_hash").get<std::string>().size(), 16u);
  EXPECT_EQ(ls[1], "draw,den_helder,ijmuiden,schiphol,deelen,eindhoven,vlissingen");
  EXPECT_EQ(ls[2].rfind("1,", 0), 0u);
}

TEST_F(CliTest, WindScaleBackTransformsToStandard) {
  ASSERT_EQ(run("simulate --model " + data("model.json") + " --n 300 --seed 4 --scale standard --out " + out("z.csv")).rc, 0);
  ASSERT_EQ(run("simulate --model " + data("model.json") + " --n 300 --seed 4 --scale wind --out " + out("w.csv")).rc, 0);
  const auto m = io::model_from_json(io::read_json((kData / "model.json").string()), "model.json");
  ASSERT_TRUE(m.margins.has_value());
  const auto z = io::read_csv(path("z.csv").string());
  const auto w = io::read_csv(path("w.csv").string());
  ASSERT_EQ(z.rows.size(), w.rows.size());
  for (std::size_t i = 0; i < z.rows.size(); ++i)
    for (std::size_t j = 1; j < z.header.size(); ++j) {
      const double v = std::stod(w.rows[i][j]);
      const double zs = std::stod(z.rows[i][j]);
      ASSERT_GT(v, 0.0);
      const double cov = m.sites.covariate[j - 1];
      // Compare on the probability scale; round trip through the Weibull tail.
      const double p_wind = m.margins->survival(v, cov);
      const double p_std = StdLaplace::survival(zs);
      EXPECT_NEAR(p_wind / p_std, 1.0, 1e-8) << "row " << i << " col " << j;
    }
}

TEST_F(CliTest, CondsimEchoesConditioningValues) {
  const auto r = run("condsim --model " + data("model.json") + " --n 20 --seed 5 --scale wind --condition " +
                     data("condition.csv") + " --out " + out("c.csv"));
  ASSERT_EQ(r.rc, 0) << r.output;
  const auto t = io::read_csv(path("c.csv").string());
  ASSERT_EQ(t.rows.size(), 20u);
  const auto a = t.column("den_helder"), b = t.column("schiphol");
  for (const auto& row : t.rows) {
    EXPECT_NEAR(std::stod(row[a]), 45.0, 1e-9);
    EXPECT_NEAR(std::stod(row[b]), 38.5, 1e-9);
  }
  // Neighbours of two extreme sites should be elevated on average.
  double mean = 0.0;
  for (const auto& row : t.rows) mean += std::stod(row[t.column("ijmuiden")]);
  EXPECT_GT(mean / 20.0, 20.0);
}

TEST_F(CliTest, CondsimAtReturnLevelOfSite) {
  const auto r = run("condsim --model " + data("model.json") + " --n 5 --seed 5 --scale wind --site schiphol "
                     "--return-period 50 --out " + out("c.csv"));
  ASSERT_EQ(r.rc, 0) << r.output;
  const auto m = io::model_from_json(io::read_json((kData / "model.json").string()), "model.json");
  const double level = m.margins->quantile_survival(1.0 / (365.25 * 50.0), 12.0);
  const auto t = io::read_csv(path("c.csv").string());
  for (const auto& row : t.rows) EXPECT_NEAR(std::stod(row[t.column("schiphol")]), level, 1e-8 * level);
}

TEST_F(CliTest, CondsimUnknownSiteFails) {
  const auto r = run("condsim --model " + data("model.json") + " --n 5 --site nowhere --level 40 --scale wind --out " +
                     out("c.csv"));
  EXPECT_EQ(r.rc, 2);
  EXPECT_NE(r.output.find("nowhere"), std::string::npos);
}

TEST_F(CliTest, ReturnSingleSiteMatchesMarginalQuantile) {
  {
    std::ofstream s(path("grid.csv"));
    s << "id,x,y,covariate\np,10,20,41.3\n";
  }
  const auto r = run("return --model " + data("model.json") + " --grid " + out("grid.csv") +
                     " --periods 1,10,100,1000 --level 45 --out " + out("r.json"));
  ASSERT_EQ(r.rc, 0) << r.output;
  const auto j = io::read_json(path("r.json").string());
  const auto m = io::model_from_json(io::read_json((kData / "model.json").string()), "model.json");
  const auto& w = *m.margins;
  EXPECT_EQ(j.at("grid_size"), 1);
  const double p45 = w.survival(45.0, 41.3);
  EXPECT_NEAR(j.at("period").at("period_years").get<double>(), 1.0 / (365.25 * p45), 1e-9 / p45);
  double prev = 0.0;
  for (const auto& lv : j.at("levels")) {
    const double T = lv.at("period_years").get<double>();
    const double x = lv.at("level").get<double>();
    EXPECT_NEAR(x, w.quantile_survival(1.0 / (365.25 * T), 41.3), 1e-9 * x);
    EXPECT_GT(x, prev);
    prev = x;
  }
}

TEST_F(CliTest, ReturnLevelsIncreaseOnGrid) {
  {
    std::ofstream s(path("grid.csv"));
    s << "id,x,y,covariate\na,0,0,2\nb,30,0,3\nc,0,40,12\n";
  }
  const auto r = run("return --model " + data("model.json") + " --grid " + out("grid.csv") +
                     " --periods 2,20,200 --out " + out("r.json"));
  ASSERT_EQ(r.rc, 0) << r.output;
  const auto j = io::read_json(path("r.json").string());
  EXPECT_EQ(j.at("grid_size"), 3);
  double prev = 0.0;
  for (const auto& lv : j.at("levels")) {
    const double T = lv.at("period_years").get<double>();
    EXPECT_NEAR(lv.at("achieved_period_years").get<double>(), T, 0.05 * T);
    EXPECT_GT(lv.at("level").get<double>(), prev);
    prev = lv.at("level").get<double>();
  }
}

TEST_F(CliTest, ConfigValuesAndFlagOverrides) {
  // The config's relative paths resolve against its own directory.
  fs::copy_file(kData / "config.json", path("config.json"));
  fs::copy_file(kData / "data.csv", path("data.csv"));
  fs::copy_file(kData / "sites.csv", path("sites.csv"));
  ASSERT_EQ(run("--config " + out("config.json") + " simulate --model " + data("model.json") + " --out " + out("a.csv")).rc, 0);
  EXPECT_EQ(io::read_csv(path("a.csv").string()).rows.size(), 5u);
  ASSERT_EQ(run("--config " + out("config.json") + " simulate --model " + data("model.json") + " --n 7 --out " +
                out("b.csv")).rc, 0);
  const auto b = lines(path("b.csv"));
  EXPECT_EQ(b.size(), 9u);
  const auto head = nlohmann::json::parse(b[0].substr(2));
  EXPECT_EQ(head.at("config").at("simulate").at("n"), 7);
  EXPECT_EQ(head.at("config").at("simulate").at("seed"), 42);

  ASSERT_EQ(run("--config " + out("config.json") + " fit-margins --bootstrap 0 --out " + out("m.json")).rc, 0);
  const auto m = io::read_json(path("m.json").string());
  EXPECT_DOUBLE_EQ(m.at("config").at("margins").at("threshold_prob").get<double>(), 0.95);
  EXPECT_FALSE(m.contains("bootstrap"));
}

TEST_F(CliTest, ModelHashMismatchIsRejected) {
  auto j = io::read_json((kData / "model.json").string());
  j["model_hash"] = "0000000000000000";
  io::write_json(path("bad.json").string(), j);
  const auto r = run("simulate --model " + out("bad.json") + " --n 2 --out " + out("s.csv"));
  EXPECT_EQ(r.rc, 2);
}
