#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

const fs::path& work_dir() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / "softcast_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

struct Result {
  int code = -1;
  std::string out, err;
};

// Runs the CLI inside the work dir with the small config and extra arguments.
Result cli(const std::string& args) {
  const auto out = work_dir() / "stdout.txt", err = work_dir() / "stderr.txt";
  const std::string cmd = "cd '" + work_dir().string() + "' && '" + SOFTCAST_CLI + "' " + args + " > '" +
                          out.string() + "' 2> '" + err.string() + "'";
  const int raw = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.out = read_file(out);
  r.err = read_file(err);
  return r;
}

const char* kSmallConfig = R"({
  "paths": {"data": "data/small.csv", "out_dir": "runs/small"},
  "data": {"history": 12},
  "synthetic": {"kind": "regime-switch", "n_series": 8, "length": 400, "seed": 3},
  "tokens": {"V": 16},
  "model": {"d": 16, "n_layers": 1, "n_heads": 2, "ff_mult": 2},
  "train": {"horizon": 6, "batch_size": 8, "batches_per_epoch": 4, "max_epochs": 2,
            "max_val_windows": 16, "lr_stage1": 1e-3, "lr_stage2": 1e-4},
  "eval": {"horizons": [1, 2, 4, 6], "max_windows": 40, "lambdas": [0, 3, 30, 300]}
})";

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    write_file(work_dir() / "small.json", kSmallConfig);
    ASSERT_EQ(cli("-c small.json gen-synthetic").code, 0);
    const auto r = cli("-c small.json train");
    ASSERT_EQ(r.code, 0) << r.err;
  }
  static fs::path run_dir() { return work_dir() / "runs/small"; }
};

}  // namespace

TEST_F(Cli, TrainWritesArtifacts) {
  EXPECT_TRUE(fs::exists(run_dir() / "model.ckpt"));
  EXPECT_TRUE(fs::exists(run_dir() / "resolved_config.json"));
  std::ifstream log(run_dir() / "train_log.jsonl");
  std::string line;
  int lines = 0;
  bool saw_stage2 = false;
  while (std::getline(log, line)) {
    const auto j = json::parse(line);
    ++lines;
    if (j.value("stage", 0) == 2) saw_stage2 = true;
  }
  EXPECT_GE(lines, 2);
  EXPECT_TRUE(saw_stage2);
}

TEST_F(Cli, EvaluateReportsFiveRowsAndPerStepBreakdown) {
  const auto r = cli("-c small.json evaluate");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rep = json::parse(read_file(run_dir() / "eval_report.json"));
  ASSERT_EQ(rep["rows"].size(), 5u);
  EXPECT_EQ(rep["rows"][4]["horizon"], "Avg");
  for (const auto& row : rep["rows"]) {
    EXPECT_GE(row["rmse"].get<double>(), 0.0);
    EXPECT_GE(row["risky_pct"].get<double>(), 0.0);
    EXPECT_LE(row["risky_pct"].get<double>(), 100.0);
  }
  double occ = 0;
  for (const auto& [z, pct] : rep["zone_occupancy"].items()) occ += pct.get<double>();
  EXPECT_NEAR(occ, 100.0, 0.01);
  std::ifstream steps(run_dir() / "step_metrics.csv");
  std::string line;
  int n = 0;
  while (std::getline(steps, line)) ++n;
  EXPECT_EQ(n, 1 + 6);
  EXPECT_NE(r.out.find("Avg"), std::string::npos);
}

TEST_F(Cli, SweepAtLambdaZeroMatchesEvaluateWithoutRisk) {
  auto r = cli("-c small.json --set ablation.risk_aware=false evaluate");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rep = json::parse(read_file(run_dir() / "eval_report.json"));
  r = cli("-c small.json sweep-lambda");
  ASSERT_EQ(r.code, 0) << r.err;
  std::ifstream csv(run_dir() / "sweep.csv");
  std::string line;
  std::getline(csv, line);
  std::vector<std::vector<double>> rows;
  while (std::getline(csv, line)) {
    std::vector<double> v;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) v.push_back(std::stod(cell));
    rows.push_back(v);
  }
  ASSERT_EQ(rows.size(), 4u);
  // Row for horizon 6 covers every step, as does the sweep.
  EXPECT_NEAR(rows[0][1], rep["rows"][3]["rmse"].get<double>(), 1e-6);
  EXPECT_NEAR(rows[0][2], rep["rows"][3]["mean_risk"].get<double>(), 1e-6);
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_LE(rows[i][4], rows[i - 1][4] + 1e-9);
  EXPECT_TRUE(fs::exists(run_dir() / "tradeoff.dat"));
}

TEST_F(Cli, ForecastAndPlotGrid) {
  ASSERT_EQ(cli("-c small.json forecast").code, 0);
  const auto csv = read_file(run_dir() / "forecasts.csv");
  EXPECT_EQ(csv.rfind("window_id,step,truth,point_forecast,zone,risk\n", 0), 0u);
  std::size_t rows = 0;
  for (char c : csv) rows += c == '\n';
  rows -= 1;
  ASSERT_EQ(cli("-c small.json plot-grid").code, 0);
  const auto svg = read_file(run_dir() / "error_grid.svg");
  std::size_t circles = 0;
  for (auto at = svg.find("<circle"); at != std::string::npos; at = svg.find("<circle", at + 1)) ++circles;
  EXPECT_EQ(circles, rows);
  EXPECT_NE(svg.find("class=\"zone-"), std::string::npos);
  const auto fj = json::parse(read_file(run_dir() / "forecasts.json"));
  EXPECT_EQ(fj["windows"][0]["steps"][0]["probs"].size(), 16u);
}

TEST_F(Cli, PlotGridEdgeCases) {
  write_file(work_dir() / "empty.csv", "window_id,step,truth,point_forecast,zone,risk\n");
  auto r = cli("-c small.json --set paths.forecast_csv=empty.csv paths.out_dir=runs/empty plot-grid");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto svg = read_file(work_dir() / "runs/empty/error_grid.svg");
  EXPECT_EQ(svg.find("<circle"), std::string::npos);
  EXPECT_NE(svg.find("class=\"axis\""), std::string::npos);

  write_file(work_dir() / "bad.csv", "window_id,step,truth,point_forecast,zone,risk\n0,1,100,90,A,0\n0,2,abc,90,A,0\n");
  r = cli("-c small.json --set paths.forecast_csv=bad.csv paths.out_dir=runs/bad plot-grid");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("line 3"), std::string::npos) << r.err;

  write_file(work_dir() / "one.csv", "truth,point_forecast\n50,200\n100,100\n");
  r = cli("-c small.json --set paths.forecast_csv=one.csv paths.out_dir=runs/one plot-grid");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto svg2 = read_file(work_dir() / "runs/one/error_grid.svg");
  EXPECT_NE(svg2.find("zone-E"), std::string::npos);
  EXPECT_NE(svg2.find("zone-A"), std::string::npos);
}

TEST_F(Cli, MissingDataPathExitsTwoAndNamesIt) {
  const auto r = cli("-c small.json --set paths.data=nowhere/missing.csv ingest");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("nowhere/missing.csv"), std::string::npos) << r.err;
}

TEST_F(Cli, BadArgumentsExitTwo) {
  EXPECT_EQ(cli("-c small.json --set tokens.W=3 ingest").code, 2);
  EXPECT_EQ(cli("-c small.json no-such-command").code, 2);
  EXPECT_EQ(cli("-c missing.json ingest").code, 2);
  EXPECT_EQ(cli("-c small.json --set paths.grid=nope.json evaluate").code, 2);
}

TEST_F(Cli, IncompatibleCheckpointExitsTwo) {
  const auto r = cli("-c small.json --set tokens.V=24 evaluate");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("checkpoint"), std::string::npos) << r.err;
  EXPECT_EQ(cli("-c small.json --set data.history=10 evaluate").code, 2);
}

TEST_F(Cli, TrainingIsDeterministic) {
  const auto r = cli("-c small.json --set paths.out_dir=runs/again train");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_file(run_dir() / "model.ckpt"), read_file(work_dir() / "runs/again/model.ckpt"));
}

TEST_F(Cli, IngestSummary) {
  ASSERT_EQ(cli("-c small.json ingest").code, 0);
  const auto j = json::parse(read_file(run_dir() / "ingest_summary.json"));
  EXPECT_FALSE(j.empty());
}
