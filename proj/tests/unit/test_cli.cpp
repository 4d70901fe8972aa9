#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "coc/cli.hpp"
#include "support/fixtures.hpp"
#include "support/schema_check.hpp"

using namespace coc;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

std::vector<std::string> schema_errors(const std::string& schema, const fs::path& doc) {
  const coc::testing::SchemaChecker checker(read_json(coc::testing::source_path("schemas/" + schema)));
  return checker.check(read_json(doc));
}

fs::path write_config(const fs::path& dir, const std::string& name, json doc) {
  const auto p = dir / name;
  std::ofstream(p) << doc.dump(2);
  return p;
}

json exp_config(int d, int k, double lambda) {
  json doc;
  doc["mix"] = {{"lambda", lambda},
                {"classes", {{{"d", d}, {"k", k}, {"sizes", {{"marginal", {{"kind", "exponential"}, {"rate", 1}}}}}}}}};
  return doc;
}

}  // namespace

TEST(Cli, HelpAndUsageErrors) {
  EXPECT_EQ(cli({"--help"}).code, kExitOk);
  EXPECT_EQ(cli({}).code, kExitUsage);
  EXPECT_EQ(cli({"frobnicate"}).code, kExitUsage);
  EXPECT_EQ(cli({"simulate"}).code, kExitUsage);
  EXPECT_EQ(cli({"critical", "--config", "x.json", "--mode", "sideways"}).code, kExitUsage);
}

TEST(Cli, MissingLambdaIsConfigError) {
  const auto dir = coc::testing::scratch_dir("cli_missing");
  json doc = exp_config(2, 1, 0.5);
  doc["mix"].erase("lambda");
  const auto r = cli({"simulate", "--config", write_config(dir, "c.json", doc).string()});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("/mix/lambda"), std::string::npos);
}

TEST(Cli, EmptyClassListIsConfigError) {
  const auto dir = coc::testing::scratch_dir("cli_empty");
  json doc = exp_config(2, 1, 0.5);
  doc["mix"]["classes"] = json::array();
  EXPECT_EQ(cli({"critical", "--config", write_config(dir, "c.json", doc).string()}).code, kExitUsage);
}

TEST(Cli, SimulateZeroLambdaWritesZeroCcdf) {
  const auto dir = coc::testing::scratch_dir("cli_zero");
  json doc = exp_config(2, 1, 0.0);
  doc["sim"] = {{"n", 20}, {"horizon", 100}, {"tagged", 2}};
  const auto cfg = write_config(dir, "c.json", doc);
  const auto r = cli({"simulate", "--config", cfg.string(), "--out", (dir / "o").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  std::istringstream csv(slurp(dir / "o" / "ccdf.csv"));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "w,x_w");
  int rows = 0;
  while (std::getline(csv, line)) {
    ++rows;
    EXPECT_EQ(line.substr(line.find(',') + 1), "0");
  }
  EXPECT_GT(rows, 1);
  EXPECT_TRUE(schema_errors("metrics.schema.json", dir / "o" / "metrics.json").empty());
  std::istringstream tagged(slurp(dir / "o" / "tagged.csv"));
  std::getline(tagged, line);
  EXPECT_EQ(line, "epoch,W_1,W_2");
}

TEST(Cli, SimulateIsByteIdenticalAndSeedMatters) {
  const auto dir = coc::testing::scratch_dir("cli_det");
  json doc = exp_config(2, 1, 0.6);
  doc["sim"] = {{"n", 50}, {"horizon", 300}, {"tagged", 3}, {"seed", 4}};
  const auto cfg = write_config(dir, "c.json", doc).string();
  ASSERT_EQ(cli({"simulate", "--config", cfg, "--out", (dir / "a").string()}).code, kExitOk);
  ASSERT_EQ(cli({"simulate", "--config", cfg, "--out", (dir / "b").string()}).code, kExitOk);
  ASSERT_EQ(cli({"simulate", "--config", cfg, "--out", (dir / "c").string(), "--seed", "5"}).code, kExitOk);
  for (const char* f : {"metrics.json", "ccdf.csv", "tagged.csv"}) {
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
  }
  EXPECT_NE(slurp(dir / "a" / "tagged.csv"), slurp(dir / "c" / "tagged.csv"));
  EXPECT_EQ(read_json(dir / "c" / "metrics.json")["seed"], 5);
}

TEST(Cli, OutputFormatsAreHonoured) {
  const auto dir = coc::testing::scratch_dir("cli_formats");
  json doc = exp_config(2, 1, 0.3);
  doc["sim"] = {{"n", 10}, {"horizon", 50}};
  doc["output"] = {{"directory", (dir / "o").string()}, {"formats", {"json"}}};
  ASSERT_EQ(cli({"simulate", "--config", write_config(dir, "c.json", doc).string()}).code, kExitOk);
  EXPECT_TRUE(fs::exists(dir / "o" / "metrics.json"));
  EXPECT_FALSE(fs::exists(dir / "o" / "ccdf.csv"));
}

TEST(Cli, SolveFpMM1) {
  const auto dir = coc::testing::scratch_dir("cli_fp");
  json doc = exp_config(1, 1, 0.5);
  doc["grid"] = {{"step", 0.005}, {"max", 60}};
  const auto cfg = write_config(dir, "c.json", doc).string();
  ASSERT_EQ(cli({"solve-fp", "--config", cfg, "--out", (dir / "o").string()}).code, kExitOk);
  const json fp = read_json(dir / "o" / "fp.json");
  EXPECT_NEAR(fp["rho"].get<double>(), 0.5, 1e-3);
  EXPECT_EQ(fp["verdict"], "proper");
  EXPECT_EQ(fp["frame"], "infinite");
  EXPECT_TRUE(schema_errors("fp.schema.json", dir / "o" / "fp.json").empty());
  const Ccdf x = read_ccdf_csv((dir / "o" / "fp.csv").string());
  EXPECT_NEAR(x.step, 0.005, 1e-15);
  EXPECT_NEAR(x.values[0], fp["rho"].get<double>(), 1e-15);

  ASSERT_EQ(cli({"solve-fp", "--config", cfg, "--out", (dir / "f").string(), "--frame", "4"}).code, kExitOk);
  EXPECT_EQ(read_json(dir / "f" / "fp.json")["frame"], 4.0);
  EXPECT_EQ(cli({"solve-fp", "--config", cfg, "--frame", "soon"}).code, kExitUsage);
}

TEST(Cli, SolveFpSupercriticalAndZero) {
  const auto dir = coc::testing::scratch_dir("cli_fp2");
  json doc = exp_config(1, 1, 1.2);
  doc["grid"] = {{"step", 0.01}, {"max", 60}};
  ASSERT_EQ(cli({"solve-fp", "--config", write_config(dir, "a.json", doc).string(), "--out", (dir / "a").string()}).code,
            kExitOk);
  EXPECT_EQ(read_json(dir / "a" / "fp.json")["verdict"], "supercritical");
  doc["mix"]["lambda"] = 0.0;
  ASSERT_EQ(cli({"solve-fp", "--config", write_config(dir, "b.json", doc).string(), "--out", (dir / "b").string()}).code,
            kExitOk);
  EXPECT_EQ(read_json(dir / "b" / "fp.json")["rho"], 0.0);
}

TEST(Cli, SweepRows) {
  const auto dir = coc::testing::scratch_dir("cli_sweep");
  json doc = exp_config(1, 1, 0.5);
  doc["grid"] = {{"step", 0.01}, {"max", 60}};
  const auto cfg = write_config(dir, "c.json", doc).string();
  ASSERT_EQ(cli({"sweep", "--config", cfg, "--out", dir.string(), "--lambda-list", "0,0.3,0.6,1.3"}).code, kExitOk);
  std::istringstream csv(slurp(dir / "rho_curve.csv"));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "lambda,rho,frame_or_supercritical");
  std::vector<std::vector<std::string>> rows;
  while (std::getline(csv, line)) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string c;
    while (std::getline(ls, c, ',')) cells.push_back(c);
    rows.push_back(cells);
  }
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0][1], "0");
  EXPECT_NEAR(std::stod(rows[1][1]), 0.3, 2e-3);
  EXPECT_NEAR(std::stod(rows[2][1]), 0.6, 2e-3);
  EXPECT_EQ(rows[3][2], "supercritical");
  EXPECT_EQ(cli({"sweep", "--config", cfg, "--lambda-list", "0.1,abc"}).code, kExitUsage);
}

TEST(Cli, CompareSelfPassesAndDetectsProblems) {
  const auto dir = coc::testing::scratch_dir("cli_compare");
  json doc = exp_config(2, 1, 0.5);
  doc["grid"] = {{"step", 0.05}, {"max", 30}};
  const auto cfg = write_config(dir, "c.json", doc).string();
  ASSERT_EQ(cli({"solve-fp", "--config", cfg, "--out", dir.string()}).code, kExitOk);
  const json fp = read_json(dir / "fp.json");
  const Ccdf x = read_ccdf_csv((dir / "fp.csv").string());
  json metrics = {{"load", fp["rho"]}, {"ccdf", {{"step", x.step}, {"values", x.values}, {"tail", 0.0}}}};
  std::ofstream(dir / "metrics.json") << metrics.dump();

  const auto r = cli({"compare", "--metrics", (dir / "metrics.json").string(), "--fp", (dir / "fp.json").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const json rep = read_json(dir / "report.json");
  EXPECT_EQ(rep["levy"], 0.0);
  EXPECT_EQ(rep["sup"], 0.0);
  EXPECT_EQ(rep["pass"], true);
  EXPECT_TRUE(schema_errors("report.schema.json", dir / "report.json").empty());

  metrics["load"] = fp["rho"].get<double>() + 0.2;
  std::ofstream(dir / "metrics.json") << metrics.dump();
  EXPECT_EQ(cli({"compare", "--metrics", (dir / "metrics.json").string(), "--fp", (dir / "fp.json").string()}).code,
            kExitRuntime);
  EXPECT_EQ(read_json(dir / "report.json")["pass"], false);
  EXPECT_EQ(cli({"compare", "--metrics", (dir / "metrics.json").string(), "--fp", (dir / "fp.json").string(),
                 "--load-budget", "0.5"})
                .code,
            kExitOk);

  std::ofstream(dir / "broken.csv") << "w,x_w\n0,0.5\n0.05,oops\n";
  EXPECT_EQ(cli({"compare", "--metrics", (dir / "metrics.json").string(), "--fp", (dir / "fp.json").string(),
                 "--fp-csv", (dir / "broken.csv").string()})
                .code,
            kExitUsage);
  std::ofstream(dir / "broken.json") << "{\"load\": ";
  EXPECT_EQ(cli({"compare", "--metrics", (dir / "broken.json").string(), "--fp", (dir / "fp.json").string()}).code,
            kExitUsage);
}

TEST(Cli, CriticalModes) {
  const auto dir = coc::testing::scratch_dir("cli_critical");
  json doc = exp_config(2, 1, 0.5);
  doc["grid"] = {{"step", 0.05}, {"max", 1500}};
  doc["solver"] = {{"lambda_tol", 0.005}};
  ASSERT_EQ(cli({"critical", "--mode", "mf", "--config", write_config(dir, "a.json", doc).string(), "--out",
                 (dir / "a").string()})
                .code,
            kExitOk);
  const json mf = read_json(dir / "a" / "lambda_bar.json");
  EXPECT_NEAR(mf["lambda_bar"].get<double>(), 1.0, 0.01);
  EXPECT_TRUE(schema_errors("lambda_bar.schema.json", dir / "a" / "lambda_bar.json").empty());

  json one = exp_config(1, 1, 0.5);
  one["critical"] = {{"n", 50}, {"lambda_lo", 0.5}, {"lambda_hi", 1.5}};
  ASSERT_EQ(cli({"critical", "--mode", "fixed_n", "--config", write_config(dir, "b.json", one).string(), "--out",
                 (dir / "b").string()})
                .code,
            kExitOk);
  const json fixed = read_json(dir / "b" / "lambda_bar.json");
  EXPECT_NEAR(fixed["lambda_bar"].get<double>(), 1.0, 0.02);
  EXPECT_EQ(fixed["n"], 50);
  EXPECT_TRUE(schema_errors("lambda_bar.schema.json", dir / "b" / "lambda_bar.json").empty());

  one["critical"] = {{"n", 20}, {"lambda_lo", 0.2}, {"lambda_hi", 0.4}, {"horizon", 2000}};
  EXPECT_EQ(cli({"critical", "--mode", "fixed_n", "--config", write_config(dir, "c.json", one).string(), "--out",
                 (dir / "c").string()})
                .code,
            kExitRuntime);
}

TEST(Cli, DmonoRows) {
  const auto dir = coc::testing::scratch_dir("cli_dmono");
  json doc = json::parse(R"({"mix": {"lambda": 0.5, "classes": [
      {"name": "det", "d": 2, "k": 1, "sizes": {"marginal": {"kind": "deterministic", "value": 1}}},
      {"name": "exp", "d": 2, "k": 1, "sizes": {"marginal": {"kind": "exponential", "rate": 1}}},
      {"name": "full", "d": 3, "k": 3, "sizes": {"marginal": {"kind": "uniform", "upper": 2}}}]},
      "dmono": {"samples": 50000}})");
  ASSERT_EQ(cli({"dmono", "--config", write_config(dir, "c.json", doc).string(), "--out", dir.string()}).code, kExitOk);
  const std::string csv = slurp(dir / "dmono.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "class,d,k,hazard,direction,sup_mean,sup_stderr,witness_from,witness_to,witness_difference,witness_stderr");
  EXPECT_NE(csv.find("\ndet,2,1,IHR,non_increasing,"), std::string::npos);
  EXPECT_NE(csv.find("\nexp,2,1,constant,constant,"), std::string::npos);
  EXPECT_NE(csv.find("\nfull,3,3,IHR,constant,"), std::string::npos);
}

TEST(FormatNumber, ShortestRoundTrip) {
  for (double v : {0.0, 0.1, 1.0 / 3, 1e-300, 123456.789, -2.5}) EXPECT_EQ(std::stod(format_number(v)), v);
  EXPECT_EQ(format_number(0.5), "0.5");
  EXPECT_EQ(format_number(2.0), "2");
}

TEST(ReadCcdfCsv, RejectsMalformedInput) {
  const auto dir = coc::testing::scratch_dir("cli_csv");
  auto write = [&](const std::string& body) {
    std::ofstream(dir / "x.csv") << body;
    return (dir / "x.csv").string();
  };
  EXPECT_THROW(read_ccdf_csv(write("a,b\n0,1\n1,0\n")), InputError);
  EXPECT_THROW(read_ccdf_csv(write("w,x_w\n0,1\n")), InputError);
  EXPECT_THROW(read_ccdf_csv(write("w,x_w\n0,0.5\n1,0.7\n")), InputError);
  EXPECT_THROW(read_ccdf_csv(write("w,x_w\n0,0.5\n1,0.2\n3,0.1\n")), InputError);
  EXPECT_THROW(read_ccdf_csv(write("w,x_w\n0,0.5\n1\n")), InputError);
  EXPECT_THROW(read_ccdf_csv((dir / "missing.csv").string()), InputError);
  const Ccdf x = read_ccdf_csv(write("w,x_w\n0,0.5\n0.5,0.25\n1,0\n"));
  EXPECT_EQ(x.values, (std::vector<double>{0.5, 0.25, 0}));
  EXPECT_EQ(x.step, 0.5);
}
