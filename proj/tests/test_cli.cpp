#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"
#include "finrisk/baselines.hpp"
#include "finrisk/csv.hpp"
#include "finrisk/riskcli.hpp"

using namespace finrisk;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(const std::vector<std::string>& args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("finrisk_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  f << text;
}

fs::path tabular_csv(const fs::path& dir, std::size_t n = 200, std::size_t dims = 5) {
  const fs::path p = dir / "tab.csv";
  const Run r = cli({"gen-data", "--kind", "tabular", "--n", std::to_string(n), "--dims",
                     std::to_string(dims), "--separation", "2", "--seed", "1", "--out", p.string()});
  REQUIRE(r.code == 0);
  return p;
}

std::vector<CurvePoint> read_points_csv(const fs::path& p) {
  std::istringstream in(slurp(p));
  std::string line;
  std::getline(in, line);  // header
  std::vector<CurvePoint> pts;
  while (std::getline(in, line)) {
    const auto comma = line.find(',');
    pts.push_back({std::stod(line.substr(0, comma)), std::stod(line.substr(comma + 1))});
  }
  return pts;
}

std::vector<CurvePoint> read_svg_polyline(const fs::path& p, double size) {
  const std::string svg = slurp(p);
  const std::string key = "points=\"";
  const auto start = svg.find(key);
  REQUIRE(start != std::string::npos);
  const auto end = svg.find('"', start + key.size());
  std::istringstream in(svg.substr(start + key.size(), end - start - key.size()));
  std::vector<CurvePoint> pts;
  std::string pair;
  while (in >> pair) {
    const auto comma = pair.find(',');
    const double sx = std::stod(pair.substr(0, comma));
    const double sy = std::stod(pair.substr(comma + 1));
    pts.push_back({sx / size, 1.0 - sy / size});
  }
  return pts;
}

}  // namespace

TEST_CASE("train then evaluate produces a parseable report") {
  const fs::path dir = scratch("train_eval");
  const fs::path data = tabular_csv(dir);
  const fs::path out = dir / "run";
  const Run t = cli({"train", "--data", data.string(), "--hidden", "4", "--epochs", "3", "--out",
                     out.string()});
  REQUIRE(t.code == 0);
  CHECK(fs::exists(out / "model.json"));
  const nlohmann::json tr = read_json(out / "train_report.json");
  CHECK(tr["schema"] == "finrisk.train/1");
  CHECK(tr["epoch_loss"].size() == 3);
  CHECK(tr["adam_steps"] == 6);  // 3 epochs × ceil(200 / 100)
  CHECK(tr["spec"]["hidden"] == std::vector<int>{4});
  CHECK(slurp(out / "train_loss.csv").rfind("epoch,loss\n1,", 0) == 0);

  const Run e = cli({"evaluate", "--model", (out / "model.json").string(), "--data", data.string(),
                     "--out", out.string()});
  REQUIRE(e.code == 0);
  const nlohmann::json ev = read_json(out / "eval_report.json");
  CHECK(ev["schema"] == "finrisk.eval/1");
  CHECK(ev["auc"].get<double>() >= 0.0);
  CHECK(ev["auc"].get<double>() <= 1.0);
  const auto& c = ev["counts"];
  CHECK(c["tp"].get<int>() + c["tn"].get<int>() + c["fp"].get<int>() + c["fn"].get<int>() == 200);
  fs::remove_all(dir);
}

TEST_CASE("every native model trains and evaluates") {
  const fs::path dir = scratch("models");
  const fs::path data = tabular_csv(dir, 120, 4);
  for (const std::string model : {"mlp", "logreg", "forest"}) {
    const fs::path out = dir / model;
    const Run t = cli({"train", "--data", data.string(), "--model", model, "--epochs", "5",
                       "--trees", "5", "--out", out.string()});
    REQUIRE(t.code == 0);
    CHECK(read_json(out / "model.json")["kind"] == model);
    const Run e = cli({"evaluate", "--model", (out / "model.json").string(), "--data",
                       data.string(), "--out", out.string()});
    CHECK(e.code == 0);
  }
  fs::remove_all(dir);
}

TEST_CASE("missing dataset path exits 1 naming the path") {
  const Run r = cli({"train", "--data", "/no/such/dir/data.csv", "--epochs", "1", "--out",
                     (fs::temp_directory_path() / "finrisk_cli_missing").string()});
  CHECK(r.code == kExitValidation);
  CHECK(r.err.find("/no/such/dir/data.csv") != std::string::npos);
  CHECK(cli({"train"}).code == kExitValidation);
  CHECK(cli({"no-such-command"}).code == kExitValidation);
  CHECK(cli({}).code == kExitValidation);
}

TEST_CASE("same spec twice gives byte-identical model files") {
  const fs::path dir = scratch("determinism");
  const fs::path data = tabular_csv(dir);
  for (const char* run : {"a", "b"}) {
    REQUIRE(cli({"train", "--data", data.string(), "--hidden", "5,3", "--epochs", "4", "--seed",
                 "7", "--out", (dir / run).string()})
                .code == 0);
  }
  CHECK(slurp(dir / "a" / "model.json") == slurp(dir / "b" / "model.json"));
  CHECK(slurp(dir / "a" / "train_report.json") == slurp(dir / "b" / "train_report.json"));
  REQUIRE(cli({"train", "--data", data.string(), "--hidden", "5,3", "--epochs", "4", "--seed", "8",
               "--out", (dir / "c").string()})
              .code == 0);
  CHECK(slurp(dir / "a" / "model.json") != slurp(dir / "c" / "model.json"));
  fs::remove_all(dir);
}

TEST_CASE("sweep-layers report has four rows labelled 1..4") {
  const fs::path dir = scratch("sweep_layers");
  const fs::path data = tabular_csv(dir, 150, 4);
  const std::vector<std::string> args{"sweep-layers", "--data", data.string(), "--epochs", "2",
                                      "--seed", "3"};
  auto a = args;
  a.insert(a.end(), {"--out", (dir / "a").string()});
  const Run r = cli(a);
  REQUIRE(r.code == 0);
  const nlohmann::json j = read_json(dir / "a" / "sweep_layers.json");
  CHECK(j["schema"] == "finrisk.sweep/1");
  CHECK(j["columns"] ==
        std::vector<std::string>{"layers", "train_loss", "train_auc", "test_loss", "test_auc"});
  REQUIRE(j["rows"].size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    const auto& row = j["rows"][i];
    CHECK(row["config"] == std::to_string(i + 1));
    CHECK(row["hidden"] == std::vector<int>(i + 1, 20));
    CHECK(row["test_auc"].get<double>() >= 0.0);
    CHECK(row["test_auc"].get<double>() <= 1.0);
    CHECK(row["test_loss_curve"].size() == 2);
  }
  CHECK(r.out.find("Training set") != std::string::npos);
  CHECK(r.out.find("best by test AUC:") != std::string::npos);

  auto b = args;
  b.insert(b.end(), {"--out", (dir / "b").string(), "--jobs", "2"});
  REQUIRE(cli(b).code == 0);
  CHECK(slurp(dir / "a" / "sweep_layers.json") == slurp(dir / "b" / "sweep_layers.json"));
  fs::remove_all(dir);
}

TEST_CASE("sweep-nodes rows are the four node tuples with a best footer") {
  const fs::path dir = scratch("sweep_nodes");
  const fs::path data = tabular_csv(dir, 100, 3);
  const Run r = cli({"sweep-nodes", "--data", data.string(), "--epochs", "1", "--out", dir.string()});
  REQUIRE(r.code == 0);
  const nlohmann::json j = read_json(dir / "sweep_nodes.json");
  REQUIRE(j["rows"].size() == 4);
  const std::vector<std::string> labels{"(20,20,20)", "(60,60,60)", "(100,100,100)", "(64,32,16)"};
  double best = -1.0;
  std::string best_label;
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(j["rows"][i]["config"] == labels[i]);
    const double auc = j["rows"][i]["test_auc"].get<double>();
    if (auc > best) {
      best = auc;
      best_label = labels[i];
    }
  }
  CHECK(j["best_by_test_auc"] == best_label);
  CHECK(r.out.find("best by test AUC: " + best_label) != std::string::npos);
  const Run h = cli({"sweep-nodes", "--help"});
  CHECK(h.code == 0);
  CHECK(h.out.find("not expected to match any published numbers") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("compare emits the five metric columns and an oracle external row") {
  const fs::path dir = scratch("compare");
  const fs::path data = tabular_csv(dir, 100, 3);
  // Oracle scorer: the dataset's own labels.
  std::istringstream in(slurp(data));
  const Dataset ds = parse_csv(in, "label", 1);
  std::ostringstream ext;
  ext << "row_id,score\n";
  for (std::size_t i = 0; i < ds.size(); ++i) {
    ext << i << ',' << ds.labels[i] << '\n';
  }
  write_file(dir / "oracle.csv", ext.str());
  const Run r = cli({"compare", "--data", data.string(), "--models", "logreg,forest", "--epochs",
                     "3", "--trees", "3", "--external", "oracle=" + (dir / "oracle.csv").string(),
                     "--out", dir.string()});
  REQUIRE(r.code == 0);
  const nlohmann::json j = read_json(dir / "compare.json");
  CHECK(j["schema"] == "finrisk.compare/1");
  CHECK(j["columns"] == std::vector<std::string>{"Acc", "Precision", "Recall", "F", "AUC"});
  REQUIRE(j["rows"].size() == 3);
  CHECK(j["rows"][0]["folds"] == 5);
  for (const auto& key : {"Acc", "Precision", "Recall", "F", "AUC"}) {
    CHECK(j["rows"][0]["mean"].contains(key));
    CHECK(j["rows"][0]["std"].contains(key));
  }
  const auto& oracle = j["rows"][2];
  CHECK(oracle["model"] == "oracle");
  CHECK(oracle["evaluation"] == "full_dataset");
  CHECK(oracle["mean"]["AUC"] == 1.0);
  CHECK(oracle["mean"]["Acc"] == 1.0);
  CHECK(j["footnotes"].size() == 1);
  CHECK(r.out.find("±") != std::string::npos);

  write_file(dir / "bad.csv", "row_id,score\n0,1.5\n");
  const Run bad = cli({"compare", "--data", data.string(), "--models", "logreg", "--epochs", "1",
                       "--external", "svm=" + (dir / "bad.csv").string(), "--out", dir.string()});
  CHECK(bad.code == kExitValidation);
  CHECK(bad.err.find("svm") != std::string::npos);
  CHECK(bad.err.find("line 2") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("lstm beats logistic regression on order-dependent sequences") {
  const fs::path dir = scratch("compare_seq");
  const fs::path data = dir / "seq.csv";
  REQUIRE(cli({"gen-data", "--kind", "sequence", "--n", "1000", "--timesteps", "4", "--dims", "4",
               "--seed", "3", "--out", data.string()})
              .code == 0);
  const Run r = cli({"compare", "--data", data.string(), "--timesteps", "4", "--models",
                     "lstm,logreg", "--hidden", "16", "--epochs", "30", "--lr", "0.01", "--out",
                     dir.string()});
  REQUIRE(r.code == 0);
  const nlohmann::json j = read_json(dir / "compare.json");
  const double lstm = j["rows"][0]["mean"]["AUC"].get<double>();
  const double logreg = j["rows"][1]["mean"]["AUC"].get<double>();
  MESSAGE("lstm AUC " << lstm << ", logreg AUC " << logreg);
  CHECK(lstm >= logreg);
  fs::remove_all(dir);
}

TEST_CASE("curves: endpoints, point count and svg parse-back") {
  const fs::path dir = scratch("curves");
  const fs::path data = tabular_csv(dir, 150, 4);
  REQUIRE(cli({"train", "--data", data.string(), "--model", "forest", "--trees", "7", "--out",
               dir.string()})
              .code == 0);
  const Run r = cli({"curves", "--model", (dir / "model.json").string(), "--data", data.string(),
                     "--svg", "--out", dir.string()});
  REQUIRE(r.code == 0);
  const auto roc = read_points_csv(dir / "roc.csv");
  REQUIRE(roc.size() >= 2);
  CHECK(roc.front() == CurvePoint{0.0, 0.0});
  CHECK(roc.back() == CurvePoint{1.0, 1.0});

  std::istringstream in(slurp(data));
  const Dataset ds = parse_csv(in, "label", 1);
  const Vector scores = load_model((dir / "model.json").string()).score_dataset(ds);
  const std::set<double> distinct(scores.begin(), scores.end());
  CHECK(roc.size() <= distinct.size() + 1);

  for (const auto& [csv, svg] : {std::pair{"roc.csv", "roc.svg"}, std::pair{"pr.csv", "pr.svg"}}) {
    const auto pts = read_points_csv(dir / csv);
    const auto back = read_svg_polyline(dir / svg, 400.0);
    REQUIRE(back.size() == pts.size());
    for (std::size_t k = 0; k < pts.size(); ++k) {
      CHECK(std::fabs(back[k].x - pts[k].x) < 1e-8);
      CHECK(std::fabs(back[k].y - pts[k].y) < 1e-8);
    }
  }
  // Feature count mismatch between model and data.
  const fs::path wide = dir / "wide";
  fs::create_directories(wide);
  const fs::path wide_csv = tabular_csv(wide, 50, 6);
  const Run mismatch = cli({"curves", "--model", (dir / "model.json").string(), "--data",
                            wide_csv.string(), "--out", wide.string()});
  CHECK(mismatch.code == kExitValidation);
  fs::remove_all(dir);
}

TEST_CASE("econ beta, var-fit and malformed input") {
  const fs::path dir = scratch("econ");
  Rng rng(5);
  std::ostringstream ret;
  ret << "date,ret\n";
  for (int i = 0; i < 50; ++i) {
    ret << "d" << i << ',' << 0.01 * rng.normal() << '\n';
  }
  write_file(dir / "m.csv", ret.str());
  const Run b = cli({"econ", "beta", "--asset", (dir / "m.csv").string(), "--market",
                     (dir / "m.csv").string()});
  REQUIRE(b.code == 0);
  const nlohmann::json bj = nlohmann::json::parse(b.out);
  CHECK(bj["beta"] == 1.0);
  CHECK(bj["schema"] == "finrisk.econ.beta/1");

  // Noise-free VAR(1): a damped rotation.
  const double a00 = 0.8, a01 = -0.3, a10 = 0.3, a11 = 0.8;
  std::ostringstream ser;
  ser << "t,x,y\n";
  double x = 1.0, y = 0.5;
  for (int t = 0; t < 40; ++t) {
    ser << t << ',' << csv::format_double(x) << ',' << csv::format_double(y) << '\n';
    const double nx = a00 * x + a01 * y;
    const double ny = a10 * x + a11 * y;
    x = nx;
    y = ny;
  }
  write_file(dir / "s.csv", ser.str());
  const Run v = cli({"econ", "var-fit", "--series", (dir / "s.csv").string(), "--order", "1",
                     "--no-intercept", "--out", dir.string()});
  REQUIRE(v.code == 0);
  const auto coef = nlohmann::json::parse(v.out)["model"]["coefficients"][0];
  CHECK(std::fabs(coef[0][0].get<double>() - a00) < 1e-8);
  CHECK(std::fabs(coef[0][1].get<double>() - a01) < 1e-8);
  CHECK(std::fabs(coef[1][0].get<double>() - a10) < 1e-8);
  CHECK(std::fabs(coef[1][1].get<double>() - a11) < 1e-8);
  CHECK(read_json(dir / "var_fit.json")["schema"] == "finrisk.econ.var_fit/1");

  const Run irf = cli({"econ", "var-irf", "--series", (dir / "s.csv").string(), "--order", "1",
                       "--no-intercept", "--shock", "0", "--horizon", "3"});
  REQUIRE(irf.code == 0);
  const auto resp = nlohmann::json::parse(irf.out)["responses"];
  CHECK(resp[0] == std::vector<double>{1.0, 0.0});
  CHECK(std::fabs(resp[1][0].get<double>() - a00) < 1e-8);

  write_file(dir / "bad.csv", "t,x\n0,1.0\n1,abc\n");
  const Run bad = cli({"econ", "var-fit", "--series", (dir / "bad.csv").string()});
  CHECK(bad.code != 0);
  CHECK(bad.err.find("line 3") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("malformed dataset csv exits nonzero with the line") {
  const fs::path dir = scratch("bad_data");
  write_file(dir / "d.csv", "a,b,label\n1,2,0\n3,4,2\n");
  const Run r = cli({"train", "--data", (dir / "d.csv").string(), "--epochs", "1", "--out",
                     dir.string()});
  CHECK(r.code == kExitValidation);
  CHECK(r.err.find("line 3") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("config file fills options that flags leave unset") {
  const fs::path dir = scratch("config");
  const fs::path data = tabular_csv(dir, 100, 3);
  write_file(dir / "run.cfg", "# training defaults\nepochs = 2\nlr = 0.05\nhidden = 3,2\n");
  REQUIRE(cli({"train", "--data", data.string(), "--config", (dir / "run.cfg").string(),
               "--epochs", "1", "--out", (dir / "o").string()})
              .code == 0);
  const auto spec = read_json(dir / "o" / "train_report.json")["spec"];
  CHECK(spec["epochs"] == 1);           // flag wins
  CHECK(spec["learning_rate"] == 0.05);  // from the file
  CHECK(spec["hidden"] == std::vector<int>{3, 2});
  CHECK(spec["batch_size"] == 100);  // documented default

  write_file(dir / "typo.cfg", "epocs = 2\n");
  const Run typo = cli({"train", "--data", data.string(), "--config", (dir / "typo.cfg").string(),
                        "--out", (dir / "t").string()});
  CHECK(typo.code == kExitValidation);
  CHECK(typo.err.find("epocs") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("numerical divergence exits 2") {
  const fs::path dir = scratch("diverge");
  const fs::path data = tabular_csv(dir, 100, 3);
  const Run r = cli({"train", "--data", data.string(), "--hidden", "4", "--epochs", "3", "--lr",
                     "1e308", "--out", dir.string()});
  CHECK(r.code == kExitDivergence);
  CHECK(r.err.find("diverged") != std::string::npos);
  CHECK(fs::exists(dir / "train_loss.csv"));
  CHECK_FALSE(fs::exists(dir / "model.json"));
  fs::remove_all(dir);
}

TEST_CASE("gen-data writes a dataset the loader accepts") {
  const fs::path dir = scratch("gen");
  const Run r = cli({"gen-data", "--kind", "sequence", "--n", "30", "--timesteps", "3", "--dims",
                     "2", "--out", (dir / "s.csv").string()});
  REQUIRE(r.code == 0);
  const Dataset ds = load_csv((dir / "s.csv").string(), "label", 3);
  CHECK(ds.size() == 30);
  CHECK(ds.dims() == 2);
  CHECK(nlohmann::json::parse(r.out)["n"] == 30);
  CHECK(cli({"gen-data", "--kind", "sequence", "--timesteps", "1", "--out",
             (dir / "x.csv").string()})
            .code == kExitValidation);
  fs::remove_all(dir);
}
