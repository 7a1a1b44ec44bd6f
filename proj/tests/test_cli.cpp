#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <numbers>
#include <sstream>

#include "causal_gate/cli.hpp"
#include "causal_gate/data.hpp"
#include "causal_gate/graph.hpp"
#include "causal_gate/io.hpp"
#include "test_support.hpp"

using namespace causal_gate;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome run(std::vector<std::string> args) {
    args.insert(args.begin(), "causal-gate");
    std::ostringstream out, err;
    const int code = cli::dispatch(args, out, err);
    return {code, out.str(), err.str()};
}

// N * H(y | x) for a linear-Gaussian child with one parent, by plain OLS.
double gaussian_term(const std::vector<double>& y, const std::vector<double>& x) {
    const double n = static_cast<double>(y.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        mx += x[i] / n;
        my += y[i] / n;
    }
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    const double b = sxy / sxx;
    double rss = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double r = y[i] - my - b * (x[i] - mx);
        rss += r * r;
    }
    return n * 0.5 * std::log(2 * std::numbers::pi * std::numbers::e * rss / n);
}

// synth gen on the chain a -> b -> c
void chain_data(const test_support::TempDir& dir, std::size_t rows) {
    graph::save_dag(graph::Dag({"a", "b", "c"}, {}, {{0, 1}, {1, 2}}), dir / "chain.json");
    const auto r = run({"synth", "gen", "--dag", (dir / "chain.json").string(), "--target", "c", "--rows",
                        std::to_string(rows), "--test-rows", "100", "--seed", "3", "--out", dir.path().string()});
    REQUIRE(r.code == 0);
}

}  // namespace

TEST_CASE("help and usage errors") {
    CHECK(run({"--help"}).code == 0);
    const auto missing = run({"select", "--csv", "x.csv", "--schema", "s.json", "--target", "y", "--preds", "p.csv"});
    CHECK(missing.code == cli::kExitUsage);
    CHECK(missing.err.rfind("error Usage", 0) == 0);
    CHECK(missing.err.find("--dag") != std::string::npos);
    CHECK(run({"frobnicate"}).code == cli::kExitUsage);
    CHECK(run({"experiment"}).code == cli::kExitUsage);
}

TEST_CASE("malformed CSV exits 2 naming row and column") {
    test_support::TempDir dir("badcsv");
    chain_data(dir, 300);
    io::write_file(dir / "bad.csv", "a,b,c\n1,2,3\n4,oops,6\n");
    const auto r = run({"score", "--dag", (dir / "chain.json").string(), "--csv", (dir / "bad.csv").string(),
                        "--schema", (dir / "schema.json").string(), "--out", dir.path().string()});
    CHECK(r.code == cli::kExitData);
    CHECK(r.err.rfind("error UnparseableValue", 0) == 0);
    CHECK(r.err.find("row 3") != std::string::npos);
    CHECK(r.err.find("'b'") != std::string::npos);
    CHECK(r.err.find('\n') == r.err.size() - 1);
}

TEST_CASE("--drop-missing skips incomplete rows") {
    test_support::TempDir dir("drop");
    chain_data(dir, 300);
    io::write_file(dir / "gaps.csv", "a,b,c\n1,2,3\n4,,6\n0.5,1,2\n2,1,0\n");
    const std::vector<std::string> base{"score", "--dag", (dir / "chain.json").string(), "--csv",
                                        (dir / "gaps.csv").string(), "--schema", (dir / "schema.json").string(),
                                        "--out", dir.path().string()};
    CHECK(run(base).code == cli::kExitData);
    auto args = base;
    args.push_back("--drop-missing");
    const auto r = run(args);
    CHECK(r.code == 0);
    CHECK(r.out.find("dropped 1 rows") != std::string::npos);
    CHECK(io::read_json(dir / "score.json")["n_rows"] == 3);
}

TEST_CASE("score ranks the true chain above an edge-deleted DAG") {
    test_support::TempDir dir("ll");
    chain_data(dir, 5000);
    graph::save_dag(graph::Dag({"a", "b", "c"}, {}, {{0, 1}}), dir / "cut.json");
    auto score = [&](const std::string& dag) {
        const auto r = run({"score", "--dag", (dir / dag).string(), "--csv", (dir / "train.csv").string(), "--schema",
                            (dir / "schema.json").string(), "--out", dir.path().string()});
        REQUIRE(r.code == 0);
        CHECK(fs::exists(dir / "config_echo.json"));
        return io::read_json(dir / "score.json")["log_likelihood"].get<double>();
    };
    CHECK(score("chain.json") > score("cut.json"));
}

TEST_CASE("score with predictions gives one f per model") {
    test_support::TempDir dir("f");
    chain_data(dir, 2000);
    const auto table = data::load_csv(dir / "train.csv", data::load_schema(dir / "schema.json"));
    const auto& b = table.column("b");
    const auto& c = table.column("c");
    std::vector<double> noisy(c.size());
    std::ostringstream preds;
    preds << "model_id,row_index,prediction\n";
    for (std::size_t i = 0; i < c.size(); ++i) preds << "truth," << i << "," << data::format_double(c[i]) << "\n";
    for (std::size_t i = 0; i < c.size(); ++i) {
        noisy[i] = c[i] + (i % 2 ? 0.7 : -0.7);
        preds << "noisy," << i << "," << data::format_double(noisy[i]) << "\n";
    }
    io::write_file(dir / "preds.csv", preds.str());

    const auto r = run({"score", "--dag", (dir / "chain.json").string(), "--csv", (dir / "train.csv").string(),
                        "--schema", (dir / "schema.json").string(), "--target", "c", "--preds",
                        (dir / "preds.csv").string(), "--out", dir.path().string()});
    REQUIRE(r.code == 0);
    const auto doc = io::read_json(dir / "score.json");
    REQUIRE(doc["models"].size() == 2);
    CHECK(doc["models"][0]["model_id"] == "truth");
    const double f_truth = doc["models"][0]["f"];
    const double f_noisy = doc["models"][1]["f"];
    CHECK(f_truth == doctest::Approx(gaussian_term(c, b)).epsilon(1e-9));
    CHECK(f_noisy == doctest::Approx(gaussian_term(noisy, b)).epsilon(1e-9));
    CHECK(f_noisy > f_truth);
}

TEST_CASE("synth, train, select and rank chain together") {
    test_support::TempDir dir("pipe");
    chain_data(dir, 600);
    const auto d = dir.path().string();
    auto t = run({"train", "--csv", d + "/train.csv", "--schema", d + "/schema.json", "--target", "c", "--test-csv",
                  d + "/test.csv", "--models", "4", "--epochs", "3", "--seed", "5", "--out", d});
    REQUIRE(t.code == 0);
    CHECK(t.out == "trained 4 models\n");
    for (const char* f : {"models/model_0.json", "models/model_3.json", "scaler.json", "split.json", "sel.csv",
                          "preds_sel.csv", "preds_test.csv"})
        CHECK(fs::exists(dir / f));
    CHECK(io::read_json(dir / "config_echo.json")["command"] == "train");

    auto s = run({"select", "--dag", d + "/chain.json", "--csv", d + "/sel.csv", "--schema", d + "/schema.json",
                  "--target", "c", "--preds", d + "/preds_sel.csv", "--out", d});
    REQUIRE(s.code == 0);
    const auto selection = io::read_json(dir / "selection.json");
    CHECK(s.out == "best " + selection["best_model_id"].get<std::string>() + "\n");
    CHECK(io::read_json(dir / "config_echo.json")["command"] == "select");
    CHECK(io::read_json(dir / "config_echo.json")["lambda"] == 1.0);

    auto k = run({"rank", "--results", d + "/selection.json", "--by", "r", "--out", d});
    REQUIRE(k.code == 0);
    CHECK(k.out.substr(0, k.out.find('\n')) == selection["best_model_id"].get<std::string>());
    CHECK(io::read_json(dir / "ranking.json")["ranking"].size() == 4);
}

TEST_CASE("experiment command writes its run directory and replays from the echo") {
    test_support::TempDir a("cli_exp_a"), b("cli_exp_b");
    const auto r = run({"experiment", "robustness", "--n", "4", "--dags", "2", "--models", "5", "--seed", "7", "--rows",
                        "400", "--test-rows", "200", "--epochs", "3", "--out", a.path().string()});
    REQUIRE(r.code == 0);
    for (const char* f : {"config_echo.json", "report.json", "report.csv", "scatter_sel_vs_test.csv"})
        CHECK(fs::exists(a / f));
    CHECK(io::read_json(a / "config_echo.json")["seed"] == 7);

    const auto again =
        run({"experiment", "--config", (a / "config_echo.json").string(), "--out", b.path().string()});
    REQUIRE(again.code == 0);
    CHECK(io::read_file(a / "report.json") == io::read_file(b / "report.json"));
    CHECK(io::read_file(a / "report.csv") == io::read_file(b / "report.csv"));

    const auto rep = run({"report", "--run", a.path().string(), "--out", b.path().string()});
    CHECK(rep.code == 0);
    CHECK(fs::exists(b / "summary.json"));
}

TEST_CASE("CAUSAL_GATE_SEED sets the default seed") {
    test_support::TempDir a("env_a"), b("env_b");
    ::setenv("CAUSAL_GATE_SEED", "41", 1);
    const auto from_env = run({"synth", "gen", "--n", "4", "--rows", "50", "--test-rows", "20", "--out", a.path().string()});
    ::unsetenv("CAUSAL_GATE_SEED");
    const auto explicit_seed =
        run({"synth", "gen", "--n", "4", "--rows", "50", "--test-rows", "20", "--seed", "41", "--out", b.path().string()});
    REQUIRE(from_env.code == 0);
    REQUIRE(explicit_seed.code == 0);
    CHECK(io::read_json(a / "config_echo.json")["seed"] == 41);
    CHECK(io::read_file(a / "train.csv") == io::read_file(b / "train.csv"));
    CHECK(io::read_file(a / "dag.json") == io::read_file(b / "dag.json"));
}
