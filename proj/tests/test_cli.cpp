#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "corml/cli.hpp"
#include "corml/dataio.hpp"
#include "corml/signal.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"
#include "test_util.hpp"

using namespace corml;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "corml");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path write_interactions(const fs::path& dir) {
  testing::ClusteredSpec spec;
  spec.n_users = 120;
  spec.n_items = 40;
  spec.n_clusters = 4;
  spec.min_degree = 6;
  spec.max_degree = 14;
  const auto path = dir / "interactions.tsv";
  std::ofstream f(path);
  f << "# user\titem\n";
  for (const auto& [u, i] : testing::clustered_pairs(spec)) f << u << '\t' << i << '\n';
  return path;
}

// Split directory shared by the tests below.
fs::path prepared_split(const std::string& name) {
  const auto dir = testing::scratch_dir(name);
  const auto input = write_interactions(dir);
  const auto r = run({"split", "--input", input.string(), "--out", (dir / "split").string(), "--seed", "4"});
  REQUIRE(r.code == 0);
  return dir;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("split is byte-identical across runs") {
    const auto dir = testing::scratch_dir("cli_split");
    const auto input = write_interactions(dir);
    for (const char* out : {"a", "b"}) {
      REQUIRE(run({"split", "--input", input.string(), "--out", (dir / out).string(), "--seed", "9"}).code == 0);
    }
    for (const char* f : {"train.tsv", "valid.tsv", "test.tsv", "users.tsv", "items.tsv"}) {
      CHECK(testing::slurp(dir / "a" / f) == testing::slurp(dir / "b" / f));
      CHECK(!testing::slurp(dir / "a" / f).empty());
    }
  }

  TEST_CASE("bad ratios fail before any IO") {
    const auto dir = testing::scratch_dir("cli_ratios");
    const auto r = run({"split", "--input", (dir / "missing.tsv").string(), "--out", (dir / "out").string(),
                        "--train-ratio", "0.7"});
    CHECK(r.code == kExitUsage);
    CHECK_FALSE(fs::exists(dir / "out"));
  }

  TEST_CASE("usage errors map to exit code 1") {
    CHECK(run({}).code == kExitUsage);
    CHECK(run({"train", "--data", "x"}).code == kExitUsage);
    CHECK(run({"frobnicate"}).code == kExitUsage);
    CHECK(run({"--help"}).code == kExitOk);
  }

  TEST_CASE("ease model matches the in-process oracle") {
    const auto dir = prepared_split("cli_ease");
    const auto model = (dir / "ease.bin").string();
    REQUIRE(run({"train", "--data", (dir / "split").string(), "--model", "ease", "--theta", "3",
                 "--nnz-budget", "100000", "--out", model}).code == 0);
    const auto data = read_split(dir / "split");
    const Model m = load_model(model);
    CHECK(m.kind == ModelKind::ease);
    CHECK(testing::max_abs_diff(m.weights.to_dense(), testing::ease_kkt_oracle(data.train.to_dense(), 3.0)) < 1e-8);
  }

  TEST_CASE("corml with lambda 0 stores no weights; retraining is byte-identical") {
    const auto dir = prepared_split("cli_corml");
    const auto split_dir = (dir / "split").string();
    REQUIRE(run({"train", "--data", split_dir, "--lambda", "0", "--rank", "8", "--out", (dir / "l0.bin").string()}).code == 0);
    CHECK(load_model(dir / "l0.bin").weights.nnz() == 0);

    for (const char* name : {"a.bin", "b.bin"}) {
      REQUIRE(run({"train", "--data", split_dir, "--rank", "8", "--iters", "20", "--out", (dir / name).string()}).code == 0);
    }
    CHECK(testing::slurp(dir / "a.bin") == testing::slurp(dir / "b.bin"));
    const auto log = testing::slurp(dir / "a.bin.log.tsv");
    CHECK(log.find("iteration\tprimal_residual\tdual_residual\tobjective") != std::string::npos);
    CHECK(log.find("# lambda = 0.69999999999999996") != std::string::npos);
  }

  TEST_CASE("eval writes reports and a comparison table") {
    const auto dir = prepared_split("cli_eval");
    const auto split_dir = (dir / "split").string();
    REQUIRE(run({"train", "--data", split_dir, "--model", "ease", "--out", (dir / "ease.bin").string()}).code == 0);
    REQUIRE(run({"train", "--data", split_dir, "--rank", "8", "--out", (dir / "corml.bin").string()}).code == 0);
    const auto r = run({"eval", "--data", split_dir, "--model", (dir / "corml.bin").string(), "--model",
                        (dir / "ease.bin").string(), "--k", "5,10", "--out-dir", (dir / "reports").string()});
    REQUIRE(r.code == 0);
    CHECK(fs::exists(dir / "reports" / "corml.report.tsv"));
    CHECK(fs::exists(dir / "reports" / "ease.report.json"));
    const auto table = testing::slurp(dir / "reports" / "comparison.tsv");
    CHECK(table.rfind("model\tndcg@5\tmrr@5\tnovelty@5\tndcg@10", 0) == 0);
    CHECK(table.find("\ncorml\t") != std::string::npos);
    CHECK(table.find("\nease\t") != std::string::npos);
    const auto report = testing::slurp(dir / "reports" / "corml.report.tsv");
    CHECK(report.find("config.k\t5,10") != std::string::npos);
    CHECK(report.find("config.lambda\t0.69999999999999996") != std::string::npos);
  }

  TEST_CASE("missing model file is a data error") {
    const auto dir = prepared_split("cli_missing");
    const auto r = run({"eval", "--data", (dir / "split").string(), "--model", (dir / "none.bin").string()});
    CHECK(r.code == kExitData);
    CHECK(r.err.find("none.bin") != std::string::npos);
  }

  TEST_CASE("recommend serves known users and flags unknown ones") {
    const auto dir = prepared_split("cli_recommend");
    const auto split_dir = (dir / "split").string();
    REQUIRE(run({"train", "--data", split_dir, "--model", "ease", "--out", (dir / "m.bin").string()}).code == 0);
    const auto r = run({"recommend", "--data", split_dir, "--model", (dir / "m.bin").string(), "--user", "u0",
                        "--user", "nobody", "--k", "3"});
    CHECK(r.code == 0);
    CHECK(r.out.find("nobody\terror\tunknown user") != std::string::npos);
    CHECK(r.out.find("u0\t1\t") != std::string::npos);
    CHECK(r.out.find("u0\t3\t") != std::string::npos);
    const auto big = run({"recommend", "--data", split_dir, "--model", (dir / "m.bin").string(), "--user", "u0",
                          "--k", "1000"});
    CHECK(big.out.find("u0\tflag\ttruncated") != std::string::npos);
  }

  TEST_CASE("analyze reports zero violations for a zero H and small ones for a fitted model") {
    const auto dir = prepared_split("cli_analyze");
    const auto split_dir = (dir / "split").string();
    REQUIRE(run({"train", "--data", split_dir, "--lambda", "0", "--rank", "8", "--out", (dir / "zero.bin").string()}).code == 0);
    const auto zero = run({"analyze", "--data", split_dir, "--model", (dir / "zero.bin").string(), "--samples", "500"});
    REQUIRE(zero.code == 0);
    CHECK(zero.out.find("omega\t0\n") != std::string::npos);
    CHECK(zero.out.find("case1.max_violation\t0\n") != std::string::npos);
    CHECK(zero.out.find("case2.max_violation\t0\n") != std::string::npos);

    REQUIRE(run({"train", "--data", split_dir, "--rank", "8", "--t", "0.2", "--out", (dir / "fit.bin").string()}).code == 0);
    const auto fit = run({"analyze", "--data", split_dir, "--model", (dir / "fit.bin").string(), "--samples", "2000",
                          "--out", (dir / "geo.tsv").string()});
    REQUIRE(fit.code == 0);
    std::istringstream rep(testing::slurp(dir / "geo.tsv"));
    std::string key, value;
    std::size_t counted = 0, triples = 0;
    while (std::getline(rep, key, '\t') && std::getline(rep, value)) {
      if (key.find("max_violation") != std::string::npos) CHECK(std::stod(value) <= 1e-9);
      if (key.find(".count") != std::string::npos) counted += std::stoul(value);
      if (key == "triples") triples = std::stoul(value);
    }
    CHECK(triples == 2000);
    CHECK(counted == triples);

    const auto ease = run({"train", "--data", split_dir, "--model", "ease", "--out", (dir / "e.bin").string()});
    REQUIRE(ease.code == 0);
    CHECK(run({"analyze", "--data", split_dir, "--model", (dir / "e.bin").string()}).code == kExitData);
  }

  TEST_CASE("config file and environment feed options; flags win") {
    const auto dir = prepared_split("cli_config");
    const auto split_dir = (dir / "split").string();
    {
      std::ofstream cfg(dir / "train.conf");
      cfg << "# experiment\nlambda = 0.25\nrank = 6\niters = 5\n";
    }
    REQUIRE(run({"train", "--config", (dir / "train.conf").string(), "--data", split_dir, "--out",
                 (dir / "c.bin").string()}).code == 0);
    Model m = load_model(dir / "c.bin");
    CHECK(m.hp.lambda == 0.25);
    CHECK(m.hp.max_iters == 5);
    REQUIRE(run({"train", "--config", (dir / "train.conf").string(), "--lambda", "0.5", "--data", split_dir,
                 "--out", (dir / "d.bin").string()}).code == 0);
    CHECK(load_model(dir / "d.bin").hp.lambda == 0.5);

    ::setenv("CORML_LAMBDA", "0.125", 1);
    const auto env = run({"train", "--data", split_dir, "--rank", "6", "--iters", "5", "--out", (dir / "e.bin").string()});
    ::unsetenv("CORML_LAMBDA");
    REQUIRE(env.code == 0);
    CHECK(load_model(dir / "e.bin").hp.lambda == 0.125);

    std::ofstream bad(dir / "bad.conf");
    bad << "lamda = 0.3\n";
    bad.close();
    CHECK(run({"train", "--config", (dir / "bad.conf").string(), "--data", split_dir, "--out",
               (dir / "f.bin").string()}).code == kExitUsage);
  }

  TEST_CASE("thread count does not change outputs") {
    const auto dir = prepared_split("cli_threads");
    const auto split_dir = (dir / "split").string();
    REQUIRE(run({"--threads", "1", "train", "--data", split_dir, "--rank", "8", "--out", (dir / "t1.bin").string()}).code == 0);
    REQUIRE(run({"--threads", "3", "train", "--data", split_dir, "--rank", "8", "--out", (dir / "t3.bin").string()}).code == 0);
    CHECK(testing::slurp(dir / "t1.bin") == testing::slurp(dir / "t3.bin"));
  }
}
