#include "corml/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "corml/dataio.hpp"
#include "corml/error.hpp"
#include "corml/eval.hpp"
#include "corml/geometry.hpp"
#include "corml/kernels.hpp"
#include "corml/model.hpp"
#include "corml/signal.hpp"
#include "corml/solver.hpp"

namespace corml {

namespace fs = std::filesystem;

namespace {

using Echo = std::vector<std::pair<std::string, std::string>>;

constexpr const char* kEnvHelp =
    "Every option can also be set through an environment variable named CORML_ followed by\n"
    "the option name in upper case with dashes as underscores (e.g. CORML_LAMBDA, CORML_NNZ_BUDGET).\n"
    "Precedence: built-in defaults < --config file (flat `key = value` lines) < environment < flags.\n"
    "Exit codes: 0 success, 1 usage, 2 data, 3 numerical failure.";

constexpr const char* kEvalFieldsHelp =
    "Report fields (text: key<TAB>value, JSON: same names): model, config.<key>, mode,\n"
    "exclude_valid, dataset_hash, model_hash, users_evaluated, users_skipped, truncated_lists,\n"
    "zero_degree_hits, ndcg@K, mrr@K, novelty@K, and user.<index>.<metric>@K with --per-user.";

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string hex(std::uint64_t h) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// Flag names are "--foo-bar"; their environment names CORML_FOO_BAR.
template <typename T>
CLI::Option* add(CLI::App* app, const std::string& flag, T& value, const std::string& help) {
  std::string name = flag.substr(2);
  std::string env = "CORML_";
  for (char c : name) {
    env += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  }
  return app->add_option(flag, value, help)->envname(env);
}

std::string join_ks(const std::vector<std::size_t>& ks) {
  std::string s;
  for (std::size_t i = 0; i < ks.size(); ++i) s += (i ? "," : "") + std::to_string(ks[i]);
  return s;
}

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint64_t dataset_hash(const fs::path& dir) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char* name : {"train.tsv", "valid.tsv", "test.tsv", "users.tsv", "items.tsv"}) {
    const auto bytes = read_bytes(dir / name);
    h = fnv1a(bytes.data(), bytes.size(), h);
  }
  return h;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("failed writing " + path.string());
}

Echo hyperparam_echo(const CoRMLHyperparams& hp) {
  return {{"t", fmt(hp.t)},
          {"tu", fmt(hp.t_u)},
          {"eps", fmt(hp.epsilon)},
          {"theta", fmt(hp.theta)},
          {"lambda", fmt(hp.lambda)},
          {"rank", std::to_string(hp.rank)},
          {"rho", fmt(hp.rho)},
          {"iters", std::to_string(hp.max_iters)},
          {"tol", fmt(hp.tol)},
          {"seed", std::to_string(hp.seed)},
          {"power_iters", std::to_string(hp.power_iters)},
          {"weights", hp.weights == PenaltyWeights::degree ? "degree" : "uniform"}};
}

std::string stem_of(const fs::path& p) { return p.stem().string(); }

// ---------------------------------------------------------------- split

struct SplitArgs {
  std::string input;
  std::string out;
  double train_ratio = 0.6;
  double valid_ratio = 0.2;
  double test_ratio = 0.2;
  std::uint64_t seed = 0;
  std::size_t min_degree = 5;
  std::string mode = "per-user";
};

int cmd_split(const SplitArgs& a, std::ostream& out, std::ostream& err) {
  SplitOptions opts;
  opts.train_ratio = a.train_ratio;
  opts.valid_ratio = a.valid_ratio;
  opts.test_ratio = a.test_ratio;
  opts.seed = a.seed;
  opts.min_user_degree = a.min_degree;
  if (a.mode == "per-user") {
    opts.mode = SplitMode::per_user;
  } else if (a.mode == "global") {
    opts.mode = SplitMode::global;
  } else {
    throw UsageError("unknown split mode '" + a.mode + "' (expected per-user or global)");
  }
  opts.validate();

  std::ifstream in(a.input);
  if (!in) throw DataError("cannot read " + a.input);
  const ParsedInteractions parsed = parse_interactions(in);
  for (const auto& d : parsed.diagnostics) {
    err << "warning: " << a.input << ":" << d.line << ": " << d.message << '\n';
  }
  const SplitDataset data = split(parsed.pairs, opts);
  write_split(data, a.out);
  out << "users\t" << data.index.n_users() << '\n'
      << "items\t" << data.index.n_items() << '\n'
      << "dropped_users\t" << data.dropped_users << '\n'
      << "train\t" << data.train.nnz() << '\n'
      << "valid\t" << data.valid.nnz() << '\n'
      << "test\t" << data.test.nnz() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string data;
  std::string model = "corml";
  std::string out;
  std::string log;
  std::string filter = "auto";
  std::string weights = "degree";
  std::optional<std::uint64_t> nnz_budget;
  CoRMLHyperparams hp;
};

int cmd_train(TrainArgs a, std::ostream& out, std::ostream& err) {
  const ModelKind kind = parse_model_kind(a.model);
  if (a.weights == "degree") {
    a.hp.weights = PenaltyWeights::degree;
  } else if (a.weights == "uniform") {
    a.hp.weights = PenaltyWeights::uniform;
  } else {
    throw UsageError("unknown penalty weights '" + a.weights + "' (expected degree or uniform)");
  }
  if (a.filter != "auto" && a.filter != "dense" && a.filter != "sparse") {
    throw UsageError("unknown filter policy '" + a.filter + "' (expected auto, dense or sparse)");
  }
  a.hp.validate();

  const SplitDataset data = read_split(a.data);
  const InteractionMatrix& train = data.train;
  if (train.nnz() == 0) throw DataError("training split is empty");
  const Index nu = train.n_users();
  const Index ni = train.n_items();
  const std::uint64_t budget = a.nnz_budget.value_or(default_nnz_budget(nu, ni));
  if (budget < ni) {
    err << "warning: nnz budget " << budget << " is smaller than the item count " << ni << '\n';
  }

  Model m;
  m.kind = kind;
  m.hp = a.hp;
  m.item_degrees = train.item_degrees();
  m.user_degrees = train.user_degrees();
  m.nnz_budget = budget;
  m.filter_policy = FilterPolicy::dense;
  if (a.filter == "sparse") {
    m.filter_policy = FilterPolicy::sparse;
  } else if (ni > FilterMatrix::kDefaultDenseItemLimit) {
    err << "warning: " << ni << " items exceed the dense filter cap of "
        << FilterMatrix::kDefaultDenseItemLimit << "; "
        << (a.filter == "dense" ? "keeping the dense filter as requested" : "using the sparse filter")
        << '\n';
    if (a.filter == "auto") m.filter_policy = FilterPolicy::sparse;
  }

  std::vector<IterationLog> iterations;
  std::optional<bool> converged;
  switch (kind) {
    case ModelKind::ease: {
      const EaseModel ease = fit_ease(train, a.hp.theta);
      m.weights = sparsify(ease.c, budget, SparsifyMode::general);
      break;
    }
    case ModelKind::gfcf: {
      SvdOptions svd;
      svd.rank = std::min({a.hp.rank, nu, ni});
      svd.seed = a.hp.seed;
      svd.power_iters = a.hp.power_iters;
      m.filter = truncated_svd(train, svd);
      break;
    }
    case ModelKind::corml: {
      CoRMLFit fit = fit_corml(train, a.hp, budget);
      m.weights = std::move(fit.h);
      m.filter = std::move(fit.filter);
      iterations = std::move(fit.admm.log);
      converged = fit.admm.converged;
      if (!fit.admm.converged) {
        err << "warning: ADMM stopped after " << a.hp.max_iters
            << " iterations without reaching the tolerance; keeping the best feasible iterate\n";
      }
      break;
    }
  }
  if (m.filter.rank_deficient) err << "warning: interaction matrix has fewer nonzero singular values than --rank\n";

  const fs::path model_path = a.out;
  if (model_path.has_parent_path()) fs::create_directories(model_path.parent_path());
  save_model(m, model_path);
  const fs::path log_path = a.log.empty() ? fs::path(a.out + ".log.tsv") : fs::path(a.log);

  Echo echo{{"model", to_string(kind)}, {"data", a.data}};
  for (auto& kv : hyperparam_echo(a.hp)) echo.push_back(kv);
  echo.emplace_back("nnz_budget", std::to_string(budget));
  echo.emplace_back("filter", m.filter_policy == FilterPolicy::dense ? "dense" : "sparse");

  std::ostringstream log;
  for (const auto& [k, v] : echo) log << "# " << k << " = " << v << '\n';
  log << "# dataset_hash = " << hex(dataset_hash(a.data)) << '\n';
  log << "# stored_weights = " << m.weights.nnz() << '\n';
  if (converged) log << "# converged = " << (*converged ? "true" : "false") << '\n';
  log << "iteration\tprimal_residual\tdual_residual\tobjective\n";
  for (const auto& it : iterations) {
    log << it.iteration << '\t' << fmt(it.primal_residual) << '\t' << fmt(it.dual_residual) << '\t'
        << fmt(it.objective) << '\n';
  }
  write_text(log_path, log.str());

  out << "model\t" << model_path.string() << '\n'
      << "log\t" << log_path.string() << '\n'
      << "stored_weights\t" << m.weights.nnz() << '\n'
      << "model_hash\t" << hex(hash_file(model_path)) << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::string data;
  std::vector<std::string> models;
  std::vector<std::size_t> ks{5, 10, 20};
  std::string mode = "test";
  bool no_exclude_valid = false;
  bool per_user = false;
  std::string out_dir;
};

void check_model_matches(const Model& m, const SplitDataset& data, const std::string& path) {
  if (m.n_users() != data.train.n_users() || m.n_items() != data.train.n_items()) {
    throw DataError(path + ": model was trained on a different split (" +
                    std::to_string(m.n_users()) + "x" + std::to_string(m.n_items()) + " vs " +
                    std::to_string(data.train.n_users()) + "x" +
                    std::to_string(data.train.n_items()) + ")");
  }
  if (m.item_degrees != data.train.item_degrees() || m.user_degrees != data.train.user_degrees()) {
    throw DataError(path + ": model degrees do not match the training split");
  }
}

int cmd_eval(const EvalArgs& a, std::ostream& out, std::ostream&) {
  EvalOptions opts;
  opts.ks = a.ks;
  opts.mode = parse_eval_mode(a.mode);
  opts.exclude_valid = !a.no_exclude_valid;
  opts.keep_per_user = a.per_user;
  for (std::size_t k : opts.ks) {
    if (k == 0) throw UsageError("--k values must be at least 1");
  }

  const SplitDataset data = read_split(a.data);
  const std::uint64_t dhash = dataset_hash(a.data);
  std::vector<EvalReport> reports;
  for (const auto& path : a.models) {
    const Model m = load_model(path);
    check_model_matches(m, data, path);
    const ModelScorer scorer(m, data.train);
    EvalReport r = evaluate(scorer, data, opts);
    r.model_name = stem_of(path);
    r.dataset_hash = dhash;
    r.model_hash = hash_file(path);
    r.config = {{"model", to_string(m.kind)}, {"data", a.data}, {"model_file", path}};
    for (auto& kv : hyperparam_echo(m.hp)) r.config.push_back(kv);
    r.config.emplace_back("nnz_budget", std::to_string(m.nnz_budget));
    r.config.emplace_back("filter", m.filter_policy == FilterPolicy::dense ? "dense" : "sparse");
    r.config.emplace_back("k", join_ks(opts.ks));
    r.config.emplace_back("mode", to_string(opts.mode));
    reports.push_back(std::move(r));
  }

  std::ostringstream table;
  table << "model";
  for (std::size_t k : opts.ks) table << "\tndcg@" << k << "\tmrr@" << k << "\tnovelty@" << k;
  table << '\n';
  for (const auto& r : reports) {
    table << r.model_name;
    for (const auto& c : r.cutoffs) table << '\t' << fmt(c.ndcg) << '\t' << fmt(c.mrr) << '\t' << fmt(c.novelty);
    table << '\n';
  }

  if (a.out_dir.empty()) {
    for (const auto& r : reports) write_report_text(r, out);
  } else {
    const fs::path dir = a.out_dir;
    fs::create_directories(dir);
    for (const auto& r : reports) {
      std::ostringstream text;
      write_report_text(r, text);
      write_text(dir / (r.model_name + ".report.tsv"), text.str());
      write_text(dir / (r.model_name + ".report.json"), report_json(r));
    }
    if (reports.size() > 1) write_text(dir / "comparison.tsv", table.str());
  }
  if (reports.size() > 1 || !a.out_dir.empty()) out << table.str();
  return kExitOk;
}

// ---------------------------------------------------------------- recommend

struct RecommendArgs {
  std::string data;
  std::string model;
  std::vector<std::string> users;
  std::size_t k = 10;
};

int cmd_recommend(const RecommendArgs& a, std::ostream& out, std::ostream& err) {
  if (a.k == 0) throw UsageError("--k must be at least 1");
  const SplitDataset data = read_split(a.data);
  const Model m = load_model(a.model);
  check_model_matches(m, data, a.model);
  const ModelScorer scorer(m, data.train);
  std::vector<double> scores(scorer.n_items());
  std::size_t served = 0;
  out << "user\trank\titem\tscore\n";
  for (const auto& token : a.users) {
    const auto u = data.index.find_user(token);
    if (!u) {
      out << token << "\terror\tunknown user\t\n";
      err << "warning: unknown user '" << token << "'\n";
      continue;
    }
    scorer.score_user(*u, scores);
    const RankedList ranked = rank_topk(scores, data.train.row(*u), a.k, *u);
    for (std::size_t pos = 0; pos < ranked.items.size(); ++pos) {
      out << token << '\t' << pos + 1 << '\t' << data.index.item_token(ranked.items[pos]) << '\t'
          << fmt(ranked.scores[pos]) << '\n';
    }
    if (ranked.truncated) out << token << "\tflag\ttruncated\t" << ranked.items.size() << '\n';
    ++served;
  }
  if (served == 0 && !a.users.empty()) {
    err << "error: none of the requested users is known\n";
    return kExitData;
  }
  return kExitOk;
}

// ---------------------------------------------------------------- analyze

struct AnalyzeArgs {
  std::string data;
  std::string model;
  std::size_t samples = 10000;
  std::uint64_t seed = 0;
  std::string out;
};

struct CaseStats {
  std::size_t count = 0;
  double max_violation = 0.0;
  void add(double v) {
    ++count;
    max_violation = std::max(max_violation, std::abs(v));
  }
};

int cmd_analyze(const AnalyzeArgs& a, std::ostream& out, std::ostream&) {
  const SplitDataset data = read_split(a.data);
  const Model m = load_model(a.model);
  check_model_matches(m, data, a.model);
  if (m.kind != ModelKind::corml) {
    throw DataError("analyze needs a corml model (its weights form the hollow symmetric H)");
  }
  const InteractionMatrix& r = data.train;
  const Index ni = r.n_items();
  const Index nu = r.n_users();
  const SparseSquareMatrix& h =
      m.weights.n() == 0 ? SparseSquareMatrix(ni) : m.weights;
  const SignalFeatureSpace space(r, m.hp.t);

  // x = d^{-2t}; zero-degree items have no feature and get x = 1.
  Vector x = space.default_base();
  std::vector<Index> active;
  for (Index i = 0; i < ni; ++i) {
    if (r.item_degrees()[i] > 0.0) {
      active.push_back(i);
    } else {
      x[i] = 1.0;
    }
  }
  const double omega = psd_completion_omega(h, x);
  const MetricWeight w{h, omega, x};

  double min_lower = std::numeric_limits<double>::infinity();
  double max_upper = -std::numeric_limits<double>::infinity();
  double max_radius = 0.0;
  for (Index i = 0; i < ni; ++i) {
    double radius = 0.0;
    for (double v : h.row_values(i)) radius += std::abs(v);
    const double center = omega * x[i];
    min_lower = std::min(min_lower, center - radius);
    max_upper = std::max(max_upper, center + radius);
    max_radius = std::max(max_radius, radius);
  }

  CaseStats c1, c2, c3;
  std::size_t drawn = 0;
  if (active.size() >= 2 && nu > 0) {
    std::mt19937_64 rng(a.seed);
    std::uniform_int_distribution<Index> pick_user(0, nu - 1);
    std::uniform_int_distribution<std::size_t> pick_item(0, active.size() - 1);
    const Vector& d = r.item_degrees();
    auto base = [&](Index k) { return std::pow(d[k], -2.0 * m.hp.t); };
    for (; drawn < a.samples; ++drawn) {
      const Index u = pick_user(rng);
      Index i = active[pick_item(rng)];
      Index j = active[pick_item(rng)];
      while (j == i) j = active[pick_item(rng)];
      bool ri = r.contains(u, i), rj = r.contains(u, j);
      if (!ri && rj) {
        std::swap(i, j);
        std::swap(ri, rj);
      }
      const double half_delta =
          0.5 * (mahalanobis_distance_sq(space, w, u, i) - mahalanobis_distance_sq(space, w, u, j));
      const double y = preference_residual(space, h, u, i, j);
      if (!ri) {
        c1.add(half_delta + y);
      } else if (!rj) {
        c2.add(half_delta + y + omega * base(i));
      } else {
        c3.add(half_delta + y + omega * (base(i) - base(j)));
      }
    }
  }

  std::ostringstream rep;
  rep << "model\t" << a.model << '\n'
      << "model_hash\t" << hex(hash_file(a.model)) << '\n'
      << "dataset_hash\t" << hex(dataset_hash(a.data)) << '\n';
  for (const auto& [k, v] : hyperparam_echo(m.hp)) rep << "config." << k << '\t' << v << '\n';
  rep << "config.samples\t" << a.samples << '\n'
      << "config.analyze_seed\t" << a.seed << '\n'
      << "items\t" << ni << '\n'
      << "items_zero_degree\t" << ni - active.size() << '\n'
      << "stored_weights\t" << h.nnz() << '\n'
      << "omega\t" << fmt(omega) << '\n'
      << "gershgorin.min_lower\t" << fmt(min_lower) << '\n'
      << "gershgorin.max_upper\t" << fmt(max_upper) << '\n'
      << "gershgorin.max_radius\t" << fmt(max_radius) << '\n'
      << "triples\t" << drawn << '\n'
      << "case1.count\t" << c1.count << '\n'
      << "case1.max_violation\t" << fmt(c1.max_violation) << '\n'
      << "case2.count\t" << c2.count << '\n'
      << "case2.max_violation\t" << fmt(c2.max_violation) << '\n'
      << "case3.count\t" << c3.count << '\n'
      << "case3.max_violation\t" << fmt(c3.max_violation) << '\n';
  if (a.out.empty()) {
    out << rep.str();
  } else {
    write_text(a.out, rep.str());
  }
  return kExitOk;
}

void add_config_option(CLI::App* sub) {
  sub->set_config("--config", "", "Flat `key = value` file; keys are option names without dashes");
  sub->allow_config_extras(CLI::config_extras_mode::error);
}

// CLI11 reads config files only for the top-level app, so a subcommand's
// --config is expanded here into "--key=value" arguments. An entry is skipped
// when a flag or the option's environment variable already supplies it.
std::vector<std::string> expand_config(const CLI::App& app, int argc, const char* const* argv) {
  std::vector<std::string> args(argv, argv + argc);
  std::size_t sub_pos = 0;
  const CLI::App* sub = nullptr;
  for (std::size_t i = 1; i < args.size() && sub == nullptr; ++i) {
    try {
      sub = app.get_subcommand(args[i]);
      sub_pos = i;
    } catch (const CLI::OptionNotFound&) {
    }
  }
  if (sub == nullptr) return args;
  std::string path;
  for (std::size_t i = sub_pos + 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty()) return args;

  auto given = [&](const std::string& flag) {
    for (std::size_t i = sub_pos + 1; i < args.size(); ++i) {
      if (args[i] == flag || args[i].rfind(flag + "=", 0) == 0) return true;
    }
    return false;
  };
  std::vector<std::string> injected;
  for (const auto& item : CLI::ConfigINI().from_file(path)) {
    if (item.name.empty() || item.name == "++" || item.name == "--") continue;  // section markers
    const std::string flag = "--" + item.name;
    const CLI::Option* opt = sub->get_option_no_throw(flag);
    if (opt == nullptr || !item.parents.empty()) {
      throw UsageError(path + ": unknown key '" + item.fullname() + "' for " + sub->get_name());
    }
    if (given(flag)) continue;
    const std::string& env = opt->get_envname();
    if (!env.empty() && std::getenv(env.c_str()) != nullptr) continue;
    for (const auto& v : item.inputs) injected.push_back(flag + "=" + v);
  }
  args.insert(args.begin() + static_cast<std::ptrdiff_t>(sub_pos) + 1, injected.begin(), injected.end());
  return args;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"CoRML recommender: split data, train ease | gfcf | corml, evaluate, recommend, analyze"};
  app.footer(kEnvHelp);
  app.require_subcommand(1);
  int threads = 0;
  add(&app, "--threads", threads, "Worker threads (0 = available parallelism)");

  SplitArgs sa;
  auto* split_cmd = app.add_subcommand("split", "Split a user<TAB>item interaction file");
  add_config_option(split_cmd);
  add(split_cmd, "--input", sa.input, "Interaction file")->required();
  add(split_cmd, "--out", sa.out, "Output directory")->required();
  add(split_cmd, "--train-ratio", sa.train_ratio, "Train share")->capture_default_str();
  add(split_cmd, "--valid-ratio", sa.valid_ratio, "Validation share")->capture_default_str();
  add(split_cmd, "--test-ratio", sa.test_ratio, "Test share")->capture_default_str();
  add(split_cmd, "--seed", sa.seed, "Shuffle seed")->capture_default_str();
  add(split_cmd, "--min-degree", sa.min_degree, "Drop users with fewer interactions")->capture_default_str();
  add(split_cmd, "--split-mode", sa.mode, "per-user or global")->capture_default_str();

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "Fit a model on a split directory");
  add_config_option(train_cmd);
  add(train_cmd, "--data", ta.data, "Split directory")->required();
  add(train_cmd, "--model", ta.model, "ease, gfcf or corml")->capture_default_str();
  add(train_cmd, "--out", ta.out, "Model file")->required();
  add(train_cmd, "--log", ta.log, "Training log (default: <out>.log.tsv)");
  add(train_cmd, "--t", ta.hp.t, "Normalization strength t")->capture_default_str();
  add(train_cmd, "--tu", ta.hp.t_u, "User-degree exponent")->capture_default_str();
  add(train_cmd, "--eps", ta.hp.epsilon, "Ranking-weight scale")->capture_default_str();
  add(train_cmd, "--theta", ta.hp.theta, "L2 strength (also the EASE regularizer)")->capture_default_str();
  add(train_cmd, "--lambda", ta.hp.lambda, "Weight of the learned branch")->capture_default_str();
  add(train_cmd, "--rank", ta.hp.rank, "SVD rank")->capture_default_str();
  add(train_cmd, "--rho", ta.hp.rho, "ADMM penalty")->capture_default_str();
  add(train_cmd, "--iters", ta.hp.max_iters, "ADMM iteration cap")->capture_default_str();
  add(train_cmd, "--tol", ta.hp.tol, "ADMM residual tolerance")->capture_default_str();
  add(train_cmd, "--seed", ta.hp.seed, "SVD seed")->capture_default_str();
  add(train_cmd, "--power-iters", ta.hp.power_iters, "SVD power iterations")->capture_default_str();
  add(train_cmd, "--weights", ta.weights, "ADMM penalty weights: degree or uniform")->capture_default_str();
  add(train_cmd, "--nnz-budget", ta.nnz_budget, "Stored weights kept (default 32 x (users + items))");
  add(train_cmd, "--filter", ta.filter, "Filter matrix at scoring time: auto, dense or sparse")
      ->capture_default_str();

  EvalArgs ea;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate one or more models");
  eval_cmd->footer(kEvalFieldsHelp);
  add_config_option(eval_cmd);
  add(eval_cmd, "--data", ea.data, "Split directory")->required();
  add(eval_cmd, "--model", ea.models, "Model file (repeatable)")->required();
  add(eval_cmd, "--k", ea.ks, "Cutoffs")->delimiter(',')->capture_default_str();
  add(eval_cmd, "--mode", ea.mode, "valid or test")->capture_default_str();
  eval_cmd->add_flag("--no-exclude-valid", ea.no_exclude_valid,
                     "Keep validation items as test-time candidates")
      ->envname("CORML_NO_EXCLUDE_VALID");
  eval_cmd->add_flag("--per-user", ea.per_user, "Include per-user values")->envname("CORML_PER_USER");
  add(eval_cmd, "--out-dir", ea.out_dir, "Write <model>.report.tsv/.json (and comparison.tsv) here");

  RecommendArgs ra;
  auto* rec_cmd = app.add_subcommand("recommend", "Top-K items for given users");
  add_config_option(rec_cmd);
  add(rec_cmd, "--data", ra.data, "Split directory")->required();
  add(rec_cmd, "--model", ra.model, "Model file")->required();
  add(rec_cmd, "--user", ra.users, "User token (repeatable)")->required();
  add(rec_cmd, "--k", ra.k, "List length")->capture_default_str();

  AnalyzeArgs aa;
  auto* an_cmd = app.add_subcommand("analyze", "Metric geometry report for a corml model");
  add_config_option(an_cmd);
  add(an_cmd, "--data", aa.data, "Split directory")->required();
  add(an_cmd, "--model", aa.model, "Model file")->required();
  add(an_cmd, "--samples", aa.samples, "Sampled (user, item, item) triples")->capture_default_str();
  add(an_cmd, "--seed", aa.seed, "Sampling seed")->capture_default_str();
  add(an_cmd, "--out", aa.out, "Report file (default: stdout)");

  try {
    std::vector<std::string> args;
    try {
      args = expand_config(app, argc, argv);
    } catch (const UsageError& e) {
      err << "usage error: " << e.what() << '\n';
      return kExitUsage;
    }
    std::vector<const char*> expanded;
    for (const auto& a : args) expanded.push_back(a.c_str());
    app.parse(static_cast<int>(expanded.size()), expanded.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (threads < 0) throw UsageError("--threads must be nonnegative");
    if (threads > 0) kernels::set_threads(threads);
    if (*split_cmd) return cmd_split(sa, out, err);
    if (*train_cmd) return cmd_train(ta, out, err);
    if (*eval_cmd) return cmd_eval(ea, out, err);
    if (*rec_cmd) return cmd_recommend(ra, out, err);
    if (*an_cmd) return cmd_analyze(aa, out, err);
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    err << "io error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
}

}  // namespace corml
