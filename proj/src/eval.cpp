#include "corml/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <ostream>

#include <json.hpp>

#include "corml/error.hpp"

namespace corml {

namespace {

bool contains_sorted(std::span<const Index> set, Index x) {
  return std::binary_search(set.begin(), set.end(), x);
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string format_hash(std::uint64_t h) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// Sorted union of two sorted index lists.
std::vector<Index> merge_sorted(std::span<const Index> a, std::span<const Index> b) {
  std::vector<Index> out;
  out.reserve(a.size() + b.size());
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

}  // namespace

RankedList rank_topk(std::span<const double> scores, std::span<const Index> exclude,
                     std::size_t k, Index user) {
  if (k == 0) throw UsageError("rank_topk: K must be at least 1");
  std::vector<Index> candidates;
  candidates.reserve(scores.size());
  std::size_t e = 0;
  for (Index i = 0; i < scores.size(); ++i) {
    while (e < exclude.size() && exclude[e] < i) ++e;
    if (e < exclude.size() && exclude[e] == i) continue;
    candidates.push_back(i);
  }
  auto key = [&](Index i) {
    const double s = scores[i];
    return std::isnan(s) ? -std::numeric_limits<double>::infinity() : s;
  };
  auto before = [&](Index a, Index b) {
    const double sa = key(a), sb = key(b);
    if (sa != sb) return sa > sb;
    return a < b;
  };
  RankedList out;
  out.user = user;
  out.truncated = candidates.size() < k;
  const std::size_t take = std::min(k, candidates.size());
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(take),
                    candidates.end(), before);
  out.items.assign(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(take));
  out.scores.reserve(take);
  for (Index i : out.items) out.scores.push_back(scores[i]);
  return out;
}

double ndcg_at_k(const RankedList& ranked, std::span<const Index> relevant, std::size_t k) {
  if (relevant.empty()) return 0.0;
  const std::size_t n = std::min(k, ranked.items.size());
  double dcg = 0.0;
  for (std::size_t pos = 0; pos < n; ++pos) {
    if (contains_sorted(relevant, ranked.items[pos])) dcg += 1.0 / std::log2(pos + 2.0);
  }
  double idcg = 0.0;
  const std::size_t ideal = std::min(relevant.size(), k);
  for (std::size_t pos = 0; pos < ideal; ++pos) idcg += 1.0 / std::log2(pos + 2.0);
  return dcg / idcg;
}

double mrr_at_k(const RankedList& ranked, std::span<const Index> relevant, std::size_t k) {
  const std::size_t n = std::min(k, ranked.items.size());
  for (std::size_t pos = 0; pos < n; ++pos) {
    if (contains_sorted(relevant, ranked.items[pos])) return 1.0 / static_cast<double>(pos + 1);
  }
  return 0.0;
}

double list_novelty(const RankedList& ranked, const Vector& train_item_degrees,
                    std::size_t n_users, std::size_t k, std::size_t* zero_degree_hits) {
  if (n_users < 2) throw UsageError("novelty needs at least two users");
  if (k == 0) throw UsageError("novelty: K must be at least 1");
  const double nu = static_cast<double>(n_users);
  const double log_nu = std::log2(nu);
  const std::size_t n = std::min(k, ranked.items.size());
  double sum = 0.0;
  for (std::size_t pos = 0; pos < n; ++pos) {
    const Index i = ranked.items[pos];
    if (i >= train_item_degrees.size()) throw DimensionError("novelty: item out of range");
    double d = train_item_degrees[i];
    if (d <= 0.0) {
      d = 1.0;
      if (zero_degree_hits) ++*zero_degree_hits;
    }
    sum += -std::log2(d / nu) / log_nu;
  }
  return sum / static_cast<double>(k);
}

double novelty_at_k(std::span<const RankedList> lists, const Vector& train_item_degrees,
                    std::size_t n_users, std::size_t k, std::size_t* zero_degree_hits) {
  if (lists.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& l : lists) sum += list_novelty(l, train_item_degrees, n_users, k, zero_degree_hits);
  return sum / static_cast<double>(lists.size());
}

std::string to_string(EvalMode mode) { return mode == EvalMode::valid ? "valid" : "test"; }

EvalMode parse_eval_mode(const std::string& name) {
  if (name == "valid") return EvalMode::valid;
  if (name == "test") return EvalMode::test;
  throw UsageError("unknown eval mode '" + name + "' (expected valid or test)");
}

const CutoffMetrics& EvalReport::at(std::size_t k) const {
  for (const auto& c : cutoffs) {
    if (c.k == k) return c;
  }
  throw UsageError("report has no cutoff " + std::to_string(k));
}

EvalReport evaluate(const Scorer& scorer, const SplitDataset& data, const EvalOptions& opts) {
  if (opts.ks.empty()) throw UsageError("evaluate: empty K list");
  for (std::size_t k : opts.ks) {
    if (k == 0) throw UsageError("evaluate: K must be at least 1");
  }
  const InteractionMatrix& train = data.train;
  const Index nu = train.n_users();
  const Index ni = train.n_items();
  if (scorer.n_items() != ni || data.valid.n_items() != ni || data.test.n_items() != ni ||
      data.valid.n_users() != nu || data.test.n_users() != nu) {
    throw DimensionError("evaluate: model and split disagree on dimensions");
  }
  if (nu < 2) throw UsageError("evaluate: novelty needs at least two users");
  const InteractionMatrix& target = opts.mode == EvalMode::valid ? data.valid : data.test;
  const bool drop_valid = opts.mode == EvalMode::test && opts.exclude_valid;
  const std::size_t kmax = *std::max_element(opts.ks.begin(), opts.ks.end());
  const std::size_t nk = opts.ks.size();
  const Vector& degrees = train.item_degrees();

  std::vector<UserMetrics> users(nu);
  std::vector<char> evaluated(nu, 0), truncated(nu, 0);
  std::vector<std::size_t> zero_hits(nu, 0);
  std::exception_ptr failure;

#pragma omp parallel
  {
    std::vector<double> buf(ni);
#pragma omp for schedule(dynamic, 16)
    for (std::int64_t uu = 0; uu < static_cast<std::int64_t>(nu); ++uu) {
      const auto u = static_cast<Index>(uu);
      const auto relevant = target.row(u);
      users[u].user = u;
      if (relevant.empty()) continue;
      try {
        scorer.score_user(u, buf);
      } catch (...) {
#pragma omp critical
        if (!failure) failure = std::current_exception();
        continue;
      }
      const auto exclude = drop_valid ? merge_sorted(train.row(u), data.valid.row(u))
                                      : std::vector<Index>(train.row(u).begin(), train.row(u).end());
      const RankedList ranked = rank_topk(buf, exclude, kmax, u);
      evaluated[u] = 1;
      truncated[u] = ranked.truncated;
      users[u].at.resize(nk);
      for (std::size_t c = 0; c < nk; ++c) {
        const std::size_t k = opts.ks[c];
        std::size_t* hits = k == kmax ? &zero_hits[u] : nullptr;
        users[u].at[c] = {k, ndcg_at_k(ranked, relevant, k), mrr_at_k(ranked, relevant, k),
                          list_novelty(ranked, degrees, nu, k, hits)};
      }
    }
  }

  if (failure) std::rethrow_exception(failure);

  EvalReport report;
  report.mode = opts.mode;
  report.exclude_valid = opts.exclude_valid;
  report.cutoffs.resize(nk);
  for (std::size_t c = 0; c < nk; ++c) report.cutoffs[c].k = opts.ks[c];
  for (Index u = 0; u < nu; ++u) {
    if (!evaluated[u]) {
      ++report.users_skipped;
      continue;
    }
    ++report.users_evaluated;
    report.truncated_lists += truncated[u] ? 1 : 0;
    report.zero_degree_hits += zero_hits[u];
    for (std::size_t c = 0; c < nk; ++c) {
      report.cutoffs[c].ndcg += users[u].at[c].ndcg;
      report.cutoffs[c].mrr += users[u].at[c].mrr;
      report.cutoffs[c].novelty += users[u].at[c].novelty;
    }
    if (opts.keep_per_user) report.per_user.push_back(std::move(users[u]));
  }
  if (report.users_evaluated > 0) {
    const double n = static_cast<double>(report.users_evaluated);
    for (auto& c : report.cutoffs) {
      c.ndcg /= n;
      c.mrr /= n;
      c.novelty /= n;
    }
  }
  return report;
}

void write_report_text(const EvalReport& r, std::ostream& out) {
  out << "model\t" << r.model_name << '\n';
  for (const auto& [key, value] : r.config) out << "config." << key << '\t' << value << '\n';
  out << "mode\t" << to_string(r.mode) << '\n';
  out << "exclude_valid\t" << (r.exclude_valid ? "true" : "false") << '\n';
  out << "dataset_hash\t" << format_hash(r.dataset_hash) << '\n';
  out << "model_hash\t" << format_hash(r.model_hash) << '\n';
  out << "users_evaluated\t" << r.users_evaluated << '\n';
  out << "users_skipped\t" << r.users_skipped << '\n';
  out << "truncated_lists\t" << r.truncated_lists << '\n';
  out << "zero_degree_hits\t" << r.zero_degree_hits << '\n';
  for (const auto& c : r.cutoffs) {
    out << "ndcg@" << c.k << '\t' << format_double(c.ndcg) << '\n';
    out << "mrr@" << c.k << '\t' << format_double(c.mrr) << '\n';
    out << "novelty@" << c.k << '\t' << format_double(c.novelty) << '\n';
  }
  for (const auto& u : r.per_user) {
    for (const auto& c : u.at) {
      out << "user." << u.user << ".ndcg@" << c.k << '\t' << format_double(c.ndcg) << '\n';
      out << "user." << u.user << ".mrr@" << c.k << '\t' << format_double(c.mrr) << '\n';
      out << "user." << u.user << ".novelty@" << c.k << '\t' << format_double(c.novelty) << '\n';
    }
  }
}

std::string report_json(const EvalReport& r) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["model"] = r.model_name;
  ordered_json cfg = ordered_json::object();
  for (const auto& [key, value] : r.config) cfg[key] = value;
  j["config"] = cfg;
  j["mode"] = to_string(r.mode);
  j["exclude_valid"] = r.exclude_valid;
  j["dataset_hash"] = format_hash(r.dataset_hash);
  j["model_hash"] = format_hash(r.model_hash);
  j["users_evaluated"] = r.users_evaluated;
  j["users_skipped"] = r.users_skipped;
  j["truncated_lists"] = r.truncated_lists;
  j["zero_degree_hits"] = r.zero_degree_hits;
  ordered_json metrics = ordered_json::array();
  for (const auto& c : r.cutoffs) {
    metrics.push_back({{"k", c.k}, {"ndcg", c.ndcg}, {"mrr", c.mrr}, {"novelty", c.novelty}});
  }
  j["metrics"] = metrics;
  if (!r.per_user.empty()) {
    ordered_json users = ordered_json::array();
    for (const auto& u : r.per_user) {
      ordered_json at = ordered_json::array();
      for (const auto& c : u.at) {
        at.push_back({{"k", c.k}, {"ndcg", c.ndcg}, {"mrr", c.mrr}, {"novelty", c.novelty}});
      }
      users.push_back({{"user", u.user}, {"metrics", at}});
    }
    j["per_user"] = users;
  }
  return j.dump(2) + "\n";
}

void PopularityScorer::score_user(Index, std::span<double> out) const {
  if (out.size() != static_cast<std::size_t>(degrees_.size())) {
    throw DimensionError("score_user: output has wrong length");
  }
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = degrees_[static_cast<Eigen::Index>(i)];
}

void MatrixScorer::score_user(Index user, std::span<double> out) const {
  if (user >= scores_.rows()) throw DimensionError("score_user: user out of range");
  if (out.size() != static_cast<std::size_t>(scores_.cols())) {
    throw DimensionError("score_user: output has wrong length");
  }
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = scores_(user, static_cast<Eigen::Index>(i));
}

}  // namespace corml
