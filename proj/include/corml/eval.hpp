#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "corml/dataio.hpp"
#include "corml/model.hpp"

namespace corml {

struct RankedList {
  Index user = 0;
  std::vector<Index> items;
  std::vector<double> scores;
  bool truncated = false;  // fewer than K candidates were available
};

/// Top-K items by descending score among items not in `exclude` (sorted
/// ascending). Ties go to the smaller item index; NaN ranks last.
/// Throws UsageError for k == 0.
RankedList rank_topk(std::span<const double> scores, std::span<const Index> exclude,
                     std::size_t k, Index user = 0);

/// `relevant` must be sorted ascending. Positions beyond k are ignored.
double ndcg_at_k(const RankedList& ranked, std::span<const Index> relevant, std::size_t k);
double mrr_at_k(const RankedList& ranked, std::span<const Index> relevant, std::size_t k);

/// Per-list novelty (1/K) sum_i -log2(d_i/|U|) / log2|U|. Items with degree 0
/// are counted as degree 1 and tallied in `zero_degree_hits`.
/// Throws UsageError when n_users < 2.
double list_novelty(const RankedList& ranked, const Vector& train_item_degrees,
                    std::size_t n_users, std::size_t k, std::size_t* zero_degree_hits = nullptr);
/// Mean of list_novelty over `lists`; 0 for an empty set.
double novelty_at_k(std::span<const RankedList> lists, const Vector& train_item_degrees,
                    std::size_t n_users, std::size_t k, std::size_t* zero_degree_hits = nullptr);

enum class EvalMode { valid, test };
std::string to_string(EvalMode mode);
EvalMode parse_eval_mode(const std::string& name);

struct EvalOptions {
  std::vector<std::size_t> ks{5, 10, 20};
  EvalMode mode = EvalMode::test;
  bool exclude_valid = true;  // test mode only
  bool keep_per_user = false;
};

struct CutoffMetrics {
  std::size_t k = 0;
  double ndcg = 0.0;
  double mrr = 0.0;
  double novelty = 0.0;
};

struct UserMetrics {
  Index user = 0;
  std::vector<CutoffMetrics> at;  // parallel to EvalReport::cutoffs
};

struct EvalReport {
  std::string model_name;
  EvalMode mode = EvalMode::test;
  bool exclude_valid = true;
  std::vector<CutoffMetrics> cutoffs;
  std::size_t users_evaluated = 0;
  std::size_t users_skipped = 0;     // empty relevance set
  std::size_t truncated_lists = 0;   // fewer than max K candidates
  std::size_t zero_degree_hits = 0;  // recommended items absent from train
  std::uint64_t dataset_hash = 0;
  std::uint64_t model_hash = 0;
  std::vector<std::pair<std::string, std::string>> config;  // echoed verbatim
  std::vector<UserMetrics> per_user;

  const CutoffMetrics& at(std::size_t k) const;
};

/// Scores every train user, ranks with train items (and valid items in test
/// mode, if requested) excluded, and averages metrics over users with a
/// nonempty relevance set. Users run in parallel; sums are taken in user order.
EvalReport evaluate(const Scorer& scorer, const SplitDataset& data, const EvalOptions& opts);

/// Text form, one `key<TAB>value` line per field.
void write_report_text(const EvalReport& report, std::ostream& out);
/// JSON form with the same keys nested.
std::string report_json(const EvalReport& report);

/// Scores every item by its training degree.
class PopularityScorer final : public Scorer {
 public:
  explicit PopularityScorer(const InteractionMatrix& train) : degrees_(train.item_degrees()) {}
  Index n_items() const override { return static_cast<Index>(degrees_.size()); }
  void score_user(Index user, std::span<double> out) const override;

 private:
  Vector degrees_;
};

/// Serves rows of a precomputed users x items score matrix.
class MatrixScorer final : public Scorer {
 public:
  explicit MatrixScorer(DenseMatrix scores) : scores_(std::move(scores)) {}
  Index n_items() const override { return static_cast<Index>(scores_.cols()); }
  void score_user(Index user, std::span<double> out) const override;

 private:
  DenseMatrix scores_;
};

}  // namespace corml
