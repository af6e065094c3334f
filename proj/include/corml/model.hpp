#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>

#include "corml/signal.hpp"
#include "corml/solver.hpp"
#include "corml/sparse.hpp"

namespace corml {

enum class ModelKind : std::uint8_t { ease = 0, gfcf = 1, corml = 2 };

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& name);

/// How the filter matrix G is materialized at load time.
enum class FilterPolicy : std::uint8_t { dense = 0, sparse = 1 };

/// A fitted recommender in deployable form. For `corml` the item weights are
/// the learned hollow symmetric nonnegative H; for `ease` they hold C and the
/// score reduces to R C; for `gfcf` only the filter factor is used.
struct Model {
  ModelKind kind = ModelKind::corml;
  CoRMLHyperparams hp;
  SparseSquareMatrix weights;
  GraphFilterFactor filter;
  Vector item_degrees;
  Vector user_degrees;
  FilterPolicy filter_policy = FilterPolicy::dense;
  std::uint64_t nnz_budget = 0;

  Index n_items() const { return static_cast<Index>(item_degrees.size()); }
  Index n_users() const { return static_cast<Index>(user_degrees.size()); }
};

/// Anything that produces one dense score row per user.
class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual Index n_items() const = 0;
  virtual void score_user(Index user, std::span<double> out) const = 0;
};

/// Scores users of a fitted model from their training interactions.
class ModelScorer final : public Scorer {
 public:
  /// Throws DimensionError when `train` does not match the model's shape.
  ModelScorer(const Model& model, const InteractionMatrix& train);

  Index n_items() const override { return model_.n_items(); }
  void score_user(Index user, std::span<double> out) const override;

  const FilterMatrix& filter_matrix() const { return g_; }

 private:
  const Model& model_;
  const InteractionMatrix& train_;
  FilterMatrix g_;
  Vector h_in_, h_out_, g_in_, g_out_;
};

}  // namespace corml
