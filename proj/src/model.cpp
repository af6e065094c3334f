#include "corml/model.hpp"

#include <algorithm>

#include "corml/error.hpp"

namespace corml {

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::ease: return "ease";
    case ModelKind::gfcf: return "gfcf";
    case ModelKind::corml: return "corml";
  }
  return "unknown";
}

ModelKind parse_model_kind(const std::string& name) {
  if (name == "ease") return ModelKind::ease;
  if (name == "gfcf") return ModelKind::gfcf;
  if (name == "corml") return ModelKind::corml;
  throw UsageError("unknown model '" + name + "' (expected ease, gfcf or corml)");
}

ModelScorer::ModelScorer(const Model& model, const InteractionMatrix& train)
    : model_(model), train_(train) {
  if (train.n_items() != model.n_items() || train.n_users() != model.n_users()) {
    throw DimensionError("model and interaction matrix disagree on dimensions");
  }
  if (model.weights.n() != 0 && model.weights.n() != model.n_items()) {
    throw DimensionError("model weight matrix has the wrong size");
  }
  const Vector& d = model.item_degrees;
  if (model.kind == ModelKind::corml) {
    h_in_ = degree_power(d, -model.hp.t);
    h_out_ = degree_power(d, model.hp.t);
    if (model.hp.lambda < 1.0) {
      g_ = model.filter_policy == FilterPolicy::dense
               ? FilterMatrix(build_G(model.filter))
               : FilterMatrix(build_G_sparse(model.filter, model.nnz_budget));
    }
  }
  g_in_ = degree_power(d, -0.5);
  g_out_ = degree_power(d, 0.5);
}

void ModelScorer::score_user(Index user, std::span<double> out) const {
  if (user >= train_.n_users()) throw DimensionError("score_user: user out of range");
  if (out.size() != n_items()) throw DimensionError("score_user: output has wrong length");
  std::fill(out.begin(), out.end(), 0.0);
  const auto items = train_.row(user);

  auto add_weight_row = [&](Index j, double coeff, std::span<double> acc) {
    const auto c = model_.weights.row_cols(j);
    const auto v = model_.weights.row_values(j);
    for (std::size_t k = 0; k < c.size(); ++k) acc[c[k]] += coeff * v[k];
  };

  switch (model_.kind) {
    case ModelKind::ease:
      if (model_.weights.n() == 0) return;
      for (Index j : items) add_weight_row(j, 1.0, out);
      return;
    case ModelKind::gfcf: {
      const DenseMatrix& v = model_.filter.v;
      Eigen::RowVectorXd z = Eigen::RowVectorXd::Zero(v.cols());
      for (Index j : items) z += g_in_[j] * v.row(j);
      for (Index i = 0; i < n_items(); ++i) out[i] = g_out_[i] * v.row(i).dot(z);
      return;
    }
    case ModelKind::corml: {
      const double lam = model_.hp.lambda;
      std::vector<double> acc_g(lam < 1.0 ? n_items() : 0, 0.0);
      for (Index j : items) {
        if (lam > 0.0 && model_.weights.n() != 0) add_weight_row(j, h_in_[j], out);
        if (lam < 1.0) g_.add_row(j, g_in_[j], acc_g);
      }
      for (Index i = 0; i < n_items(); ++i) {
        double y = lam * out[i] * h_out_[i];
        if (lam < 1.0) y += (1.0 - lam) * acc_g[i] * g_out_[i];
        out[i] = y;
      }
      return;
    }
  }
}

}  // namespace corml
