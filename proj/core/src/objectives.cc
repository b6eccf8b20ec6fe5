#include "zeroforge/objectives.h"

#include <algorithm>
#include <cmath>

#include "zeroforge/errors.h"

namespace zeroforge {

void ObjectiveParams::Validate() const {
  if (!(lambda_c >= 0.0) || !std::isfinite(lambda_c)) throw ParameterError("loss.lambda_c must be a nonnegative number");
  if (!(tau > 0.0) || !std::isfinite(tau)) throw ParameterError("loss.tau must be positive");
  if (views_per_query < 1) throw ParameterError("loss.views_per_query must be >= 1");
}

namespace {

void CheckPair(const EmbeddingBatch& images, const EmbeddingBatch& texts) {
  if (images.rows() != texts.rows() || images.width() != texts.width())
    throw ShapeError("image and text embedding batches differ in shape");
  if (!images.RowsAreUnit() || !texts.RowsAreUnit())
    throw DomainError("loss inputs must be L2-normalized embeddings");
}

}  // namespace

double SimilarityLoss(const EmbeddingBatch& images, const EmbeddingBatch& texts, EmbeddingBatch* grad_images) {
  CheckPair(images, texts);
  const int b = images.rows();
  double sum = 0.0;
  for (int i = 0; i < b; ++i) sum += Dot(images.row(i), texts.row(i));
  if (grad_images) {
    *grad_images = EmbeddingBatch(b, images.width());
    for (int i = 0; i < b; ++i)
      for (int k = 0; k < images.width(); ++k) grad_images->at(i, k) = -texts.at(i, k) / b;
  }
  return -sum / b;
}

double ContrastiveLoss(const EmbeddingBatch& images, const EmbeddingBatch& texts, double tau,
                       EmbeddingBatch* grad_images) {
  if (!(tau > 0.0)) throw ParameterError("contrastive temperature tau must be positive");
  CheckPair(images, texts);
  const int b = images.rows(), h = images.width();
  if (grad_images) *grad_images = EmbeddingBatch(b, h);
  std::vector<double> logits(b);
  double total = 0.0;
  for (int i = 0; i < b; ++i) {
    for (int j = 0; j < b; ++j) logits[j] = tau * Dot(images.row(j), texts.row(i));
    const double m = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (int j = 0; j < b; ++j) z += std::exp(logits[j] - m);
    const double lse = m + std::log(z);
    total += lse - logits[i];
    if (grad_images) {
      for (int j = 0; j < b; ++j) {
        const double p = std::exp(logits[j] - lse);
        const double coeff = tau * (p - (i == j ? 1.0 : 0.0)) / b;
        for (int k = 0; k < h; ++k) grad_images->at(j, k) += coeff * texts.at(i, k);
      }
    }
  }
  return total / b;
}

LossBreakdown TotalLoss(std::span<const EmbeddingBatch> views, std::span<const EmbeddingBatch> texts,
                        const ObjectiveParams& params, std::vector<EmbeddingBatch>* grads) {
  params.Validate();
  if (views.empty() || views.size() != texts.size()) throw ShapeError("need one text batch per view");
  const double nv = static_cast<double>(views.size());
  LossBreakdown out;
  out.per_query_sim.assign(views[0].rows(), 0.0);
  if (grads) grads->clear();
  for (size_t v = 0; v < views.size(); ++v) {
    EmbeddingBatch gs, gc;
    out.sim += SimilarityLoss(views[v], texts[v], grads ? &gs : nullptr) / nv;
    out.contrast += ContrastiveLoss(views[v], texts[v], params.tau, grads ? &gc : nullptr) / nv;
    if (views[v].rows() == static_cast<int>(out.per_query_sim.size()))
      for (int i = 0; i < views[v].rows(); ++i) out.per_query_sim[i] += Dot(views[v].row(i), texts[v].row(i)) / nv;
    if (grads) {
      EmbeddingBatch g(views[v].rows(), views[v].width());
      for (size_t k = 0; k < g.values().size(); ++k)
        g.mutable_values()[k] = (gs.values()[k] + params.lambda_c * gc.values()[k]) / nv;
      grads->push_back(std::move(g));
    }
  }
  out.total = out.sim + params.lambda_c * out.contrast;
  return out;
}

LossBreakdown TotalLoss(const EmbeddingBatch& images, const EmbeddingBatch& texts, const ObjectiveParams& params,
                        EmbeddingBatch* grad_images) {
  std::vector<EmbeddingBatch> grads;
  LossBreakdown b = TotalLoss(std::span<const EmbeddingBatch>(&images, 1), std::span<const EmbeddingBatch>(&texts, 1),
                              params, grad_images ? &grads : nullptr);
  if (grad_images) *grad_images = std::move(grads[0]);
  return b;
}

}  // namespace zeroforge
