#pragma once

#include <span>
#include <vector>

#include "zeroforge/embedding.h"

namespace zeroforge {

struct ObjectiveParams {
  double lambda_c = 0.01;
  double tau = 50.0;
  int views_per_query = 3;

  void Validate() const;
};

struct LossBreakdown {
  double sim = 0.0;
  double contrast = 0.0;
  double total = 0.0;  // sim + lambda_c * contrast
  std::vector<double> per_query_sim;  // <I_i, T_i>, averaged over views
};

// -(1/B) sum_i <I_i, T_i>. Row i of `images` pairs with row i of `texts`.
// When `grad_images` is non-null it receives d loss / d I.
double SimilarityLoss(const EmbeddingBatch& images, const EmbeddingBatch& texts,
                      EmbeddingBatch* grad_images = nullptr);

// InfoNCE over images for each text:
//   -(1/B) sum_i log( exp(tau <I_i,T_i>) / sum_j exp(tau <I_j,T_i>) ).
double ContrastiveLoss(const EmbeddingBatch& images, const EmbeddingBatch& texts, double tau,
                       EmbeddingBatch* grad_images = nullptr);

// Mean over views of sim + lambda_c * contrast. views[v] and texts[v] are
// matched batches; grads (if non-null) receives one gradient per view.
LossBreakdown TotalLoss(std::span<const EmbeddingBatch> views, std::span<const EmbeddingBatch> texts,
                        const ObjectiveParams& params, std::vector<EmbeddingBatch>* grads = nullptr);

// Single-view convenience overload.
LossBreakdown TotalLoss(const EmbeddingBatch& images, const EmbeddingBatch& texts, const ObjectiveParams& params,
                        EmbeddingBatch* grad_images = nullptr);

}  // namespace zeroforge
