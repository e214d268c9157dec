#pragma once

#include <span>
#include <vector>

#include "morec/backbone.hpp"
#include "morec/dataset.hpp"

namespace morec {

// One mini-batch of positives (train indices) with per-sample negatives.
struct TrainBatch {
    std::vector<int> train_idx;
    std::vector<std::vector<int>> negatives;
};

// Mean sample loss over the batch. The objective identity lives in how the
// batch was sampled, not in the loss function. Gradients (scaled by
// grad_scale / batch size) are accumulated into `grads` when non-null.
double batch_objective_loss(const MfModel& model, const InteractionDataset& dataset,
                            const TrainBatch& batch, LossMode mode, GradientBuffer* grads,
                            double grad_scale = 1.0);

// Price-weighted mean: sum r(e) * loss(u,e) / sum r(e).
double revenue_surrogate_loss(const MfModel& model, const InteractionDataset& dataset,
                              const TrainBatch& batch, std::span<const double> prices,
                              LossMode mode, GradientBuffer* grads, double grad_scale = 1.0);

// Inverse-popularity-weighted mean: sum loss / pop(e) / sum 1 / pop(e).
double inverse_popularity_surrogate_loss(const MfModel& model,
                                         const InteractionDataset& dataset,
                                         const TrainBatch& batch,
                                         std::span<const std::int64_t> pop_counts, LossMode mode,
                                         GradientBuffer* grads, double grad_scale = 1.0);

// |Pearson correlation| between predictions and a numeric group attribute.
// Returns 0 with zero gradient when either standard deviation vanishes.
// When grad_out is non-empty it receives d|r|/d prediction_i.
double pearson_fairness_regularizer(std::span<const double> predictions,
                                    std::span<const double> group_attr,
                                    std::span<double> grad_out = {});

// Pearson regularizer evaluated on the batch positives' scores against their
// item-category attribute, with gradients chained into the model parameters.
double pearson_fairness_batch(const MfModel& model, const InteractionDataset& dataset,
                              const TrainBatch& batch, std::span<const int> item_categories,
                              GradientBuffer* grads, double grad_scale = 1.0);

}  // namespace morec
