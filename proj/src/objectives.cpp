#include "morec/objectives.hpp"

#include <cmath>
#include <stdexcept>

namespace morec {

namespace {

// Weighted mean of per-sample losses with weights w_i; gradients scaled by
// grad_scale * w_i / sum(w).
double weighted_batch_loss(const MfModel& model, const InteractionDataset& dataset,
                           const TrainBatch& batch, std::span<const double> weights,
                           LossMode mode, GradientBuffer* grads, double grad_scale) {
    if (batch.train_idx.empty())
        throw std::invalid_argument("batch loss: empty batch");
    if (batch.negatives.size() != batch.train_idx.size())
        throw std::invalid_argument("batch loss: negatives missing for some samples");

    double weight_sum = 0.0;
    for (double w : weights) weight_sum += w;
    if (weight_sum <= 0.0)
        throw std::invalid_argument("batch loss: total sample weight is zero");

    double loss = 0.0;
    for (std::size_t i = 0; i < batch.train_idx.size(); ++i) {
        const Interaction& x = dataset.train[batch.train_idx[i]];
        const auto r = sample_loss(model, x.user, x.item, batch.negatives[i], mode);
        const double w = weights[i] / weight_sum;
        loss += w * r.loss;
        if (grads)
            accumulate_sample_grad(model, x.user, x.item, batch.negatives[i], r.grad,
                                   grad_scale * w, *grads);
    }
    return loss;
}

}  // namespace

double batch_objective_loss(const MfModel& model, const InteractionDataset& dataset,
                            const TrainBatch& batch, LossMode mode, GradientBuffer* grads,
                            double grad_scale) {
    const std::vector<double> uniform(batch.train_idx.size(), 1.0);
    return weighted_batch_loss(model, dataset, batch, uniform, mode, grads, grad_scale);
}

double revenue_surrogate_loss(const MfModel& model, const InteractionDataset& dataset,
                              const TrainBatch& batch, std::span<const double> prices,
                              LossMode mode, GradientBuffer* grads, double grad_scale) {
    std::vector<double> w(batch.train_idx.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < batch.train_idx.size(); ++i) {
        const double p = prices[dataset.train[batch.train_idx[i]].item];
        if (p < 0.0) throw std::invalid_argument("revenue surrogate: negative price");
        w[i] = p;
        sum += p;
    }
    if (sum <= 0.0) throw std::invalid_argument("revenue surrogate: all batch prices are zero");
    return weighted_batch_loss(model, dataset, batch, w, mode, grads, grad_scale);
}

double inverse_popularity_surrogate_loss(const MfModel& model,
                                         const InteractionDataset& dataset,
                                         const TrainBatch& batch,
                                         std::span<const std::int64_t> pop_counts, LossMode mode,
                                         GradientBuffer* grads, double grad_scale) {
    std::vector<double> w(batch.train_idx.size());
    for (std::size_t i = 0; i < batch.train_idx.size(); ++i) {
        const std::int64_t pop = pop_counts[dataset.train[batch.train_idx[i]].item];
        if (pop < 1)
            throw std::invalid_argument("inverse popularity surrogate: item popularity < 1");
        w[i] = 1.0 / static_cast<double>(pop);
    }
    return weighted_batch_loss(model, dataset, batch, w, mode, grads, grad_scale);
}

double pearson_fairness_regularizer(std::span<const double> predictions,
                                    std::span<const double> group_attr,
                                    std::span<double> grad_out) {
    const std::size_t n = predictions.size();
    if (n < 2) throw std::invalid_argument("pearson regularizer: need at least 2 samples");
    if (group_attr.size() != n)
        throw std::invalid_argument("pearson regularizer: attribute length mismatch");
    if (!grad_out.empty() && grad_out.size() != n)
        throw std::invalid_argument("pearson regularizer: gradient length mismatch");

    double mean_x = 0.0, mean_y = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mean_x += predictions[i];
        mean_y += group_attr[i];
    }
    mean_x /= static_cast<double>(n);
    mean_y /= static_cast<double>(n);

    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = predictions[i] - mean_x;
        const double dy = group_attr[i] - mean_y;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx <= 0.0 || syy <= 0.0) {
        for (double& g : grad_out) g = 0.0;
        return 0.0;  // constant predictions or a single group: trivially independent
    }

    const double denom = std::sqrt(sxx * syy);
    const double r = sxy / denom;
    const double sign = r >= 0.0 ? 1.0 : -1.0;
    if (!grad_out.empty()) {
        // d r / d x_i = ((y_i - mean_y) - (sxy / sxx) * (x_i - mean_x)) / denom
        for (std::size_t i = 0; i < n; ++i) {
            const double dx = predictions[i] - mean_x;
            const double dy = group_attr[i] - mean_y;
            grad_out[i] = sign * ((dy - (sxy / sxx) * dx) / denom);
        }
    }
    return std::abs(r);
}

double pearson_fairness_batch(const MfModel& model, const InteractionDataset& dataset,
                              const TrainBatch& batch, std::span<const int> item_categories,
                              GradientBuffer* grads, double grad_scale) {
    const std::size_t n = batch.train_idx.size();
    if (n < 2) throw std::invalid_argument("pearson batch: need at least 2 samples");
    std::vector<double> preds(n), attrs(n), dpred(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Interaction& x = dataset.train[batch.train_idx[i]];
        preds[i] = model.score(x.user, x.item);
        attrs[i] = static_cast<double>(item_categories[x.item]);
    }
    const double value = pearson_fairness_regularizer(preds, attrs, dpred);
    if (grads) {
        for (std::size_t i = 0; i < n; ++i) {
            const Interaction& x = dataset.train[batch.train_idx[i]];
            accumulate_score_grad(model, x.user, x.item, dpred[i], grad_scale, *grads);
        }
    }
    return value;
}

}  // namespace morec
