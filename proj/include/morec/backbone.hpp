#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace morec {

// Dot-product matrix factorization with an optional per-item bias.
struct MfModel {
    int n_users = 0;
    int n_items = 0;
    int dim = 0;
    bool use_bias = true;
    std::vector<double> user_emb;  // row-major n_users x dim
    std::vector<double> item_emb;  // row-major n_items x dim
    std::vector<double> item_bias;

    double score(int user, int item) const;
    const double* user_row(int user) const { return user_emb.data() + static_cast<std::size_t>(user) * dim; }
    const double* item_row(int item) const { return item_emb.data() + static_cast<std::size_t>(item) * dim; }
};

MfModel make_model(int n_users, int n_items, int dim, bool use_bias, double init_std,
                   std::uint64_t seed);

enum class LossMode { bpr, bce };

// dL/ds for the positive and each negative score of one sample.
struct SampleGrad {
    double d_pos = 0.0;
    std::vector<double> d_neg;
};

struct SampleLossResult {
    double loss = 0.0;
    SampleGrad grad;
};

// BPR: mean over negatives of -ln sigmoid(s_pos - s_neg).
// BCE: (-ln sigmoid(s_pos) - sum_neg ln(1 - sigmoid(s_neg))) / (1 + #neg).
// Probabilities are clamped to [1e-7, 1 - 1e-7] before the log.
SampleLossResult sample_loss(const MfModel& model, int user, int pos_item,
                             std::span<const int> negatives, LossMode mode);

// Popularity-proportional sampler over train counts.
class NegativeSampler {
public:
    explicit NegativeSampler(const std::vector<std::int64_t>& pop_counts);
    std::vector<int> sample(int n, std::span<const int> exclude, std::mt19937_64& g) const;

private:
    std::vector<double> cumulative_;
    std::vector<std::int64_t> counts_;
    double total_ = 0.0;
};

std::vector<int> sample_negatives(const std::vector<std::int64_t>& pop_counts, int n,
                                  std::span<const int> exclude, std::mt19937_64& g);

// Dense gradient buffer matching the model's parameter shapes.
struct GradientBuffer {
    std::vector<double> user_emb;
    std::vector<double> item_emb;
    std::vector<double> item_bias;

    void resize_like(const MfModel& model);
    void clear();
};

// Scatter one sample's score-space gradients into parameter space.
void accumulate_sample_grad(const MfModel& model, int user, int pos_item,
                            std::span<const int> negatives, const SampleGrad& grad,
                            double scale, GradientBuffer& out);

// d(loss)/d(score) contribution for a single (user, item) prediction.
void accumulate_score_grad(const MfModel& model, int user, int item, double d_score,
                           double scale, GradientBuffer& out);

// Adaptive-moment optimizer state (bias-corrected update).
struct AdamState {
    double learning_rate = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 0.0;
    std::int64_t step = 0;
    std::vector<double> m_user, v_user, m_item, v_item, m_bias, v_bias;

    void resize_like(const MfModel& model);
};

void apply_gradients(MfModel& model, AdamState& opt, const GradientBuffer& grads);

// k highest-scoring items outside `exclude_sorted`, descending score,
// ties broken by ascending item index.
std::vector<int> topk_recommend(const MfModel& model, int user, int k,
                                std::span<const int> exclude_sorted);

void save_checkpoint(const std::string& path, const MfModel& model, std::uint64_t config_digest);
MfModel load_checkpoint(const std::string& path, std::uint64_t* config_digest = nullptr);

}  // namespace morec
