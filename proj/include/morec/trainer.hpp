#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "morec/backbone.hpp"
#include "morec/coordinator.hpp"
#include "morec/dataset.hpp"
#include "morec/metrics.hpp"
#include "morec/objectives.hpp"
#include "morec/sampler.hpp"

namespace morec {

enum class CoordinatorMode { pi, static_weights };

struct TrainConfig {
    // backbone
    int dim = 64;
    bool use_bias = true;
    double init_std = 0.1;
    double learning_rate = 0.001;
    double weight_decay = 0.0;
    LossMode loss_mode = LossMode::bpr;
    int n_negatives = 10;

    // loop
    int batch_size = 512;
    int max_epochs = 30;
    int patience = 5;
    std::uint64_t seed = 42;
    int eval_k = 10;

    // objectives; accuracy must appear exactly once
    std::vector<Objective> objectives = {Objective::accuracy};
    CoordinatorMode mode = CoordinatorMode::pi;
    PreferenceVector pref;            // non-accuracy preferences (pi mode)
    std::vector<double> rho_full;     // full weights, accuracy first (static mode)

    // coordinator
    double kp = 0.01;
    double ki = 0.001;
    double alpha_min = 0.1;
    std::optional<double> target_loss;  // nullopt -> resolve from pretrain ("auto")
    double target_scale = 1.0;          // multiplier applied to the auto target

    // sampler
    double alpha_step = 0.1;
    double weight_floor = 1e-4;
};

void validate_train_config(const TrainConfig& cfg);

// Canonical objective order used everywhere: accuracy first, then the
// remaining objectives in their configured order.
std::vector<Objective> canonical_objectives(const TrainConfig& cfg);

struct AlphaTraceRow {
    std::int64_t step = 0;
    double err = 0.0;
    double err_sum = 0.0;
    double alpha_acc = 0.0;
};

struct EpochRecord {
    int epoch = 0;
    double mean_acc_loss = 0.0;
    double mean_combined_loss = 0.0;
    double mean_alpha_acc = 0.0;
    std::map<std::string, double> objective_losses;  // epoch means, non-accuracy
    EvalReport valid_report;
    double valid_imp = 0.0;
    std::map<std::string, std::string> weight_tables;  // objective -> JSON snapshot

    std::string to_json() const;
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;
    std::vector<AlphaTraceRow> alpha_trace;
    std::vector<double> step_acc_loss;  // per optimizer step
};

struct PretrainResult {
    MfModel model;
    double converged_loss = 0.0;  // epoch-mean train loss of the kept checkpoint
    int best_epoch = 0;
    TrainHistory history;
};

// Accuracy-only training with uniform sampling; early stopping on validation
// Hit@k, returning the best-validation checkpoint.
PretrainResult pretrain(MfModel model, const InteractionDataset& dataset,
                        const ItemCatalog& catalog, const TrainConfig& cfg);

struct ContinualResult {
    MfModel model;  // best checkpoint by validation Imp
    TrainHistory history;
    EvalReport base_valid;
    double best_valid_imp = 0.0;
    int best_epoch = 0;
};

// Tri-level continual training: per-objective batches each step, PI (or
// static) loss synthesis, one optimizer step on the combined gradient, and
// validation-set signed-gradient weight updates after each epoch.
ContinualResult continual_train(MfModel model, const InteractionDataset& dataset,
                                const ItemCatalog& catalog, const TrainConfig& cfg,
                                double target_loss);

// Imp that skips metrics whose base value is zero; used only for early
// stopping, where a degenerate base must not abort the run.
double imp_for_stopping(const EvalReport& base, const EvalReport& solution);

}  // namespace morec
