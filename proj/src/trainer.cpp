#include "morec/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <json.hpp>

#include "morec/rng.hpp"

namespace morec {

void validate_train_config(const TrainConfig& cfg) {
    if (cfg.dim < 1) throw std::invalid_argument("config: dim must be >= 1");
    if (cfg.batch_size < 1) throw std::invalid_argument("config: batch_size must be >= 1");
    if (cfg.patience < 1) throw std::invalid_argument("config: patience must be >= 1");
    if (cfg.max_epochs < 1) throw std::invalid_argument("config: max_epochs must be >= 1");
    if (cfg.n_negatives < 1) throw std::invalid_argument("config: n_negatives must be >= 1");
    if (cfg.eval_k < 1) throw std::invalid_argument("config: eval_k must be >= 1");
    if (cfg.kp < 0 || cfg.ki < 0 || cfg.alpha_min < 0)
        throw std::invalid_argument("config: controller gains must be non-negative");

    int n_acc = 0;
    for (std::size_t i = 0; i < cfg.objectives.size(); ++i) {
        if (cfg.objectives[i] == Objective::accuracy) ++n_acc;
        for (std::size_t j = i + 1; j < cfg.objectives.size(); ++j)
            if (cfg.objectives[i] == cfg.objectives[j])
                throw std::invalid_argument("config: duplicate objective");
    }
    if (n_acc != 1)
        throw std::invalid_argument("config: exactly one accuracy objective must be active");

    if (cfg.mode == CoordinatorMode::pi) {
        if (cfg.pref.rho.size() != cfg.objectives.size() - 1)
            throw std::invalid_argument("config: rho length must match non-accuracy objectives");
        cfg.pref.validate();
    } else {
        if (cfg.rho_full.size() != cfg.objectives.size())
            throw std::invalid_argument("config: rho_full length must match objectives");
        for (double r : cfg.rho_full)
            if (!(r >= 0.0)) throw std::invalid_argument("config: rho_full must be non-negative");
    }
}

std::vector<Objective> canonical_objectives(const TrainConfig& cfg) {
    std::vector<Objective> out = {Objective::accuracy};
    for (Objective o : cfg.objectives)
        if (o != Objective::accuracy) out.push_back(o);
    return out;
}

std::string EpochRecord::to_json() const {
    nlohmann::json j;
    j["epoch"] = epoch;
    j["mean_acc_loss"] = mean_acc_loss;
    j["mean_combined_loss"] = mean_combined_loss;
    j["mean_alpha_acc"] = mean_alpha_acc;
    j["objective_losses"] = objective_losses;
    j["valid"] = nlohmann::json::parse(valid_report.to_json());
    j["valid_imp"] = valid_imp;
    nlohmann::json w = nlohmann::json::object();
    for (const auto& [name, snapshot] : weight_tables) w[name] = nlohmann::json::parse(snapshot);
    j["weight_tables"] = std::move(w);
    return j.dump();
}

double imp_for_stopping(const EvalReport& base, const EvalReport& solution) {
    double total = 0.0;
    int terms = 0;
    if (base.hit > 0.0) {
        total += (solution.hit - base.hit) / base.hit;
        ++terms;
    }
    if (base.rhit > 0.0) {
        total += (solution.rhit - base.rhit) / base.rhit;
        ++terms;
    }
    if (base.pop_kl > 0.0) {
        total += (base.pop_kl - solution.pop_kl) / base.pop_kl;
        ++terms;
    }
    if (base.min_hit > 0.0) {
        total += (solution.min_hit - base.min_hit) / base.min_hit;
        ++terms;
    }
    return terms > 0 ? 100.0 * total / static_cast<double>(terms) : 0.0;
}

namespace {

struct SampleEval {
    int train_idx = 0;
    std::vector<int> negatives;
    SampleLossResult result;
};

// Draw a batch from `table`, evaluate per-sample losses, and return them
// without touching gradients yet; the caller decides the gradient scale.
std::vector<SampleEval> eval_batch(const MfModel& model, const InteractionDataset& dataset,
                                   const GroupWeightTable& table, const NegativeSampler& negs,
                                   const TrainConfig& cfg, std::mt19937_64& g_sampler,
                                   std::mt19937_64& g_negatives) {
    std::vector<SampleEval> out;
    out.reserve(cfg.batch_size);
    for (int idx : draw_batch(table, cfg.batch_size, g_sampler)) {
        SampleEval s;
        s.train_idx = idx;
        const Interaction& x = dataset.train[idx];
        const int exclude[1] = {x.item};
        s.negatives = negs.sample(cfg.n_negatives, exclude, g_negatives);
        s.result = sample_loss(model, x.user, x.item, s.negatives, cfg.loss_mode);
        out.push_back(std::move(s));
    }
    return out;
}

double mean_loss(const std::vector<SampleEval>& batch) {
    double total = 0.0;
    for (const SampleEval& s : batch) total += s.result.loss;
    return total / static_cast<double>(batch.size());
}

void scatter_batch(const MfModel& model, const InteractionDataset& dataset,
                   const std::vector<SampleEval>& batch, double scale, GradientBuffer& out) {
    const double per_sample = scale / static_cast<double>(batch.size());
    for (const SampleEval& s : batch) {
        const Interaction& x = dataset.train[s.train_idx];
        accumulate_sample_grad(model, x.user, x.item, s.negatives, s.result.grad, per_sample,
                               out);
    }
}

TrainBatch to_train_batch(const std::vector<SampleEval>& batch) {
    TrainBatch tb;
    tb.train_idx.reserve(batch.size());
    tb.negatives.reserve(batch.size());
    for (const SampleEval& s : batch) {
        tb.train_idx.push_back(s.train_idx);
        tb.negatives.push_back(s.negatives);
    }
    return tb;
}

// Mean accuracy loss per fairness group on the validation split; groups with
// no validation samples get -inf so they can never be the argmax.
std::vector<double> validation_group_losses(const MfModel& model,
                                            const InteractionDataset& dataset,
                                            const ItemCatalog& catalog,
                                            const GroupWeightTable& fairness_table,
                                            const NegativeSampler& negs, const TrainConfig& cfg,
                                            std::mt19937_64& g) {
    std::vector<double> sums(catalog.category_names.size(), 0.0);
    std::vector<int> counts(catalog.category_names.size(), 0);
    for (const Interaction& x : dataset.valid) {
        const int exclude[1] = {x.item};
        const auto negatives = negs.sample(cfg.n_negatives, exclude, g);
        const auto r = sample_loss(model, x.user, x.item, negatives, cfg.loss_mode);
        sums[catalog.category[x.item]] += r.loss;
        ++counts[catalog.category[x.item]];
    }
    std::vector<double> out(fairness_table.groups.size());
    for (std::size_t i = 0; i < fairness_table.groups.size(); ++i) {
        const int cat = fairness_table.groups[i].id;
        out[i] = counts[cat] > 0 ? sums[cat] / counts[cat]
                                 : -std::numeric_limits<double>::infinity();
    }
    return out;
}

}  // namespace

PretrainResult pretrain(MfModel model, const InteractionDataset& dataset,
                        const ItemCatalog& catalog, const TrainConfig& cfg) {
    validate_train_config(cfg);
    if (dataset.train.empty()) throw std::invalid_argument("pretrain: empty train split");

    const NegativeSampler negs(catalog.pop_count);
    auto g_sampler = rng::substream(cfg.seed, "pretrain_sampler");
    auto g_negatives = rng::substream(cfg.seed, "pretrain_negatives");

    GroupWeightTable uniform = init_weights(Objective::accuracy, dataset, catalog,
                                            cfg.alpha_step, cfg.weight_floor);
    AdamState opt;
    opt.learning_rate = cfg.learning_rate;
    opt.weight_decay = cfg.weight_decay;
    opt.resize_like(model);
    GradientBuffer grads;
    grads.resize_like(model);

    const int steps_per_epoch = static_cast<int>(
        (dataset.train.size() + cfg.batch_size - 1) / cfg.batch_size);

    PretrainResult out;
    double best_hit = -1.0;
    int epochs_since_improvement = 0;

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        double loss_sum = 0.0;
        for (int step = 0; step < steps_per_epoch; ++step) {
            grads.clear();
            const auto batch =
                eval_batch(model, dataset, uniform, negs, cfg, g_sampler, g_negatives);
            const double loss = mean_loss(batch);
            if (!std::isfinite(loss))
                throw std::runtime_error("pretrain: non-finite loss at epoch " +
                                         std::to_string(epoch));
            scatter_batch(model, dataset, batch, 1.0, grads);
            apply_gradients(model, opt, grads);
            loss_sum += loss;
            out.history.step_acc_loss.push_back(loss);
        }
        const double epoch_loss = loss_sum / steps_per_epoch;

        EpochRecord rec;
        rec.epoch = epoch;
        rec.mean_acc_loss = epoch_loss;
        rec.mean_combined_loss = epoch_loss;
        rec.mean_alpha_acc = 1.0;
        rec.valid_report = evaluate(model, dataset, catalog, EvalSplit::valid, cfg.eval_k);
        out.history.epochs.push_back(rec);

        if (rec.valid_report.hit > best_hit) {
            best_hit = rec.valid_report.hit;
            out.model = model;
            out.converged_loss = epoch_loss;
            out.best_epoch = epoch;
            epochs_since_improvement = 0;
        } else if (++epochs_since_improvement >= cfg.patience) {
            break;
        }
    }
    return out;
}

ContinualResult continual_train(MfModel model, const InteractionDataset& dataset,
                                const ItemCatalog& catalog, const TrainConfig& cfg,
                                double target_loss) {
    validate_train_config(cfg);
    if (!std::isfinite(target_loss))
        throw std::invalid_argument("continual_train: target loss must be resolved and finite");

    const auto objectives = canonical_objectives(cfg);
    const bool is_static = cfg.mode == CoordinatorMode::static_weights;

    // Static mode needs catalog signals for any weighted surrogate.
    for (std::size_t i = 1; i < objectives.size(); ++i) {
        if (objectives[i] == Objective::fairness && catalog.category_names.empty())
            throw std::invalid_argument("continual_train: fairness objective needs categories");
    }

    // Static scalarization weights are fixed for the whole run.
    const std::vector<double> static_weights =
        is_static ? static_alpha(cfg.rho_full) : std::vector<double>{};

    const NegativeSampler negs(catalog.pop_count);
    auto g_sampler = rng::substream(cfg.seed, "train_sampler");
    auto g_negatives = rng::substream(cfg.seed, "train_negatives");

    // One weight table per objective; accuracy/revenue stay fixed by design.
    std::vector<GroupWeightTable> tables;
    for (Objective o : objectives)
        tables.push_back(init_weights(o, dataset, catalog, cfg.alpha_step, cfg.weight_floor));

    PiController pi = make_pi_controller(cfg.kp, cfg.ki, cfg.alpha_min, target_loss);

    AdamState opt;
    opt.learning_rate = cfg.learning_rate;
    opt.weight_decay = cfg.weight_decay;
    opt.resize_like(model);
    GradientBuffer combined;
    combined.resize_like(model);

    const int steps_per_epoch = static_cast<int>(
        (dataset.train.size() + cfg.batch_size - 1) / cfg.batch_size);

    ContinualResult out;
    out.base_valid = evaluate(model, dataset, catalog, EvalSplit::valid, cfg.eval_k);
    out.model = model;
    out.best_valid_imp = -std::numeric_limits<double>::infinity();

    std::int64_t global_step = 0;
    int epochs_since_improvement = 0;

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        double acc_loss_sum = 0.0, combined_loss_sum = 0.0, alpha_sum = 0.0;
        std::map<std::string, double> obj_loss_sums;

        for (int step = 0; step < steps_per_epoch; ++step, ++global_step) {
            combined.clear();
            double combined_loss = 0.0;
            double acc_loss = 0.0;

            if (!is_static) {
                // Accuracy batch first: its loss feeds the controller, and the
                // controller's output scales its gradient.
                const auto acc_batch =
                    eval_batch(model, dataset, tables[0], negs, cfg, g_sampler, g_negatives);
                acc_loss = mean_loss(acc_batch);
                const auto pi_out = pi.step(acc_loss);
                out.history.alpha_trace.push_back(
                    {global_step, pi_out.err, pi_out.err_sum, pi_out.alpha_acc});
                scatter_batch(model, dataset, acc_batch, pi_out.alpha_acc, combined);

                std::vector<double> other_losses;
                for (std::size_t i = 1; i < objectives.size(); ++i) {
                    const auto batch = eval_batch(model, dataset, tables[i], negs, cfg,
                                                  g_sampler, g_negatives);
                    const double l = mean_loss(batch);
                    other_losses.push_back(l);
                    scatter_batch(model, dataset, batch, cfg.pref.lambda * cfg.pref.rho[i - 1],
                                  combined);
                    obj_loss_sums[objective_name(objectives[i])] += l;
                }
                combined_loss = synthesize_loss(pi_out.alpha_acc, cfg.pref, acc_loss,
                                                other_losses);
                alpha_sum += pi_out.alpha_acc;
            } else {
                // Static baseline: one uniform batch, surrogate losses with
                // fixed weights, no controller.
                const auto batch =
                    eval_batch(model, dataset, tables[0], negs, cfg, g_sampler, g_negatives);
                acc_loss = mean_loss(batch);
                scatter_batch(model, dataset, batch, static_weights[0], combined);
                combined_loss = static_weights[0] * acc_loss;

                const TrainBatch tb = to_train_batch(batch);
                for (std::size_t i = 1; i < objectives.size(); ++i) {
                    const double rho = static_weights[i];
                    if (rho == 0.0) continue;
                    double l = 0.0;
                    switch (objectives[i]) {
                        case Objective::revenue:
                            l = revenue_surrogate_loss(model, dataset, tb, catalog.price,
                                                       cfg.loss_mode, &combined, rho);
                            break;
                        case Objective::alignment:
                            l = inverse_popularity_surrogate_loss(model, dataset, tb,
                                                                  catalog.pop_count,
                                                                  cfg.loss_mode, &combined, rho);
                            break;
                        case Objective::fairness:
                            l = pearson_fairness_batch(model, dataset, tb, catalog.category,
                                                       &combined, rho);
                            break;
                        default:
                            break;
                    }
                    combined_loss += rho * l;
                    obj_loss_sums[objective_name(objectives[i])] += l;
                }
                alpha_sum += static_weights[0];
            }

            if (!std::isfinite(combined_loss))
                throw std::runtime_error("continual_train: non-finite combined loss at step " +
                                         std::to_string(global_step));
            apply_gradients(model, opt, combined);
            acc_loss_sum += acc_loss;
            combined_loss_sum += combined_loss;
            out.history.step_acc_loss.push_back(acc_loss);
        }

        // Middle level, validation-set weight updates (Algorithm feedback).
        if (!is_static) {
            for (std::size_t i = 1; i < objectives.size(); ++i) {
                if (objectives[i] == Objective::fairness) {
                    auto g_val = rng::substream(cfg.seed, "val_negatives",
                                                static_cast<std::uint64_t>(epoch));
                    const auto losses = validation_group_losses(model, dataset, catalog,
                                                                tables[i], negs, cfg, g_val);
                    update_fairness_weights(tables[i], losses);
                } else if (objectives[i] == Objective::alignment) {
                    const auto exposure =
                        exposure_distribution(model, dataset, catalog, cfg.eval_k);
                    update_alignment_weights(tables[i], exposure);
                }
            }
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.mean_acc_loss = acc_loss_sum / steps_per_epoch;
        rec.mean_combined_loss = combined_loss_sum / steps_per_epoch;
        rec.mean_alpha_acc = alpha_sum / steps_per_epoch;
        for (const auto& [name, sum] : obj_loss_sums)
            rec.objective_losses[name] = sum / steps_per_epoch;
        rec.valid_report = evaluate(model, dataset, catalog, EvalSplit::valid, cfg.eval_k);
        rec.valid_imp = imp_for_stopping(out.base_valid, rec.valid_report);
        for (std::size_t i = 0; i < objectives.size(); ++i)
            rec.weight_tables[objective_name(objectives[i])] = tables[i].to_json();
        out.history.epochs.push_back(rec);

        if (rec.valid_imp > out.best_valid_imp) {
            out.best_valid_imp = rec.valid_imp;
            out.model = model;
            out.best_epoch = epoch;
            epochs_since_improvement = 0;
        } else if (++epochs_since_improvement >= cfg.patience) {
            break;
        }
    }
    return out;
}

}  // namespace morec
