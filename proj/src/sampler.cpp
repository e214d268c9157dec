#include "morec/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "morec/rng.hpp"

namespace morec {

const char* objective_name(Objective o) {
    switch (o) {
        case Objective::accuracy: return "accuracy";
        case Objective::revenue: return "revenue";
        case Objective::fairness: return "fairness";
        case Objective::alignment: return "alignment";
    }
    return "?";
}

Objective objective_from_name(const std::string& name) {
    if (name == "accuracy") return Objective::accuracy;
    if (name == "revenue") return Objective::revenue;
    if (name == "fairness") return Objective::fairness;
    if (name == "alignment") return Objective::alignment;
    throw std::invalid_argument("unknown objective: " + name);
}

std::string GroupWeightTable::to_json() const {
    nlohmann::json j;
    j["objective"] = objective_name(objective);
    j["step_size"] = step_size;
    nlohmann::json gs = nlohmann::json::array();
    for (std::size_t i = 0; i < groups.size(); ++i) {
        gs.push_back({{"id", groups[i].id},
                      {"label", groups[i].label},
                      {"weight", weights[i]},
                      {"size", groups[i].members.size()}});
    }
    j["groups"] = std::move(gs);
    return j.dump();
}

void renormalize(GroupWeightTable& table) {
    if (table.weights.size() != table.groups.size())
        throw std::invalid_argument("renormalize: weights/groups size mismatch");
    double sum = 0.0;
    for (double& w : table.weights) {
        if (!std::isfinite(w)) throw std::invalid_argument("renormalize: non-finite weight");
        w = std::max(w, table.floor);
        sum += w;
    }
    for (double& w : table.weights) w /= sum;
}

namespace {

void drop_empty_groups(GroupWeightTable& table) {
    std::vector<SampleGroup> kept;
    std::vector<double> kept_w;
    for (std::size_t i = 0; i < table.groups.size(); ++i) {
        if (table.groups[i].members.empty()) {
            table.dropped_empty_groups = true;
            continue;
        }
        kept.push_back(std::move(table.groups[i]));
        kept_w.push_back(table.weights[i]);
    }
    table.groups = std::move(kept);
    table.weights = std::move(kept_w);
}

// Sort item indices by `key` descending (ties by index) and cut into
// `n_bins` near-equal groups; the first bins absorb the remainder.
std::vector<int> bin_items_by_key(int n_items, int n_bins, const std::vector<double>& key) {
    std::vector<int> order(n_items);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (key[a] != key[b]) return key[a] > key[b];
        return a < b;
    });
    std::vector<int> bin_of(n_items, 0);
    const int base = n_items / n_bins;
    const int rem = n_items % n_bins;
    int pos = 0;
    for (int b = 0; b < n_bins; ++b) {
        const int size = base + (b < rem ? 1 : 0);
        for (int j = 0; j < size; ++j) bin_of[order[pos++]] = b;
    }
    return bin_of;
}

}  // namespace

GroupWeightTable init_weights(Objective objective, const InteractionDataset& dataset,
                              const ItemCatalog& catalog, double step_size, double floor) {
    if (dataset.train.empty()) throw std::invalid_argument("init_weights: empty train split");
    GroupWeightTable table;
    table.objective = objective;
    table.step_size = step_size;
    table.floor = floor;

    switch (objective) {
        case Objective::accuracy: {
            SampleGroup g;
            g.id = 0;
            g.label = "all";
            g.members.resize(dataset.train.size());
            std::iota(g.members.begin(), g.members.end(), 0);
            table.groups.push_back(std::move(g));
            table.weights = {1.0};
            return table;  // single group; nothing to renormalize
        }
        case Objective::revenue: {
            const int n_bins = std::min(10, dataset.n_items);
            const auto bin_of = bin_items_by_key(dataset.n_items, n_bins, catalog.price);
            table.groups.resize(n_bins);
            std::vector<double> price_sum(n_bins, 0.0);
            std::vector<int> item_count(n_bins, 0);
            for (int e = 0; e < dataset.n_items; ++e) {
                price_sum[bin_of[e]] += catalog.price[e];
                ++item_count[bin_of[e]];
            }
            for (int b = 0; b < n_bins; ++b) {
                table.groups[b].id = b;
                table.groups[b].label = "price_bin_" + std::to_string(b);
            }
            for (std::size_t i = 0; i < dataset.train.size(); ++i)
                table.groups[bin_of[dataset.train[i].item]].members.push_back(
                    static_cast<int>(i));
            table.weights.resize(n_bins);
            for (int b = 0; b < n_bins; ++b)
                table.weights[b] = item_count[b] > 0 ? price_sum[b] / item_count[b] : 0.0;
            break;
        }
        case Objective::fairness: {
            const int n_cat = static_cast<int>(catalog.category_names.size());
            table.groups.resize(n_cat);
            for (int c = 0; c < n_cat; ++c) {
                table.groups[c].id = c;
                table.groups[c].label = catalog.category_names[c];
            }
            for (std::size_t i = 0; i < dataset.train.size(); ++i)
                table.groups[catalog.category[dataset.train[i].item]].members.push_back(
                    static_cast<int>(i));
            table.weights.resize(n_cat);
            for (int c = 0; c < n_cat; ++c)
                table.weights[c] = static_cast<double>(table.groups[c].members.size());
            break;
        }
        case Objective::alignment: {
            const int n_buckets = catalog.n_buckets;
            table.groups.resize(n_buckets);
            for (int b = 0; b < n_buckets; ++b) {
                table.groups[b].id = b;
                table.groups[b].label = "pop_bucket_" + std::to_string(b);
            }
            for (std::size_t i = 0; i < dataset.train.size(); ++i)
                table.groups[catalog.pop_bucket[dataset.train[i].item]].members.push_back(
                    static_cast<int>(i));
            table.weights.assign(n_buckets, 1.0);
            break;
        }
    }

    drop_empty_groups(table);
    if (table.groups.empty()) throw std::runtime_error("init_weights: all groups empty");
    renormalize(table);
    return table;
}

std::vector<int> draw_batch(const GroupWeightTable& table, int batch_size, std::mt19937_64& g) {
    if (batch_size < 1) throw std::invalid_argument("draw_batch: batch_size must be >= 1");
    std::vector<double> cumulative(table.weights.size());
    double running = 0.0;
    for (std::size_t i = 0; i < table.weights.size(); ++i) {
        running += table.weights[i];
        cumulative[i] = running;
    }
    std::vector<int> out;
    out.reserve(batch_size);
    for (int s = 0; s < batch_size; ++s) {
        const double r = rng::uniform01(g) * running;
        auto it = std::upper_bound(cumulative.begin(), cumulative.end(), r);
        std::size_t gi = static_cast<std::size_t>(it - cumulative.begin());
        if (gi >= table.groups.size()) gi = table.groups.size() - 1;
        const auto& members = table.groups[gi].members;
        out.push_back(members[rng::below(g, members.size())]);
    }
    return out;
}

void update_fairness_weights(GroupWeightTable& table, std::span<const double> group_losses) {
    if (table.objective != Objective::fairness)
        throw std::invalid_argument("update_fairness_weights: not a fairness table");
    if (group_losses.size() != table.groups.size())
        throw std::invalid_argument("update_fairness_weights: loss vector size mismatch");
    std::size_t worst = 0;
    for (std::size_t i = 1; i < group_losses.size(); ++i)
        if (group_losses[i] > group_losses[worst]) worst = i;
    table.weights[worst] += table.step_size;
    renormalize(table);
}

ExposureDistribution exposure_distribution(const MfModel& model,
                                           const InteractionDataset& dataset,
                                           const ItemCatalog& catalog, int k) {
    if (dataset.valid.empty())
        throw std::invalid_argument("exposure_distribution: no validation users");
    constexpr double kSmooth = 1e-6;
    ExposureDistribution out;
    out.p.assign(catalog.n_buckets, 0.0);
    out.q.assign(catalog.n_buckets, 0.0);

    for (const Interaction& x : dataset.valid) {
        const auto& exclude = dataset.user_train_items[x.user];
        const int kk = std::min<int>(k, model.n_items - static_cast<int>(exclude.size()));
        if (kk < 1) continue;
        for (int item : topk_recommend(model, x.user, kk, exclude))
            out.p[catalog.pop_bucket[item]] += 1.0;
    }
    for (const Interaction& x : dataset.train) out.q[catalog.pop_bucket[x.item]] += 1.0;

    // Counts -> frequencies, then additive smoothing, then renormalize.
    for (auto* h : {&out.p, &out.q}) {
        double sum = 0.0;
        for (double v : *h) sum += v;
        for (double& v : *h) {
            if (sum > 0.0) v /= sum;
            v += kSmooth;
        }
        const double denom = (sum > 0.0 ? 1.0 : 0.0) + kSmooth * static_cast<double>(h->size());
        for (double& v : *h) v /= denom;
    }
    return out;
}

void update_alignment_weights(GroupWeightTable& table, const ExposureDistribution& exposure) {
    if (table.objective != Objective::alignment)
        throw std::invalid_argument("update_alignment_weights: not an alignment table");
    for (std::size_t i = 0; i < table.groups.size(); ++i) {
        const int bucket = table.groups[i].id;
        if (bucket < 0 || bucket >= static_cast<int>(exposure.p.size()))
            throw std::invalid_argument("update_alignment_weights: bucket/exposure mismatch");
        const double diff = exposure.p[bucket] - exposure.q[bucket];
        const double sign = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
        table.weights[i] -= table.step_size * sign;
    }
    renormalize(table);
}

}  // namespace morec
