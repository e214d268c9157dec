#include "morec/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

namespace morec {

std::string EvalReport::to_json() const {
    nlohmann::json j;
    j["hit"] = hit;
    j["rhit"] = rhit;
    j["pop_kl"] = pop_kl;
    j["min_hit"] = min_hit;
    j["k"] = k;
    j["n_eval_users"] = n_eval_users;
    nlohmann::json ch = nlohmann::json::object();
    for (const auto& [cat, h] : category_hits) ch[std::to_string(cat)] = h;
    j["category_hits"] = std::move(ch);
    return j.dump();
}

EvalReport eval_report_from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    EvalReport r;
    r.hit = j.at("hit").get<double>();
    r.rhit = j.at("rhit").get<double>();
    r.pop_kl = j.at("pop_kl").get<double>();
    r.min_hit = j.at("min_hit").get<double>();
    r.k = j.at("k").get<int>();
    r.n_eval_users = j.at("n_eval_users").get<int>();
    for (const auto& [key, value] : j.at("category_hits").items())
        r.category_hits[std::stoi(key)] = value.get<double>();
    return r;
}

namespace {

constexpr double kSmooth = 1e-6;

void smooth_normalize(std::vector<double>& h) {
    double sum = 0.0;
    for (double v : h) sum += v;
    for (double& v : h) {
        if (sum > 0.0) v /= sum;
        v += kSmooth;
    }
    const double denom = (sum > 0.0 ? 1.0 : 0.0) + kSmooth * static_cast<double>(h.size());
    for (double& v : h) v /= denom;
}

}  // namespace

EvalReport evaluate(const MfModel& model, const InteractionDataset& dataset,
                    const ItemCatalog& catalog, EvalSplit split, int k) {
    const std::vector<Interaction>& targets =
        split == EvalSplit::test ? dataset.test : dataset.valid;
    if (targets.empty()) throw std::invalid_argument("evaluate: empty evaluation split");

    EvalReport r;
    r.k = k;
    r.n_eval_users = static_cast<int>(targets.size());

    std::vector<double> p_hist(catalog.n_buckets, 0.0), q_hist(catalog.n_buckets, 0.0);
    std::map<int, std::pair<int, int>> per_category;  // category -> (users, hits)
    double hits = 0.0, price_hits = 0.0;

    for (const Interaction& x : targets) {
        const auto& exclude = dataset.user_train_items[x.user];
        const int kk = std::min<int>(k, model.n_items - static_cast<int>(exclude.size()));
        bool hit = false;
        if (kk >= 1) {
            for (int item : topk_recommend(model, x.user, kk, exclude)) {
                p_hist[catalog.pop_bucket[item]] += 1.0;
                if (item == x.item) hit = true;
            }
        }
        hits += hit ? 1.0 : 0.0;
        price_hits += hit ? catalog.price[x.item] : 0.0;
        auto& [users, cat_hits] = per_category[catalog.category[x.item]];
        ++users;
        if (hit) ++cat_hits;
    }

    const double n = static_cast<double>(targets.size());
    r.hit = hits / n;
    r.rhit = price_hits / n;

    r.min_hit = 1.0;
    for (const auto& [cat, uh] : per_category) {
        const double ch = static_cast<double>(uh.second) / static_cast<double>(uh.first);
        r.category_hits[cat] = ch;
        r.min_hit = std::min(r.min_hit, ch);
    }

    for (const Interaction& x : dataset.train) q_hist[catalog.pop_bucket[x.item]] += 1.0;
    smooth_normalize(p_hist);
    smooth_normalize(q_hist);
    double kl = 0.0;
    for (int b = 0; b < catalog.n_buckets; ++b) kl += q_hist[b] * std::log(q_hist[b] / p_hist[b]);
    r.pop_kl = kl;
    return r;
}

double hit_at_k(const MfModel& model, const InteractionDataset& dataset,
                const ItemCatalog& catalog, int k) {
    return evaluate(model, dataset, catalog, EvalSplit::test, k).hit;
}

double rhit_at_k(const MfModel& model, const InteractionDataset& dataset,
                 const ItemCatalog& catalog, int k) {
    return evaluate(model, dataset, catalog, EvalSplit::test, k).rhit;
}

double pop_kl(const MfModel& model, const InteractionDataset& dataset,
              const ItemCatalog& catalog, int k) {
    return evaluate(model, dataset, catalog, EvalSplit::test, k).pop_kl;
}

double min_hit(const MfModel& model, const InteractionDataset& dataset,
               const ItemCatalog& catalog, int k) {
    return evaluate(model, dataset, catalog, EvalSplit::test, k).min_hit;
}

double imp(const EvalReport& base, const EvalReport& solution) {
    if (base.hit == 0.0 || base.rhit == 0.0 || base.pop_kl == 0.0 || base.min_hit == 0.0)
        throw std::invalid_argument("imp: base metric is zero, cannot normalize");
    const double d_hit = (solution.hit - base.hit) / base.hit;
    const double d_rhit = (solution.rhit - base.rhit) / base.rhit;
    const double d_kl = (base.pop_kl - solution.pop_kl) / base.pop_kl;  // lower is better
    const double d_min = (solution.min_hit - base.min_hit) / base.min_hit;
    return 100.0 * (d_hit + d_rhit + d_kl + d_min) / 4.0;
}

namespace {

// A dominates B: weakly better everywhere, strictly better somewhere.
bool dominates(const std::vector<double>& a, const std::vector<double>& b,
               const std::vector<bool>& maximize) {
    bool strict = false;
    for (std::size_t m = 0; m < a.size(); ++m) {
        const double av = maximize[m] ? a[m] : -a[m];
        const double bv = maximize[m] ? b[m] : -b[m];
        if (av < bv) return false;
        if (av > bv) strict = true;
    }
    return strict;
}

}  // namespace

std::vector<std::size_t> pareto_frontier(const std::vector<std::vector<double>>& points,
                                         const std::vector<bool>& maximize) {
    if (points.empty()) return {};
    const std::size_t dims = points.front().size();
    if (maximize.size() != dims)
        throw std::invalid_argument("pareto_frontier: direction vector length mismatch");
    for (const auto& p : points)
        if (p.size() != dims)
            throw std::invalid_argument("pareto_frontier: ragged metric vectors");

    // Sort better-first lexicographically (direction-adjusted). Any dominator
    // of a point precedes it in this order, so one forward pass against the
    // accepted frontier suffices.
    std::vector<std::size_t> order(points.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        for (std::size_t m = 0; m < dims; ++m) {
            const double av = maximize[m] ? points[a][m] : -points[a][m];
            const double bv = maximize[m] ? points[b][m] : -points[b][m];
            if (av != bv) return av > bv;
        }
        return false;
    });

    std::vector<std::size_t> frontier;
    for (std::size_t idx : order) {
        bool dominated = false;
        for (std::size_t f : frontier) {
            if (dominates(points[f], points[idx], maximize)) {
                dominated = true;
                break;
            }
        }
        if (!dominated) frontier.push_back(idx);
    }
    std::sort(frontier.begin(), frontier.end());
    return frontier;
}

std::size_t select_solution(const SolutionSet& set) {
    if (set.entries.empty()) throw std::invalid_argument("select_solution: empty solution set");

    std::size_t best = set.entries.size();
    for (std::size_t i = 0; i < set.entries.size(); ++i) {
        if (!set.entries[i].valid) continue;
        if (best == set.entries.size() || set.entries[i].imp > set.entries[best].imp ||
            (set.entries[i].imp == set.entries[best].imp &&
             set.entries[i].label < set.entries[best].label))
            best = i;
    }
    if (best != set.entries.size()) return best;

    best = 0;
    for (std::size_t i = 1; i < set.entries.size(); ++i) {
        if (set.entries[i].report.hit > set.entries[best].report.hit ||
            (set.entries[i].report.hit == set.entries[best].report.hit &&
             set.entries[i].label < set.entries[best].label))
            best = i;
    }
    return best;
}

}  // namespace morec
