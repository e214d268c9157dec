#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "morec/backbone.hpp"
#include "morec/dataset.hpp"

namespace morec {

struct EvalReport {
    double hit = 0.0;      // Hit@k over evaluated users
    double rhit = 0.0;     // mean of price(target) * hit indicator
    double pop_kl = 0.0;   // D_KL(Q || P) in nats over popularity buckets
    double min_hit = 0.0;  // worst per-category Hit@k
    int k = 10;
    int n_eval_users = 0;
    std::map<int, double> category_hits;

    std::string to_json() const;
};

EvalReport eval_report_from_json(const std::string& text);

enum class EvalSplit { valid, test };

// Single pass over the split's users: top-k lists (train items excluded)
// feed all four metrics at once.
EvalReport evaluate(const MfModel& model, const InteractionDataset& dataset,
                    const ItemCatalog& catalog, EvalSplit split, int k = 10);

double hit_at_k(const MfModel& model, const InteractionDataset& dataset,
                const ItemCatalog& catalog, int k = 10);
double rhit_at_k(const MfModel& model, const InteractionDataset& dataset,
                 const ItemCatalog& catalog, int k = 10);
double pop_kl(const MfModel& model, const InteractionDataset& dataset,
              const ItemCatalog& catalog, int k = 10);
double min_hit(const MfModel& model, const InteractionDataset& dataset,
               const ItemCatalog& catalog, int k = 10);

// Mean of the four relative improvements versus `base`, as a percentage.
// Hit, rHit and min-Hit improve upward; Pop-KL improves downward.
double imp(const EvalReport& base, const EvalReport& solution);

// Non-dominated subset (indices in input order). maximize[m] selects the
// direction of metric m.
std::vector<std::size_t> pareto_frontier(const std::vector<std::vector<double>>& points,
                                         const std::vector<bool>& maximize);

struct Solution {
    std::string label;
    std::uint64_t digest = 0;
    EvalReport report;
    double imp = 0.0;
    bool valid = false;
};

struct SolutionSet {
    EvalReport base;
    std::vector<Solution> entries;
};

// Valid when hit >= 0.97 * base hit; pick argmax Imp among valid solutions,
// otherwise argmax hit; ties go to the first label in lexicographic order.
std::size_t select_solution(const SolutionSet& set);

}  // namespace morec
