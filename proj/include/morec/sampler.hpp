#pragma once

#include <random>
#include <span>
#include <string>
#include <vector>

#include "morec/backbone.hpp"
#include "morec/dataset.hpp"

namespace morec {

enum class Objective { accuracy, revenue, fairness, alignment };

const char* objective_name(Objective o);
Objective objective_from_name(const std::string& name);

struct SampleGroup {
    int id = 0;            // category id, bucket id, or bin index
    std::string label;
    std::vector<int> members;  // indices into dataset.train
};

// Per-objective simplex of group sampling weights.
// Accuracy and revenue tables stay fixed; fairness and alignment tables are
// moved by signed-gradient steps of size `step_size` after each epoch.
struct GroupWeightTable {
    Objective objective = Objective::accuracy;
    std::vector<SampleGroup> groups;
    std::vector<double> weights;
    double step_size = 0.1;
    double floor = 1e-4;
    bool dropped_empty_groups = false;

    std::string to_json() const;
};

GroupWeightTable init_weights(Objective objective, const InteractionDataset& dataset,
                              const ItemCatalog& catalog, double step_size = 0.1,
                              double floor = 1e-4);

// Clamp every raw weight to >= floor, then divide by the sum.
void renormalize(GroupWeightTable& table);

// Group chosen proportionally to weight, then a member uniformly within the
// group; with replacement. Returns indices into dataset.train.
std::vector<int> draw_batch(const GroupWeightTable& table, int batch_size, std::mt19937_64& g);

// Raises the raw weight of the worst (highest-loss) group by step_size.
// Ties go to the lowest group position.
void update_fairness_weights(GroupWeightTable& table, std::span<const double> group_losses);

struct ExposureDistribution {
    std::vector<double> p;  // model exposure per popularity bucket
    std::vector<double> q;  // train frequency per popularity bucket
};

// P from the top-k lists of every validation user (train items excluded),
// Q from train interactions; both additively smoothed with 1e-6 and
// renormalized.
ExposureDistribution exposure_distribution(const MfModel& model,
                                           const InteractionDataset& dataset,
                                           const ItemCatalog& catalog, int k = 10);

// w[i] -= step * sign(P[i] - Q[i]) per bucket, then renormalize.
void update_alignment_weights(GroupWeightTable& table, const ExposureDistribution& exposure);

}  // namespace morec
