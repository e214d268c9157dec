#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace morec {

struct RawRecord {
    std::string user;
    std::string item;
    std::int64_t timestamp = 0;
    std::optional<double> rating;
};

struct RawInteractions {
    std::vector<RawRecord> records;
    // Set when a k-core pass removed everything; an empty result is legal.
    bool kcore_warning = false;
};

// Column layout of an interactions TSV. Column indices are 0-based;
// rating_column < 0 means the file carries no rating and the rating
// filter is skipped.
struct ColumnMap {
    int user_column = 0;
    int item_column = 1;
    int timestamp_column = 2;
    int rating_column = 3;
    bool has_header = false;
    double rating_threshold = 3.0;
};

RawInteractions load_interactions(const std::string& path, const ColumnMap& fmt);

// Maximal subset in which every user and every item keeps >= k interactions.
RawInteractions kcore_filter(const RawInteractions& raw, int k);

struct Interaction {
    int user = 0;
    int item = 0;
    std::int64_t timestamp = 0;
};

struct InteractionDataset {
    int n_users = 0;
    int n_items = 0;
    std::vector<std::string> user_ids;  // dense index -> external id
    std::vector<std::string> item_ids;
    std::vector<Interaction> train;
    std::vector<Interaction> valid;  // one per evaluated user
    std::vector<Interaction> test;   // one per evaluated user
    std::vector<std::vector<int>> user_train_items;  // sorted, per user
};

// Per user: latest interaction -> test, second latest -> valid, rest -> train.
// Timestamp ties are broken by input order (later row = more recent); users
// with fewer than 3 interactions contribute train-only.
InteractionDataset leave_one_out_split(const RawInteractions& raw);

struct ItemMeta {
    std::string item;
    std::string category;
    double price = 1.0;
};

struct ItemCatalog {
    std::vector<double> price;
    std::vector<int> category;  // dense category id per item
    std::vector<std::string> category_names;
    std::vector<std::int64_t> pop_count;  // train interactions per item
    std::vector<int> pop_bucket;          // 0 = most popular decile
    int n_buckets = 10;
};

// Popularity counted on the train split only; buckets are equal-item-count
// cuts over the popularity-descending order, remainder spread over the most
// popular buckets. Items missing from the metadata get price 1.0 and
// category "unknown".
ItemCatalog build_catalog(const std::vector<ItemMeta>& metadata,
                          const InteractionDataset& dataset, int n_buckets = 10);
ItemCatalog build_catalog_file(const std::string& items_path,
                               const InteractionDataset& dataset, int n_buckets = 10);

std::vector<ItemMeta> load_item_metadata(const std::string& path);

struct SynthConfig {
    int n_users = 0;
    int n_items = 0;
    std::int64_t n_interactions = 0;
    int n_categories = 1;
    double zipf_exponent = 1.0;
    double price_min = 0.5;
    double price_max = 5.0;
    int latent_dim = 8;
};

struct SynthResult {
    RawInteractions interactions;
    std::vector<ItemMeta> items;
};

// Deterministic synthetic generator: latent user/item vectors, per-user item
// draws with probability proportional to softmax(affinity) * zipf(rank),
// uniform prices, categories round-robin over popularity ranks.
SynthResult synth_generate(const SynthConfig& cfg, std::uint64_t seed);

void write_interactions_tsv(const std::string& path, const RawInteractions& raw);
void write_item_metadata_tsv(const std::string& path, const std::vector<ItemMeta>& items);

}  // namespace morec
