#include "morec/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "morec/rng.hpp"

namespace morec {

namespace {

std::vector<std::string_view> split_tabs(std::string_view line, std::vector<std::string_view>& out) {
    out.clear();
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find('\t', start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

std::int64_t parse_int(std::string_view s, const std::string& what, std::size_t line_no) {
    std::int64_t value = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw std::runtime_error("parse error at line " + std::to_string(line_no) + ": bad " +
                                 what + " '" + std::string(s) + "'");
    return value;
}

double parse_real(std::string_view s, const std::string& what, std::size_t line_no) {
    try {
        std::size_t used = 0;
        const double value = std::stod(std::string(s), &used);
        if (used != s.size()) throw std::invalid_argument("trailing");
        return value;
    } catch (const std::exception&) {
        throw std::runtime_error("parse error at line " + std::to_string(line_no) + ": bad " +
                                 what + " '" + std::string(s) + "'");
    }
}

}  // namespace

RawInteractions load_interactions(const std::string& path, const ColumnMap& fmt) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open interactions file: " + path);

    RawInteractions raw;
    std::string line;
    std::vector<std::string_view> cols;
    std::unordered_set<std::string> seen;  // (user, item, timestamp) dedup
    std::size_t line_no = 0;
    // The rating column is optional per row; user/item/timestamp are not.
    const int needed = std::max({fmt.user_column, fmt.item_column, fmt.timestamp_column});
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (fmt.has_header && line_no == 1) continue;
        if (line.empty()) continue;
        split_tabs(line, cols);
        if (static_cast<int>(cols.size()) <= needed)
            throw std::runtime_error("parse error at line " + std::to_string(line_no) +
                                     ": expected at least " + std::to_string(needed + 1) +
                                     " tab-separated fields");

        RawRecord rec;
        rec.user = std::string(cols[fmt.user_column]);
        rec.item = std::string(cols[fmt.item_column]);
        rec.timestamp = parse_int(cols[fmt.timestamp_column], "timestamp", line_no);
        if (rec.timestamp < 0)
            throw std::runtime_error("parse error at line " + std::to_string(line_no) +
                                     ": negative timestamp");
        if (fmt.rating_column >= 0 && fmt.rating_column < static_cast<int>(cols.size())) {
            rec.rating = parse_real(cols[fmt.rating_column], "rating", line_no);
            if (*rec.rating < fmt.rating_threshold) continue;
        }
        std::string key = rec.user + '\x1f' + rec.item + '\x1f' + std::to_string(rec.timestamp);
        if (!seen.insert(std::move(key)).second) continue;
        raw.records.push_back(std::move(rec));
    }
    return raw;
}

RawInteractions kcore_filter(const RawInteractions& raw, int k) {
    if (k < 1) throw std::invalid_argument("kcore_filter: k must be >= 1");

    std::vector<char> alive(raw.records.size(), 1);
    bool changed = true;
    while (changed) {
        changed = false;
        std::unordered_map<std::string, int> user_deg, item_deg;
        for (std::size_t i = 0; i < raw.records.size(); ++i) {
            if (!alive[i]) continue;
            ++user_deg[raw.records[i].user];
            ++item_deg[raw.records[i].item];
        }
        for (std::size_t i = 0; i < raw.records.size(); ++i) {
            if (!alive[i]) continue;
            if (user_deg[raw.records[i].user] < k || item_deg[raw.records[i].item] < k) {
                alive[i] = 0;
                changed = true;
            }
        }
    }

    RawInteractions out;
    for (std::size_t i = 0; i < raw.records.size(); ++i)
        if (alive[i]) out.records.push_back(raw.records[i]);
    out.kcore_warning = out.records.empty() && !raw.records.empty();
    return out;
}

InteractionDataset leave_one_out_split(const RawInteractions& raw) {
    InteractionDataset ds;
    std::unordered_map<std::string, int> user_index, item_index;
    std::vector<Interaction> all;
    all.reserve(raw.records.size());
    for (const RawRecord& rec : raw.records) {
        auto [uit, unew] = user_index.try_emplace(rec.user, ds.n_users);
        if (unew) {
            ++ds.n_users;
            ds.user_ids.push_back(rec.user);
        }
        auto [iit, inew] = item_index.try_emplace(rec.item, ds.n_items);
        if (inew) {
            ++ds.n_items;
            ds.item_ids.push_back(rec.item);
        }
        all.push_back({uit->second, iit->second, rec.timestamp});
    }

    // Bucket per user preserving file order, which is the tie-break key.
    std::vector<std::vector<Interaction>> per_user(ds.n_users);
    for (const Interaction& x : all) per_user[x.user].push_back(x);
    for (auto& xs : per_user)
        std::stable_sort(xs.begin(), xs.end(),
                         [](const Interaction& a, const Interaction& b) {
                             return a.timestamp < b.timestamp;
                         });

    ds.user_train_items.resize(ds.n_users);
    for (int u = 0; u < ds.n_users; ++u) {
        auto& xs = per_user[u];
        std::size_t n_train = xs.size();
        if (xs.size() >= 3) {
            ds.test.push_back(xs.back());
            ds.valid.push_back(xs[xs.size() - 2]);
            n_train = xs.size() - 2;
        }
        for (std::size_t i = 0; i < n_train; ++i) {
            ds.train.push_back(xs[i]);
            ds.user_train_items[u].push_back(xs[i].item);
        }
        auto& items = ds.user_train_items[u];
        std::sort(items.begin(), items.end());
        items.erase(std::unique(items.begin(), items.end()), items.end());
    }
    return ds;
}

ItemCatalog build_catalog(const std::vector<ItemMeta>& metadata,
                          const InteractionDataset& dataset, int n_buckets) {
    if (n_buckets < 1) throw std::invalid_argument("build_catalog: n_buckets must be >= 1");
    if (n_buckets > dataset.n_items)
        throw std::invalid_argument("build_catalog: n_buckets exceeds item count");

    ItemCatalog cat;
    cat.n_buckets = n_buckets;
    const int n = dataset.n_items;
    cat.price.assign(n, 1.0);
    cat.category.assign(n, -1);
    cat.pop_count.assign(n, 0);
    cat.pop_bucket.assign(n, 0);

    std::unordered_map<std::string, const ItemMeta*> by_id;
    for (const ItemMeta& m : metadata) by_id.emplace(m.item, &m);

    std::unordered_map<std::string, int> category_ids;
    auto category_id = [&](const std::string& name) {
        auto [it, inserted] = category_ids.try_emplace(name, static_cast<int>(cat.category_names.size()));
        if (inserted) cat.category_names.push_back(name);
        return it->second;
    };

    for (int i = 0; i < n; ++i) {
        const auto it = by_id.find(dataset.item_ids[i]);
        if (it != by_id.end()) {
            if (it->second->price < 0)
                throw std::invalid_argument("build_catalog: negative price for item " +
                                            dataset.item_ids[i]);
            cat.price[i] = it->second->price;
            cat.category[i] = category_id(it->second->category);
        } else {
            cat.category[i] = category_id("unknown");
        }
    }

    for (const Interaction& x : dataset.train) ++cat.pop_count[x.item];

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (cat.pop_count[a] != cat.pop_count[b]) return cat.pop_count[a] > cat.pop_count[b];
        return a < b;
    });

    // Near-equal cuts; the first (n % n_buckets) buckets take the extra item.
    const int base = n / n_buckets;
    const int rem = n % n_buckets;
    int pos = 0;
    for (int b = 0; b < n_buckets; ++b) {
        const int size = base + (b < rem ? 1 : 0);
        for (int j = 0; j < size; ++j) cat.pop_bucket[order[pos++]] = b;
    }
    return cat;
}

std::vector<ItemMeta> load_item_metadata(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open item metadata file: " + path);
    std::vector<ItemMeta> out;
    std::string line;
    std::vector<std::string_view> cols;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        split_tabs(line, cols);
        if (cols.size() < 3)
            throw std::runtime_error("parse error at line " + std::to_string(line_no) +
                                     ": expected item_id<TAB>category<TAB>price");
        ItemMeta m;
        m.item = std::string(cols[0]);
        m.category = std::string(cols[1]);
        m.price = parse_real(cols[2], "price", line_no);
        out.push_back(std::move(m));
    }
    return out;
}

ItemCatalog build_catalog_file(const std::string& items_path,
                               const InteractionDataset& dataset, int n_buckets) {
    return build_catalog(load_item_metadata(items_path), dataset, n_buckets);
}

SynthResult synth_generate(const SynthConfig& cfg, std::uint64_t seed) {
    if (cfg.n_users < 1 || cfg.n_items < 1 || cfg.latent_dim < 1 || cfg.n_categories < 1)
        throw std::invalid_argument("synth_generate: sizes must be positive");
    if (cfg.n_interactions < 3 * static_cast<std::int64_t>(cfg.n_users))
        throw std::invalid_argument("synth_generate: need n_interactions >= 3 * n_users");
    if (cfg.price_max < cfg.price_min)
        throw std::invalid_argument("synth_generate: empty price range");

    const std::int64_t per_user = cfg.n_interactions / cfg.n_users;
    const std::int64_t extra = cfg.n_interactions % cfg.n_users;
    if (per_user + (extra > 0 ? 1 : 0) > cfg.n_items)
        throw std::invalid_argument("synth_generate: more interactions per user than items");

    auto g = rng::substream(seed, "data");
    rng::Normal normal;

    const int d = cfg.latent_dim;
    std::vector<double> user_lat(static_cast<std::size_t>(cfg.n_users) * d);
    std::vector<double> item_lat(static_cast<std::size_t>(cfg.n_items) * d);
    for (double& v : user_lat) v = normal(g);
    for (double& v : item_lat) v = normal(g);

    // Item index doubles as popularity rank: item 0 carries the largest
    // zipf prior mass.
    std::vector<double> zipf(cfg.n_items);
    for (int j = 0; j < cfg.n_items; ++j)
        zipf[j] = std::pow(static_cast<double>(j + 1), -cfg.zipf_exponent);

    SynthResult out;
    out.items.resize(cfg.n_items);
    char buf[32];
    for (int j = 0; j < cfg.n_items; ++j) {
        std::snprintf(buf, sizeof buf, "i%05d", j);
        out.items[j].item = buf;
        std::snprintf(buf, sizeof buf, "c%02d", j % cfg.n_categories);
        out.items[j].category = buf;
        const double p = rng::uniform(g, cfg.price_min, cfg.price_max);
        out.items[j].price = std::round(p * 100.0) / 100.0;
    }

    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
    std::vector<double> weight(cfg.n_items);
    out.interactions.records.reserve(cfg.n_interactions);
    for (int u = 0; u < cfg.n_users; ++u) {
        const std::int64_t n_u = per_user + (u < extra ? 1 : 0);
        double max_aff = -1e300;
        for (int j = 0; j < cfg.n_items; ++j) {
            double dot = 0.0;
            for (int t = 0; t < d; ++t)
                dot += user_lat[static_cast<std::size_t>(u) * d + t] *
                       item_lat[static_cast<std::size_t>(j) * d + t];
            weight[j] = dot * inv_sqrt_d;
            max_aff = std::max(max_aff, weight[j]);
        }
        double total = 0.0;
        for (int j = 0; j < cfg.n_items; ++j) {
            weight[j] = std::exp(weight[j] - max_aff) * zipf[j];
            total += weight[j];
        }
        std::string user_id;
        std::snprintf(buf, sizeof buf, "u%05d", u);
        user_id = buf;
        for (std::int64_t t = 0; t < n_u; ++t) {
            double r = rng::uniform01(g) * total;
            int picked = -1;
            for (int j = 0; j < cfg.n_items; ++j) {
                if (weight[j] <= 0.0) continue;
                r -= weight[j];
                if (r <= 0.0) {
                    picked = j;
                    break;
                }
            }
            if (picked < 0) {  // numeric tail: take the last positive-mass item
                for (int j = cfg.n_items - 1; j >= 0; --j)
                    if (weight[j] > 0.0) {
                        picked = j;
                        break;
                    }
            }
            total -= weight[picked];
            weight[picked] = 0.0;  // without replacement within a user
            RawRecord rec;
            rec.user = user_id;
            rec.item = out.items[picked].item;
            rec.timestamp = t + 1;
            out.interactions.records.push_back(std::move(rec));
        }
    }
    return out;
}

void write_interactions_tsv(const std::string& path, const RawInteractions& raw) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    for (const RawRecord& r : raw.records) {
        f << r.user << '\t' << r.item << '\t' << r.timestamp;
        if (r.rating) f << '\t' << *r.rating;
        f << '\n';
    }
}

void write_item_metadata_tsv(const std::string& path, const std::vector<ItemMeta>& items) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    char buf[64];
    for (const ItemMeta& m : items) {
        std::snprintf(buf, sizeof buf, "%.2f", m.price);
        f << m.item << '\t' << m.category << '\t' << buf << '\n';
    }
}

}  // namespace morec
