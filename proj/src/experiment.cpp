#include "morec/experiment.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "morec/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace morec {

int log_level() {
    static const int level = [] {
        const char* env = std::getenv("MOREC_LOG");
        if (!env || !*env) return 1;
        return std::atoi(env);
    }();
    return level;
}

void log_info(const std::string& msg) {
    if (log_level() >= 1) std::fprintf(stderr, "[morec] %s\n", msg.c_str());
}

void log_debug(const std::string& msg) {
    if (log_level() >= 2) std::fprintf(stderr, "[morec:debug] %s\n", msg.c_str());
}

namespace {

template <typename T>
T require(const json& j, const std::string& key, const std::string& context) {
    if (!j.contains(key))
        throw ConfigError("config: missing required field '" + context + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError("config: bad value for '" + context + key + "': " + e.what());
    }
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback, const std::string& context) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError("config: bad value for '" + context + key + "': " + e.what());
    }
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_text(const std::string& path, const std::string& content) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << content;
    if (!f) throw std::runtime_error("write failed: " + path);
}

json dataset_json(const DatasetConfig& d) {
    json j;
    if (d.synth) {
        j["synth"] = {{"n_users", d.synth->n_users},
                      {"n_items", d.synth->n_items},
                      {"n_interactions", d.synth->n_interactions},
                      {"n_categories", d.synth->n_categories},
                      {"zipf_exponent", d.synth->zipf_exponent},
                      {"price_min", d.synth->price_min},
                      {"price_max", d.synth->price_max},
                      {"latent_dim", d.synth->latent_dim}};
    } else {
        j["interactions"] = d.interactions_path;
        j["items"] = d.items_path;
        j["has_header"] = d.has_header;
        j["rating_column"] = d.rating_column;
        j["rating_threshold"] = d.rating_threshold;
    }
    j["kcore_k"] = d.kcore_k;
    j["n_buckets"] = d.n_buckets;
    return j;
}

json backbone_json(const TrainConfig& t) {
    return {{"dim", t.dim},
            {"use_bias", t.use_bias},
            {"init_std", t.init_std},
            {"lr", t.learning_rate},
            {"weight_decay", t.weight_decay},
            {"loss", t.loss_mode == LossMode::bpr ? "bpr" : "bce"},
            {"n_negatives", t.n_negatives}};
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }

    ExperimentConfig cfg;
    cfg.seed = get_or<std::uint64_t>(j, "seed", 42, "");
    cfg.out_dir = get_or<std::string>(j, "out", "out", "");

    const json jd = require<json>(j, "dataset", "");
    if (jd.contains("synth")) {
        const json js = jd.at("synth");
        SynthConfig s;
        s.n_users = require<int>(js, "n_users", "dataset.synth.");
        s.n_items = require<int>(js, "n_items", "dataset.synth.");
        s.n_interactions = require<std::int64_t>(js, "n_interactions", "dataset.synth.");
        s.n_categories = get_or<int>(js, "n_categories", 1, "dataset.synth.");
        s.zipf_exponent = get_or<double>(js, "zipf_exponent", 1.0, "dataset.synth.");
        s.price_min = get_or<double>(js, "price_min", 0.5, "dataset.synth.");
        s.price_max = get_or<double>(js, "price_max", 5.0, "dataset.synth.");
        s.latent_dim = get_or<int>(js, "latent_dim", 8, "dataset.synth.");
        cfg.dataset.synth = s;
    } else {
        cfg.dataset.interactions_path = require<std::string>(jd, "interactions", "dataset.");
        cfg.dataset.items_path = get_or<std::string>(jd, "items", "", "dataset.");
        cfg.dataset.has_header = get_or<bool>(jd, "has_header", false, "dataset.");
        cfg.dataset.rating_column = get_or<int>(jd, "rating_column", -1, "dataset.");
        cfg.dataset.rating_threshold = get_or<double>(jd, "rating_threshold", 3.0, "dataset.");
    }
    cfg.dataset.kcore_k = get_or<int>(jd, "kcore_k", 5, "dataset.");
    cfg.dataset.n_buckets = get_or<int>(jd, "n_buckets", 10, "dataset.");
    if (cfg.dataset.kcore_k < 1) throw ConfigError("config: dataset.kcore_k must be >= 1");

    const json jb = get_or<json>(j, "backbone", json::object(), "");
    TrainConfig& t = cfg.backbone;
    t.dim = get_or<int>(jb, "dim", 64, "backbone.");
    t.use_bias = get_or<bool>(jb, "use_bias", true, "backbone.");
    t.init_std = get_or<double>(jb, "init_std", 0.1, "backbone.");
    t.learning_rate = get_or<double>(jb, "lr", 0.001, "backbone.");
    t.weight_decay = get_or<double>(jb, "weight_decay", 0.0, "backbone.");
    t.n_negatives = get_or<int>(jb, "n_negatives", 10, "backbone.");
    const std::string loss = get_or<std::string>(jb, "loss", "bpr", "backbone.");
    if (loss == "bpr")
        t.loss_mode = LossMode::bpr;
    else if (loss == "bce")
        t.loss_mode = LossMode::bce;
    else
        throw ConfigError("config: backbone.loss must be 'bpr' or 'bce'");

    const json jp = get_or<json>(j, "pretrain", json::object(), "");
    cfg.pretrain_max_epochs = get_or<int>(jp, "max_epochs", 50, "pretrain.");
    cfg.pretrain_patience = get_or<int>(jp, "patience", 5, "pretrain.");
    cfg.pretrain_batch_size = get_or<int>(jp, "batch_size", 512, "pretrain.");

    const json jt = get_or<json>(j, "train", json::object(), "");
    t.max_epochs = get_or<int>(jt, "max_epochs", 30, "train.");
    t.patience = get_or<int>(jt, "patience", 5, "train.");
    t.batch_size = get_or<int>(jt, "batch_size", 512, "train.");
    t.eval_k = get_or<int>(jt, "eval_k", 10, "train.");
    t.pref.lambda = get_or<double>(jt, "lambda", 0.2, "train.");
    t.kp = get_or<double>(jt, "kp", 0.01, "train.");
    t.ki = get_or<double>(jt, "ki", 0.001, "train.");
    t.alpha_min = get_or<double>(jt, "alpha_min", 0.1, "train.");
    t.alpha_step = get_or<double>(jt, "alpha_step", 0.1, "train.");
    t.weight_floor = get_or<double>(jt, "weight_floor", 1e-4, "train.");
    t.seed = cfg.seed;
    t.objectives.clear();
    for (const auto& name :
         get_or<std::vector<std::string>>(jt, "objectives", {"accuracy"}, "train.")) {
        try {
            t.objectives.push_back(objective_from_name(name));
        } catch (const std::exception& e) {
            throw ConfigError(std::string("config: train.objectives: ") + e.what());
        }
    }

    if (!j.contains("sweep")) throw ConfigError("config: missing required field 'sweep'");
    const json jsweep = j.at("sweep");
    if (!jsweep.is_array() || jsweep.empty())
        throw ConfigError("config: sweep must be a non-empty array");
    for (std::size_t i = 0; i < jsweep.size(); ++i) {
        const json& je = jsweep.at(i);
        const std::string ctx = "sweep[" + std::to_string(i) + "].";
        SweepEntry e;
        e.label = require<std::string>(je, "label", ctx);
        const std::string mode = get_or<std::string>(je, "mode", "pi", ctx);
        if (mode == "pi")
            e.mode = CoordinatorMode::pi;
        else if (mode == "static")
            e.mode = CoordinatorMode::static_weights;
        else
            throw ConfigError("config: " + ctx + "mode must be 'pi' or 'static'");
        e.rho = get_or<std::vector<double>>(je, "rho", {}, ctx);
        e.rho_full = get_or<std::vector<double>>(je, "rho_full", {}, ctx);
        if (je.contains("target_loss")) {
            const json& jtl = je.at("target_loss");
            if (jtl.is_string()) {
                if (jtl.get<std::string>() != "auto")
                    throw ConfigError("config: " + ctx + "target_loss must be a number or 'auto'");
            } else {
                e.target_loss = jtl.get<double>();
            }
        }
        e.target_scale = get_or<double>(je, "target_scale", 1.0, ctx);
        cfg.sweep.push_back(std::move(e));
    }

    for (std::size_t i = 0; i < cfg.sweep.size(); ++i)
        for (std::size_t k = i + 1; k < cfg.sweep.size(); ++k)
            if (cfg.sweep[i].label == cfg.sweep[k].label)
                throw ConfigError("config: duplicate sweep label '" + cfg.sweep[i].label + "'");
    return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_experiment_config(ss.str());
}

std::uint64_t config_digest(const std::string& canonical_json) {
    return rng::fnv1a(canonical_json);
}

std::string digest_hex(std::uint64_t digest) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, digest);
    return buf;
}

std::uint64_t pretrain_digest(const ExperimentConfig& cfg) {
    json j;
    j["dataset"] = dataset_json(cfg.dataset);
    j["backbone"] = backbone_json(cfg.backbone);
    j["pretrain"] = {{"max_epochs", cfg.pretrain_max_epochs},
                     {"patience", cfg.pretrain_patience},
                     {"batch_size", cfg.pretrain_batch_size}};
    j["seed"] = cfg.seed;
    return config_digest(j.dump());
}

std::uint64_t full_digest(const ExperimentConfig& cfg) {
    json j;
    j["pretrain_digest"] = digest_hex(pretrain_digest(cfg));
    const TrainConfig& t = cfg.backbone;
    json objectives = json::array();
    for (Objective o : t.objectives) objectives.push_back(objective_name(o));
    j["train"] = {{"max_epochs", t.max_epochs},   {"patience", t.patience},
                  {"batch_size", t.batch_size},   {"eval_k", t.eval_k},
                  {"lambda", t.pref.lambda},      {"kp", t.kp},
                  {"ki", t.ki},                   {"alpha_min", t.alpha_min},
                  {"alpha_step", t.alpha_step},   {"weight_floor", t.weight_floor},
                  {"objectives", objectives}};
    json sweep = json::array();
    for (const SweepEntry& e : cfg.sweep) {
        json je = {{"label", e.label},
                   {"mode", e.mode == CoordinatorMode::pi ? "pi" : "static"},
                   {"rho", e.rho},
                   {"rho_full", e.rho_full},
                   {"target_scale", e.target_scale}};
        if (e.target_loss) je["target_loss"] = *e.target_loss;
        sweep.push_back(std::move(je));
    }
    j["sweep"] = std::move(sweep);
    return config_digest(j.dump());
}

PreparedData prepare_data(const ExperimentConfig& cfg) {
    PreparedData out;
    RawInteractions raw;
    std::vector<ItemMeta> metadata;

    if (cfg.dataset.synth) {
        SynthResult synth = synth_generate(*cfg.dataset.synth, cfg.seed);
        raw = std::move(synth.interactions);
        metadata = std::move(synth.items);
    } else {
        ColumnMap fmt;
        fmt.has_header = cfg.dataset.has_header;
        fmt.rating_column = cfg.dataset.rating_column;
        fmt.rating_threshold = cfg.dataset.rating_threshold;
        raw = load_interactions(cfg.dataset.interactions_path, fmt);
        if (!cfg.dataset.items_path.empty())
            metadata = load_item_metadata(cfg.dataset.items_path);
    }

    raw = kcore_filter(raw, cfg.dataset.kcore_k);
    out.kcore_warning = raw.kcore_warning;
    if (raw.records.empty())
        throw std::runtime_error("prepare_data: no interactions left after filtering");

    out.dataset = leave_one_out_split(raw);
    if (out.dataset.valid.empty() || out.dataset.test.empty())
        throw std::runtime_error("prepare_data: no users eligible for evaluation");
    out.catalog = build_catalog(metadata, out.dataset,
                                std::min(cfg.dataset.n_buckets, out.dataset.n_items));
    return out;
}

PretrainOutcome ensure_pretrained(const ExperimentConfig& cfg, const PreparedData& data) {
    const std::uint64_t digest = pretrain_digest(cfg);
    const fs::path cache_dir = fs::path(cfg.out_dir) / "cache";
    fs::create_directories(cache_dir);
    const fs::path ckpt = cache_dir / ("pretrain_" + digest_hex(digest) + ".ckpt");
    const fs::path meta = cache_dir / ("pretrain_" + digest_hex(digest) + ".json");

    PretrainOutcome out;
    out.checkpoint_path = ckpt.string();
    if (fs::exists(ckpt) && fs::exists(meta)) {
        std::uint64_t stored = 0;
        out.model = load_checkpoint(ckpt.string(), &stored);
        if (stored == digest) {
            std::ifstream f(meta);
            json jm = json::parse(f);
            out.converged_loss = jm.at("converged_loss").get<double>();
            out.cache_hit = true;
            log_info("pretrain cache hit: " + ckpt.string());
            return out;
        }
    }

    TrainConfig pcfg = cfg.backbone;
    pcfg.objectives = {Objective::accuracy};
    pcfg.mode = CoordinatorMode::pi;
    pcfg.pref.rho.clear();
    pcfg.rho_full.clear();
    pcfg.max_epochs = cfg.pretrain_max_epochs;
    pcfg.patience = cfg.pretrain_patience;
    pcfg.batch_size = cfg.pretrain_batch_size;
    pcfg.seed = cfg.seed;

    MfModel fresh = make_model(data.dataset.n_users, data.dataset.n_items, pcfg.dim,
                               pcfg.use_bias, pcfg.init_std, cfg.seed);
    log_info("pretraining backbone (" + std::to_string(pcfg.max_epochs) + " epochs max)");
    PretrainResult pre = pretrain(std::move(fresh), data.dataset, data.catalog, pcfg);
    out.model = std::move(pre.model);
    out.converged_loss = pre.converged_loss;

    save_checkpoint(ckpt.string(), out.model, digest);
    json jm = {{"converged_loss", out.converged_loss}, {"best_epoch", pre.best_epoch}};
    write_text(meta.string(), jm.dump(2));
    return out;
}

namespace {

void write_alpha_trace(const std::string& path, const TrainHistory& history,
                       std::uint64_t digest) {
    std::ostringstream csv;
    csv << "# config_digest=" << digest_hex(digest) << "\n";
    csv << "step,err,err_sum,alpha_acc\n";
    for (const AlphaTraceRow& row : history.alpha_trace)
        csv << row.step << ',' << format_double(row.err) << ',' << format_double(row.err_sum)
            << ',' << format_double(row.alpha_acc) << "\n";
    write_text(path, csv.str());
}

TrainConfig entry_config(const ExperimentConfig& cfg, const SweepEntry& entry) {
    TrainConfig t = cfg.backbone;
    t.mode = entry.mode;
    if (entry.mode == CoordinatorMode::pi) {
        t.pref.rho = entry.rho;
        if (t.pref.rho.empty() && t.objectives.size() > 1)
            throw ConfigError("config: sweep entry '" + entry.label +
                              "' needs rho for pi mode");
    } else {
        t.rho_full = entry.rho_full;
        if (t.rho_full.empty())
            throw ConfigError("config: sweep entry '" + entry.label +
                              "' needs rho_full for static mode");
    }
    t.target_loss = entry.target_loss;
    t.target_scale = entry.target_scale;
    return t;
}

Solution run_entry(const ExperimentConfig& cfg, const SweepEntry& entry,
                   const PreparedData& data, const MfModel& base_model, double converged_loss,
                   std::uint64_t digest) {
    const TrainConfig tcfg = entry_config(cfg, entry);
    validate_train_config(tcfg);
    const double target = tcfg.target_loss ? *tcfg.target_loss
                                           : converged_loss * tcfg.target_scale;

    log_info("training sweep entry '" + entry.label + "' (target loss " +
             format_double(target) + ")");
    ContinualResult res = continual_train(base_model, data.dataset, data.catalog, tcfg, target);

    const fs::path entry_dir = fs::path(cfg.out_dir) / entry.label;
    fs::create_directories(entry_dir);

    std::ostringstream jsonl;
    jsonl << json{{"config_digest", digest_hex(digest)}}.dump() << "\n";
    for (const EpochRecord& rec : res.history.epochs) jsonl << rec.to_json() << "\n";
    write_text((entry_dir / "history.jsonl").string(), jsonl.str());
    write_alpha_trace((entry_dir / "alpha_trace.csv").string(), res.history, digest);
    save_checkpoint((entry_dir / "model.ckpt").string(), res.model, digest);

    Solution sol;
    sol.label = entry.label;
    sol.digest = digest;
    sol.report = evaluate(res.model, data.dataset, data.catalog, EvalSplit::test,
                          cfg.backbone.eval_k);
    const json eval_doc = {{"config_digest", digest_hex(digest)},
                           {"report", json::parse(sol.report.to_json())}};
    write_text((entry_dir / "eval.json").string(), eval_doc.dump());
    return sol;
}

// Reads an eval document, enforcing that its digest matches this config.
EvalReport read_eval_doc(const fs::path& path, std::uint64_t expected_digest) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("report: cannot open " + path.string());
    std::stringstream ss;
    ss << f.rdbuf();
    const json doc = json::parse(ss.str());
    if (doc.at("config_digest").get<std::string>() != digest_hex(expected_digest))
        throw std::runtime_error("report: " + path.string() +
                                 " belongs to a different config digest");
    return eval_report_from_json(doc.at("report").dump());
}

struct FrontierPair {
    std::string name;
    double (*x)(const EvalReport&);
    double (*y)(const EvalReport&);
    bool y_maximize;
};

std::vector<FrontierPair> frontier_pairs(const TrainConfig& t) {
    std::vector<FrontierPair> pairs;
    for (Objective o : t.objectives) {
        switch (o) {
            case Objective::revenue:
                pairs.push_back({"hit_vs_rhit", [](const EvalReport& r) { return r.hit; },
                                 [](const EvalReport& r) { return r.rhit; }, true});
                break;
            case Objective::fairness:
                pairs.push_back({"hit_vs_min_hit", [](const EvalReport& r) { return r.hit; },
                                 [](const EvalReport& r) { return r.min_hit; }, true});
                break;
            case Objective::alignment:
                pairs.push_back({"hit_vs_pop_kl", [](const EvalReport& r) { return r.hit; },
                                 [](const EvalReport& r) { return r.pop_kl; }, false});
                break;
            default:
                break;
        }
    }
    return pairs;
}

void emit_report_bundle(const ExperimentConfig& cfg, const SolutionSet& set,
                        std::size_t selected, std::uint64_t digest) {
    const fs::path out_dir(cfg.out_dir);
    fs::create_directories(out_dir);

    json jr;
    jr["config_digest"] = digest_hex(digest);
    jr["base"] = json::parse(set.base.to_json());
    json sols = json::array();
    for (std::size_t i = 0; i < set.entries.size(); ++i) {
        const Solution& s = set.entries[i];
        sols.push_back({{"label", s.label},
                        {"config_digest", digest_hex(s.digest)},
                        {"report", json::parse(s.report.to_json())},
                        {"imp", s.imp},
                        {"valid", s.valid},
                        {"selected", i == selected}});
    }
    jr["solutions"] = std::move(sols);
    jr["selected_label"] = set.entries[selected].label;
    write_text((out_dir / "report.json").string(), jr.dump(2));

    std::ostringstream table;
    table << "# config_digest=" << digest_hex(digest) << "\n";
    table << "label,hit,rhit,pop_kl,min_hit,imp,valid,selected\n";
    auto row = [&](const std::string& label, const EvalReport& r, double imp_value, bool valid,
                   bool is_selected) {
        table << label << ',' << format_double(r.hit) << ',' << format_double(r.rhit) << ','
              << format_double(r.pop_kl) << ',' << format_double(r.min_hit) << ','
              << format_double(imp_value) << ',' << (valid ? 1 : 0) << ','
              << (is_selected ? 1 : 0) << "\n";
    };
    row("base", set.base, 0.0, true, false);
    for (std::size_t i = 0; i < set.entries.size(); ++i)
        row(set.entries[i].label, set.entries[i].report, set.entries[i].imp,
            set.entries[i].valid, i == selected);
    write_text((out_dir / "table.csv").string(), table.str());

    std::ostringstream frontier;
    frontier << "# config_digest=" << digest_hex(digest) << "\n";
    frontier << "pair,label,x,y\n";
    for (const FrontierPair& pair : frontier_pairs(cfg.backbone)) {
        std::vector<std::vector<double>> points;
        points.reserve(set.entries.size());
        for (const Solution& s : set.entries)
            points.push_back({pair.x(s.report), pair.y(s.report)});
        for (std::size_t idx : pareto_frontier(points, {true, pair.y_maximize}))
            frontier << pair.name << ',' << set.entries[idx].label << ','
                     << format_double(points[idx][0]) << ',' << format_double(points[idx][1])
                     << "\n";
    }
    write_text((out_dir / "frontier.csv").string(), frontier.str());

    const fs::path selected_trace = out_dir / set.entries[selected].label / "alpha_trace.csv";
    if (fs::exists(selected_trace))
        fs::copy_file(selected_trace, out_dir / "alpha_trace.csv",
                      fs::copy_options::overwrite_existing);
}

SolutionSet finalize_solutions(const EvalReport& base_test, std::vector<Solution> entries) {
    SolutionSet set;
    set.base = base_test;
    set.entries = std::move(entries);
    for (Solution& s : set.entries) {
        s.valid = s.report.hit >= 0.97 * base_test.hit;
        s.imp = imp(base_test, s.report);
    }
    return set;
}

}  // namespace

int run_experiment(const ExperimentConfig& cfg, int jobs, ExperimentResult* result_out) {
    if (cfg.sweep.empty()) throw ConfigError("config: sweep must be non-empty");
    for (const SweepEntry& entry : cfg.sweep)
        validate_train_config(entry_config(cfg, entry));  // fail fast before training

    const std::uint64_t digest = full_digest(cfg);
    fs::create_directories(cfg.out_dir);
    if (cfg.dataset.synth) {
        // Materialize the synthetic inputs for auditability.
        SynthResult synth = synth_generate(*cfg.dataset.synth, cfg.seed);
        write_interactions_tsv((fs::path(cfg.out_dir) / "interactions.tsv").string(),
                               synth.interactions);
        write_item_metadata_tsv((fs::path(cfg.out_dir) / "items.tsv").string(), synth.items);
    }

    PreparedData data = prepare_data(cfg);
    log_info("dataset: " + std::to_string(data.dataset.n_users) + " users, " +
             std::to_string(data.dataset.n_items) + " items, " +
             std::to_string(data.dataset.train.size()) + " train interactions");
    if (data.kcore_warning) log_info("warning: k-core filtering removed all interactions");

    PretrainOutcome pre = ensure_pretrained(cfg, data);
    const EvalReport base_test =
        evaluate(pre.model, data.dataset, data.catalog, EvalSplit::test, cfg.backbone.eval_k);
    const json base_doc = {{"config_digest", digest_hex(digest)},
                           {"report", json::parse(base_test.to_json())}};
    write_text((fs::path(cfg.out_dir) / "base_eval.json").string(), base_doc.dump());

    std::vector<Solution> entries(cfg.sweep.size());
    if (jobs <= 1 || cfg.sweep.size() == 1) {
        for (std::size_t i = 0; i < cfg.sweep.size(); ++i)
            entries[i] = run_entry(cfg, cfg.sweep[i], data, pre.model, pre.converged_loss,
                                   digest);
    } else {
        // Entries are independent: each owns its model copy and output dir.
        std::mutex next_mutex;
        std::size_t next = 0;
        std::exception_ptr first_error;
        auto worker = [&] {
            while (true) {
                std::size_t i;
                {
                    std::lock_guard lock(next_mutex);
                    if (next >= cfg.sweep.size() || first_error) return;
                    i = next++;
                }
                try {
                    entries[i] = run_entry(cfg, cfg.sweep[i], data, pre.model,
                                           pre.converged_loss, digest);
                } catch (...) {
                    std::lock_guard lock(next_mutex);
                    if (!first_error) first_error = std::current_exception();
                    return;
                }
            }
        };
        std::vector<std::thread> pool;
        const int n_threads = std::min<int>(jobs, static_cast<int>(cfg.sweep.size()));
        for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (std::thread& t : pool) t.join();
        if (first_error) std::rethrow_exception(first_error);
    }

    SolutionSet set = finalize_solutions(base_test, std::move(entries));
    const std::size_t selected = select_solution(set);
    emit_report_bundle(cfg, set, selected, digest);
    log_info("selected solution: " + set.entries[selected].label);

    if (result_out) {
        result_out->solutions = std::move(set);
        result_out->selected = selected;
        result_out->out_dir = cfg.out_dir;
    }
    return 0;
}

int assemble_report(const ExperimentConfig& cfg, ExperimentResult* result_out) {
    const fs::path out_dir(cfg.out_dir);
    const fs::path base_path = out_dir / "base_eval.json";
    if (!fs::exists(base_path))
        throw std::runtime_error("report: missing " + base_path.string() +
                                 " (run 'train' first)");
    const std::uint64_t digest = full_digest(cfg);
    const EvalReport base_test = read_eval_doc(base_path, digest);

    std::vector<Solution> entries;
    for (const SweepEntry& entry : cfg.sweep) {
        const fs::path eval_path = out_dir / entry.label / "eval.json";
        if (!fs::exists(eval_path))
            throw std::runtime_error("report: missing " + eval_path.string());
        Solution s;
        s.label = entry.label;
        s.digest = digest;
        s.report = read_eval_doc(eval_path, digest);
        entries.push_back(std::move(s));
    }

    SolutionSet set = finalize_solutions(base_test, std::move(entries));
    const std::size_t selected = select_solution(set);
    emit_report_bundle(cfg, set, selected, digest);
    if (result_out) {
        result_out->solutions = std::move(set);
        result_out->selected = selected;
        result_out->out_dir = cfg.out_dir;
    }
    return 0;
}

}  // namespace morec
