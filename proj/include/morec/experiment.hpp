#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "morec/dataset.hpp"
#include "morec/metrics.hpp"
#include "morec/trainer.hpp"

namespace morec {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SweepEntry {
    std::string label;
    CoordinatorMode mode = CoordinatorMode::pi;
    std::vector<double> rho;       // pi mode: non-accuracy preferences
    std::vector<double> rho_full;  // static mode: full weights, accuracy first
    std::optional<double> target_loss;  // nullopt -> auto
    double target_scale = 1.0;
};

struct DatasetConfig {
    std::optional<SynthConfig> synth;
    std::string interactions_path;
    std::string items_path;
    bool has_header = false;
    int rating_column = -1;
    double rating_threshold = 3.0;
    int kcore_k = 5;
    int n_buckets = 10;
};

struct ExperimentConfig {
    std::uint64_t seed = 42;
    std::string out_dir = "out";
    DatasetConfig dataset;
    TrainConfig backbone;       // backbone + coordinator defaults shared by entries
    int pretrain_max_epochs = 50;
    int pretrain_patience = 5;
    int pretrain_batch_size = 512;
    std::vector<SweepEntry> sweep;
};

ExperimentConfig load_experiment_config(const std::string& path);
ExperimentConfig parse_experiment_config(const std::string& json_text);

// Stable 64-bit digest of a canonical JSON rendering.
std::uint64_t config_digest(const std::string& canonical_json);
std::string digest_hex(std::uint64_t digest);

// Digest of the parts that determine the pretrained base model.
std::uint64_t pretrain_digest(const ExperimentConfig& cfg);
std::uint64_t full_digest(const ExperimentConfig& cfg);

struct PreparedData {
    InteractionDataset dataset;
    ItemCatalog catalog;
    bool kcore_warning = false;
};

PreparedData prepare_data(const ExperimentConfig& cfg);

struct PretrainOutcome {
    MfModel model;
    double converged_loss = 0.0;
    bool cache_hit = false;
    std::string checkpoint_path;
};

// Pretrain the backbone or load it from the digest-keyed cache under
// <out>/cache/.
PretrainOutcome ensure_pretrained(const ExperimentConfig& cfg, const PreparedData& data);

struct ExperimentResult {
    SolutionSet solutions;
    std::size_t selected = 0;
    std::string out_dir;
};

// prep -> pretrain (cached by digest) -> one continual run per sweep entry ->
// evaluation -> selection -> report bundle. Returns the process exit code.
int run_experiment(const ExperimentConfig& cfg, int jobs = 1,
                   ExperimentResult* result_out = nullptr);

// Re-assemble the report bundle from per-entry artifacts already on disk.
int assemble_report(const ExperimentConfig& cfg, ExperimentResult* result_out = nullptr);

// MOREC_LOG: 0 = quiet, 1 = info (default), 2 = debug.
int log_level();
void log_info(const std::string& msg);
void log_debug(const std::string& msg);

}  // namespace morec
