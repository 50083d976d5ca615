#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nde/data.hpp"
#include "nde/metrics.hpp"
#include "nde/models.hpp"
#include "nde/perturbation.hpp"
#include "nde/pipeline.hpp"

namespace nde {

struct DatasetConfig {
    std::string name = "blobs";  // blobs | mnist | cifar10
    std::filesystem::path path;
    std::filesystem::path images;  // mnist override
    std::filesystem::path labels;  // mnist override
    std::size_t subset = 0;        // 0 = all samples
    double split_ratio = 0.8;
    std::size_t blob_classes = 3;
    std::size_t blob_samples = 100;
    std::size_t blob_dim = 2;
    double blob_spread = 1.0;
    std::uint64_t blob_seed = 0;
};

/// One experiment. Built from a flat JSON object with dotted keys
/// ("train.parent_epochs", "noise.beta", ...); missing keys take defaults.
struct RunConfig {
    DatasetConfig dataset;
    ArchKind arch = ArchKind::Mlp;
    std::vector<std::size_t> hidden{256};
    Strategy strategy = Strategy::Single;
    TrainSettings train;
    std::optional<NoiseSpec> noise;
    std::size_t snapshot_epochs = 0;  // 0 = train.parent_epochs
    std::uint64_t seed = 0;
    std::filesystem::path out = "runs/default";
    std::size_t ece_bins = kDefaultEceBins;

    static RunConfig from_flat_json(const nlohmann::json& flat);
    nlohmann::ordered_json to_flat_json() const;
    // FNV-1a over the canonical config, excluding the output directory.
    std::string hash() const;
    void validate() const;
    std::size_t members() const;
};

std::vector<std::string> known_config_keys();

struct PreparedData {
    TrainTestSplit split;
    ArchSpec arch;
};

PreparedData prepare_data(const RunConfig& config);

/// One CSV row per run.
struct ReportRow {
    std::string config_hash;
    std::string strategy;
    std::uint64_t seed = 0;
    std::size_t members = 0;
    double alpha = 0.0;
    double beta = 0.0;
    double accuracy = 0.0;
    double ece = 0.0;
    double nll = 0.0;
    double mean_disagreement = 0.0;
    double mean_kl = 0.0;
    double budget_ratio = 0.0;
    double wall_clock_s = 0.0;

    static std::string csv_header();
    std::string to_csv() const;
    static ReportRow from_csv(const std::string& line);
};

struct RunResult {
    MetricsReport report;
    ReportRow row;
    double parent_accuracy = -1.0;  // noisy only
};

/// A parent trained for `seed` that may be reused by several noisy runs.
struct ParentCache {
    std::uint64_t seed = 0;
    std::size_t epochs = 0;
    std::optional<ParentResult> parent;
};

/// Executes the configured strategy and writes manifest.json, report.json,
/// report.csv and checkpoints/ under config.out.
RunResult run_experiment(const RunConfig& config);
RunResult run_experiment(const RunConfig& config, const PreparedData& data, ParentCache* cache = nullptr);

/// One noisy run per (alpha, beta) cell under out/alpha_<a>_beta_<b>; writes out/sweep_noise.csv.
std::vector<ReportRow> sweep_noise(const RunConfig& config, const std::vector<double>& alphas,
                                   const std::vector<double>& betas);

struct MemberSummary {
    std::size_t members = 0;
    std::size_t repeats = 0;
    double accuracy_mean = 0.0;
    double accuracy_std = 0.0;
    double mean_kl = 0.0;
    double mean_disagreement = 0.0;
};

/// `repeats` runs with seeds seed, seed+1, ... for each M under out/m<M>_r<r>;
/// writes out/sweep_members.csv (per run) and out/sweep_members_summary.csv.
std::vector<MemberSummary> sweep_members(const RunConfig& config, const std::vector<std::size_t>& member_counts,
                                         std::size_t repeats);

/// Collects report.csv rows from every run directory under `roots`.
std::vector<ReportRow> collect_reports(const std::vector<std::filesystem::path>& roots);

}  // namespace nde
