#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nde/data.hpp"
#include "nde/metrics.hpp"
#include "nde/models.hpp"
#include "nde/optim.hpp"
#include "nde/perturbation.hpp"

namespace nde {

enum class Strategy { Single, Standard, Noisy, Snapshot };

std::string to_string(Strategy s);
Strategy parse_strategy(const std::string& name);

struct TrainBudget {
    std::size_t parent_epochs = 200;
    std::size_t child_epochs = 50;
    std::size_t batch_size = 64;
    std::size_t ensemble_size = 10;

    void validate() const;
    // Non-fatal oddities, e.g. children trained longer than the parent.
    std::vector<std::string> warnings() const;
};

/// Everything that shapes a training run apart from data, architecture and seed.
struct TrainSettings {
    TrainBudget budget;
    SgdConfig sgd;
    double lr_max = 0.1;
    double lr_min = 0.0;
    // Train independent members with OpenMP; results do not depend on this flag.
    bool parallel_members = true;
};

struct EpochStats {
    std::size_t epoch;
    double lr;
    double loss;      // mean training loss over the epoch's batches
    double accuracy;  // training accuracy over the epoch's batches
};

struct TrainTrace {
    std::vector<EpochStats> epochs;
    double wall_clock_s = 0.0;

    double final_loss() const { return epochs.empty() ? 0.0 : epochs.back().loss; }
};

using LrSchedule = std::function<double(std::size_t epoch)>;
using EpochCallback = std::function<void(std::size_t completed_epochs, const Model& model)>;

/// Mini-batch momentum SGD on cross-entropy. The learning rate for epoch e is
/// schedule(e); batches are reshuffled every epoch from `shuffle_seed`.
TrainTrace train(Model& model, const Dataset& data, std::size_t epochs, const LrSchedule& schedule,
                 const SgdConfig& sgd, std::size_t batch_size, std::uint64_t shuffle_seed,
                 const EpochCallback& on_epoch_end = {});

LrSchedule cosine_epochs(double lr_max, double lr_min, std::size_t epochs);

struct EpochLedger {
    std::size_t shared_epochs = 0;             // parent (noisy) trunk
    std::vector<std::size_t> member_epochs;    // epochs spent on each member alone

    std::size_t total() const;
};

struct PhaseTimes {
    double parent_s = 0.0;
    double members_s = 0.0;

    double total() const { return parent_s + members_s; }
};

struct EnsembleBundle {
    Strategy strategy = Strategy::Single;
    ArchSpec arch;
    std::vector<Model> members;
    std::vector<std::uint64_t> member_seeds;
    EpochLedger ledger;
    PhaseTimes wall_clock;

    std::optional<Model> parent;                 // noisy only
    TrainTrace parent_trace;                     // noisy and snapshot
    std::vector<TrainTrace> member_traces;       // single, standard, noisy
    std::vector<std::size_t> checkpoint_epochs;  // snapshot only

    std::size_t size() const { return members.size(); }
};

// Seeds for the k-th independently initialized model of a run.
std::uint64_t init_seed_for(std::uint64_t base_seed, std::size_t k);
std::uint64_t shuffle_seed_for(std::uint64_t model_seed);
// Seed of the i-th noisy child (drives its mask, noise and batch order).
std::uint64_t noisy_child_seed(std::uint64_t base_seed, std::size_t i);

struct ParentResult {
    Model model;
    TrainTrace trace;
};

/// Trains the parent for budget.parent_epochs with a cosine schedule.
ParentResult train_parent(const ArchSpec& arch, const Dataset& data, const TrainSettings& settings,
                          std::uint64_t base_seed);

/// Perturbs the parent M times and retrains each child for budget.child_epochs,
/// each with a fresh cosine schedule starting from lr_max.
EnsembleBundle spawn_children(const Model& parent, const Dataset& data, const TrainSettings& settings,
                              const NoiseSpec& noise, std::uint64_t base_seed);

EnsembleBundle run_noisy_deep_ensemble(const ArchSpec& arch, const Dataset& data, const TrainSettings& settings,
                                       const NoiseSpec& noise, std::uint64_t base_seed);
EnsembleBundle run_standard_ensemble(const ArchSpec& arch, const Dataset& data, const TrainSettings& settings,
                                     std::uint64_t base_seed);
EnsembleBundle run_single(const ArchSpec& arch, const Dataset& data, const TrainSettings& settings,
                          std::uint64_t base_seed);
/// One model on a cyclic cosine schedule of `members` cycles over `total_epochs`;
/// a checkpoint is kept at the end of every cycle.
EnsembleBundle run_snapshot_ensemble(const ArchSpec& arch, const Dataset& data, const TrainSettings& settings,
                                     std::size_t total_epochs, std::size_t members, std::uint64_t base_seed);

/// Softmax probabilities of one model, evaluated without recording a graph.
ProbMatrix predict_proba(const Model& model, const Tensor& inputs);
ProbMatrix predict_proba(const Model& model, const Dataset& data);

ProbMatrix average_probabilities(std::span<const ProbMatrix> members);
/// Uniform average of member probabilities.
ProbMatrix ensemble_predict(const EnsembleBundle& bundle, const Tensor& inputs);
ProbMatrix ensemble_predict(const EnsembleBundle& bundle, const Dataset& data);

/// (parent + M * child) / (M * parent): noisy ensemble epochs relative to a standard ensemble.
double epoch_budget_ratio(const TrainBudget& noisy);
/// Epochs consumed by `bundle` relative to M independent models of `reference_epochs`.
double bundle_budget_ratio(const EnsembleBundle& bundle, std::size_t reference_epochs);

struct Evaluation {
    std::vector<ProbMatrix> member_probs;
    ProbMatrix ensemble_probs;
    MetricsReport report;
};

Evaluation evaluate_bundle(const EnsembleBundle& bundle, const Dataset& test, std::size_t reference_epochs,
                           std::size_t ece_bins = kDefaultEceBins);

}  // namespace nde
