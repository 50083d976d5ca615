#include "nde/pipeline.hpp"

#include <chrono>
#include <exception>
#include <numeric>

#include "nde/errors.hpp"
#include "nde/ops.hpp"
#include "nde/random.hpp"

namespace nde {

namespace {

constexpr std::uint64_t kInitTag = 0x696e6974ULL;
constexpr std::uint64_t kShuffleTag = 0x73687566ULL;
constexpr std::uint64_t kChildTag = 0x6368696c64ULL;
constexpr std::size_t kPredictChunk = 512;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

// Runs body(i) for i in [0, n), optionally with OpenMP. The first exception is rethrown.
template <class Body>
void for_each_member(std::size_t n, bool parallel, Body&& body) {
    std::exception_ptr error;
    const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic, 1) if (parallel)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
        try {
            body(static_cast<std::size_t>(i));
        } catch (...) {
#pragma omp critical(nde_member_error)
            if (!error) error = std::current_exception();
        }
    }
    if (error) std::rethrow_exception(error);
}

}  // namespace

std::string to_string(Strategy s) {
    switch (s) {
        case Strategy::Single: return "single";
        case Strategy::Standard: return "standard";
        case Strategy::Noisy: return "noisy";
        case Strategy::Snapshot: return "snapshot";
    }
    return "unknown";
}

Strategy parse_strategy(const std::string& name) {
    if (name == "single") return Strategy::Single;
    if (name == "standard") return Strategy::Standard;
    if (name == "noisy") return Strategy::Noisy;
    if (name == "snapshot") return Strategy::Snapshot;
    throw ConfigError("strategy", "unknown strategy '" + name + "' (expected single, standard, noisy or snapshot)");
}

void TrainBudget::validate() const {
    if (parent_epochs == 0) throw ConfigError("train.parent_epochs", "must be positive");
    if (child_epochs == 0) throw ConfigError("train.child_epochs", "must be positive");
    if (batch_size == 0) throw ConfigError("train.batch_size", "must be positive");
    if (ensemble_size == 0) throw ConfigError("train.members", "must be positive");
}

std::vector<std::string> TrainBudget::warnings() const {
    std::vector<std::string> out;
    if (child_epochs > parent_epochs)
        out.push_back("child_epochs (" + std::to_string(child_epochs) + ") exceeds parent_epochs (" +
                      std::to_string(parent_epochs) + "); the noisy ensemble saves no training time");
    return out;
}

std::size_t EpochLedger::total() const {
    return std::accumulate(member_epochs.begin(), member_epochs.end(), shared_epochs);
}

LrSchedule cosine_epochs(double lr_max, double lr_min, std::size_t epochs) {
    return [schedule = CosineSchedule(lr_max, lr_min, epochs)](std::size_t e) { return schedule.lr_at(e); };
}

TrainTrace train(Model& model, const Dataset& data, std::size_t epochs, const LrSchedule& schedule,
                 const SgdConfig& sgd, std::size_t batch_size, std::uint64_t shuffle_seed,
                 const EpochCallback& on_epoch_end) {
    if (data.size() == 0) throw InputError("train: empty dataset");
    if (epochs == 0) throw ConfigError("train.epochs", "must be at least 1");
    data.validate();
    const auto start = Clock::now();
    const BatchSampler sampler(data.size(), batch_size, shuffle_seed);
    Sgd optimizer(model, sgd);
    TrainTrace trace;
    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        const double lr = schedule(epoch);
        double loss_sum = 0.0;
        std::size_t correct = 0;
        for (const auto& batch : sampler.epoch(epoch)) {
            const Tensor x = data.batch_inputs(batch);
            const std::vector<ClassId> y = data.batch_labels(batch);
            model.zero_grad();
            const Tensor logits = model.forward(x);
            const Tensor loss = cross_entropy(logits, y);
            loss.backward();
            optimizer.step(model, lr);

            loss_sum += loss.item() * static_cast<double>(batch.size());
            const auto pred = predicted_classes(ProbMatrix::from_tensor(logits.detach()));
            for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == y[i];
        }
        const auto n = static_cast<double>(data.size());
        trace.epochs.push_back({epoch, lr, loss_sum / n, static_cast<double>(correct) / n});
        if (on_epoch_end) on_epoch_end(epoch + 1, model);
    }
    trace.wall_clock_s = seconds_since(start);
    return trace;
}

std::uint64_t init_seed_for(std::uint64_t base_seed, std::size_t k) { return mix64(child_seed(base_seed, k) ^ kInitTag); }

std::uint64_t shuffle_seed_for(std::uint64_t model_seed) { return mix64(model_seed ^ kShuffleTag); }

std::uint64_t noisy_child_seed(std::uint64_t base_seed, std::size_t i) { return child_seed(base_seed ^ kChildTag, i); }

ParentResult train_parent(const ArchSpec& arch, const Dataset& data, const TrainSettings& settings,
                          std::uint64_t base_seed) {
    settings.budget.validate();
    const std::uint64_t seed = init_seed_for(base_seed, 0);
    Model model = build_model(arch, seed);
    TrainTrace trace = train(model, data, settings.budget.parent_epochs,
                             cosine_epochs(settings.lr_max, settings.lr_min, settings.budget.parent_epochs), settings.sgd,
                             settings.budget.batch_size, shuffle_seed_for(seed));
    return {std::move(model), std::move(trace)};
}

EnsembleBundle spawn_children(const Model& parent, const Dataset& data, const TrainSettings& settings,
                              const NoiseSpec& noise, std::uint64_t base_seed) {
    settings.budget.validate();
    noise.validate();
    const std::size_t m = settings.budget.ensemble_size;
    const ParamVector theta = flatten(parent);

    EnsembleBundle bundle;
    bundle.strategy = Strategy::Noisy;
    bundle.arch = parent.arch();
    bundle.member_seeds.resize(m);
    for (std::size_t i = 0; i < m; ++i) bundle.member_seeds[i] = noisy_child_seed(base_seed, i);

    std::vector<std::optional<Model>> children(m);
    bundle.member_traces.resize(m);
    const auto start = Clock::now();
    for_each_member(m, settings.parallel_members, [&](std::size_t i) {
        Model child = build_model(parent.arch(), 0);
        unflatten(child, perturb(theta, noise.with_seed(bundle.member_seeds[i])));
        bundle.member_traces[i] =
            train(child, data, settings.budget.child_epochs,
                  cosine_epochs(settings.lr_max, settings.lr_min, settings.budget.child_epochs), settings.sgd,
                  settings.budget.batch_size, shuffle_seed_for(bundle.member_seeds[i]));
        children[i] = std::move(child);
    });
    bundle.wall_clock.members_s = seconds_since(start);
    for (auto& c : children) bundle.members.push_back(std::move(*c));
    bundle.ledger.member_epochs.assign(m, settings.budget.child_epochs);
    return bundle;
}

EnsembleBundle run_noisy_deep_ensemble(const ArchSpec& arch, const Dataset& data, const TrainSettings& settings,
                                       const NoiseSpec& noise, std::uint64_t base_seed) {
    noise.validate();
    ParentResult parent = train_parent(arch, data, settings, base_seed);
    EnsembleBundle bundle = spawn_children(parent.model, data, settings, noise, base_seed);
    bundle.ledger.shared_epochs = settings.budget.parent_epochs;
    bundle.wall_clock.parent_s = parent.trace.wall_clock_s;
    bundle.parent_trace = std::move(parent.trace);
    bundle.parent = std::move(parent.model);
    return bundle;
}

EnsembleBundle run_standard_ensemble(const ArchSpec& arch, const Dataset& data, const TrainSettings& settings,
                                     std::uint64_t base_seed) {
    settings.budget.validate();
    const std::size_t m = settings.budget.ensemble_size;
    const std::size_t epochs = settings.budget.parent_epochs;
    EnsembleBundle bundle;
    bundle.strategy = Strategy::Standard;
    bundle.arch = arch;
    bundle.member_traces.resize(m);
    for (std::size_t k = 0; k < m; ++k) bundle.member_seeds.push_back(init_seed_for(base_seed, k));

    std::vector<std::optional<Model>> models(m);
    const auto start = Clock::now();
    for_each_member(m, settings.parallel_members, [&](std::size_t k) {
        Model model = build_model(arch, bundle.member_seeds[k]);
        bundle.member_traces[k] = train(model, data, epochs, cosine_epochs(settings.lr_max, settings.lr_min, epochs),
                                        settings.sgd, settings.budget.batch_size,
                                        shuffle_seed_for(bundle.member_seeds[k]));
        models[k] = std::move(model);
    });
    bundle.wall_clock.members_s = seconds_since(start);
    for (auto& mdl : models) bundle.members.push_back(std::move(*mdl));
    bundle.ledger.member_epochs.assign(m, epochs);
    return bundle;
}

EnsembleBundle run_single(const ArchSpec& arch, const Dataset& data, const TrainSettings& settings,
                          std::uint64_t base_seed) {
    TrainSettings one = settings;
    one.budget.ensemble_size = 1;
    EnsembleBundle bundle = run_standard_ensemble(arch, data, one, base_seed);
    bundle.strategy = Strategy::Single;
    return bundle;
}

EnsembleBundle run_snapshot_ensemble(const ArchSpec& arch, const Dataset& data, const TrainSettings& settings,
                                     std::size_t total_epochs, std::size_t members, std::uint64_t base_seed) {
    if (members == 0) throw ConfigError("train.members", "must be positive");
    if (total_epochs == 0 || total_epochs % members != 0)
        throw ConfigError("train.snapshot_epochs", "snapshot budget " + std::to_string(total_epochs) +
                                                       " is not divisible by " + std::to_string(members) + " members");
    const std::size_t cycle = total_epochs / members;
    const CyclicCosineSchedule schedule(settings.lr_max, settings.lr_min, cycle, members);

    EnsembleBundle bundle;
    bundle.strategy = Strategy::Snapshot;
    bundle.arch = arch;
    const std::uint64_t seed = init_seed_for(base_seed, 0);
    Model model = build_model(arch, seed);
    bundle.parent_trace = train(
        model, data, total_epochs, [&](std::size_t e) { return schedule.lr_at(e); }, settings.sgd,
        settings.budget.batch_size, shuffle_seed_for(seed), [&](std::size_t done, const Model& current) {
            if (done % cycle != 0) return;
            bundle.members.push_back(current.clone());
            bundle.checkpoint_epochs.push_back(done);
            bundle.member_seeds.push_back(seed);
        });
    bundle.wall_clock.members_s = bundle.parent_trace.wall_clock_s;
    bundle.ledger.member_epochs.assign(members, cycle);
    return bundle;
}

ProbMatrix predict_proba(const Model& model, const Tensor& inputs) {
    NoGradGuard no_grad;
    const std::size_t n = inputs.dim(0);
    const std::size_t width = inputs.numel() / n;
    ProbMatrix out{n, model.arch().num_classes, {}};
    out.values.reserve(n * out.classes);
    for (std::size_t start = 0; start < n; start += kPredictChunk) {
        const std::size_t rows = std::min(kPredictChunk, n - start);
        Shape shape = inputs.shape();
        shape[0] = rows;
        const auto first = inputs.data().begin() + static_cast<std::ptrdiff_t>(start * width);
        const Tensor chunk(shape, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(rows * width)));
        const Tensor probs = softmax(model.forward(chunk));
        if (probs.dim(1) != out.classes) throw DimensionError("predict_proba: unexpected class count");
        out.values.insert(out.values.end(), probs.data().begin(), probs.data().end());
    }
    return out;
}

ProbMatrix predict_proba(const Model& model, const Dataset& data) { return predict_proba(model, data.all_inputs()); }

ProbMatrix average_probabilities(std::span<const ProbMatrix> members) {
    if (members.empty()) throw InputError("average_probabilities: no members");
    ProbMatrix out{members[0].rows, members[0].classes, std::vector<double>(members[0].values.size(), 0.0)};
    for (const auto& m : members) {
        if (m.rows != out.rows || m.classes != out.classes)
            throw DimensionError("average_probabilities: members disagree on shape");
        for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] += m.values[i];
    }
    const double inv = 1.0 / static_cast<double>(members.size());
    for (double& v : out.values) v *= inv;
    return out;
}

ProbMatrix ensemble_predict(const EnsembleBundle& bundle, const Tensor& inputs) {
    std::vector<ProbMatrix> probs;
    probs.reserve(bundle.size());
    for (const auto& m : bundle.members) probs.push_back(predict_proba(m, inputs));
    return average_probabilities(probs);
}

ProbMatrix ensemble_predict(const EnsembleBundle& bundle, const Dataset& data) {
    return ensemble_predict(bundle, data.all_inputs());
}

double epoch_budget_ratio(const TrainBudget& noisy) {
    if (noisy.parent_epochs == 0 || noisy.child_epochs == 0 || noisy.ensemble_size == 0)
        throw ConfigError("train", "budget entries must be positive");
    const auto m = static_cast<double>(noisy.ensemble_size);
    return (static_cast<double>(noisy.parent_epochs) + m * static_cast<double>(noisy.child_epochs)) /
           (m * static_cast<double>(noisy.parent_epochs));
}

double bundle_budget_ratio(const EnsembleBundle& bundle, std::size_t reference_epochs) {
    if (bundle.size() == 0 || reference_epochs == 0) throw UsageError("bundle_budget_ratio: empty bundle or reference");
    return static_cast<double>(bundle.ledger.total()) / static_cast<double>(bundle.size() * reference_epochs);
}

Evaluation evaluate_bundle(const EnsembleBundle& bundle, const Dataset& test, std::size_t reference_epochs,
                           std::size_t ece_bins) {
    Evaluation out;
    const Tensor inputs = test.all_inputs();
    for (const auto& m : bundle.members) out.member_probs.push_back(predict_proba(m, inputs));
    out.ensemble_probs = average_probabilities(out.member_probs);
    out.report = evaluate(out.member_probs, out.ensemble_probs, test.labels, ece_bins);
    out.report.budget_ratio = bundle_budget_ratio(bundle, reference_epochs);
    return out;
}

}  // namespace nde
