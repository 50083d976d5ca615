#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>

#include "nde/errors.hpp"
#include "nde/pipeline.hpp"
#include "support/check.hpp"

using namespace nde;
using nde::testing::Gen;

namespace {

struct Fixture {
    TrainTestSplit split;
    ArchSpec arch;
};

Fixture blobs(std::size_t classes = 3, double spread = 1.5, std::uint64_t seed = 1) {
    Fixture f{split_dataset(make_blobs(classes, 60, 4, spread, seed), 0.75, seed), {}};
    normalize_split(f.split);
    f.arch = ArchSpec{ArchKind::Mlp, 4, {12}, 0, 32, classes};
    return f;
}

TrainSettings small_settings(std::size_t parent, std::size_t child, std::size_t m) {
    TrainSettings s;
    s.budget = {parent, child, 16, m};
    return s;
}

bool same_weights(const Model& a, const Model& b) {
    const auto x = flatten(a).values, y = flatten(b).values;
    return x.size() == y.size() && std::memcmp(x.data(), y.data(), x.size() * sizeof(double)) == 0;
}

double distance(const Model& a, const Model& b) {
    const auto x = flatten(a).values, y = flatten(b).values;
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) d += (x[i] - y[i]) * (x[i] - y[i]);
    return std::sqrt(d);
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("separable blobs are learned within 20 epochs") {
    const Fixture f = blobs(2, 0.2, 4);
    Model m = build_model(f.arch, 3);
    train(m, f.split.train, 20, cosine_epochs(0.1, 0.0, 20), SgdConfig{}, 16, 1);
    CHECK(accuracy(predict_proba(m, f.split.test), f.split.test.labels) >= 0.99);
    CHECK(accuracy(predict_proba(m, f.split.train), f.split.train.labels) >= 0.99);
}

TEST_CASE("zero learning rate leaves weights unchanged") {
    const Fixture f = blobs();
    Model m = build_model(f.arch, 3);
    const Model before = m.clone();
    const TrainTrace t = train(m, f.split.train, 3, [](std::size_t) { return 0.0; }, SgdConfig{}, 16, 1);
    CHECK(same_weights(m, before));
    CHECK(t.epochs.size() == 3);
}

TEST_CASE("training is deterministic and records a trace") {
    const Fixture f = blobs();
    Model a = build_model(f.arch, 3), b = build_model(f.arch, 3);
    const auto ta = train(a, f.split.train, 4, cosine_epochs(0.1, 0.0, 4), SgdConfig{}, 16, 7);
    const auto tb = train(b, f.split.train, 4, cosine_epochs(0.1, 0.0, 4), SgdConfig{}, 16, 7);
    CHECK(same_weights(a, b));
    CHECK(ta.epochs.size() == 4);
    CHECK(ta.epochs[0].lr == 0.1);
    CHECK(ta.final_loss() == tb.final_loss());
    CHECK(ta.final_loss() < ta.epochs[0].loss);
}

TEST_CASE("training argument errors") {
    const Fixture f = blobs();
    Model m = build_model(f.arch, 3);
    Dataset empty;
    CHECK_THROWS_AS(train(m, empty, 1, cosine_epochs(0.1, 0, 1), SgdConfig{}, 4, 0), InputError);
    CHECK_THROWS_AS(train(m, f.split.train, 0, cosine_epochs(0.1, 0, 1), SgdConfig{}, 4, 0), ConfigError);
    CHECK_THROWS_AS(train(m, f.split.train, 1, cosine_epochs(0.1, 0, 1), SgdConfig{}, 10000, 0), ConfigError);
}

TEST_CASE("noisy ensemble ledger, parent and children") {
    const Fixture f = blobs();
    const NoiseSpec noise{NoiseDistribution::Uniform, 0.8, 0.1, 0};
    const EnsembleBundle b = run_noisy_deep_ensemble(f.arch, f.split.train, small_settings(6, 2, 3), noise, 5);
    CHECK(b.size() == 3);
    CHECK(b.strategy == Strategy::Noisy);
    CHECK(b.parent.has_value());
    CHECK(b.ledger.shared_epochs == 6);
    CHECK(b.ledger.total() == 6 + 3 * 2);
    CHECK(b.member_traces.size() == 3);
    for (const auto& t : b.member_traces) {
        CHECK(t.epochs.size() == 2);
        CHECK(t.epochs[0].lr == 0.1);  // fresh schedule restarts at lr_max
    }
    for (const auto& m : b.members) CHECK(m.arch() == f.arch);
    CHECK(b.member_seeds[0] != b.member_seeds[1]);
    CHECK(distance(b.members[0], b.members[1]) > 0.0);
}

TEST_CASE("degenerate noise: children start from the parent and diverge only through batch order") {
    const Fixture f = blobs();
    const NoiseSpec none{NoiseDistribution::Uniform, 0.0, 0.0, 0};
    TrainSettings s = small_settings(5, 2, 2);
    const ParentResult parent = train_parent(f.arch, f.split.train, s, 9);
    const ParamVector theta = flatten(parent.model);
    CHECK(perturb(theta, none.with_seed(noisy_child_seed(9, 0))).values == theta.values);

    const EnsembleBundle b = spawn_children(parent.model, f.split.train, s, none, 9);
    // Retrain a copy of the parent by hand with child 0's shuffle stream.
    Model manual = parent.model.clone();
    train(manual, f.split.train, 2, cosine_epochs(0.1, 0.0, 2), s.sgd, 16, shuffle_seed_for(b.member_seeds[0]));
    CHECK(same_weights(manual, b.members[0]));
    CHECK(distance(b.members[0], b.members[1]) > 0.0);
}

TEST_CASE("child results do not depend on execution order") {
    const Fixture f = blobs();
    const NoiseSpec noise{NoiseDistribution::Gaussian, 0.5, 0.05, 0};
    TrainSettings par = small_settings(4, 2, 3), ser = par;
    ser.parallel_members = false;
    const EnsembleBundle a = run_noisy_deep_ensemble(f.arch, f.split.train, par, noise, 2);
    const EnsembleBundle b = run_noisy_deep_ensemble(f.arch, f.split.train, ser, noise, 2);
    for (std::size_t i = 0; i < 3; ++i) CHECK(same_weights(a.members[i], b.members[i]));
}

TEST_CASE("single-member bundle predicts like its member") {
    const Fixture f = blobs();
    const NoiseSpec noise{NoiseDistribution::Uniform, 1.0, 0.05, 0};
    const EnsembleBundle b = run_noisy_deep_ensemble(f.arch, f.split.train, small_settings(3, 2, 1), noise, 1);
    CHECK(ensemble_predict(b, f.split.test).values == predict_proba(b.members[0], f.split.test).values);
}

TEST_CASE("standard ensemble") {
    const Fixture f = blobs();
    const TrainSettings s = small_settings(4, 1, 3);
    const EnsembleBundle b = run_standard_ensemble(f.arch, f.split.train, s, 2);
    CHECK(b.size() == 3);
    CHECK(b.ledger.total() == 3 * 4);
    CHECK(b.ledger.shared_epochs == 0);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = i + 1; j < 3; ++j) CHECK(distance(b.members[i], b.members[j]) > 0.0);

    const EnsembleBundle one = run_standard_ensemble(f.arch, f.split.train, small_settings(4, 1, 1), 2);
    const EnsembleBundle single = run_single(f.arch, f.split.train, s, 2);
    CHECK(single.size() == 1);
    CHECK(single.strategy == Strategy::Single);
    CHECK(same_weights(one.members[0], single.members[0]));
}

TEST_CASE("snapshot ensemble checkpoints at cycle ends") {
    const Fixture f = blobs();
    const TrainSettings s = small_settings(4, 1, 3);
    const EnsembleBundle b = run_snapshot_ensemble(f.arch, f.split.train, s, 12, 3, 2);
    CHECK(b.size() == 3);
    CHECK(b.checkpoint_epochs == std::vector<std::size_t>{4, 8, 12});
    CHECK(b.ledger.total() == 12);
    const auto& epochs = b.parent_trace.epochs;
    CHECK(epochs.size() == 12);
    for (std::size_t k : {0u, 4u, 8u}) CHECK(epochs[k].lr == 0.1);
    // Each checkpoint closes a cycle, where the within-cycle cosine has reached lr_min.
    const CyclicCosineSchedule sched(0.1, 0.0, 4, 3);
    const CosineSchedule cycle(0.1, 0.0, 4);
    for (std::size_t k = 0; k < 3; ++k) CHECK(cycle.lr_at(b.checkpoint_epochs[k] - 4 * k) == 0.0);
    CHECK(sched.lr_at_cycle_end() == 0.0);
    CHECK(sched.lr_at(12) == 0.0);
    CHECK(distance(b.members[0], b.members[1]) > 0.0);
    CHECK(distance(b.members[1], b.members[2]) > 0.0);
    CHECK_THROWS_AS(run_snapshot_ensemble(f.arch, f.split.train, s, 10, 3, 2), ConfigError);

    // One cycle is plain cosine training.
    const EnsembleBundle snap1 = run_snapshot_ensemble(f.arch, f.split.train, s, 4, 1, 2);
    const EnsembleBundle single = run_single(f.arch, f.split.train, s, 2);
    CHECK(same_weights(snap1.members[0], single.members[0]));
}

TEST_CASE("ensemble prediction examples") {
    const ProbMatrix a{1, 2, {1.0, 0.0}}, b{1, 2, {0.0, 1.0}};
    const std::vector<ProbMatrix> two{a, b};
    CHECK(average_probabilities(two).values == std::vector<double>{0.5, 0.5});
    const std::vector<ProbMatrix> same{a, a, a};
    CHECK(average_probabilities(same).values == a.values);
    const std::vector<ProbMatrix> mismatched{a, ProbMatrix{1, 3, {1, 0, 0}}};
    CHECK_THROWS_AS(average_probabilities(mismatched), DimensionError);
}

TEST_CASE("property: averaged rows are simplex points and order invariant") {
    Gen g(81);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t m = g.index(1, 5), rows = g.index(1, 20), classes = g.index(2, 8);
        std::vector<ProbMatrix> members;
        for (std::size_t i = 0; i < m; ++i) members.push_back({rows, classes, g.simplex_rows(rows, classes)});
        const ProbMatrix avg = average_probabilities(members);
        for (std::size_t r = 0; r < rows; ++r) {
            double total = 0.0;
            for (double p : avg.row(r)) {
                CHECK(p >= 0.0);
                total += p;
            }
            CHECK(std::abs(total - 1.0) < 1e-9);
        }
        std::vector<ProbMatrix> reversed(members.rbegin(), members.rend());
        const ProbMatrix back = average_probabilities(reversed);
        for (std::size_t i = 0; i < avg.values.size(); ++i) CHECK(std::abs(back.values[i] - avg.values[i]) < 1e-15);
    }
}

TEST_CASE("ensemble prediction rejects wrong input shape") {
    const Fixture f = blobs();
    const EnsembleBundle b = run_single(f.arch, f.split.train, small_settings(1, 1, 1), 0);
    CHECK_THROWS_AS(ensemble_predict(b, Tensor({2, 5})), DimensionError);
}

TEST_CASE("epoch budget ratio examples") {
    CHECK(epoch_budget_ratio({200, 50, 64, 10}) == 0.35);
    CHECK(epoch_budget_ratio({200, 50, 64, 2}) == 0.75);
    CHECK(epoch_budget_ratio({20, 20, 64, 4}) == 5.0 / 4.0);
    CHECK(TrainBudget{20, 30, 64, 4}.warnings().size() == 1);
    CHECK(TrainBudget{20, 5, 64, 4}.warnings().empty());
}

TEST_CASE("bundle ledger matches the declared budget for every strategy") {
    const Fixture f = blobs();
    const TrainSettings s = small_settings(4, 2, 2);
    const NoiseSpec noise{NoiseDistribution::Uniform, 0.5, 0.1, 0};
    const auto noisy = run_noisy_deep_ensemble(f.arch, f.split.train, s, noise, 0);
    CHECK(bundle_budget_ratio(noisy, 4) == epoch_budget_ratio(s.budget));
    CHECK(bundle_budget_ratio(run_standard_ensemble(f.arch, f.split.train, s, 0), 4) == 1.0);
    CHECK(bundle_budget_ratio(run_snapshot_ensemble(f.arch, f.split.train, s, 8, 2, 0), 4) == 1.0);
}

TEST_CASE("evaluation uses one test split for members and ensemble") {
    const Fixture f = blobs();
    const NoiseSpec noise{NoiseDistribution::Uniform, 0.5, 0.1, 0};
    const auto b = run_noisy_deep_ensemble(f.arch, f.split.train, small_settings(4, 2, 3), noise, 0);
    const Evaluation e = evaluate_bundle(b, f.split.test, 4);
    CHECK(e.member_probs.size() == 3);
    CHECK(e.ensemble_probs.rows == f.split.test.size());
    CHECK(e.report.member_accuracies.size() == 3);
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(e.report.member_accuracies[i] == accuracy(e.member_probs[i], f.split.test.labels));
    CHECK(e.report.disagreement.n == 3);
    CHECK(e.report.kl.n == 3);
}

TEST_CASE("small cnn trains end to end") {
    // 8x8 two-class images: bright top half versus bright bottom half.
    Dataset d;
    d.sample_shape = {1, 8, 8};
    d.num_classes = 2;
    Gen g(82);
    for (int i = 0; i < 64; ++i) {
        const int label = i % 2;
        for (int r = 0; r < 8; ++r)
            for (int c = 0; c < 8; ++c) d.inputs.push_back(((r < 4) == (label == 0) ? 1.0 : 0.0) + g.uniform(0, 0.3));
        d.labels.push_back(label);
    }
    const ArchSpec arch{ArchKind::SmallCnn, 0, {}, 1, 8, 2};
    Model m = build_model(arch, 1);
    train(m, d, 5, cosine_epochs(0.05, 0.0, 5), SgdConfig{}, 16, 0);
    CHECK(accuracy(predict_proba(m, d), d.labels) >= 0.95);
}

}  // TEST_SUITE
