#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "nde/errors.hpp"
#include "nde/metrics.hpp"
#include "nde/ops.hpp"
#include "support/check.hpp"

using namespace nde;
using nde::testing::Gen;

namespace {

ProbMatrix probs(std::size_t classes, std::vector<double> values) {
    return {values.size() / classes, classes, std::move(values)};
}

ProbMatrix random_probs(Gen& g, std::size_t rows, std::size_t classes, double zero_prob = 0.0) {
    return probs(classes, g.simplex_rows(rows, classes, zero_prob));
}

// Straight-line oracle for KL(p || q) averaged over rows.
double kl_oracle(const ProbMatrix& p, const ProbMatrix& q) {
    double total = 0.0;
    for (std::size_t r = 0; r < p.rows; ++r)
        for (std::size_t c = 0; c < p.classes; ++c) {
            const double a = p.values[r * p.classes + c], b = q.values[r * p.classes + c];
            if (a > 0) total += a * (std::log(std::max(a, 1e-12)) - std::log(std::max(b, 1e-12)));
        }
    return total / static_cast<double>(p.rows);
}

std::vector<ClassId> argmax_oracle(const ProbMatrix& p) {
    std::vector<ClassId> out;
    for (std::size_t r = 0; r < p.rows; ++r) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < p.classes; ++c)
            if (p.values[r * p.classes + c] > p.values[r * p.classes + best]) best = c;
        out.push_back(static_cast<ClassId>(best));
    }
    return out;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("accuracy examples") {
    const ProbMatrix p = probs(2, {0.9, 0.1, 0.2, 0.8, 0.6, 0.4, 0.3, 0.7});
    const std::vector<ClassId> right{0, 1, 0, 1}, wrong{1, 0, 1, 0}, three{0, 1, 0, 0};
    CHECK(accuracy(p, right) == 1.0);
    CHECK(accuracy(p, wrong) == 0.0);
    CHECK(accuracy(p, three) == 0.75);
    const std::vector<ClassId> tie_label{0};
    CHECK(accuracy(probs(2, {0.5, 0.5}), tie_label) == 1.0);
    CHECK_THROWS_AS(accuracy(p, tie_label), DimensionError);
}

TEST_CASE("disagreement examples") {
    const std::vector<ClassId> a{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    std::vector<ClassId> b = a;
    CHECK(disagreement_rate(a, b) == 0.0);
    b[1] = 0;
    b[4] = 0;
    b[9] = 0;
    CHECK(std::abs(disagreement_rate(a, b) - 0.3) < 1e-15);
    const std::vector<ClassId> short_b{0};
    CHECK_THROWS_AS(disagreement_rate(a, short_b), DimensionError);
}

TEST_CASE("kl examples") {
    const ProbMatrix p = probs(2, {0.5, 0.5}), q = probs(2, {0.25, 0.75});
    const double expected = 0.5 * std::log(2.0) + 0.5 * std::log(2.0 / 3.0);
    CHECK(std::abs(mean_kl(p, q) - expected) < 1e-12);
    const std::vector<ProbMatrix> same{p, p, p};
    for (double v : mean_pairwise_kl(same).values) CHECK(v == 0.0);
}

TEST_CASE("ece hand-built 4-sample 2-bin case") {
    // bin [0.5,1]: confidences .9 (right) .8 (wrong) .6 (right) -> |2/3 - 2.3/3| = 0.1, weight 3/4
    // bin [0,0.5): confidence .4 (wrong) -> 0.4, weight 1/4
    const ProbMatrix p = probs(3, {0.9, 0.05, 0.05, 0.1, 0.8, 0.1, 0.3, 0.6, 0.1, 0.4, 0.35, 0.25});
    const std::vector<ClassId> labels{0, 0, 1, 2};
    CHECK(std::abs(ece(p, labels, 2) - (0.75 * 0.1 + 0.25 * 0.4)) < 1e-12);
    CHECK_THROWS_AS(ece(p, labels, 0), ConfigError);
}

TEST_CASE("ece extremes") {
    const ProbMatrix p = probs(3, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    const std::vector<ClassId> right{0, 1, 2}, wrong{1, 2, 0};
    CHECK(ece(p, right) == 0.0);
    CHECK(ece(p, wrong) == 1.0);
}

TEST_CASE("nll examples") {
    const std::vector<ClassId> labels{0, 4, 9};
    CHECK(std::abs(nll(probs(10, std::vector<double>(30, 0.1)), labels) - std::log(10.0)) < 1e-12);
    std::vector<double> onehot(30, 0.0);
    onehot[0] = onehot[14] = onehot[29] = 1.0;
    CHECK(nll(probs(10, onehot), labels) == 0.0);
    std::vector<double> miss(30, 0.0);
    miss[1] = miss[15] = miss[20] = 1.0;
    CHECK(std::abs(nll(probs(10, miss), labels) - -std::log(1e-12)) < 1e-9);
}

TEST_CASE("nll agrees with the cross-entropy loss") {
    Gen g(71);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t rows = g.index(1, 8), classes = g.index(2, 10);
        const Tensor logits = g.tensor({rows, classes}, false, -5, 5);
        std::vector<ClassId> labels(rows);
        for (auto& l : labels) l = static_cast<ClassId>(g.index(0, classes - 1));
        const double from_probs = nll(ProbMatrix::from_tensor(softmax(logits)), labels);
        CHECK(std::abs(from_probs - cross_entropy(logits, labels).item()) < 1e-9);
    }
}

TEST_CASE("small fixtures match brute-force oracles") {
    Gen g(72);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t m = g.index(2, 4), rows = g.index(1, 10), classes = g.index(2, 5);
        std::vector<ProbMatrix> members;
        for (std::size_t i = 0; i < m; ++i) members.push_back(random_probs(g, rows, classes, 0.2));
        const SquareMatrix kl = mean_pairwise_kl(members);
        std::vector<std::vector<ClassId>> preds;
        for (const auto& p : members) preds.push_back(argmax_oracle(p));
        CHECK(predicted_classes(members[0]) == preds[0]);
        const SquareMatrix dis = disagreement_matrix(preds);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < m; ++j) {
                CHECK(std::abs(kl.at(i, j) - kl_oracle(members[i], members[j])) < 1e-9);
                std::size_t differ = 0;
                for (std::size_t r = 0; r < rows; ++r) differ += preds[i][r] != preds[j][r];
                CHECK(std::abs(dis.at(i, j) - static_cast<double>(differ) / rows) < 1e-12);
            }
    }
}

TEST_CASE("property: matrix invariants on random simplex batches") {
    Gen g(73);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t m = g.index(2, 5), rows = g.index(1, 30), classes = g.index(2, 10);
        std::vector<ProbMatrix> members;
        for (std::size_t i = 0; i < m; ++i) members.push_back(random_probs(g, rows, classes, 0.1));
        const SquareMatrix kl = mean_pairwise_kl(members);
        std::vector<std::vector<ClassId>> preds;
        for (const auto& p : members) preds.push_back(predicted_classes(p));
        const SquareMatrix dis = disagreement_matrix(preds);
        for (std::size_t i = 0; i < m; ++i) {
            CHECK(kl.at(i, i) == 0.0);
            CHECK(dis.at(i, i) == 0.0);
            for (std::size_t j = 0; j < m; ++j) {
                CHECK(kl.at(i, j) >= 0.0);
                CHECK(dis.at(i, j) == dis.at(j, i));
                CHECK(dis.at(i, j) >= 0.0);
                CHECK(dis.at(i, j) <= 1.0);
            }
        }
    }
}

TEST_CASE("property: ece lies in [0, 1] and ignores sample order") {
    Gen g(74);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t rows = g.index(1, 40), classes = g.index(2, 6);
        const ProbMatrix p = random_probs(g, rows, classes);
        std::vector<ClassId> labels(rows);
        for (auto& l : labels) l = static_cast<ClassId>(g.index(0, classes - 1));
        const double e = ece(p, labels, g.index(1, 20));
        CHECK(e >= 0.0);
        CHECK(e <= 1.0);

        std::vector<std::size_t> order(rows);
        for (std::size_t i = 0; i < rows; ++i) order[i] = i;
        std::shuffle(order.begin(), order.end(), g.engine());
        ProbMatrix q{rows, classes, {}};
        std::vector<ClassId> ql;
        for (auto i : order) {
            q.values.insert(q.values.end(), p.row(i).begin(), p.row(i).end());
            ql.push_back(labels[i]);
        }
        CHECK(std::abs(ece(q, ql, 15) - ece(p, labels, 15)) < 1e-12);
    }
}

TEST_CASE("report json round trip and single-member shape") {
    Gen g(75);
    const ProbMatrix a = random_probs(g, 6, 3);
    const std::vector<ClassId> labels{0, 1, 2, 0, 1, 2};
    const std::vector<ProbMatrix> one{a};
    const MetricsReport single = evaluate(one, a, labels);
    CHECK(single.disagreement.n == 0);
    CHECK(single.kl.n == 0);

    const std::vector<ProbMatrix> two{a, random_probs(g, 6, 3)};
    MetricsReport r = evaluate(two, a, labels);
    r.budget_ratio = 0.35;
    const MetricsReport back = MetricsReport::from_json(r.to_json());
    CHECK(back.accuracy == r.accuracy);
    CHECK(back.kl.values == r.kl.values);
    CHECK(back.disagreement.values == r.disagreement.values);
    CHECK(back.member_accuracies == r.member_accuracies);
    CHECK(back.budget_ratio == 0.35);
}

TEST_CASE("kl rejects rows off the simplex") {
    const std::vector<ProbMatrix> bad{probs(2, {0.7, 0.7}), probs(2, {0.5, 0.5})};
    CHECK_THROWS(mean_pairwise_kl(bad));
}

}  // TEST_SUITE
