#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nde/tensor.hpp"

namespace nde {

/// Row-major [rows x classes] matrix of class probabilities.
struct ProbMatrix {
    std::size_t rows = 0;
    std::size_t classes = 0;
    std::vector<double> values;

    std::span<const double> row(std::size_t i) const { return std::span(values).subspan(i * classes, classes); }
    static ProbMatrix from_tensor(const Tensor& probs);  // [B x C]
};

struct SquareMatrix {
    std::size_t n = 0;
    std::vector<double> values;

    explicit SquareMatrix(std::size_t size = 0) : n(size), values(size * size, 0.0) {}
    double& at(std::size_t i, std::size_t j) { return values[i * n + j]; }
    double at(std::size_t i, std::size_t j) const { return values[i * n + j]; }
    // Mean of the entries off the diagonal; 0 when n < 2.
    double off_diagonal_mean() const;
};

inline constexpr double kProbabilityFloor = 1e-12;
inline constexpr std::size_t kDefaultEceBins = 15;

// Argmax per row; ties go to the lowest class index.
std::vector<ClassId> predicted_classes(const ProbMatrix& probs);

double accuracy(const ProbMatrix& probs, std::span<const ClassId> labels);
double disagreement_rate(std::span<const ClassId> a, std::span<const ClassId> b);
SquareMatrix disagreement_matrix(const std::vector<std::vector<ClassId>>& member_predictions);

// Mean over rows of KL(p_row || q_row), natural log, both sides floored at 1e-12.
double mean_kl(const ProbMatrix& p, const ProbMatrix& q);
// Entry (i, j) = mean_kl(members[i], members[j]).
SquareMatrix mean_pairwise_kl(std::span<const ProbMatrix> members);

// Equal-width bins over max-probability confidence; a confidence c goes to bin
// min(floor(c * bins), bins - 1).
double ece(const ProbMatrix& probs, std::span<const ClassId> labels, std::size_t num_bins = kDefaultEceBins);
double nll(const ProbMatrix& probs, std::span<const ClassId> labels);

struct MetricsReport {
    double accuracy = 0.0;
    std::vector<double> member_accuracies;
    SquareMatrix disagreement;
    SquareMatrix kl;
    double ece = 0.0;
    double nll = 0.0;
    double budget_ratio = 0.0;

    double mean_disagreement() const { return disagreement.off_diagonal_mean(); }
    double mean_kl() const { return kl.off_diagonal_mean(); }
    nlohmann::ordered_json to_json() const;
    static MetricsReport from_json(const nlohmann::json& j);
};

/// Full evaluation of an ensemble on one labeled split. `members` holds each
/// member's probabilities, `ensemble` their average.
MetricsReport evaluate(std::span<const ProbMatrix> members, const ProbMatrix& ensemble,
                       std::span<const ClassId> labels, std::size_t ece_bins = kDefaultEceBins);

}  // namespace nde
