#include "nde/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "nde/errors.hpp"

namespace nde {

namespace {

void require_labels(const ProbMatrix& probs, std::span<const ClassId> labels, const char* op) {
    if (labels.size() != probs.rows)
        throw DimensionError(std::string(op) + ": " + std::to_string(labels.size()) + " labels for " +
                             std::to_string(probs.rows) + " rows");
    for (ClassId y : labels)
        if (y < 0 || static_cast<std::size_t>(y) >= probs.classes)
            throw InputError(std::string(op) + ": label " + std::to_string(y) + " out of range");
}

void require_simplex(const ProbMatrix& probs, const char* op) {
    if (probs.values.size() != probs.rows * probs.classes)
        throw DimensionError(std::string(op) + ": probability matrix size mismatch");
    for (std::size_t r = 0; r < probs.rows; ++r) {
        double total = 0.0;
        for (double v : probs.row(r)) {
            if (!(v >= 0.0)) throw InputError(std::string(op) + ": negative or NaN probability in row " + std::to_string(r));
            total += v;
        }
        if (std::abs(total - 1.0) > 1e-6)
            throw InputError(std::string(op) + ": row " + std::to_string(r) + " sums to " + std::to_string(total));
    }
}

double floored_log(double p) { return std::log(std::max(p, kProbabilityFloor)); }

}  // namespace

ProbMatrix ProbMatrix::from_tensor(const Tensor& probs) {
    if (probs.rank() != 2) throw DimensionError("ProbMatrix: expected [B x C], got " + to_string(probs.shape()));
    return {probs.dim(0), probs.dim(1), {probs.data().begin(), probs.data().end()}};
}

double SquareMatrix::off_diagonal_mean() const {
    if (n < 2) return 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i != j) total += at(i, j);
    return total / static_cast<double>(n * (n - 1));
}

std::vector<ClassId> predicted_classes(const ProbMatrix& probs) {
    std::vector<ClassId> out(probs.rows);
    for (std::size_t r = 0; r < probs.rows; ++r) {
        const auto row = probs.row(r);
        out[r] = static_cast<ClassId>(std::max_element(row.begin(), row.end()) - row.begin());
    }
    return out;
}

double accuracy(const ProbMatrix& probs, std::span<const ClassId> labels) {
    require_labels(probs, labels, "accuracy");
    if (probs.rows == 0) throw InputError("accuracy: no samples");
    const auto pred = predicted_classes(probs);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == labels[i];
    return static_cast<double>(correct) / static_cast<double>(pred.size());
}

double disagreement_rate(std::span<const ClassId> a, std::span<const ClassId> b) {
    if (a.size() != b.size())
        throw DimensionError("disagreement_rate: lengths " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
    if (a.empty()) throw InputError("disagreement_rate: no samples");
    std::size_t differ = 0;
    for (std::size_t i = 0; i < a.size(); ++i) differ += a[i] != b[i];
    return static_cast<double>(differ) / static_cast<double>(a.size());
}

SquareMatrix disagreement_matrix(const std::vector<std::vector<ClassId>>& member_predictions) {
    SquareMatrix out(member_predictions.size());
    for (std::size_t i = 0; i < out.n; ++i)
        for (std::size_t j = i + 1; j < out.n; ++j)
            out.at(i, j) = out.at(j, i) = disagreement_rate(member_predictions[i], member_predictions[j]);
    return out;
}

double mean_kl(const ProbMatrix& p, const ProbMatrix& q) {
    if (p.rows != q.rows || p.classes != q.classes) throw DimensionError("mean_kl: probability matrices differ in shape");
    if (p.rows == 0) throw InputError("mean_kl: no samples");
    double total = 0.0;
    for (std::size_t r = 0; r < p.rows; ++r) {
        const auto pr = p.row(r), qr = q.row(r);
        for (std::size_t c = 0; c < p.classes; ++c)
            if (pr[c] > 0.0) total += pr[c] * (floored_log(pr[c]) - floored_log(qr[c]));
    }
    return total / static_cast<double>(p.rows);
}

SquareMatrix mean_pairwise_kl(std::span<const ProbMatrix> members) {
    for (const auto& m : members) require_simplex(m, "mean_pairwise_kl");
    SquareMatrix out(members.size());
    for (std::size_t i = 0; i < out.n; ++i)
        for (std::size_t j = 0; j < out.n; ++j)
            if (i != j) out.at(i, j) = mean_kl(members[i], members[j]);
    return out;
}

double ece(const ProbMatrix& probs, std::span<const ClassId> labels, std::size_t num_bins) {
    if (num_bins == 0) throw ConfigError("metrics.ece_bins", "must be at least 1");
    require_labels(probs, labels, "ece");
    if (probs.rows == 0) throw InputError("ece: no samples");
    std::vector<double> conf_sum(num_bins, 0.0), correct(num_bins, 0.0);
    std::vector<std::size_t> count(num_bins, 0);
    const auto pred = predicted_classes(probs);
    for (std::size_t r = 0; r < probs.rows; ++r) {
        const double conf = probs.row(r)[static_cast<std::size_t>(pred[r])];
        const auto bin = std::min(num_bins - 1, static_cast<std::size_t>(conf * static_cast<double>(num_bins)));
        conf_sum[bin] += conf;
        correct[bin] += pred[r] == labels[r] ? 1.0 : 0.0;
        ++count[bin];
    }
    double total = 0.0;
    for (std::size_t b = 0; b < num_bins; ++b)
        if (count[b] > 0) total += std::abs(correct[b] - conf_sum[b]);  // n_b * |acc_b - conf_b|
    return total / static_cast<double>(probs.rows);
}

double nll(const ProbMatrix& probs, std::span<const ClassId> labels) {
    require_labels(probs, labels, "nll");
    if (probs.rows == 0) throw InputError("nll: no samples");
    double total = 0.0;
    for (std::size_t r = 0; r < probs.rows; ++r) total -= floored_log(probs.row(r)[static_cast<std::size_t>(labels[r])]);
    return total / static_cast<double>(probs.rows);
}

nlohmann::ordered_json MetricsReport::to_json() const {
    auto matrix = [](const SquareMatrix& m) {
        nlohmann::json rows = nlohmann::json::array();
        for (std::size_t i = 0; i < m.n; ++i)
            rows.push_back(std::vector<double>(m.values.begin() + static_cast<std::ptrdiff_t>(i * m.n),
                                               m.values.begin() + static_cast<std::ptrdiff_t>((i + 1) * m.n)));
        return rows;
    };
    nlohmann::ordered_json j;
    j["accuracy"] = accuracy;
    j["member_accuracies"] = member_accuracies;
    j["ece"] = ece;
    j["nll"] = nll;
    j["mean_disagreement"] = mean_disagreement();
    j["mean_kl"] = mean_kl();
    j["budget_ratio"] = budget_ratio;
    j["disagreement"] = matrix(disagreement);
    j["kl"] = matrix(kl);
    return j;
}

MetricsReport MetricsReport::from_json(const nlohmann::json& j) {
    auto matrix = [](const nlohmann::json& rows) {
        SquareMatrix m(rows.size());
        for (std::size_t i = 0; i < m.n; ++i)
            for (std::size_t k = 0; k < m.n; ++k) m.at(i, k) = rows.at(i).at(k).get<double>();
        return m;
    };
    MetricsReport r;
    r.accuracy = j.at("accuracy").get<double>();
    r.member_accuracies = j.at("member_accuracies").get<std::vector<double>>();
    r.ece = j.at("ece").get<double>();
    r.nll = j.at("nll").get<double>();
    r.budget_ratio = j.at("budget_ratio").get<double>();
    r.disagreement = matrix(j.at("disagreement"));
    r.kl = matrix(j.at("kl"));
    return r;
}

MetricsReport evaluate(std::span<const ProbMatrix> members, const ProbMatrix& ensemble,
                       std::span<const ClassId> labels, std::size_t ece_bins) {
    MetricsReport report;
    report.accuracy = accuracy(ensemble, labels);
    report.ece = ece(ensemble, labels, ece_bins);
    report.nll = nll(ensemble, labels);
    std::vector<std::vector<ClassId>> preds;
    for (const auto& m : members) {
        report.member_accuracies.push_back(accuracy(m, labels));
        preds.push_back(predicted_classes(m));
    }
    // A single model has no pairs to compare.
    if (members.size() > 1) {
        report.disagreement = disagreement_matrix(preds);
        report.kl = mean_pairwise_kl(members);
    }
    return report;
}

}  // namespace nde
