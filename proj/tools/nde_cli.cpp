// nde: run Noisy Deep Ensemble experiments and baselines from a flat-key JSON config.
#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "nde/errors.hpp"
#include "nde/io.hpp"
#include "nde/runner.hpp"

namespace {

using nlohmann::json;

struct Overrides {
    std::string config_file;
    std::vector<std::string> sets;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out, strategy, dist;
    std::optional<std::size_t> members, parent_epochs, child_epochs, subset;
    std::optional<double> alpha, beta;
};

void add_common(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--config", o.config_file, "JSON file with flat dotted keys");
    cmd->add_option("--set", o.sets, "Override any config key: --set train.lr_max=0.05");
    cmd->add_option("--seed", o.seed, "Base seed");
    cmd->add_option("--out", o.out, "Output directory");
    cmd->add_option("--strategy", o.strategy, "single | standard | noisy | snapshot");
    cmd->add_option("--members", o.members, "Ensemble size M");
    cmd->add_option("--alpha", o.alpha, "Mask rate");
    cmd->add_option("--beta", o.beta, "Noise scale");
    cmd->add_option("--dist", o.dist, "uniform | gaussian");
    cmd->add_option("--parent-epochs", o.parent_epochs, "Parent / single-model epochs");
    cmd->add_option("--child-epochs", o.child_epochs, "Retraining epochs per child");
    cmd->add_option("--subset", o.subset, "Use only the first N samples of the dataset");
}

// A --set value is read as JSON when it parses (numbers, booleans, arrays),
// otherwise as a plain string.
json parse_value(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::exception&) {
        return text;
    }
}

nde::RunConfig build_config(const Overrides& o) {
    json flat = json::object();
    if (!o.config_file.empty()) {
        try {
            flat = json::parse(nde::io::read_text(o.config_file));
        } catch (const json::exception& e) {
            throw nde::ConfigError("--config", o.config_file + " is not valid JSON: " + e.what());
        }
        if (!flat.is_object()) throw nde::ConfigError("--config", "top level must be an object");
    }
    for (const auto& s : o.sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos || eq == 0) throw nde::ConfigError("--set", "expected key=value, got '" + s + "'");
        flat[s.substr(0, eq)] = parse_value(s.substr(eq + 1));
    }
    if (o.seed) flat["seed"] = *o.seed;
    if (o.out) flat["out"] = *o.out;
    if (o.strategy) flat["strategy"] = *o.strategy;
    if (o.members) flat["train.members"] = *o.members;
    if (o.alpha) flat["noise.alpha"] = *o.alpha;
    if (o.beta) flat["noise.beta"] = *o.beta;
    if (o.dist) flat["noise.dist"] = *o.dist;
    if (o.parent_epochs) flat["train.parent_epochs"] = *o.parent_epochs;
    if (o.child_epochs) flat["train.child_epochs"] = *o.child_epochs;
    if (o.subset) flat["dataset.subset"] = *o.subset;
    return nde::RunConfig::from_flat_json(flat);
}

void print_rows(const std::vector<nde::ReportRow>& rows) {
    std::printf("%-9s %6s %3s %6s %6s %8s %8s %8s %8s %8s %7s %9s\n", "strategy", "seed", "M", "alpha", "beta",
                "acc", "ece", "nll", "disagr", "kl", "budget", "wall_s");
    for (const auto& r : rows)
        std::printf("%-9s %6llu %3zu %6.3g %6.3g %8.4f %8.4f %8.4f %8.4f %8.4f %7.3f %9.2f\n", r.strategy.c_str(),
                    static_cast<unsigned long long>(r.seed), r.members, r.alpha, r.beta, r.accuracy, r.ece, r.nll,
                    r.mean_disagreement, r.mean_kl, r.budget_ratio, r.wall_clock_s);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Noisy Deep Ensemble experiment runner"};
    app.require_subcommand(1);

    Overrides run_o, noise_o, members_o;
    auto* run = app.add_subcommand("run", "Train one configuration and write its report");
    add_common(run, run_o);

    std::vector<double> alphas, betas;
    auto* sweep_noise = app.add_subcommand("sweep-noise", "Noisy ensemble over an alpha x beta grid");
    add_common(sweep_noise, noise_o);
    sweep_noise->add_option("--alphas", alphas, "Comma-separated mask rates")->delimiter(',')->required();
    sweep_noise->add_option("--betas", betas, "Comma-separated noise scales")->delimiter(',')->required();

    std::vector<std::size_t> ms;
    std::size_t repeats = 3;
    auto* sweep_members = app.add_subcommand("sweep-members", "Accuracy mean and std per ensemble size");
    add_common(sweep_members, members_o);
    sweep_members->add_option("--ms", ms, "Comma-separated ensemble sizes")->delimiter(',')->required();
    sweep_members->add_option("--repeats", repeats, "Seeds per ensemble size");

    std::vector<std::string> report_paths;
    std::string report_csv;
    auto* report = app.add_subcommand("report", "Summarize existing run directories");
    report->add_option("paths", report_paths, "Run directories or report.csv files")->required();
    report->add_option("--csv", report_csv, "Also write the merged rows to this CSV file");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            const nde::RunConfig cfg = build_config(run_o);
            const nde::RunResult result = nde::run_experiment(cfg);
            if (cfg.strategy == nde::Strategy::Noisy)
                for (const auto& w : cfg.train.budget.warnings()) std::cerr << "warning: " << w << "\n";
            print_rows({result.row});
            if (result.parent_accuracy >= 0.0) std::printf("parent accuracy %.4f\n", result.parent_accuracy);
            std::printf("wrote %s\n", cfg.out.string().c_str());
        } else if (*sweep_noise) {
            const nde::RunConfig cfg = build_config(noise_o);
            print_rows(nde::sweep_noise(cfg, alphas, betas));
            std::printf("wrote %s\n", (cfg.out / "sweep_noise.csv").string().c_str());
        } else if (*sweep_members) {
            const nde::RunConfig cfg = build_config(members_o);
            std::printf("%4s %7s %10s %10s %10s %10s\n", "M", "repeats", "acc_mean", "acc_std", "kl", "disagr");
            for (const auto& s : nde::sweep_members(cfg, ms, repeats))
                std::printf("%4zu %7zu %10.4f %10.4f %10.4f %10.4f\n", s.members, s.repeats, s.accuracy_mean,
                            s.accuracy_std, s.mean_kl, s.mean_disagreement);
            std::printf("wrote %s\n", (cfg.out / "sweep_members_summary.csv").string().c_str());
        } else if (*report) {
            std::vector<std::filesystem::path> roots(report_paths.begin(), report_paths.end());
            const auto rows = nde::collect_reports(roots);
            print_rows(rows);
            if (!report_csv.empty()) {
                std::string text = nde::ReportRow::csv_header() + "\n";
                for (const auto& r : rows) text += r.to_csv() + "\n";
                nde::io::write_text(report_csv, text);
            }
        }
    } catch (const nde::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
