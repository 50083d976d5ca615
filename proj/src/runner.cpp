#include "nde/runner.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "nde/errors.hpp"
#include "nde/io.hpp"

namespace nde {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

const std::vector<std::string> kKeys = {
    "dataset.name",        "dataset.path",        "dataset.images",          "dataset.labels",
    "dataset.subset",      "dataset.split_ratio", "dataset.blobs.classes",   "dataset.blobs.samples_per_class",
    "dataset.blobs.dim",   "dataset.blobs.spread", "dataset.blobs.seed",     "model.arch",
    "model.hidden",        "strategy",            "train.parent_epochs",     "train.child_epochs",
    "train.batch_size",    "train.members",       "train.snapshot_epochs",   "train.lr_max",
    "train.lr_min",        "train.momentum",      "train.weight_decay",      "train.parallel",
    "noise.dist",          "noise.alpha",         "noise.beta",              "seed",
    "out",                 "metrics.ece_bins",
};

template <class T>
T read(const json& flat, const std::string& key, T fallback) {
    const auto it = flat.find(key);
    if (it == flat.end() || it->is_null()) return fallback;
    try {
        if constexpr (std::is_same_v<T, bool>) {
            if (it->is_string()) return *it == "true" || *it == "1";
            return it->get<bool>();
        } else if constexpr (std::is_arithmetic_v<T>) {
            if (it->is_string()) {
                const std::string s = it->get<std::string>();
                std::size_t used = 0;
                const double v = std::stod(s, &used);
                if (used != s.size()) throw std::invalid_argument(s);
                return static_cast<T>(v);
            }
            if (std::is_unsigned_v<T> && it->is_number_integer() && it->get<long long>() < 0)
                throw ConfigError(key, "must be non-negative");
            return it->get<T>();
        } else {
            return it->get<T>();
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception&) {
        throw ConfigError(key, "cannot interpret value " + it->dump());
    }
}

std::vector<std::size_t> read_sizes(const json& flat, const std::string& key, std::vector<std::size_t> fallback) {
    const auto it = flat.find(key);
    if (it == flat.end() || it->is_null()) return fallback;
    std::vector<std::size_t> out;
    try {
        if (it->is_array()) return it->get<std::vector<std::size_t>>();
        if (it->is_number_unsigned() || it->is_number_integer()) return {it->get<std::size_t>()};
        std::stringstream ss(it->get<std::string>());
        for (std::string part; std::getline(ss, part, ',');)
            if (!part.empty()) out.push_back(std::stoul(part));
    } catch (const std::exception&) {
        throw ConfigError(key, "expected a list of positive integers, got " + it->dump());
    }
    return out;
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string short_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

std::string member_file(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "member_%02zu.ckpt", i);
    return buf;
}

fs::path find_first(const fs::path& dir, std::initializer_list<const char*> names) {
    for (const char* n : names)
        if (fs::exists(dir / n)) return dir / n;
    return {};
}

Dataset load_dataset(const DatasetConfig& cfg) {
    if (cfg.name == "blobs")
        return make_blobs(cfg.blob_classes, cfg.blob_samples, cfg.blob_dim, cfg.blob_spread, cfg.blob_seed);
    if (cfg.name == "mnist") {
        fs::path images = cfg.images, labels = cfg.labels;
        if (images.empty())
            images = find_first(cfg.path, {"images-idx3-ubyte", "train-images-idx3-ubyte", "train-images.idx3-ubyte"});
        if (labels.empty())
            labels = find_first(cfg.path, {"labels-idx1-ubyte", "train-labels-idx1-ubyte", "train-labels.idx1-ubyte"});
        if (images.empty() || labels.empty())
            throw ConfigError("dataset.path", "no MNIST IDX image/label files found in '" + cfg.path.string() + "'");
        return load_mnist(images, labels);
    }
    if (cfg.name == "cifar10") {
        std::vector<fs::path> files;
        if (fs::is_regular_file(cfg.path)) {
            files.push_back(cfg.path);
        } else if (fs::is_directory(cfg.path)) {
            for (const auto& entry : fs::directory_iterator(cfg.path)) {
                const std::string name = entry.path().filename().string();
                if (name.rfind("data_batch_", 0) == 0 && entry.path().extension() == ".bin") files.push_back(entry.path());
            }
            std::sort(files.begin(), files.end());
        }
        if (files.empty())
            throw ConfigError("dataset.path", "no CIFAR-10 data_batch_*.bin files at '" + cfg.path.string() + "'");
        return load_cifar10(files);
    }
    throw ConfigError("dataset.name", "unknown dataset '" + cfg.name + "' (expected blobs, mnist or cifar10)");
}

void write_report_csv(const fs::path& path, const std::vector<ReportRow>& rows) {
    std::string text = ReportRow::csv_header() + "\n";
    for (const auto& r : rows) text += r.to_csv() + "\n";
    io::write_text(path, text);
}

ordered_json trace_json(const TrainTrace& trace) {
    ordered_json epochs = ordered_json::array();
    for (const auto& e : trace.epochs) epochs.push_back({{"epoch", e.epoch}, {"lr", e.lr}, {"loss", e.loss}, {"accuracy", e.accuracy}});
    return epochs;
}

}  // namespace

std::vector<std::string> known_config_keys() { return kKeys; }

RunConfig RunConfig::from_flat_json(const json& flat) {
    if (!flat.is_object()) throw ConfigError("config", "expected a JSON object with dotted keys");
    for (const auto& [key, value] : flat.items())
        if (std::find(kKeys.begin(), kKeys.end(), key) == kKeys.end()) throw ConfigError(key, "unknown configuration key");

    RunConfig c;
    DatasetConfig& d = c.dataset;
    d.name = read<std::string>(flat, "dataset.name", d.name);
    d.path = read<std::string>(flat, "dataset.path", d.path.string());
    d.images = read<std::string>(flat, "dataset.images", d.images.string());
    d.labels = read<std::string>(flat, "dataset.labels", d.labels.string());
    d.subset = read<std::size_t>(flat, "dataset.subset", d.subset);
    d.split_ratio = read<double>(flat, "dataset.split_ratio", d.split_ratio);
    d.blob_classes = read<std::size_t>(flat, "dataset.blobs.classes", d.blob_classes);
    d.blob_samples = read<std::size_t>(flat, "dataset.blobs.samples_per_class", d.blob_samples);
    d.blob_dim = read<std::size_t>(flat, "dataset.blobs.dim", d.blob_dim);
    d.blob_spread = read<double>(flat, "dataset.blobs.spread", d.blob_spread);
    d.blob_seed = read<std::uint64_t>(flat, "dataset.blobs.seed", d.blob_seed);

    c.arch = parse_arch_kind(read<std::string>(flat, "model.arch", to_string(c.arch)));
    c.hidden = read_sizes(flat, "model.hidden", c.hidden);
    c.strategy = parse_strategy(read<std::string>(flat, "strategy", to_string(c.strategy)));

    TrainBudget& b = c.train.budget;
    b.parent_epochs = read<std::size_t>(flat, "train.parent_epochs", b.parent_epochs);
    b.child_epochs = read<std::size_t>(flat, "train.child_epochs", b.child_epochs);
    b.batch_size = read<std::size_t>(flat, "train.batch_size", b.batch_size);
    b.ensemble_size = read<std::size_t>(flat, "train.members", b.ensemble_size);
    c.snapshot_epochs = read<std::size_t>(flat, "train.snapshot_epochs", c.snapshot_epochs);
    c.train.lr_max = read<double>(flat, "train.lr_max", c.train.lr_max);
    c.train.lr_min = read<double>(flat, "train.lr_min", c.train.lr_min);
    c.train.sgd.momentum = read<double>(flat, "train.momentum", c.train.sgd.momentum);
    c.train.sgd.weight_decay = read<double>(flat, "train.weight_decay", c.train.sgd.weight_decay);
    c.train.parallel_members = read<bool>(flat, "train.parallel", c.train.parallel_members);

    const bool has_alpha = flat.contains("noise.alpha"), has_beta = flat.contains("noise.beta");
    if (has_alpha || has_beta) {
        if (!has_alpha) throw ConfigError("noise.alpha", "noise.beta given without noise.alpha");
        if (!has_beta) throw ConfigError("noise.beta", "noise.alpha given without noise.beta");
        NoiseSpec n;
        n.distribution = parse_noise_distribution(read<std::string>(flat, "noise.dist", "uniform"));
        n.alpha = read<double>(flat, "noise.alpha", 0.0);
        n.beta = read<double>(flat, "noise.beta", 0.0);
        c.noise = n;
    } else if (flat.contains("noise.dist")) {
        parse_noise_distribution(read<std::string>(flat, "noise.dist", "uniform"));
    }

    c.seed = read<std::uint64_t>(flat, "seed", c.seed);
    c.out = read<std::string>(flat, "out", c.out.string());
    c.ece_bins = read<std::size_t>(flat, "metrics.ece_bins", c.ece_bins);
    return c;
}

ordered_json RunConfig::to_flat_json() const {
    ordered_json j;
    j["dataset.name"] = dataset.name;
    j["dataset.path"] = dataset.path.string();
    j["dataset.images"] = dataset.images.string();
    j["dataset.labels"] = dataset.labels.string();
    j["dataset.subset"] = dataset.subset;
    j["dataset.split_ratio"] = dataset.split_ratio;
    j["dataset.blobs.classes"] = dataset.blob_classes;
    j["dataset.blobs.samples_per_class"] = dataset.blob_samples;
    j["dataset.blobs.dim"] = dataset.blob_dim;
    j["dataset.blobs.spread"] = dataset.blob_spread;
    j["dataset.blobs.seed"] = dataset.blob_seed;
    j["model.arch"] = to_string(arch);
    j["model.hidden"] = hidden;
    j["strategy"] = to_string(strategy);
    j["train.parent_epochs"] = train.budget.parent_epochs;
    j["train.child_epochs"] = train.budget.child_epochs;
    j["train.batch_size"] = train.budget.batch_size;
    j["train.members"] = train.budget.ensemble_size;
    j["train.snapshot_epochs"] = snapshot_epochs;
    j["train.lr_max"] = train.lr_max;
    j["train.lr_min"] = train.lr_min;
    j["train.momentum"] = train.sgd.momentum;
    j["train.weight_decay"] = train.sgd.weight_decay;
    j["train.parallel"] = train.parallel_members;
    if (noise) {
        j["noise.dist"] = to_string(noise->distribution);
        j["noise.alpha"] = noise->alpha;
        j["noise.beta"] = noise->beta;
    }
    j["seed"] = seed;
    j["out"] = out.string();
    j["metrics.ece_bins"] = ece_bins;
    return j;
}

std::string RunConfig::hash() const {
    ordered_json j = to_flat_json();
    j.erase("out");
    j.erase("train.parallel");  // execution detail, results do not depend on it
    const std::string text = j.dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
    return buf;
}

void RunConfig::validate() const {
    train.budget.validate();
    train.sgd.validate();
    if (train.lr_min < 0.0 || train.lr_max < train.lr_min) throw ConfigError("train.lr_max", "need 0 <= lr_min <= lr_max");
    if (!(dataset.split_ratio > 0.0 && dataset.split_ratio < 1.0))
        throw ConfigError("dataset.split_ratio", "must lie strictly between 0 and 1");
    if (dataset.name != "blobs" && dataset.name != "mnist" && dataset.name != "cifar10")
        throw ConfigError("dataset.name", "unknown dataset '" + dataset.name + "' (expected blobs, mnist or cifar10)");
    if (ece_bins == 0) throw ConfigError("metrics.ece_bins", "must be at least 1");
    if (strategy == Strategy::Noisy && !noise)
        throw ConfigError("noise", "strategy 'noisy' requires a noise spec (noise.alpha and noise.beta)");
    if (noise) noise->validate();
    if (strategy == Strategy::Snapshot) {
        const std::size_t total = snapshot_epochs ? snapshot_epochs : train.budget.parent_epochs;
        if (total % train.budget.ensemble_size != 0)
            throw ConfigError("train.snapshot_epochs", "snapshot budget " + std::to_string(total) +
                                                           " is not divisible by " +
                                                           std::to_string(train.budget.ensemble_size) + " members");
    }
}

std::size_t RunConfig::members() const { return strategy == Strategy::Single ? 1 : train.budget.ensemble_size; }

PreparedData prepare_data(const RunConfig& config) {
    Dataset all = load_dataset(config.dataset);
    if (config.dataset.subset > 0) all = all.head(config.dataset.subset);
    PreparedData out{split_dataset(all, config.dataset.split_ratio, config.seed), {}};
    normalize_split(out.split);

    const Shape& s = all.sample_shape;
    out.arch.kind = config.arch;
    out.arch.num_classes = all.num_classes;
    if (config.arch == ArchKind::Mlp) {
        out.arch.input_dim = all.sample_size();
        out.arch.hidden = config.hidden;
    } else {
        if (s.size() != 3 || s[1] != s[2]) throw ConfigError("model.arch", "small_cnn needs square C x H x W samples");
        out.arch.in_channels = s[0];
        out.arch.image_size = s[1];
    }
    return out;
}

std::string ReportRow::csv_header() {
    return "config_hash,strategy,seed,M,alpha,beta,accuracy,ece,nll,mean_disagreement,mean_kl,budget_ratio,"
           "wall_clock_s";
}

std::string ReportRow::to_csv() const {
    std::ostringstream os;
    os << config_hash << ',' << strategy << ',' << seed << ',' << members << ',' << format_double(alpha) << ','
       << format_double(beta) << ',' << format_double(accuracy) << ',' << format_double(ece) << ','
       << format_double(nll) << ',' << format_double(mean_disagreement) << ',' << format_double(mean_kl) << ','
       << format_double(budget_ratio) << ',' << format_double(wall_clock_s);
    return os.str();
}

ReportRow ReportRow::from_csv(const std::string& line) {
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string part; std::getline(ss, part, ',');) f.push_back(part);
    if (f.size() != 13) throw InputError("report row has " + std::to_string(f.size()) + " fields, expected 13");
    ReportRow r;
    r.config_hash = f[0];
    r.strategy = f[1];
    r.seed = std::stoull(f[2]);
    r.members = std::stoul(f[3]);
    r.alpha = std::stod(f[4]);
    r.beta = std::stod(f[5]);
    r.accuracy = std::stod(f[6]);
    r.ece = std::stod(f[7]);
    r.nll = std::stod(f[8]);
    r.mean_disagreement = std::stod(f[9]);
    r.mean_kl = std::stod(f[10]);
    r.budget_ratio = std::stod(f[11]);
    r.wall_clock_s = std::stod(f[12]);
    return r;
}

RunResult run_experiment(const RunConfig& config) {
    config.validate();
    return run_experiment(config, prepare_data(config));
}

RunResult run_experiment(const RunConfig& config, const PreparedData& data, ParentCache* cache) {
    config.validate();
    const Dataset& train_set = data.split.train;
    const Dataset& test_set = data.split.test;
    TrainSettings settings = config.train;

    EnsembleBundle bundle;
    switch (config.strategy) {
        case Strategy::Single: bundle = run_single(data.arch, train_set, settings, config.seed); break;
        case Strategy::Standard: bundle = run_standard_ensemble(data.arch, train_set, settings, config.seed); break;
        case Strategy::Snapshot: {
            const std::size_t total = config.snapshot_epochs ? config.snapshot_epochs : settings.budget.parent_epochs;
            bundle = run_snapshot_ensemble(data.arch, train_set, settings, total, settings.budget.ensemble_size,
                                           config.seed);
            break;
        }
        case Strategy::Noisy: {
            const bool reuse = cache && cache->parent && cache->seed == config.seed &&
                               cache->epochs == settings.budget.parent_epochs;
            ParentResult fresh{build_model(data.arch, 0), {}};
            if (!reuse) fresh = train_parent(data.arch, train_set, settings, config.seed);
            const ParentResult& parent = reuse ? *cache->parent : fresh;
            bundle = spawn_children(parent.model, train_set, settings, *config.noise, config.seed);
            bundle.ledger.shared_epochs = settings.budget.parent_epochs;
            bundle.wall_clock.parent_s = parent.trace.wall_clock_s;
            bundle.parent_trace = parent.trace;
            bundle.parent = parent.model.clone();
            if (cache && !reuse) {
                cache->seed = config.seed;
                cache->epochs = settings.budget.parent_epochs;
                cache->parent = std::move(fresh);
            }
            break;
        }
    }

    Evaluation eval = evaluate_bundle(bundle, test_set, settings.budget.parent_epochs, config.ece_bins);
    RunResult result;
    result.report = eval.report;
    if (bundle.parent) result.parent_accuracy = accuracy(predict_proba(*bundle.parent, test_set), test_set.labels);

    ReportRow& row = result.row;
    row.config_hash = config.hash();
    row.strategy = to_string(config.strategy);
    row.seed = config.seed;
    row.members = bundle.size();
    if (config.strategy == Strategy::Noisy) {
        row.alpha = config.noise->alpha;
        row.beta = config.noise->beta;
    }
    row.accuracy = eval.report.accuracy;
    row.ece = eval.report.ece;
    row.nll = eval.report.nll;
    row.mean_disagreement = eval.report.mean_disagreement();
    row.mean_kl = eval.report.mean_kl();
    row.budget_ratio = eval.report.budget_ratio;
    row.wall_clock_s = bundle.wall_clock.total();

    // ---- artifacts
    const fs::path ckpt_dir = config.out / "checkpoints";
    fs::create_directories(ckpt_dir);
    std::vector<std::string> files;
    for (std::size_t i = 0; i < bundle.size(); ++i) {
        save_checkpoint(bundle.members[i], ckpt_dir / member_file(i));
        files.push_back("checkpoints/" + member_file(i));
    }
    if (bundle.parent) {
        save_checkpoint(*bundle.parent, ckpt_dir / "parent.ckpt");
        files.push_back("checkpoints/parent.ckpt");
    }

    ordered_json manifest;
    manifest["config"] = config.to_flat_json();
    manifest["config_hash"] = row.config_hash;
    manifest["architecture"] = json::parse(data.arch.to_text());
    manifest["seeds"] = {{"base", config.seed}, {"split", config.seed}, {"members", bundle.member_seeds}};
    manifest["data"] = {{"train_size", train_set.size()},
                        {"test_size", test_set.size()},
                        {"normalization_mean", train_set.normalization.mean},
                        {"normalization_std", train_set.normalization.stddev}};
    manifest["ledger"] = {{"shared_epochs", bundle.ledger.shared_epochs},
                          {"member_epochs", bundle.ledger.member_epochs},
                          {"total_epochs", bundle.ledger.total()}};
    if (config.strategy == Strategy::Noisy) manifest["epoch_budget_ratio"] = epoch_budget_ratio(settings.budget);
    if (!bundle.checkpoint_epochs.empty()) manifest["snapshot_checkpoint_epochs"] = bundle.checkpoint_epochs;
    manifest["wall_clock_s"] = {{"parent", bundle.wall_clock.parent_s},
                                {"members", bundle.wall_clock.members_s},
                                {"total", bundle.wall_clock.total()}};
    manifest["checkpoints"] = files;
    manifest["warnings"] =
        config.strategy == Strategy::Noisy ? settings.budget.warnings() : std::vector<std::string>{};
    ordered_json traces;
    if (!bundle.parent_trace.epochs.empty()) traces["parent"] = trace_json(bundle.parent_trace);
    ordered_json members = ordered_json::array();
    for (const auto& t : bundle.member_traces) members.push_back(trace_json(t));
    traces["members"] = members;
    manifest["traces"] = traces;
    io::write_text(config.out / "manifest.json", manifest.dump(2) + "\n");

    ordered_json report = result.report.to_json();
    report["parent_accuracy"] = result.parent_accuracy >= 0.0 ? json(result.parent_accuracy) : json(nullptr);
    report["wall_clock_s"] = row.wall_clock_s;
    report["config_hash"] = row.config_hash;
    io::write_text(config.out / "report.json", report.dump(2) + "\n");
    write_report_csv(config.out / "report.csv", {row});
    return result;
}

std::vector<ReportRow> sweep_noise(const RunConfig& config, const std::vector<double>& alphas,
                                   const std::vector<double>& betas) {
    if (alphas.empty()) throw ConfigError("alphas", "sweep needs at least one alpha");
    if (betas.empty()) throw ConfigError("betas", "sweep needs at least one beta");
    RunConfig base = config;
    base.strategy = Strategy::Noisy;
    if (!base.noise) base.noise = NoiseSpec{};
    base.validate();
    const PreparedData data = prepare_data(base);
    ParentCache cache;
    std::vector<ReportRow> rows;
    for (double a : alphas)
        for (double b : betas) {
            RunConfig cell = base;
            cell.noise->alpha = a;
            cell.noise->beta = b;
            cell.out = config.out / ("alpha_" + short_double(a) + "_beta_" + short_double(b));
            rows.push_back(run_experiment(cell, data, &cache).row);
        }
    write_report_csv(config.out / "sweep_noise.csv", rows);
    return rows;
}

std::vector<MemberSummary> sweep_members(const RunConfig& config, const std::vector<std::size_t>& member_counts,
                                         std::size_t repeats) {
    if (member_counts.empty()) throw ConfigError("members", "sweep needs at least one member count");
    if (repeats == 0) throw ConfigError("repeats", "must be at least 1");
    for (std::size_t m : member_counts)
        if (m == 0) throw ConfigError("members", "member counts must be positive");

    std::map<std::size_t, std::vector<ReportRow>> by_m;
    std::vector<ReportRow> all;
    for (std::size_t r = 0; r < repeats; ++r) {
        RunConfig seeded = config;
        seeded.seed = config.seed + r;
        const PreparedData data = prepare_data(seeded);
        ParentCache cache;
        for (std::size_t m : member_counts) {
            RunConfig cell = seeded;
            cell.train.budget.ensemble_size = m;
            cell.out = config.out / ("m" + std::to_string(m) + "_r" + std::to_string(r));
            const ReportRow row = run_experiment(cell, data, &cache).row;
            by_m[m].push_back(row);
            all.push_back(row);
        }
    }
    write_report_csv(config.out / "sweep_members.csv", all);

    std::vector<MemberSummary> summary;
    std::string text = "members,repeats,accuracy_mean,accuracy_std,mean_kl,mean_disagreement,config_hash\n";
    for (std::size_t m : member_counts) {
        const auto& rows = by_m[m];
        MemberSummary s;
        s.members = m;
        s.repeats = rows.size();
        for (const auto& row : rows) {
            s.accuracy_mean += row.accuracy;
            s.mean_kl += row.mean_kl;
            s.mean_disagreement += row.mean_disagreement;
        }
        const auto n = static_cast<double>(rows.size());
        s.accuracy_mean /= n;
        s.mean_kl /= n;
        s.mean_disagreement /= n;
        if (rows.size() > 1) {
            double ss = 0.0;
            for (const auto& row : rows) ss += (row.accuracy - s.accuracy_mean) * (row.accuracy - s.accuracy_mean);
            s.accuracy_std = std::sqrt(ss / (n - 1.0));
        }
        RunConfig hashed = config;
        hashed.train.budget.ensemble_size = m;
        text += std::to_string(m) + "," + std::to_string(s.repeats) + "," + format_double(s.accuracy_mean) + "," +
                format_double(s.accuracy_std) + "," + format_double(s.mean_kl) + "," +
                format_double(s.mean_disagreement) + "," + hashed.hash() + "\n";
        summary.push_back(s);
    }
    io::write_text(config.out / "sweep_members_summary.csv", text);
    return summary;
}

std::vector<ReportRow> collect_reports(const std::vector<fs::path>& roots) {
    std::vector<fs::path> files;
    for (const auto& root : roots) {
        if (fs::is_regular_file(root)) {
            files.push_back(root);
        } else if (fs::is_directory(root)) {
            for (const auto& entry : fs::recursive_directory_iterator(root))
                if (entry.is_regular_file() && entry.path().filename() == "report.csv") files.push_back(entry.path());
        } else {
            throw ConfigError("report", "no such run directory: " + root.string());
        }
    }
    std::sort(files.begin(), files.end());
    std::vector<ReportRow> rows;
    for (const auto& f : files) {
        std::ifstream in(f);
        std::string line;
        std::getline(in, line);
        if (line != ReportRow::csv_header()) throw InputError(f.string() + ": unexpected CSV header");
        while (std::getline(in, line))
            if (!line.empty()) rows.push_back(ReportRow::from_csv(line));
    }
    return rows;
}

}  // namespace nde
