#include "nde/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <random>

#include "nde/errors.hpp"
#include "nde/io.hpp"
#include "nde/random.hpp"

namespace nde {

namespace {

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset) {
    if (offset + 4 > bytes.size())
        throw ParseError(offset, "header truncated: need 4 bytes, have " + std::to_string(bytes.size() - offset));
    return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
           (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void write_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

std::size_t checked_ratio_count(std::size_t n, double ratio) {
    if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("dataset.split_ratio", "must lie strictly between 0 and 1");
    const auto count = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n)));
    if (count == 0 || count == n)
        throw ConfigError("dataset.split_ratio", "leaves an empty split for " + std::to_string(n) + " samples");
    return count;
}

}  // namespace

// ---- IDX --------------------------------------------------------------------

std::vector<double> IdxArray::unit_floats() const {
    std::vector<double> out(payload.size());
    std::transform(payload.begin(), payload.end(), out.begin(), [](std::uint8_t b) { return b / 255.0; });
    return out;
}

IdxArray parse_idx(std::span<const std::uint8_t> bytes) {
    IdxArray out;
    out.magic = read_be32(bytes, 0);
    std::size_t rank = 0;
    if (out.magic == kIdxLabelMagic)
        rank = 1;
    else if (out.magic == kIdxImageMagic)
        rank = 3;
    else
        throw ParseError(0, "bad IDX magic 0x" + [&] {
            char buf[9];
            std::snprintf(buf, sizeof buf, "%08x", out.magic);
            return std::string(buf);
        }() + " (expected 0x00000801 or 0x00000803)");

    std::size_t expected = 1;
    for (std::size_t i = 0; i < rank; ++i) {
        const std::size_t offset = 4 + 4 * i;
        const std::size_t d = read_be32(bytes, offset);
        if (d == 0) throw ParseError(offset, "IDX dimension " + std::to_string(i) + " is zero");
        out.dims.push_back(d);
        // saturate: a product this large can never match the buffer anyway
        expected = expected > SIZE_MAX / d ? SIZE_MAX : expected * d;
    }
    const std::size_t header = 4 + 4 * rank;
    const std::size_t actual = bytes.size() - header;
    if (actual != expected)
        throw ParseError(actual < expected ? bytes.size() : header + expected,
                         "IDX payload length mismatch: expected " + std::to_string(expected) + " bytes, got " +
                             std::to_string(actual));
    out.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(header), bytes.end());
    return out;
}

std::vector<std::uint8_t> encode_idx(const IdxArray& array) {
    std::vector<std::uint8_t> out;
    write_be32(out, array.magic);
    for (std::size_t d : array.dims) write_be32(out, static_cast<std::uint32_t>(d));
    out.insert(out.end(), array.payload.begin(), array.payload.end());
    return out;
}

// ---- Dataset ------------------------------------------------------------------

void Dataset::validate() const {
    if (labels.empty()) throw InputError("dataset '" + split + "' is empty");
    if (inputs.size() != labels.size() * sample_size())
        throw DimensionError("dataset '" + split + "': " + std::to_string(inputs.size()) + " input values for " +
                             std::to_string(labels.size()) + " samples of " + to_string(sample_shape));
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes)
            throw InputError("dataset '" + split + "': label " + std::to_string(labels[i]) + " at index " +
                             std::to_string(i) + " outside [0, " + std::to_string(num_classes) + ")");
}

Dataset Dataset::select(std::span<const std::size_t> indices, std::string tag) const {
    Dataset out;
    out.sample_shape = sample_shape;
    out.num_classes = num_classes;
    out.split = std::move(tag);
    out.normalization = normalization;
    const std::size_t width = sample_size();
    out.inputs.reserve(indices.size() * width);
    out.labels.reserve(indices.size());
    for (std::size_t idx : indices) {
        if (idx >= size()) throw UsageError("select: index " + std::to_string(idx) + " out of range");
        const auto first = inputs.begin() + static_cast<std::ptrdiff_t>(idx * width);
        out.inputs.insert(out.inputs.end(), first, first + static_cast<std::ptrdiff_t>(width));
        out.labels.push_back(labels[idx]);
    }
    return out;
}

Dataset Dataset::head(std::size_t count) const {
    std::vector<std::size_t> idx(std::min(count, size()));
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    return select(idx, split);
}

Tensor Dataset::batch_inputs(std::span<const std::size_t> indices) const {
    if (indices.empty()) throw UsageError("batch_inputs: empty batch");
    const std::size_t width = sample_size();
    std::vector<double> values;
    values.reserve(indices.size() * width);
    for (std::size_t idx : indices) {
        if (idx >= size()) throw UsageError("batch_inputs: index " + std::to_string(idx) + " out of range");
        const auto first = inputs.begin() + static_cast<std::ptrdiff_t>(idx * width);
        values.insert(values.end(), first, first + static_cast<std::ptrdiff_t>(width));
    }
    Shape shape{indices.size()};
    shape.insert(shape.end(), sample_shape.begin(), sample_shape.end());
    return Tensor(std::move(shape), std::move(values));
}

std::vector<ClassId> Dataset::batch_labels(std::span<const std::size_t> indices) const {
    std::vector<ClassId> out;
    out.reserve(indices.size());
    for (std::size_t idx : indices) out.push_back(labels.at(idx));
    return out;
}

Tensor Dataset::all_inputs() const {
    Shape shape{size()};
    shape.insert(shape.end(), sample_shape.begin(), sample_shape.end());
    return Tensor(std::move(shape), inputs);
}

// ---- MNIST ----------------------------------------------------------------------

Dataset mnist_from_idx(const IdxArray& images, const IdxArray& labels) {
    if (images.magic != kIdxImageMagic) throw InputError("mnist: first array is not an image file");
    if (labels.magic != kIdxLabelMagic) throw InputError("mnist: second array is not a label file");
    if (images.dims[0] != labels.dims[0])
        throw DimensionError("mnist: " + std::to_string(images.dims[0]) + " images but " +
                             std::to_string(labels.dims[0]) + " labels");
    Dataset out;
    out.sample_shape = {1, images.dims[1], images.dims[2]};
    out.inputs = images.unit_floats();
    out.labels.assign(labels.payload.begin(), labels.payload.end());
    out.num_classes = 10;
    out.validate();
    return out;
}

Dataset load_mnist(const std::filesystem::path& images, const std::filesystem::path& labels) {
    return mnist_from_idx(parse_idx(io::read_bytes(images)), parse_idx(io::read_bytes(labels)));
}

// ---- CIFAR-10 ---------------------------------------------------------------------

Dataset parse_cifar10_batch(std::span<const std::uint8_t> bytes) {
    if (bytes.empty() || bytes.size() % kCifarRecordBytes != 0)
        throw ParseError(bytes.size() - bytes.size() % kCifarRecordBytes,
                         "CIFAR-10 batch length " + std::to_string(bytes.size()) + " is not a positive multiple of " +
                             std::to_string(kCifarRecordBytes));
    const std::size_t n = bytes.size() / kCifarRecordBytes;
    Dataset out;
    out.sample_shape = {3, 32, 32};
    out.num_classes = 10;
    out.inputs.resize(n * 3072);
    out.labels.resize(n);
    for (std::size_t r = 0; r < n; ++r) {
        const std::size_t base = r * kCifarRecordBytes;
        const std::uint8_t label = bytes[base];
        if (label > 9) throw ParseError(base, "CIFAR-10 label " + std::to_string(label) + " outside [0, 9]");
        out.labels[r] = label;
        for (std::size_t p = 0; p < 3072; ++p) out.inputs[r * 3072 + p] = bytes[base + 1 + p] / 255.0;
    }
    return out;
}

std::vector<std::uint8_t> encode_cifar10_batch(const Dataset& shard) {
    if (shard.sample_shape != Shape{3, 32, 32}) throw DimensionError("encode_cifar10_batch: samples must be 3x32x32");
    std::vector<std::uint8_t> out;
    out.reserve(shard.size() * kCifarRecordBytes);
    for (std::size_t r = 0; r < shard.size(); ++r) {
        out.push_back(static_cast<std::uint8_t>(shard.labels[r]));
        for (std::size_t p = 0; p < 3072; ++p)
            out.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(shard.inputs[r * 3072 + p], 0.0, 1.0) * 255.0)));
    }
    return out;
}

Dataset load_cifar10(const std::vector<std::filesystem::path>& batch_files) {
    if (batch_files.empty()) throw ConfigError("dataset.path", "no CIFAR-10 batch files given");
    Dataset all;
    for (const auto& file : batch_files) {
        Dataset shard = parse_cifar10_batch(io::read_bytes(file));
        if (all.labels.empty()) {
            all = std::move(shard);
            continue;
        }
        all.inputs.insert(all.inputs.end(), shard.inputs.begin(), shard.inputs.end());
        all.labels.insert(all.labels.end(), shard.labels.begin(), shard.labels.end());
    }
    return all;
}

// ---- Blobs --------------------------------------------------------------------------

Dataset make_blobs(std::size_t num_classes, std::size_t samples_per_class, std::size_t dim, double spread,
                   std::uint64_t seed) {
    if (num_classes == 0 || samples_per_class == 0 || dim == 0)
        throw ConfigError("dataset.blobs", "classes, samples per class and dim must be positive");
    if (spread < 0.0) throw ConfigError("dataset.blobs.spread", "must be non-negative");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> center_dist(-10.0, 10.0);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::vector<double> centers(num_classes * dim);
    for (double& c : centers) c = center_dist(rng);

    Dataset out;
    out.sample_shape = {dim};
    out.num_classes = num_classes;
    out.inputs.reserve(num_classes * samples_per_class * dim);
    for (std::size_t c = 0; c < num_classes; ++c)
        for (std::size_t s = 0; s < samples_per_class; ++s) {
            for (std::size_t d = 0; d < dim; ++d) out.inputs.push_back(centers[c * dim + d] + spread * noise(rng));
            out.labels.push_back(static_cast<ClassId>(c));
        }
    return out;
}

// ---- Split / normalize / batch -----------------------------------------------------

TrainTestSplit split_dataset(const Dataset& data, double ratio, std::uint64_t seed) {
    data.validate();
    const std::size_t n_train = checked_ratio_count(data.size(), ratio);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(mix64(seed ^ 0x73706c6974ULL));
    std::shuffle(order.begin(), order.end(), rng);
    const auto mid = order.begin() + static_cast<std::ptrdiff_t>(n_train);
    std::vector<std::size_t> train_idx(order.begin(), mid), test_idx(mid, order.end());
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(test_idx.begin(), test_idx.end());
    return {data.select(train_idx, "train"), data.select(test_idx, "test")};
}

NormalizationStats compute_normalization(const Dataset& source) {
    const std::size_t channels = source.channels();
    const std::size_t plane = source.sample_size() / channels;
    NormalizationStats stats{std::vector<double>(channels, 0.0), std::vector<double>(channels, 0.0)};
    const double count = static_cast<double>(source.size() * plane);
    for (std::size_t s = 0; s < source.size(); ++s)
        for (std::size_t c = 0; c < channels; ++c)
            for (std::size_t p = 0; p < plane; ++p) stats.mean[c] += source.inputs[(s * channels + c) * plane + p];
    for (double& m : stats.mean) m /= count;
    for (std::size_t s = 0; s < source.size(); ++s)
        for (std::size_t c = 0; c < channels; ++c)
            for (std::size_t p = 0; p < plane; ++p) {
                const double d = source.inputs[(s * channels + c) * plane + p] - stats.mean[c];
                stats.stddev[c] += d * d;
            }
    for (double& v : stats.stddev) {
        v = std::sqrt(v / count);
        if (v < 1e-12) v = 1.0;  // constant channel
    }
    return stats;
}

void apply_normalization(Dataset& data, const NormalizationStats& stats) {
    const std::size_t channels = data.channels();
    if (stats.mean.size() != channels) throw DimensionError("apply_normalization: channel count mismatch");
    const std::size_t plane = data.sample_size() / channels;
    for (std::size_t s = 0; s < data.size(); ++s)
        for (std::size_t c = 0; c < channels; ++c)
            for (std::size_t p = 0; p < plane; ++p) {
                double& v = data.inputs[(s * channels + c) * plane + p];
                v = (v - stats.mean[c]) / stats.stddev[c];
            }
    data.normalization = stats;
}

void normalize_split(TrainTestSplit& split) {
    const NormalizationStats stats = compute_normalization(split.train);
    apply_normalization(split.train, stats);
    apply_normalization(split.test, stats);
}

BatchSampler::BatchSampler(std::size_t dataset_size, std::size_t batch_size, std::uint64_t seed)
    : size_(dataset_size), batch_(batch_size), seed_(seed) {
    if (dataset_size == 0) throw InputError("BatchSampler: empty dataset");
    if (batch_size == 0) throw ConfigError("train.batch_size", "must be positive");
    if (batch_size > dataset_size)
        throw ConfigError("train.batch_size", "batch size " + std::to_string(batch_size) + " exceeds split size " +
                                                  std::to_string(dataset_size));
}

std::vector<std::size_t> BatchSampler::permutation(std::size_t epoch) const {
    std::vector<std::size_t> order(size_);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(mix64(seed_ ^ mix64(epoch)));
    std::shuffle(order.begin(), order.end(), rng);
    return order;
}

std::vector<std::vector<std::size_t>> BatchSampler::epoch(std::size_t epoch) const {
    const auto order = permutation(epoch);
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t start = 0; start < size_; start += batch_) {
        const std::size_t stop = std::min(size_, start + batch_);
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                             order.begin() + static_cast<std::ptrdiff_t>(stop));
    }
    return batches;
}

SplitLoader split_shuffle_batch(const Dataset& data, double ratio, std::size_t batch_size, std::uint64_t seed) {
    TrainTestSplit split = split_dataset(data, ratio, seed);
    normalize_split(split);
    BatchSampler sampler(split.train.size(), batch_size, seed);
    return {std::move(split), sampler};
}

}  // namespace nde
