#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "nde/tensor.hpp"

namespace nde {

// ---- IDX (MNIST) ----------------------------------------------------------
//
// [u32 BE magic][u32 BE dim]...[payload]
//   0x00000801  labels: 1 dim, one byte per item
//   0x00000803  images: 3 dims (count, rows, cols), one byte per pixel
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;
inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;

struct IdxArray {
    std::uint32_t magic = 0;
    std::vector<std::size_t> dims;
    std::vector<std::uint8_t> payload;

    // payload / 255
    std::vector<double> unit_floats() const;
};

IdxArray parse_idx(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_idx(const IdxArray& array);

// ---- Dataset ----------------------------------------------------------------

struct NormalizationStats {
    std::vector<double> mean;    // one entry per channel
    std::vector<double> stddev;
};

/// Labeled samples stored contiguously: inputs holds size() * sample_size() values.
struct Dataset {
    std::vector<double> inputs;
    Shape sample_shape;
    std::vector<ClassId> labels;
    std::size_t num_classes = 0;
    std::string split = "full";
    NormalizationStats normalization;

    std::size_t size() const { return labels.size(); }
    std::size_t sample_size() const { return element_count(sample_shape); }
    std::size_t channels() const { return sample_shape.size() == 3 ? sample_shape[0] : 1; }

    void validate() const;
    Dataset select(std::span<const std::size_t> indices, std::string tag) const;
    Dataset head(std::size_t count) const;

    Tensor batch_inputs(std::span<const std::size_t> indices) const;
    std::vector<ClassId> batch_labels(std::span<const std::size_t> indices) const;
    Tensor all_inputs() const;
};

Dataset mnist_from_idx(const IdxArray& images, const IdxArray& labels);
Dataset load_mnist(const std::filesystem::path& images, const std::filesystem::path& labels);

// ---- CIFAR-10 binary ----------------------------------------------------------
//
// Records of 3073 bytes: label byte (0..9) then 1024 R, 1024 G, 1024 B pixels.
inline constexpr std::size_t kCifarRecordBytes = 3073;

Dataset parse_cifar10_batch(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_cifar10_batch(const Dataset& shard);  // inputs must be in [0, 1]
Dataset load_cifar10(const std::vector<std::filesystem::path>& batch_files);

// ---- Synthetic ------------------------------------------------------------------

/// Isotropic Gaussian clusters around centers drawn uniformly from [-10, 10]^dim.
Dataset make_blobs(std::size_t num_classes, std::size_t samples_per_class, std::size_t dim, double spread,
                   std::uint64_t seed);

// ---- Split / normalize / batch ---------------------------------------------------

struct TrainTestSplit {
    Dataset train;
    Dataset test;
};

/// Seeded partition; train receives floor(ratio * N) samples.
TrainTestSplit split_dataset(const Dataset& data, double ratio, std::uint64_t seed);

/// Per-channel mean/std from `stats_source`, applied in place to every dataset passed.
NormalizationStats compute_normalization(const Dataset& stats_source);
void apply_normalization(Dataset& data, const NormalizationStats& stats);
void normalize_split(TrainTestSplit& split);

/// Shuffled mini-batches; each epoch gets its own permutation derived from (seed, epoch).
/// The last batch of an epoch may be short.
class BatchSampler {
public:
    BatchSampler(std::size_t dataset_size, std::size_t batch_size, std::uint64_t seed);

    std::vector<std::size_t> permutation(std::size_t epoch) const;
    std::vector<std::vector<std::size_t>> epoch(std::size_t epoch) const;
    std::size_t batches_per_epoch() const { return (size_ + batch_ - 1) / batch_; }
    std::size_t batch_size() const { return batch_; }

private:
    std::size_t size_;
    std::size_t batch_;
    std::uint64_t seed_;
};

struct SplitLoader {
    TrainTestSplit data;
    BatchSampler train_batches;
};

/// Split, normalize from the train side, and set up seeded train batching.
SplitLoader split_shuffle_batch(const Dataset& data, double ratio, std::size_t batch_size, std::uint64_t seed);

}  // namespace nde
