#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "nde/tensor.hpp"

namespace nde {

enum class ArchKind { Mlp, SmallCnn };

std::string to_string(ArchKind kind);
ArchKind parse_arch_kind(const std::string& name);

/// Everything needed to rebuild a model's topology.
struct ArchSpec {
    ArchKind kind = ArchKind::Mlp;
    std::size_t input_dim = 0;     // mlp: flattened input size
    std::vector<std::size_t> hidden;  // mlp only
    std::size_t in_channels = 0;   // cnn only
    std::size_t image_size = 32;   // cnn only, square inputs
    std::size_t num_classes = 0;

    bool operator==(const ArchSpec&) const = default;

    std::string to_text() const;  // JSON object
    static ArchSpec from_text(const std::string& text);
};

/// Flat copy of all trainable scalars in enumeration order.
struct ParamVector {
    struct Segment {
        std::string name;
        std::size_t offset;
        std::size_t length;
    };

    std::vector<double> values;
    std::vector<Segment> layout;

    std::size_t size() const { return values.size(); }
};

struct NamedParam {
    std::string name;
    Tensor tensor;
};

namespace layers {
struct Linear {
    Tensor weight;  // [in x out]
    Tensor bias;    // [out]
};
struct Conv {
    Tensor weight;  // [F x C x k x k]
    Tensor bias;    // [F]
    std::size_t stride;
    std::size_t padding;
};
struct Relu {};
struct MaxPool {
    std::size_t window;
};
struct Flatten {};
}  // namespace layers

using Layer = std::variant<layers::Linear, layers::Conv, layers::Relu, layers::MaxPool, layers::Flatten>;

/// Feed-forward classifier producing logits.
///
/// Models own their parameter storage and are move-only; use clone() to get
/// an independent copy.
class Model {
public:
    Model(ArchSpec arch, std::vector<Layer> layers);
    Model(Model&&) noexcept = default;
    Model& operator=(Model&&) noexcept = default;
    Model(const Model&) = delete;
    Model& operator=(const Model&) = delete;

    const ArchSpec& arch() const { return arch_; }

    // x is [B x ...]; returns logits [B x num_classes].
    Tensor forward(const Tensor& x) const;

    /// Parameters in their fixed enumeration order (layer order, weight before bias).
    const std::vector<NamedParam>& parameters() const { return params_; }
    std::size_t num_parameters() const;

    void zero_grad();
    Model clone() const;

private:
    ArchSpec arch_;
    std::vector<Layer> layers_;
    std::vector<NamedParam> params_;
};

Model build_model(const ArchSpec& arch, std::uint64_t init_seed);
Model build_mlp(std::size_t input_dim, const std::vector<std::size_t>& hidden_dims, std::size_t num_classes,
                std::uint64_t init_seed);
/// conv(16,3x3,pad 1)-relu-pool2-conv(32,3x3,pad 1)-relu-pool2-fc.
/// `image_size` must be divisible by 4.
Model build_small_cnn(std::size_t in_channels, std::size_t num_classes, std::uint64_t init_seed,
                      std::size_t image_size = 32);

ParamVector flatten(const Model& model);
void unflatten(Model& model, const ParamVector& params);
void unflatten(Model& model, std::span<const double> values);

// Checkpoint layout, all integers little-endian:
//   "NDECKPT\0" | u32 version | u32 descriptor length | descriptor (JSON ArchSpec)
//   | u64 D | D x f64 in flatten order
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const Model& model);
Model decode_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const Model& model, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace nde
