#include "nde/models.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <random>

#include <nlohmann/json.hpp>

#include "nde/errors.hpp"
#include "nde/io.hpp"
#include "nde/ops.hpp"

namespace nde {

namespace {

constexpr char kMagic[8] = {'N', 'D', 'E', 'C', 'K', 'P', 'T', '\0'};

template <class... Fs>
struct Overloaded : Fs... {
    using Fs::operator()...;
};

Tensor he_uniform(Shape shape, std::size_t fan_in, std::mt19937_64& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    std::vector<double> values(element_count(shape));
    for (double& v : values) v = dist(rng);
    return Tensor(std::move(shape), std::move(values), true);
}

template <class T>
void put_le(std::vector<std::uint8_t>& out, T value) {
    const auto bits = std::bit_cast<std::array<std::uint8_t, sizeof(T)>>(value);
    if constexpr (std::endian::native == std::endian::little)
        out.insert(out.end(), bits.begin(), bits.end());
    else
        out.insert(out.end(), bits.rbegin(), bits.rend());
}

template <class T>
T get_le(std::span<const std::uint8_t> bytes, std::size_t& offset) {
    if (offset + sizeof(T) > bytes.size())
        throw ParseError(offset, "checkpoint truncated, need " + std::to_string(sizeof(T)) + " more bytes");
    std::array<std::uint8_t, sizeof(T)> raw{};
    std::memcpy(raw.data(), bytes.data() + offset, sizeof(T));
    if constexpr (std::endian::native != std::endian::little) std::reverse(raw.begin(), raw.end());
    offset += sizeof(T);
    return std::bit_cast<T>(raw);
}

}  // namespace

std::string to_string(ArchKind kind) { return kind == ArchKind::Mlp ? "mlp" : "small_cnn"; }

ArchKind parse_arch_kind(const std::string& name) {
    if (name == "mlp") return ArchKind::Mlp;
    if (name == "small_cnn" || name == "cnn") return ArchKind::SmallCnn;
    throw ConfigError("model.arch", "unknown architecture '" + name + "' (expected mlp or small_cnn)");
}

std::string ArchSpec::to_text() const {
    nlohmann::ordered_json j;
    j["kind"] = to_string(kind);
    if (kind == ArchKind::Mlp) {
        j["input_dim"] = input_dim;
        j["hidden"] = hidden;
    } else {
        j["in_channels"] = in_channels;
        j["image_size"] = image_size;
    }
    j["num_classes"] = num_classes;
    return j.dump();
}

ArchSpec ArchSpec::from_text(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    ArchSpec a;
    a.kind = parse_arch_kind(j.at("kind").get<std::string>());
    if (a.kind == ArchKind::Mlp) {
        a.input_dim = j.at("input_dim").get<std::size_t>();
        a.hidden = j.at("hidden").get<std::vector<std::size_t>>();
    } else {
        a.in_channels = j.at("in_channels").get<std::size_t>();
        a.image_size = j.at("image_size").get<std::size_t>();
    }
    a.num_classes = j.at("num_classes").get<std::size_t>();
    return a;
}

Model::Model(ArchSpec arch, std::vector<Layer> layers) : arch_(std::move(arch)), layers_(std::move(layers)) {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const std::string prefix = "layer" + std::to_string(i);
        std::visit(Overloaded{[&](const layers::Linear& l) {
                                  params_.push_back({prefix + ".weight", l.weight});
                                  params_.push_back({prefix + ".bias", l.bias});
                              },
                              [&](const layers::Conv& l) {
                                  params_.push_back({prefix + ".weight", l.weight});
                                  params_.push_back({prefix + ".bias", l.bias});
                              },
                              [](const auto&) {}},
                   layers_[i]);
    }
}

Tensor Model::forward(const Tensor& x) const {
    Tensor h = x;
    if (arch_.kind == ArchKind::Mlp && h.rank() != 2) h = reshape(h, {h.dim(0), h.numel() / h.dim(0)});
    for (const Layer& layer : layers_) {
        h = std::visit(Overloaded{[&](const layers::Linear& l) { return add_bias(matmul(h, l.weight), l.bias); },
                                  [&](const layers::Conv& l) {
                                      return add_channel_bias(conv2d(h, l.weight, l.stride, l.padding), l.bias);
                                  },
                                  [&](const layers::Relu&) { return relu(h); },
                                  [&](const layers::MaxPool& p) { return max_pool2d(h, p.window); },
                                  [&](const layers::Flatten&) { return reshape(h, {h.dim(0), h.numel() / h.dim(0)}); }},
                       layer);
    }
    return h;
}

std::size_t Model::num_parameters() const {
    std::size_t total = 0;
    for (const auto& p : params_) total += p.tensor.numel();
    return total;
}

void Model::zero_grad() {
    for (auto& p : params_) p.tensor.zero_grad();
}

Model Model::clone() const {
    Model copy = build_model(arch_, 0);
    unflatten(copy, flatten(*this));
    return copy;
}

Model build_model(const ArchSpec& arch, std::uint64_t init_seed) {
    if (arch.num_classes == 0) throw ConfigError("model.num_classes", "must be positive");
    std::mt19937_64 rng(init_seed);
    std::vector<Layer> layers;
    auto linear = [&](std::size_t in, std::size_t out) {
        layers.emplace_back(layers::Linear{he_uniform({in, out}, in, rng), Tensor({out}, true)});
    };
    if (arch.kind == ArchKind::Mlp) {
        if (arch.input_dim == 0) throw ConfigError("model.input_dim", "must be positive");
        std::size_t width = arch.input_dim;
        for (std::size_t h : arch.hidden) {
            if (h == 0) throw ConfigError("model.hidden", "hidden sizes must be positive");
            linear(width, h);
            layers.emplace_back(layers::Relu{});
            width = h;
        }
        linear(width, arch.num_classes);
    } else {
        if (arch.in_channels == 0) throw ConfigError("model.in_channels", "must be positive");
        if (arch.image_size == 0 || arch.image_size % 4 != 0)
            throw ConfigError("model.image_size", "must be a positive multiple of 4");
        auto conv = [&](std::size_t in, std::size_t out) {
            layers.emplace_back(layers::Conv{he_uniform({out, in, 3, 3}, in * 9, rng), Tensor({out}, true), 1, 1});
            layers.emplace_back(layers::Relu{});
            layers.emplace_back(layers::MaxPool{2});
        };
        conv(arch.in_channels, 16);
        conv(16, 32);
        layers.emplace_back(layers::Flatten{});
        const std::size_t side = arch.image_size / 4;
        linear(32 * side * side, arch.num_classes);
    }
    return Model(arch, std::move(layers));
}

Model build_mlp(std::size_t input_dim, const std::vector<std::size_t>& hidden_dims, std::size_t num_classes,
                std::uint64_t init_seed) {
    ArchSpec arch;
    arch.kind = ArchKind::Mlp;
    arch.input_dim = input_dim;
    arch.hidden = hidden_dims;
    arch.num_classes = num_classes;
    return build_model(arch, init_seed);
}

Model build_small_cnn(std::size_t in_channels, std::size_t num_classes, std::uint64_t init_seed,
                      std::size_t image_size) {
    ArchSpec arch;
    arch.kind = ArchKind::SmallCnn;
    arch.in_channels = in_channels;
    arch.image_size = image_size;
    arch.num_classes = num_classes;
    return build_model(arch, init_seed);
}

ParamVector flatten(const Model& model) {
    ParamVector out;
    out.values.reserve(model.num_parameters());
    for (const auto& p : model.parameters()) {
        out.layout.push_back({p.name, out.values.size(), p.tensor.numel()});
        const auto d = p.tensor.data();
        out.values.insert(out.values.end(), d.begin(), d.end());
    }
    return out;
}

void unflatten(Model& model, std::span<const double> values) {
    if (values.size() != model.num_parameters())
        throw DimensionError("unflatten: model has " + std::to_string(model.num_parameters()) +
                             " parameters, vector has " + std::to_string(values.size()));
    std::size_t offset = 0;
    for (const auto& p : model.parameters()) {
        Tensor t = p.tensor;
        std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(offset), t.numel(), t.data().begin());
        offset += t.numel();
    }
}

void unflatten(Model& model, const ParamVector& params) { unflatten(model, std::span<const double>(params.values)); }

std::vector<std::uint8_t> encode_checkpoint(const Model& model) {
    std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
    const std::string descriptor = model.arch().to_text();
    put_le<std::uint32_t>(out, kCheckpointVersion);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(descriptor.size()));
    out.insert(out.end(), descriptor.begin(), descriptor.end());
    const ParamVector flat = flatten(model);
    put_le<std::uint64_t>(out, flat.size());
    for (double v : flat.values) put_le<double>(out, v);
    return out;
}

Model decode_checkpoint(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < sizeof(kMagic) || !std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin()))
        throw ParseError(0, "not a model checkpoint (bad magic)");
    std::size_t offset = sizeof(kMagic);
    const auto version = get_le<std::uint32_t>(bytes, offset);
    if (version != kCheckpointVersion)
        throw ParseError(offset - 4, "unsupported checkpoint version " + std::to_string(version));
    const auto desc_len = get_le<std::uint32_t>(bytes, offset);
    if (offset + desc_len > bytes.size()) throw ParseError(offset, "checkpoint descriptor truncated");
    const std::string descriptor(bytes.begin() + static_cast<std::ptrdiff_t>(offset),
                                 bytes.begin() + static_cast<std::ptrdiff_t>(offset + desc_len));
    const std::size_t desc_offset = offset;
    offset += desc_len;
    ArchSpec arch;
    try {
        arch = ArchSpec::from_text(descriptor);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(desc_offset, std::string("bad architecture descriptor: ") + e.what());
    }
    Model model = build_model(arch, 0);
    const auto count = get_le<std::uint64_t>(bytes, offset);
    if (count != model.num_parameters())
        throw ParseError(offset - 8, "checkpoint holds " + std::to_string(count) + " values, architecture needs " +
                                         std::to_string(model.num_parameters()));
    if (bytes.size() - offset != count * sizeof(double))
        throw ParseError(offset, "expected " + std::to_string(count * sizeof(double)) + " payload bytes, found " +
                                     std::to_string(bytes.size() - offset));
    std::vector<double> values(count);
    for (double& v : values) v = get_le<double>(bytes, offset);
    unflatten(model, values);
    return model;
}

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
    io::write_bytes(path, encode_checkpoint(model));
}

Model load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(io::read_bytes(path)); }

}  // namespace nde
