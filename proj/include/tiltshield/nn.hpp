#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "tiltshield/errors.hpp"
#include "tiltshield/rng.hpp"

namespace tiltshield {

static_assert(std::numeric_limits<double>::is_iec559, "IEEE-754 doubles required for the .mlp format");

// Dense feedforward network: rectified-linear hidden layers, identity
// output. Weight matrices are row-major (out x in).
struct Mlp {
    std::vector<int> layer_dims;
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> biases;

    int input_dim() const { return layer_dims.front(); }
    int output_dim() const { return layer_dims.back(); }
    int n_layers() const { return static_cast<int>(weights.size()); }

    std::size_t n_parameters() const {
        std::size_t n = 0;
        for (const auto& w : weights) n += w.size();
        for (const auto& b : biases) n += b.size();
        return n;
    }
};

struct SgdConfig {
    double learning_rate = 0.001;
    int batch_size = 50;
};

// One supervised sample. The mask selects which outputs contribute to the
// loss (single-action regression targets leave the rest unconstrained);
// an empty mask means all outputs.
struct TrainSample {
    std::vector<double> input;
    std::vector<double> target;
    std::vector<std::uint8_t> mask;
};

// Glorot-uniform weights, zero biases, seed-deterministic.
inline Mlp mlp_init(std::vector<int> layer_dims, std::uint64_t seed) {
    if (layer_dims.size() < 2) throw ContractError("mlp_init: need at least 2 layer dims");
    for (int d : layer_dims) {
        if (d <= 0) throw ContractError("mlp_init: non-positive layer dim");
    }
    Mlp net;
    net.layer_dims = std::move(layer_dims);
    Rng rng = Rng::derive(seed, {0x6d6c70ull});
    for (std::size_t l = 0; l + 1 < net.layer_dims.size(); ++l) {
        const int fan_in = net.layer_dims[l];
        const int fan_out = net.layer_dims[l + 1];
        const double bound = std::sqrt(6.0 / (fan_in + fan_out));
        std::vector<double> w(static_cast<std::size_t>(fan_in) * fan_out);
        for (auto& x : w) x = rng.uniform_real(-bound, bound);
        net.weights.push_back(std::move(w));
        net.biases.emplace_back(static_cast<std::size_t>(fan_out), 0.0);
    }
    return net;
}

namespace detail {

// Activations per layer for one input; activations[0] is the input itself.
inline void forward_pass(const Mlp& net, std::span<const double> input, std::vector<std::vector<double>>& activations) {
    activations.resize(net.layer_dims.size());
    activations[0].assign(input.begin(), input.end());
    for (int l = 0; l < net.n_layers(); ++l) {
        const int in_dim = net.layer_dims[static_cast<std::size_t>(l)];
        const int out_dim = net.layer_dims[static_cast<std::size_t>(l) + 1];
        const auto& w = net.weights[static_cast<std::size_t>(l)];
        const auto& b = net.biases[static_cast<std::size_t>(l)];
        const auto& in = activations[static_cast<std::size_t>(l)];
        auto& out = activations[static_cast<std::size_t>(l) + 1];
        out.assign(static_cast<std::size_t>(out_dim), 0.0);
        const bool hidden = l + 1 < net.n_layers();
        for (int o = 0; o < out_dim; ++o) {
            double acc = b[static_cast<std::size_t>(o)];
            const double* row = w.data() + static_cast<std::size_t>(o) * in_dim;
            for (int i = 0; i < in_dim; ++i) acc += row[i] * in[static_cast<std::size_t>(i)];
            out[static_cast<std::size_t>(o)] = hidden ? std::max(acc, 0.0) : acc;
        }
    }
}

}  // namespace detail

inline std::vector<double> forward(const Mlp& net, std::span<const double> input) {
    if (static_cast<int>(input.size()) != net.input_dim()) {
        throw ContractError("forward: input size " + std::to_string(input.size()) + " does not match input dim " +
                            std::to_string(net.input_dim()));
    }
    std::vector<std::vector<double>> acts;
    detail::forward_pass(net, input, acts);
    return acts.back();
}

// One SGD step on the mean masked squared error over the batch. The
// per-sample loss averages over the masked outputs; the batch loss averages
// over samples. Parameters move by learning_rate times the loss gradient.
// Returns the pre-update loss.
inline double sgd_step(Mlp& net, std::span<const TrainSample> batch, const SgdConfig& cfg) {
    if (batch.empty()) throw ContractError("sgd_step: empty batch");
    if (!(cfg.learning_rate > 0.0)) throw ContractError("sgd_step: learning_rate must be > 0");

    std::vector<std::vector<double>> grad_w(net.weights.size());
    std::vector<std::vector<double>> grad_b(net.biases.size());
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        grad_w[l].assign(net.weights[l].size(), 0.0);
        grad_b[l].assign(net.biases[l].size(), 0.0);
    }

    std::vector<std::vector<double>> acts;
    std::vector<double> delta, prev_delta;
    double loss = 0.0;
    const double inv_batch = 1.0 / static_cast<double>(batch.size());

    for (const TrainSample& sample : batch) {
        if (static_cast<int>(sample.input.size()) != net.input_dim() ||
            static_cast<int>(sample.target.size()) != net.output_dim()) {
            throw ContractError("sgd_step: sample shape mismatch");
        }
        if (!sample.mask.empty() && static_cast<int>(sample.mask.size()) != net.output_dim()) {
            throw ContractError("sgd_step: mask shape mismatch");
        }
        detail::forward_pass(net, sample.input, acts);
        const auto& out = acts.back();

        int n_masked = 0;
        if (sample.mask.empty()) {
            n_masked = net.output_dim();
        } else {
            for (auto m : sample.mask) n_masked += m ? 1 : 0;
        }
        if (n_masked == 0) throw ContractError("sgd_step: mask selects no outputs");

        delta.assign(out.size(), 0.0);
        for (int o = 0; o < net.output_dim(); ++o) {
            const bool on = sample.mask.empty() || sample.mask[static_cast<std::size_t>(o)];
            if (!on) continue;
            const double diff = out[static_cast<std::size_t>(o)] - sample.target[static_cast<std::size_t>(o)];
            loss += diff * diff * inv_batch / n_masked;
            delta[static_cast<std::size_t>(o)] = 2.0 * diff * inv_batch / n_masked;
        }

        for (int l = net.n_layers() - 1; l >= 0; --l) {
            const int in_dim = net.layer_dims[static_cast<std::size_t>(l)];
            const int out_dim = net.layer_dims[static_cast<std::size_t>(l) + 1];
            const auto& in = acts[static_cast<std::size_t>(l)];
            auto& gw = grad_w[static_cast<std::size_t>(l)];
            auto& gb = grad_b[static_cast<std::size_t>(l)];
            for (int o = 0; o < out_dim; ++o) {
                const double d = delta[static_cast<std::size_t>(o)];
                if (d == 0.0) continue;
                gb[static_cast<std::size_t>(o)] += d;
                double* grow = gw.data() + static_cast<std::size_t>(o) * in_dim;
                for (int i = 0; i < in_dim; ++i) grow[i] += d * in[static_cast<std::size_t>(i)];
            }
            if (l == 0) break;
            prev_delta.assign(static_cast<std::size_t>(in_dim), 0.0);
            const auto& w = net.weights[static_cast<std::size_t>(l)];
            for (int o = 0; o < out_dim; ++o) {
                const double d = delta[static_cast<std::size_t>(o)];
                if (d == 0.0) continue;
                const double* row = w.data() + static_cast<std::size_t>(o) * in_dim;
                for (int i = 0; i < in_dim; ++i) prev_delta[static_cast<std::size_t>(i)] += d * row[i];
            }
            // rectifier gate: gradient flows only where the unit fired
            for (int i = 0; i < in_dim; ++i) {
                if (in[static_cast<std::size_t>(i)] <= 0.0) prev_delta[static_cast<std::size_t>(i)] = 0.0;
            }
            delta = prev_delta;
        }
    }

    if (!std::isfinite(loss)) throw NumericError("sgd_step: non-finite loss, training diverged");
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        for (std::size_t i = 0; i < net.weights[l].size(); ++i) {
            const double g = grad_w[l][i];
            if (!std::isfinite(g)) throw NumericError("sgd_step: non-finite gradient, training diverged");
            net.weights[l][i] -= cfg.learning_rate * g;
        }
        for (std::size_t i = 0; i < net.biases[l].size(); ++i) {
            const double g = grad_b[l][i];
            if (!std::isfinite(g)) throw NumericError("sgd_step: non-finite gradient, training diverged");
            net.biases[l][i] -= cfg.learning_rate * g;
        }
    }
    return loss;
}

// --- .mlp container -------------------------------------------------------
// magic "TSMLP1\n", u32 version, u32 n_dims, u32 dims..., then per layer the
// weight matrix (row-major) followed by the bias vector, all little-endian
// IEEE-754 doubles. Round-trips bit-exactly.

namespace detail {

inline constexpr char kMlpMagic[8] = {'T', 'S', 'M', 'L', 'P', '1', '\n', '\0'};
inline constexpr std::uint32_t kMlpVersion = 1;

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

inline void put_f64(std::vector<std::uint8_t>& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>((bits >> (8 * i)) & 0xff));
}

struct ByteReader {
    std::span<const std::uint8_t> data;
    std::size_t pos = 0;

    void need(std::size_t n) {
        if (pos + n > data.size()) throw FormatError("truncated .mlp stream");
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data[pos + i]) << (8 * i);
        pos += 4;
        return v;
    }
    double f64() {
        need(8);
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(data[pos + i]) << (8 * i);
        pos += 8;
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
};

}  // namespace detail

inline std::vector<std::uint8_t> serialize(const Mlp& net) {
    std::vector<std::uint8_t> out;
    out.insert(out.end(), detail::kMlpMagic, detail::kMlpMagic + 8);
    detail::put_u32(out, detail::kMlpVersion);
    detail::put_u32(out, static_cast<std::uint32_t>(net.layer_dims.size()));
    for (int d : net.layer_dims) detail::put_u32(out, static_cast<std::uint32_t>(d));
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        for (double v : net.weights[l]) detail::put_f64(out, v);
        for (double v : net.biases[l]) detail::put_f64(out, v);
    }
    return out;
}

inline Mlp deserialize(std::span<const std::uint8_t> bytes) {
    detail::ByteReader r{bytes};
    r.need(8);
    if (std::memcmp(bytes.data(), detail::kMlpMagic, 8) != 0) throw FormatError("bad .mlp magic");
    r.pos = 8;
    const std::uint32_t version = r.u32();
    if (version != detail::kMlpVersion) throw FormatError("unsupported .mlp version " + std::to_string(version));
    const std::uint32_t n_dims = r.u32();
    if (n_dims < 2 || n_dims > 64) throw FormatError("implausible .mlp layer count " + std::to_string(n_dims));
    std::vector<int> dims(n_dims);
    for (auto& d : dims) {
        const std::uint32_t v = r.u32();
        if (v == 0 || v > (1u << 20)) throw FormatError("implausible .mlp layer dim");
        d = static_cast<int>(v);
    }
    Mlp net;
    net.layer_dims = std::move(dims);
    for (std::size_t l = 0; l + 1 < net.layer_dims.size(); ++l) {
        const int in_dim = net.layer_dims[l];
        const int out_dim = net.layer_dims[l + 1];
        std::vector<double> w(static_cast<std::size_t>(in_dim) * out_dim);
        for (auto& v : w) v = r.f64();
        std::vector<double> b(static_cast<std::size_t>(out_dim));
        for (auto& v : b) v = r.f64();
        net.weights.push_back(std::move(w));
        net.biases.push_back(std::move(b));
    }
    if (r.pos != bytes.size()) throw FormatError("trailing bytes in .mlp stream");
    return net;
}

inline void save_mlp(const Mlp& net, const std::filesystem::path& path) {
    const auto bytes = serialize(net);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed on '" + path.string() + "'");
}

inline Mlp load_mlp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize(bytes);
}

}  // namespace tiltshield
