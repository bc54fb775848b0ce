// Copyright (c) 2026 rdlab authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "rdlab/dense.hpp"
#include "rdlab/problems.hpp"

namespace rdlab::quant {

/// Asymmetric per-channel quantization parameters: the zero point is the
/// channel minimum and the scale is the channel range divided by the
/// level count. scale == 0 marks a constant (pass-through) channel.
struct QuantSpec {
    double zero_point = 0.0;
    double scale = 0.0;
};

enum class ChannelAxis { Rows, Cols };

struct QdqResult {
    DenseMatrix x_hat;
    std::vector<QuantSpec> specs;
};

namespace detail {

inline void qdq_channel(const DenseMatrix& x, DenseMatrix& out, QuantSpec& spec,
                        ChannelAxis axis, std::size_t c, double levels) {
    const std::size_t len = (axis == ChannelAxis::Cols) ? x.rows() : x.cols();
    auto get = [&](std::size_t k) {
        return (axis == ChannelAxis::Cols) ? x(k, c) : x(c, k);
    };
    auto put = [&](std::size_t k, double v) {
        if (axis == ChannelAxis::Cols) {
            out(k, c) = v;
        } else {
            out(c, k) = v;
        }
    };

    double lo = get(0);
    double hi = get(0);
    for (std::size_t k = 1; k < len; ++k) {
        lo = std::min(lo, get(k));
        hi = std::max(hi, get(k));
    }
    spec.zero_point = lo;
    if (hi == lo) {
        spec.scale = 0.0;  // constant channel passes through unchanged
        for (std::size_t k = 0; k < len; ++k) put(k, get(k));
        return;
    }
    spec.scale = (hi - lo) / levels;
    for (std::size_t k = 0; k < len; ++k) {
        // std::round is half-away-from-zero, the documented rounding mode.
        double q = std::round((get(k) - lo) / spec.scale);
        q = std::clamp(q, 0.0, levels);
        // The top code dequantizes to the exact channel maximum so that a
        // second pass sees the identical range and reproduces itself.
        put(k, q == levels ? hi : lo + q * spec.scale);
    }
}

}  // namespace detail

/// Dynamic per-channel quantize-dequantize with `levels` uniform steps
/// (255 for 8-bit). Non-learnable: the range is recomputed from the
/// data on every call.
inline QdqResult qdq_per_channel(const DenseMatrix& x, ChannelAxis axis,
                                 double levels = 255.0) {
    if (levels < 1.0) {
        throw std::invalid_argument("qdq_per_channel: levels must be >= 1");
    }
    const std::size_t channels = (axis == ChannelAxis::Cols) ? x.cols() : x.rows();
    QdqResult result{DenseMatrix(x.rows(), x.cols()), std::vector<QuantSpec>(channels)};
    for (std::size_t c = 0; c < channels; ++c) {
        detail::qdq_channel(x, result.x_hat, result.specs[c], axis, c, levels);
    }
    return result;
}

struct ProbeSeedResult {
    std::uint64_t seed = 0;
    double loss_fp = 0.0;
    double loss_q = 0.0;
};

struct ProbeResult {
    double loss_fp = 0.0;   // seed-averaged
    double loss_q = 0.0;    // seed-averaged
    double penalty = 0.0;   // loss_q - loss_fp
    std::vector<ProbeSeedResult> per_seed;
};

/// Toy W8A8 degradation probe. Weights are quantized once per output
/// channel; the latent activations are quantized dynamically per channel
/// on each forward pass. The input batch is data and passes through
/// unquantized. Reported penalty is the seed-averaged R-D loss delta.
inline ProbeResult w8a8_probe(const problems::TwoLayerNetRD& net, const DenseMatrix& enc,
                              const DenseMatrix& dec, std::size_t batch_size,
                              const std::vector<std::uint64_t>& seeds) {
    if (batch_size < 1 || seeds.empty()) {
        throw std::invalid_argument("w8a8_probe: need a nonempty batch and seed list");
    }
    const DenseMatrix enc_q = qdq_per_channel(enc, ChannelAxis::Rows).x_hat;
    const DenseMatrix dec_q = qdq_per_channel(dec, ChannelAxis::Rows).x_hat;

    ProbeResult out;
    for (const std::uint64_t seed : seeds) {
        const DenseMatrix batch = net.sample_batch(batch_size, seed);
        const double n = static_cast<double>(batch.rows());

        const double loss_fp = net.loss(enc, dec, batch).total;

        const DenseMatrix z = matmul(batch, enc_q.transpose());
        const DenseMatrix z_q = qdq_per_channel(z, ChannelAxis::Cols).x_hat;
        const DenseMatrix resid = matmul(z_q, dec_q.transpose()) - batch;
        const double rate = dot(z_q, z_q) / n;
        const double dist = dot(resid, resid) / n;
        const double loss_q = dist + net.lambda * rate;

        out.per_seed.push_back({seed, loss_fp, loss_q});
        out.loss_fp += loss_fp;
        out.loss_q += loss_q;
    }
    const double count = static_cast<double>(seeds.size());
    out.loss_fp /= count;
    out.loss_q /= count;
    out.penalty = out.loss_q - out.loss_fp;
    return out;
}

inline ProbeResult w8a8_probe(const problems::TwoLayerNetRD& net, std::size_t batch_size,
                              const std::vector<std::uint64_t>& seeds) {
    return w8a8_probe(net, net.enc, net.dec, batch_size, seeds);
}

}  // namespace rdlab::quant
