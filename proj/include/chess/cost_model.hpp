// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>

#include "chess/errors.hpp"

namespace chess {

/// Shape of the served model for the analytical per-step cost model.
///
/// The defaults describe an 8B-class GQA decoder (32 layers, 8 KV heads of
/// width 128, hidden 4096, 128256-token vocabulary, bfloat16): 128 KiB of KV
/// state per token, so a 12288-token sequence holds 1.5 GiB.
struct CostModelParams {
    std::uint64_t layers = 32;
    std::uint64_t kv_heads = 8;
    std::uint64_t head_dim = 128;
    std::uint64_t hidden_dim = 4096;
    std::uint64_t vocab = 128256;
    std::uint64_t bytes_per_element = 2;
    std::uint64_t weight_bytes = 16'060'522'496;  // 8'030'261'248 parameters

    void validate() const {
        if (layers == 0 || kv_heads == 0 || head_dim == 0 || hidden_dim == 0 || vocab == 0 || bytes_per_element == 0 ||
            weight_bytes == 0) {
            throw ConfigError("CostModelParams: all fields must be positive");
        }
        if (weight_bytes / bytes_per_element <= vocab * hidden_dim) {
            throw ConfigError("CostModelParams: weights must exceed the embedding table");
        }
    }

    friend bool operator==(const CostModelParams&, const CostModelParams&) = default;
};

struct StepCost {
    std::uint64_t kv_bytes = 0;      // K and V read for L active tokens
    std::uint64_t weight_bytes = 0;  // independent of L
    double attention_flops = 0.0;    // QK^T plus AV over L tokens, all layers
    double linear_flops = 0.0;       // projections, MLP and LM head; independent of L
    double attention_ratio = 0.0;
};

/// Idealized bytes and FLOPs of one decode step attending to `active_tokens` tokens.
/// Attention is 4 * layers * hidden * L (two GEMVs of width hidden per token per
/// layer); the linear part is two FLOPs per weight outside the input embedding.
inline StepCost cost_model_step(const CostModelParams& params, std::uint64_t active_tokens) {
    params.validate();
    if (active_tokens == 0) throw ConfigError("cost_model_step: active token count must be >= 1");
    StepCost c;
    c.kv_bytes = 2 * params.layers * params.kv_heads * params.head_dim * active_tokens * params.bytes_per_element;
    c.weight_bytes = params.weight_bytes;
    c.attention_flops = 4.0 * static_cast<double>(params.layers) * static_cast<double>(params.hidden_dim) *
                        static_cast<double>(active_tokens);
    const double matmul_params =
        static_cast<double>(params.weight_bytes / params.bytes_per_element - params.vocab * params.hidden_dim);
    c.linear_flops = 2.0 * matmul_params;
    c.attention_ratio = c.attention_flops / (c.attention_flops + c.linear_flops);
    return c;
}

/// Smallest L at which attention takes at least half of the step FLOPs.
inline std::uint64_t attention_crossover_tokens(const CostModelParams& params) {
    const StepCost one = cost_model_step(params, 1);
    const double per_token = one.attention_flops;
    auto l = static_cast<std::uint64_t>(one.linear_flops / per_token);
    while (cost_model_step(params, l == 0 ? 1 : l).attention_ratio < 0.5) ++l;
    return l == 0 ? 1 : l;
}

}  // namespace chess
