// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "chess/cost_model.hpp"

namespace chess {
namespace {

constexpr double kGiB = 1024.0 * 1024.0 * 1024.0;

TEST(CostModel, KvFootprintAt12kTokens) {
    const auto c = cost_model_step({}, 12288);
    // 2 (K, V) x 32 layers x 8 heads x 128 dims x 2 bytes = 131072 bytes per token.
    EXPECT_EQ(c.kv_bytes, 131072ull * 12288ull);
    EXPECT_NEAR(double(c.kv_bytes) / kGiB, 1.5, 1e-12);
}

TEST(CostModel, LinearInActiveTokens) {
    const CostModelParams p;
    const auto a = cost_model_step(p, 1000), b = cost_model_step(p, 3000);
    EXPECT_EQ(b.kv_bytes, 3 * a.kv_bytes);
    EXPECT_DOUBLE_EQ(b.attention_flops, 3 * a.attention_flops);
    EXPECT_EQ(a.weight_bytes, b.weight_bytes);
    EXPECT_DOUBLE_EQ(a.linear_flops, b.linear_flops);
}

TEST(CostModel, FlopCounts) {
    const CostModelParams p;
    const auto c = cost_model_step(p, 10);
    EXPECT_DOUBLE_EQ(c.attention_flops, 4.0 * 32 * 4096 * 10);
    const double params = 16'060'522'496.0 / 2 - 128256.0 * 4096;
    EXPECT_DOUBLE_EQ(c.linear_flops, 2 * params);
    EXPECT_DOUBLE_EQ(c.attention_ratio, c.attention_flops / (c.attention_flops + c.linear_flops));
}

TEST(CostModel, RatioStrictlyIncreasesAndCrosses) {
    const CostModelParams p;
    double prev = 0.0;
    for (std::uint64_t l = 1024; l <= 131072; l *= 2) {
        const double r = cost_model_step(p, l).attention_ratio;
        EXPECT_GT(r, prev);
        prev = r;
    }
    const auto x = attention_crossover_tokens(p);
    EXPECT_GE(cost_model_step(p, x).attention_ratio, 0.5);
    EXPECT_LT(cost_model_step(p, x - 1).attention_ratio, 0.5);
    EXPECT_GT(x, 10'000u);
    EXPECT_LT(x, 100'000u);
}

TEST(CostModel, Errors) {
    EXPECT_THROW(cost_model_step({}, 0), ConfigError);
    CostModelParams p;
    p.layers = 0;
    EXPECT_THROW(cost_model_step(p, 10), ConfigError);
    p = {};
    p.weight_bytes = 1000;
    EXPECT_THROW(p.validate(), ConfigError);
}

}  // namespace
}  // namespace chess
