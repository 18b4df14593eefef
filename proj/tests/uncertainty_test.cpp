// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "chess/uncertainty.hpp"
#include "chess/workload.hpp"

namespace chess {
namespace {

TEST(Entropy, KnownDistributions) {
    const std::vector<double> uniform8(8, 0.125);
    EXPECT_NEAR(entropy(uniform8), std::log(8.0), 1e-12);
    const std::vector<double> one_hot{0.0, 1.0, 0.0};
    EXPECT_NEAR(entropy(one_hot), 0.0, 1e-12);
    const std::vector<double> mixed{0.5, 0.25, 0.25};
    EXPECT_NEAR(entropy(mixed), 1.5 * std::log(2.0), 1e-12);
}

TEST(Entropy, RejectsInvalid) {
    EXPECT_THROW(entropy(std::vector<double>{0.6, 0.6}), InputError);
    EXPECT_THROW(entropy(std::vector<double>{1.2, -0.2}), InputError);
    EXPECT_THROW(entropy(std::vector<double>{}), InputError);
    EXPECT_NO_THROW(entropy(std::vector<double>{0.5, 0.5 + 1e-12}));
}

TEST(Entropy, BoundedByLogVocab) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> p(2 + rng() % 50);
        double total = 0.0;
        for (double& x : p) total += (x = u(rng));
        for (double& x : p) x /= total;
        const double h = entropy(p);
        EXPECT_GE(h, 0.0);
        EXPECT_LE(h, std::log(double(p.size())) + 1e-12);
    }
}

TEST(PageUncertainty, MeanAndPopulationVariance) {
    const std::vector<double> h{1.0, 2.0, 3.0, 4.0};
    const auto u = page_uncertainty(h);
    EXPECT_DOUBLE_EQ(u.mean_entropy, 2.5);
    EXPECT_DOUBLE_EQ(u.varentropy, 1.25);
    EXPECT_EQ(u.token_count, 4u);
    const auto flat = page_uncertainty(std::vector<double>(32, 0.7));
    EXPECT_NEAR(flat.varentropy, 0.0, 1e-24);
    EXPECT_THROW(page_uncertainty(std::vector<double>{}), PreconditionError);
}

TEST(Calibrate, NearestRankPercentile) {
    std::vector<PageUncertainty> samples;
    for (int i = 1; i <= 100; ++i) samples.push_back({double(i), double(200 - i), 32});
    const auto t = calibrate(samples, 0.99);
    EXPECT_DOUBLE_EQ(t.tau_entropy, 99.0);
    EXPECT_DOUBLE_EQ(t.tau_varentropy, 198.0);
    EXPECT_EQ(t.sample_count, 100u);
    EXPECT_TRUE(t.warnings.empty());
}

TEST(Calibrate, SmallSampleWarns) {
    std::vector<PageUncertainty> samples(10, {1.0, 1.0, 32});
    const auto t = calibrate(samples, 0.99);
    EXPECT_FALSE(t.warnings.empty());
}

TEST(Calibrate, Errors) {
    std::vector<PageUncertainty> samples(10, {1.0, 1.0, 32});
    EXPECT_THROW(calibrate(std::vector<PageUncertainty>{}, 0.99), CalibrationError);
    EXPECT_THROW(calibrate(samples, 1.0), ConfigError);
    EXPECT_THROW(calibrate(samples, 0.0), ConfigError);
}

TEST(Trigger, StrictQuadrant) {
    TriggerThresholds t;
    t.tau_entropy = 1.0;
    t.tau_varentropy = 0.5;
    EXPECT_TRUE(check_trigger({1.1, 0.6, 32}, t));
    EXPECT_FALSE(check_trigger({1.1, 0.4, 32}, t));
    EXPECT_FALSE(check_trigger({0.9, 0.6, 32}, t));
    EXPECT_FALSE(check_trigger({1.0, 0.5, 32}, t));  // equality does not fire
    EXPECT_TRUE(check_trigger({1.1, 0.4, 32}, t, TriggerMode::disjunction));
    EXPECT_FALSE(check_trigger({1.0, 0.5, 32}, t, TriggerMode::disjunction));
}

TEST(Trigger, FalsePositiveRateOnStableSample) {
    // Calibrate on one stable sample, measure the firing rate on a fresh one.
    WorkloadSpec spec;
    spec.seed = 1;
    const auto train = sample_stable_pages(spec, 32, 10000);
    spec.seed = 2;
    const auto test = sample_stable_pages(spec, 32, 10000);
    const auto t = calibrate(train, 0.99);
    std::size_t fired_or = 0, fired_and = 0;
    for (const auto& u : test) {
        fired_and += check_trigger(u, t) ? 1 : 0;
        fired_or += check_trigger(u, t, TriggerMode::disjunction) ? 1 : 0;
    }
    EXPECT_LE(fired_and, fired_or);
    EXPECT_LT(double(fired_or) / test.size(), 0.03);  // at most about 1 - 0.99^2
}

TEST(Monitor, ClosesPagesAndFires) {
    TriggerThresholds t;
    t.tau_entropy = 0.5;
    t.tau_varentropy = 0.01;
    UncertaintyMonitor m(t);
    for (double h : {0.1, 0.1, 0.1, 0.1}) m.observe(h);
    EXPECT_EQ(m.pending_tokens(), 4u);
    EXPECT_FALSE(m.close_page().fired);
    for (double h : {0.2, 1.8, 0.2, 1.8}) m.observe(h);
    const auto v = m.close_page();
    EXPECT_TRUE(v.fired);
    EXPECT_DOUBLE_EQ(v.stats.mean_entropy, 1.0);
    EXPECT_EQ(m.fired_count(), 1u);
    EXPECT_EQ(m.pending_tokens(), 0u);
}

TEST(Monitor, NoThresholdsNeverFires) {
    UncertaintyMonitor m(std::nullopt);
    m.observe(10.0);
    m.observe(0.0);
    EXPECT_FALSE(m.close_page().fired);
}

TEST(EntropyModel, InstabilityRaisesBothStatistics) {
    WorkloadSpec spec;
    EntropyModel stable(spec, 3), shaky(spec, 3);
    stable.begin_page(0.0);
    shaky.begin_page(0.8);
    std::vector<double> hs, hu;
    for (int i = 0; i < 32; ++i) {
        hs.push_back(entropy(stable.next_distribution()));
        hu.push_back(entropy(shaky.next_distribution()));
    }
    const auto a = page_uncertainty(hs), b = page_uncertainty(hu);
    EXPECT_GT(b.mean_entropy, a.mean_entropy);
    EXPECT_GT(b.varentropy, a.varentropy);
}

}  // namespace
}  // namespace chess
