// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>
#include <thread>
#include <vector>

#include "chess/io.hpp"
#include "chess/kv_store.hpp"
#include "support/test_util.hpp"

namespace chess {
namespace {

SelectionConfig config_with_page_size(std::size_t b) {
    SelectionConfig c;
    c.page_size = b;
    return c;
}

void append_n(PagedKvStore& store, SequenceState& seq, std::size_t n, std::vector<AppendEvent>* events = nullptr) {
    std::vector<double> k(store.dim(), 1.0), v(store.dim(), 2.0);
    for (std::size_t i = 0; i < n; ++i) {
        k[0] = static_cast<double>(seq.token_count);
        auto ev = store.append_token(seq, k, v);
        if (events) events->push_back(ev);
    }
}

TEST(KvStore, CreateSequenceIsEmpty) {
    PagedKvStore store(1024, config_with_page_size(32), 8);
    const auto seq = store.create_sequence();
    EXPECT_EQ(seq.token_count, 0u);
    EXPECT_TRUE(seq.page_table.empty());
    EXPECT_EQ(store.used_pages(), 0u);
}

TEST(KvStore, ZeroCapacityIsConfigError) {
    EXPECT_THROW(PagedKvStore(0, config_with_page_size(32), 8), ConfigError);
    EXPECT_THROW(PagedKvStore(4, config_with_page_size(32), 0), ConfigError);
}

TEST(KvStore, PoolExhaustsOnFifthPage) {
    PagedKvStore store(4, config_with_page_size(32), 4);
    auto seq = store.create_sequence();
    append_n(store, seq, 4 * 32);  // four full pages fit
    EXPECT_EQ(store.free_pages(), 0u);
    std::vector<double> k(4, 0.0);
    EXPECT_THROW(store.append_token(seq, k, k), OutOfPagesError);
    EXPECT_EQ(seq.token_count, 128u);
}

TEST(KvStore, ThirtySecondTokenSealsTail) {
    PagedKvStore store(8, config_with_page_size(32), 4);
    auto seq = store.create_sequence();
    append_n(store, seq, 31);
    std::vector<AppendEvent> events;
    append_n(store, seq, 1, &events);
    ASSERT_EQ(events.size(), 1u);
    EXPECT_TRUE(events[0].sealed);
    EXPECT_EQ(events[0].page_id, seq.page_table.back());
    EXPECT_EQ(events[0].slot, 31u);
}

TEST(KvStore, FirstTokenDoesNotSeal) {
    PagedKvStore store(8, config_with_page_size(32), 4);
    auto seq = store.create_sequence();
    std::vector<AppendEvent> events;
    append_n(store, seq, 1, &events);
    EXPECT_FALSE(events[0].sealed);
    EXPECT_EQ(seq.token_count, 1u);
    EXPECT_NE(store.tail_page(seq), nullptr);
}

TEST(KvStore, NinetySixTokensSealThreePages) {
    PagedKvStore store(8, config_with_page_size(32), 4);
    auto seq = store.create_sequence();
    std::vector<AppendEvent> events;
    append_n(store, seq, 96, &events);
    EXPECT_EQ(std::count_if(events.begin(), events.end(), [](const auto& e) { return e.sealed; }), 3);
    EXPECT_EQ(store.tail_page(seq), nullptr);
}

TEST(KvStore, GatherIsDirectLookup) {
    PagedKvStore store(16, config_with_page_size(32), 4);
    SequenceState seq;
    seq.page_table = {PageId{7}, PageId{2}, PageId{9}};
    const std::vector<std::size_t> idx{0, 2};
    EXPECT_EQ(store.gather_pages(seq, idx), (std::vector<PageId>{PageId{7}, PageId{9}}));
    EXPECT_TRUE(store.gather_pages(seq, std::vector<std::size_t>{}).empty());
    EXPECT_THROW(store.gather_pages(seq, std::vector<std::size_t>{3}), IndexError);
}

TEST(KvStore, ShapeMismatchRejected) {
    PagedKvStore store(2, config_with_page_size(4), 3);
    auto seq = store.create_sequence();
    std::vector<double> good(3), bad(2);
    EXPECT_THROW(store.append_token(seq, bad, good), ShapeError);
    EXPECT_THROW(store.append_token(seq, good, bad), ShapeError);
    EXPECT_EQ(seq.token_count, 0u);
}

TEST(KvStore, UnwrittenSlotsCannotBeRead) {
    PagedKvStore store(2, config_with_page_size(4), 3);
    auto seq = store.create_sequence();
    append_n(store, seq, 2);
    const KvPage& p = store.page(seq.page_table[0]);
    EXPECT_NO_THROW(p.key(1));
    EXPECT_THROW(p.key(2), IndexError);
    EXPECT_THROW(store.page(PageId{1}), IndexError);  // never allocated
}

// Conservation and the token_count/page_table relation, over random lengths.
TEST(KvStore, ConservationProperty) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t b = 1 + rng() % 40;
        const std::size_t n = rng() % 400;
        PagedKvStore store(512, config_with_page_size(b), 2);
        auto seq = store.create_sequence();
        append_n(store, seq, n);
        const std::size_t pages = (n + b - 1) / b;
        EXPECT_EQ(seq.token_count, n);
        EXPECT_EQ(seq.page_table.size(), pages);
        EXPECT_EQ(store.used_pages(), pages);
        if (pages > 0) {
            const KvPage& last = store.page(seq.page_table.back());
            const std::size_t expect = last.sealed() ? pages * b : (pages - 1) * b + last.fill();
            EXPECT_EQ(seq.token_count, expect);
        }
        std::set<PageId> distinct(seq.page_table.begin(), seq.page_table.end());
        EXPECT_EQ(distinct.size(), seq.page_table.size());
    }
}

TEST(KvStore, SealedPagesAreImmutable) {
    PagedKvStore store(8, config_with_page_size(4), 3);
    auto seq = store.create_sequence();
    append_n(store, seq, 4);
    const KvPage& sealed = store.page(seq.page_table[0]);
    const Matrix keys_before = sealed.keys();
    const auto version = sealed.version();
    append_n(store, seq, 9);  // writes land on later pages only
    EXPECT_EQ(sealed.keys(), keys_before);
    EXPECT_EQ(sealed.version(), version);
}

TEST(KvStore, SinkCountTracksPrefix) {
    SelectionConfig c = config_with_page_size(2);
    c.sink_pages = 2;
    PagedKvStore store(8, c, 1);
    auto seq = store.create_sequence();
    append_n(store, seq, 1);
    EXPECT_EQ(seq.sink_count, 1u);
    append_n(store, seq, 5);
    EXPECT_EQ(seq.sink_count, 2u);
}

TEST(KvStore, ReleaseReturnsPagesFirstFit) {
    PagedKvStore store(4, config_with_page_size(2), 1);
    auto a = store.create_sequence();
    auto b = store.create_sequence();
    append_n(store, a, 4);  // pages 0, 1
    append_n(store, b, 2);  // page 2
    store.release(a);
    EXPECT_EQ(store.free_pages(), 3u);
    EXPECT_TRUE(a.page_table.empty());
    append_n(store, b, 1);  // lowest free slot
    EXPECT_EQ(b.page_table.back(), PageId{0});
}

TEST(KvStore, ParallelSequencesGetDistinctPages) {
    constexpr std::size_t kWorkers = 6;
    constexpr std::size_t kTokens = 32 * 20 + 5;
    PagedKvStore store(kWorkers * 21, config_with_page_size(32), 16);
    std::vector<SequenceState> seqs(kWorkers);
    std::vector<std::thread> workers;
    for (std::size_t w = 0; w < kWorkers; ++w) {
        workers.emplace_back([&, w] {
            std::vector<double> k(16, static_cast<double>(w)), v(16, 0.0);
            for (std::size_t t = 0; t < kTokens; ++t) store.append_token(seqs[w], k, v);
        });
    }
    for (auto& t : workers) t.join();

    std::set<PageId> all;
    for (std::size_t w = 0; w < kWorkers; ++w) {
        EXPECT_EQ(seqs[w].token_count, kTokens);
        for (PageId id : seqs[w].page_table) {
            EXPECT_TRUE(all.insert(id).second);
            const KvPage& p = store.page(id);
            for (std::size_t s = 0; s < p.fill(); ++s) EXPECT_EQ(p.key(s)[0], static_cast<double>(w));
        }
    }
    EXPECT_EQ(store.free_pages(), 0u);
}

TEST(KvStore, PageDumpRoundTripsBitExact) {
    std::mt19937_64 rng(3);
    const KvPage page = testing::random_page(rng, 8, 5);
    const auto j = io::page_to_json(PageId{42}, page);
    const auto [id, back] = io::page_from_json(io::json::parse(j.dump()));
    EXPECT_EQ(id, PageId{42});
    EXPECT_EQ(back.fill(), page.fill());
    EXPECT_EQ(back.keys(), page.keys());
    EXPECT_EQ(back.values(), page.values());

    auto broken = j;
    broken["fill"] = 3;
    EXPECT_THROW(io::page_from_json(broken), InputError);
}

}  // namespace
}  // namespace chess
