// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <mutex>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "chess/config.hpp"
#include "chess/errors.hpp"
#include "chess/matrix.hpp"

namespace chess {

/// Physical page slot in a PagedKvStore.
struct PageId {
    std::size_t value = 0;

    friend auto operator<=>(const PageId&, const PageId&) = default;
};

/// One page of B token slots. Keys and values are stored pre-flattened, one
/// D_flat row per token. Rows at or beyond fill() hold no data.
class KvPage {
public:
    KvPage(std::size_t page_size, std::size_t dim) : m_keys(page_size, dim), m_values(page_size, dim) {}

    std::size_t capacity() const noexcept { return m_keys.rows(); }
    std::size_t dim() const noexcept { return m_keys.cols(); }
    std::size_t fill() const noexcept { return m_fill; }
    bool sealed() const noexcept { return m_fill == capacity(); }

    /// Incremented on every payload write. Once sealed it must never move again.
    std::uint64_t version() const noexcept { return m_version; }

    std::span<const double> key(std::size_t slot) const { return checked(m_keys, slot); }
    std::span<const double> value(std::size_t slot) const { return checked(m_values, slot); }

    const Matrix& keys() const noexcept { return m_keys; }
    const Matrix& values() const noexcept { return m_values; }

    /// Builds a page directly from payload rows (used for fixtures and the
    /// batch-rebuild path). `keys.rows()` tokens are treated as written.
    static KvPage from_rows(std::size_t page_size, const Matrix& keys, const Matrix& values) {
        if (keys.rows() != values.rows() || keys.cols() != values.cols()) {
            throw ShapeError("KvPage::from_rows: keys and values differ in shape");
        }
        if (keys.rows() > page_size) {
            throw ShapeError("KvPage::from_rows: more rows than page_size");
        }
        KvPage page(page_size, keys.cols());
        for (std::size_t r = 0; r < keys.rows(); ++r) {
            page.write(keys.row(r), values.row(r));
        }
        return page;
    }

private:
    friend class PagedKvStore;

    std::span<const double> checked(const Matrix& m, std::size_t slot) const {
        if (slot >= m_fill) {
            throw IndexError("KvPage: slot " + std::to_string(slot) + " not written (fill " + std::to_string(m_fill) +
                             ")");
        }
        return m.row(slot);
    }

    void write(std::span<const double> key, std::span<const double> value) {
        if (sealed()) throw PreconditionError("KvPage: write to sealed page");
        if (key.size() != dim() || value.size() != dim()) {
            throw ShapeError("KvPage: expected vectors of dimension " + std::to_string(dim()));
        }
        std::copy(key.begin(), key.end(), m_keys.row(m_fill).begin());
        std::copy(value.begin(), value.end(), m_values.row(m_fill).begin());
        ++m_fill;
        ++m_version;
    }

    void reset() {
        m_fill = 0;
        ++m_version;
    }

    Matrix m_keys;
    Matrix m_values;
    std::size_t m_fill = 0;
    std::uint64_t m_version = 0;
};

/// Logical view of one sequence: logical page position -> physical page.
struct SequenceState {
    std::vector<PageId> page_table;
    std::size_t token_count = 0;
    std::size_t sink_count = 0;

    std::size_t page_count() const noexcept { return page_table.size(); }
};

/// Result of appending one token.
struct AppendEvent {
    PageId page_id;
    std::size_t logical_index = 0;  // position of the page in the sequence
    std::size_t slot = 0;           // token slot inside the page
    bool sealed = false;            // true when this write filled the page
};

/// Fixed-capacity pool of pages shared by any number of sequences.
///
/// Allocation is serialized by an internal mutex, so distinct sequences may be
/// advanced from distinct threads. Each SequenceState must have a single writer.
/// Selection and reconstruction operate on page indices only; the store never
/// moves a payload once it is written.
class PagedKvStore {
public:
    PagedKvStore(std::size_t capacity_pages, const SelectionConfig& config, std::size_t dim)
        : m_config(config), m_dim(dim) {
        if (capacity_pages == 0) throw ConfigError("PagedKvStore: capacity must be >= 1 page");
        if (dim == 0) throw ConfigError("PagedKvStore: key dimension must be >= 1");
        config.validate();
        m_slots.resize(capacity_pages);
        for (std::size_t i = 0; i < capacity_pages; ++i) m_free.insert(i);
    }

    PagedKvStore(const PagedKvStore&) = delete;
    PagedKvStore& operator=(const PagedKvStore&) = delete;

    const SelectionConfig& config() const noexcept { return m_config; }
    std::size_t dim() const noexcept { return m_dim; }
    std::size_t capacity() const noexcept { return m_slots.size(); }

    std::size_t free_pages() const {
        std::lock_guard lock(m_mutex);
        return m_free.size();
    }

    std::size_t used_pages() const { return capacity() - free_pages(); }

    /// A new, empty sequence. No page is allocated until the first append.
    SequenceState create_sequence() const { return {}; }

    AppendEvent append_token(SequenceState& seq, std::span<const double> key, std::span<const double> value) {
        if (key.size() != m_dim || value.size() != m_dim) {
            throw ShapeError("append_token: expected vectors of dimension " + std::to_string(m_dim));
        }
        if (seq.page_table.empty() || slot(seq.page_table.back()).sealed()) {
            seq.page_table.push_back(allocate());
            seq.sink_count = std::min(m_config.sink_pages, seq.page_table.size());
        }
        const PageId id = seq.page_table.back();
        KvPage& page = slot(id);
        AppendEvent ev{id, seq.page_table.size() - 1, page.fill(), false};
        page.write(key, value);
        ++seq.token_count;
        ev.sealed = page.sealed();
        return ev;
    }

    const KvPage& page(PageId id) const {
        if (id.value >= m_slots.size() || !m_slots[id.value]) {
            throw IndexError("PagedKvStore: page " + std::to_string(id.value) + " is not allocated");
        }
        return *m_slots[id.value];
    }

    /// The last page of `seq` when it is partially filled, otherwise nullptr.
    const KvPage* tail_page(const SequenceState& seq) const {
        if (seq.page_table.empty()) return nullptr;
        const KvPage& p = page(seq.page_table.back());
        return p.sealed() ? nullptr : &p;
    }

    /// Maps logical page positions to physical ids, in the order given. No payload is touched.
    std::vector<PageId> gather_pages(const SequenceState& seq, std::span<const std::size_t> logical_indices) const {
        std::vector<PageId> out;
        out.reserve(logical_indices.size());
        for (std::size_t idx : logical_indices) {
            if (idx >= seq.page_table.size()) {
                throw IndexError("gather_pages: logical index " + std::to_string(idx) + " out of range (" +
                                 std::to_string(seq.page_table.size()) + " pages)");
            }
            out.push_back(seq.page_table[idx]);
        }
        return out;
    }

    /// Returns all pages of `seq` to the pool and clears it.
    void release(SequenceState& seq) {
        std::lock_guard lock(m_mutex);
        for (PageId id : seq.page_table) {
            m_slots[id.value]->reset();
            m_free.insert(id.value);
        }
        seq = {};
    }

private:
    KvPage& slot(PageId id) { return *m_slots[id.value]; }

    PageId allocate() {
        std::lock_guard lock(m_mutex);
        if (m_free.empty()) {
            throw OutOfPagesError("PagedKvStore: all " + std::to_string(m_slots.size()) + " pages in use");
        }
        const std::size_t id = *m_free.begin();
        m_free.erase(m_free.begin());
        if (!m_slots[id]) {
            m_slots[id] = std::make_unique<KvPage>(m_config.page_size, m_dim);
        }
        return PageId{id};
    }

    SelectionConfig m_config;
    std::size_t m_dim;
    mutable std::mutex m_mutex;
    std::vector<std::unique_ptr<KvPage>> m_slots;
    std::set<std::size_t> m_free;  // ordered: begin() is the first fit
};

}  // namespace chess
