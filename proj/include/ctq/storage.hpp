#ifndef CTQ_STORAGE_HPP
#define CTQ_STORAGE_HPP

#include "ctq/codec.hpp"
#include "ctq/model.hpp"

#include <atomic>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

/// \file
/// Simulated block device. A page holds a group of whole trajectories; every
/// query-time read is counted.

namespace ctq {

using PageId = std::uint64_t;

struct AccessCounter {
    std::uint64_t raw_reads = 0;
    std::uint64_t unique_reads_this_query = 0;
};

/// Per-query accounting. Counts every read and every first read of a page.
class QueryScope {
  public:
    void note(PageId id) {
        ++counter_.raw_reads;
        if (seen_.insert(id).second)
            ++counter_.unique_reads_this_query;
    }

    const AccessCounter& counter() const { return counter_; }
    bool touched(PageId id) const { return seen_.count(id) != 0; }

    void reset() {
        seen_.clear();
        counter_ = {};
    }

  private:
    std::unordered_set<PageId> seen_;
    AccessCounter counter_;
};

inline void encode_trajectories(ByteWriter& w, std::span<const Trajectory> trajs) {
    w.u64(trajs.size());
    for (const auto& traj : trajs) {
        w.u64(traj.user);
        w.u64(traj.points.size());
        for (const auto& p : traj.points) {
            w.f64(p.x);
            w.f64(p.y);
            w.i64(p.t);
        }
    }
}

inline std::vector<Trajectory> decode_trajectories(ByteReader& r) {
    std::vector<Trajectory> out(r.count(16));
    for (auto& traj : out) {
        traj.user = r.u64();
        traj.points.resize(r.count(24));
        for (auto& p : traj.points) {
            p.x = r.f64();
            p.y = r.f64();
            p.t = r.i64();
        }
    }
    return out;
}

/// Append-only page store. Page ids are dense from 0. Once sealed, the store
/// is read-only and safe for concurrent counted reads.
class PageStore {
  public:
    PageStore() = default;
    PageStore(const PageStore&) = delete;
    PageStore& operator=(const PageStore&) = delete;

    PageId write_page(std::span<const Trajectory> trajs) {
        ByteWriter w;
        encode_trajectories(w, trajs);
        return append_raw(std::move(w).str());
    }

    /// Stores an already encoded page payload.
    PageId append_raw(std::string payload) {
        if (sealed_)
            throw std::logic_error("page store is sealed");
        pages_.push_back(std::move(payload));
        return pages_.size() - 1;
    }

    void seal() { sealed_ = true; }
    bool sealed() const { return sealed_; }

    /// Counted read: returns the page's complete trajectories.
    std::vector<Trajectory> read_page(PageId id, QueryScope& scope) const {
        auto out = peek_page(id);
        raw_reads_.fetch_add(1, std::memory_order_relaxed);
        scope.note(id);
        return out;
    }

    /// Uncounted read for maintenance paths (checks, dumps, persistence).
    std::vector<Trajectory> peek_page(PageId id) const {
        if (id >= pages_.size())
            throw std::out_of_range("unknown page id " + std::to_string(id));
        ByteReader r(pages_[id]);
        auto out = decode_trajectories(r);
        if (!r.done())
            throw FormatError("trailing bytes in page " + std::to_string(id));
        return out;
    }

    const std::string& raw(PageId id) const { return pages_.at(id); }
    std::size_t page_count() const { return pages_.size(); }

    std::size_t total_bytes() const {
        std::size_t n = 0;
        for (const auto& p : pages_)
            n += p.size();
        return n;
    }

    /// Reads counted over the store's lifetime, across all scopes.
    std::uint64_t total_raw_reads() const { return raw_reads_.load(std::memory_order_relaxed); }

  private:
    std::vector<std::string> pages_;
    bool sealed_ = false;
    mutable std::atomic<std::uint64_t> raw_reads_{0};
};

/// Every trajectory held by the store, in page order. Uncounted.
inline std::vector<Trajectory> dump_trajectories(const PageStore& store) {
    std::vector<Trajectory> out;
    for (PageId id = 0; id < store.page_count(); ++id) {
        auto page = store.peek_page(id);
        for (auto& t : page)
            out.push_back(std::move(t));
    }
    return out;
}

} // namespace ctq

#endif // CTQ_STORAGE_HPP
