#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "karma/config.hpp"
#include "karma/rational.hpp"

namespace karma {

// Physical side of the allocator: capacity slices of slice_mb each, handed
// between users as quantum allocations change. Sequence numbers fence off
// accesses that raced with a reassignment.

inline constexpr UserId kNoOwner = -1;

enum class AccessStatus { ok, flush_then_ok, stale };

struct PoolEvent {
    std::uint64_t tick = 0;
    std::int64_t slice = 0;
    UserId actor = kNoOwner;
    std::string kind;  // assign release read write flush stale_read stale_write
    std::uint64_t seq = 0;
};

inline std::string format_event(const PoolEvent& e) {
    return std::to_string(e.tick) + "\t" + std::to_string(e.slice) + "\t" +
           std::to_string(e.actor) + "\t" + e.kind + "\t" + std::to_string(e.seq);
}

class SlicePool {
  public:
    using Sink = std::function<void(const PoolEvent&)>;

    explicit SlicePool(std::int64_t capacity, Sink sink = {})
        : sink_(std::move(sink)), slices_(check_cap(capacity)) {}

    std::int64_t capacity() const { return static_cast<std::int64_t>(slices_.size()); }

    UserId owner_of(std::int64_t s) const { return at(s).owner; }
    std::uint64_t seq_of(std::int64_t s) const { return at(s).seq; }

    std::int64_t owned_count(UserId u) const {
        std::int64_t c = 0;
        for (const auto& s : slices_) c += s.owner == u;
        return c;
    }

    std::int64_t shared_count() const { return owned_count(kNoOwner); }

    // Every slice is either shared or owned; the split always covers capacity.
    bool check_invariant() const {
        std::int64_t covered = shared_count();
        std::map<UserId, std::int64_t> seen;
        for (const auto& s : slices_)
            if (s.owner != kNoOwner) ++seen[s.owner];
        for (const auto& [u, c] : seen) covered += c;
        return covered == capacity();
    }

    // Reassigns ownership to match alloc with minimal movement: owners keep
    // the slices they already hold up to their new count. Returns the number
    // of slices whose owner changed (half the L1 distance between the old and
    // new ownership histograms, shared pool included).
    std::int64_t apply_allocation(const std::map<UserId, std::int64_t>& alloc) {
        std::int64_t total = 0;
        for (const auto& [u, c] : alloc) {
            if (u < 0) throw input_error("slice pool: negative user id");
            if (c < 0) throw input_error("slice pool: negative allocation");
            total += c;
        }
        if (total > capacity()) throw input_error("slice pool: allocation exceeds capacity");

        std::map<UserId, std::int64_t> keep = alloc;  // how many current slices each user keeps
        std::vector<std::int64_t> free_list;
        for (std::int64_t s = 0; s < capacity(); ++s) {
            Slice& sl = slices_[s];
            if (sl.owner == kNoOwner) {
                free_list.push_back(s);
                continue;
            }
            auto it = keep.find(sl.owner);
            if (it != keep.end() && it->second > 0) {
                it->second -= 1;  // stays put
            } else {
                release(s);
                free_list.push_back(s);
            }
        }
        std::int64_t moved = 0;
        std::size_t next = 0;
        for (const auto& [u, want] : keep) {
            for (std::int64_t i = 0; i < want; ++i) {
                assign(free_list[next++], u);
                ++moved;
            }
        }
        return moved;
    }

    // Read is only valid against the exact current sequence number.
    AccessStatus read(std::int64_t s, UserId actor, std::uint64_t seq) {
        Slice& sl = at(s);
        if (actor != sl.owner || seq != sl.seq) {
            emit({tick_++, s, actor, "stale_read", seq});
            return AccessStatus::stale;
        }
        return touch(s, actor, "read", sl.seq);
    }

    // Write tolerates a newer sequence number (the writer may have observed a
    // reassignment the pool has not processed yet); the slice adopts it.
    AccessStatus write(std::int64_t s, UserId actor, std::uint64_t seq) {
        Slice& sl = at(s);
        if (actor != sl.owner || seq < sl.seq) {
            emit({tick_++, s, actor, "stale_write", seq});
            return AccessStatus::stale;
        }
        sl.seq = seq;
        return touch(s, actor, "write", sl.seq);
    }

    const std::vector<PoolEvent>& events() const { return log_; }

    void dump_tsv(std::ostream& os) const {
        os << "tick\tslice\tactor\tkind\tseq\n";
        for (const auto& e : log_) os << format_event(e) << "\n";
    }

  private:
    struct Slice {
        UserId owner = kNoOwner;
        std::uint64_t seq = 0;
        bool touched = false;        // current owner has accessed it
        UserId dirty = kNoOwner;     // previous owner whose data still sits here
    };

    static std::int64_t check_cap(std::int64_t capacity) {
        if (capacity <= 0) throw input_error("slice pool: capacity must be positive");
        return capacity;
    }

    Slice& at(std::int64_t s) {
        if (s < 0 || s >= capacity()) throw input_error("slice pool: slice out of range");
        return slices_[static_cast<std::size_t>(s)];
    }
    const Slice& at(std::int64_t s) const {
        if (s < 0 || s >= capacity()) throw input_error("slice pool: slice out of range");
        return slices_[static_cast<std::size_t>(s)];
    }

    // Release does not advance seq (the owner check already fences a freed
    // slice); a reassignment therefore bumps seq exactly once, at assign.
    void release(std::int64_t s) {
        Slice& sl = slices_[static_cast<std::size_t>(s)];
        if (sl.touched) sl.dirty = sl.owner;  // untouched slices leave no new data behind
        emit({tick_++, s, sl.owner, "release", sl.seq});
        sl.owner = kNoOwner;
        sl.touched = false;
    }

    void assign(std::int64_t s, UserId u) {
        Slice& sl = slices_[static_cast<std::size_t>(s)];
        sl.owner = u;
        sl.seq += 1;
        sl.touched = false;
        emit({tick_++, s, u, "assign", sl.seq});
    }

    // First access after a reassignment flushes the previous owner's data
    // before the new owner sees the slice.
    AccessStatus touch(std::int64_t s, UserId actor, const char* kind, std::uint64_t seq) {
        Slice& sl = slices_[static_cast<std::size_t>(s)];
        bool flushed = false;
        if (!sl.touched && sl.dirty != kNoOwner && sl.dirty != actor) {
            emit({tick_++, s, sl.dirty, "flush", seq});
            flushed = true;
        }
        if (!sl.touched) sl.dirty = kNoOwner;
        sl.touched = true;
        emit({tick_++, s, actor, kind, seq});
        return flushed ? AccessStatus::flush_then_ok : AccessStatus::ok;
    }

    void emit(const PoolEvent& e) {
        log_.push_back(e);
        if (sink_) sink_(e);
    }

    Sink sink_;
    std::vector<Slice> slices_;
    std::vector<PoolEvent> log_;
    std::uint64_t tick_ = 0;
};

}  // namespace karma
