#pragma once

#include <array>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <type_traits>

namespace mbf {

// Wait-free bounded single-producer/single-consumer ring. Capacity must be a
// power of two. push() fails (returns false) when full; nothing blocks.
template <typename T, std::size_t Capacity>
class SpscQueue {
    static_assert((Capacity & (Capacity - 1)) == 0, "Capacity must be a power of two");

public:
    bool push(const T& v)
    {
        const auto w = write_.load(std::memory_order_relaxed);
        const auto r = read_.load(std::memory_order_acquire);
        if (w - r >= Capacity) return false;
        slots_[w & kMask] = v;
        write_.store(w + 1, std::memory_order_release);
        return true;
    }

    std::optional<T> pop()
    {
        const auto r = read_.load(std::memory_order_relaxed);
        const auto w = write_.load(std::memory_order_acquire);
        if (r == w) return std::nullopt;
        T v = slots_[r & kMask];
        read_.store(r + 1, std::memory_order_release);
        return v;
    }

    std::size_t size() const
    {
        return write_.load(std::memory_order_acquire) - read_.load(std::memory_order_acquire);
    }
    bool empty() const { return size() == 0; }

private:
    static constexpr std::size_t kMask = Capacity - 1;
    std::array<T, Capacity> slots_{};
    alignas(64) std::atomic<std::size_t> write_{0};
    alignas(64) std::atomic<std::size_t> read_{0};
};

// Latest-value mailbox (triple buffer). The writer never waits; the reader
// always gets the most recently completed write. Older unread writes are
// reported as superseded.
template <typename T>
class LatestMailbox {
    static_assert(std::is_trivially_copyable_v<T>);

public:
    struct Read {
        T value{};
        bool fresh = false;          // a write landed since the previous read
        std::uint64_t superseded = 0;  // writes overwritten before they were read
    };

    void write(const T& v)
    {
        buffers_[back_] = v;
        written_.fetch_add(1, std::memory_order_release);
        const int prev = middle_.exchange(back_ | kFreshBit, std::memory_order_acq_rel);
        back_ = prev & kIndexMask;
    }

    Read read()
    {
        Read out;
        if (middle_.load(std::memory_order_acquire) & kFreshBit) {
            const int prev = middle_.exchange(front_, std::memory_order_acq_rel);
            front_ = prev & kIndexMask;
            out.fresh = true;
        }
        const auto total = written_.load(std::memory_order_acquire);
        if (out.fresh) {
            out.superseded = total > seen_ + 1 ? total - seen_ - 1 : 0;
            seen_ = total;
        }
        out.value = buffers_[front_];
        return out;
    }

    std::uint64_t total_written() const { return written_.load(std::memory_order_acquire); }

private:
    static constexpr int kFreshBit = 4;
    static constexpr int kIndexMask = 3;

    std::array<T, 3> buffers_{};
    int back_ = 0;                    // writer-owned
    std::atomic<int> middle_{1};
    int front_ = 2;                   // reader-owned
    std::atomic<std::uint64_t> written_{0};
    std::uint64_t seen_ = 0;          // reader-owned
};

}  // namespace mbf
