#include <catch_amalgamated.hpp>

#include <thread>

#include "mbf/spsc.hpp"

using namespace mbf;

TEST_CASE("queue is FIFO and bounded")
{
    SpscQueue<int, 8> q;
    REQUIRE(q.empty());
    for (int i = 0; i < 8; ++i) REQUIRE(q.push(i));
    REQUIRE_FALSE(q.push(99));
    REQUIRE(q.size() == 8);
    for (int i = 0; i < 8; ++i) REQUIRE(q.pop() == i);
    REQUIRE_FALSE(q.pop().has_value());
}

TEST_CASE("queue transfers every item across threads in order")
{
    SpscQueue<std::uint64_t, 256> q;
    constexpr std::uint64_t n = 200000;
    std::thread producer([&] {
        for (std::uint64_t i = 0; i < n;)
            if (q.push(i)) ++i;
    });
    std::uint64_t expect = 0;
    while (expect < n)
        if (auto v = q.pop()) {
            REQUIRE(*v == expect);
            ++expect;
        }
    producer.join();
    REQUIRE(q.empty());
}

TEST_CASE("mailbox returns the newest value and counts superseded writes")
{
    LatestMailbox<int> box;
    auto r0 = box.read();
    REQUIRE_FALSE(r0.fresh);

    for (int k = 1; k <= 5; ++k) box.write(k);
    auto r = box.read();
    REQUIRE(r.fresh);
    REQUIRE(r.value == 5);
    REQUIRE(r.superseded == 4);

    auto again = box.read();
    REQUIRE_FALSE(again.fresh);
    REQUIRE(again.value == 5);
    REQUIRE(again.superseded == 0);

    box.write(6);
    auto one = box.read();
    REQUIRE(one.fresh);
    REQUIRE(one.value == 6);
    REQUIRE(one.superseded == 0);
    REQUIRE(box.total_written() == 6);
}

TEST_CASE("mailbox never tears a value under concurrent writes")
{
    struct Pair {
        std::uint64_t a, b;
    };
    LatestMailbox<Pair> box;
    std::atomic<bool> done{false};
    std::thread writer([&] {
        for (std::uint64_t i = 1; i <= 300000; ++i) box.write({i, ~i});
        done = true;
    });
    std::uint64_t last = 0;
    while (!done.load()) {
        const auto r = box.read();
        if (!r.fresh) continue;
        REQUIRE(r.value.b == ~r.value.a);
        REQUIRE(r.value.a > last);
        last = r.value.a;
    }
    writer.join();
}
