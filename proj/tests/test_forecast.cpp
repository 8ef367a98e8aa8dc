#include <gtest/gtest.h>

#include <random>

#include "nvllc/forecast.hpp"
#include "oracles.hpp"

using namespace nvllc;

namespace {

using Block = std::vector<std::uint8_t>;

CacheConfig tiny_config(Policy p, std::uint32_t sets, std::uint32_t ways) {
    CacheConfig c;
    c.geometry.ways = ways;
    c.geometry.block_size = 64;
    c.geometry.total_size = std::uint64_t{sets} * ways * 64;
    c.policy = p;
    return c;
}

Block random_block(std::mt19937_64& g) {
    Block b(64);
    for (auto& x : b) x = static_cast<std::uint8_t>(g());
    return b;
}

std::vector<TraceEvent> small_trace(std::uint64_t seed, std::uint64_t length = 400) {
    TraceSpec s;
    s.length = length;
    s.write_fraction = 0.6;
    s.footprint = 64 * 32;
    s.address_model = AddressModel::Uniform;
    s.seed = seed;
    return generate(s);
}

void expect_timeline_shape(const Timeline& tl) {
    for (std::size_t i = 1; i < tl.samples.size(); ++i) {
        EXPECT_GT(tl.samples[i].t, tl.samples[i - 1].t);
        EXPECT_LE(tl.samples[i].capacity, tl.samples[i - 1].capacity);
    }
    for (std::size_t i = 1; i < tl.events.size(); ++i) EXPECT_GE(tl.events[i].t, tl.events[i - 1].t);
}

// A degraded cache with random failures and a random rate map.
Cache degraded_cache(Policy p, std::uint64_t seed, std::vector<double>& rate) {
    const auto c = tiny_config(p, 4, 4);
    Cache cache(c, init_rw_map(c.geometry, {1e4, 2e3, seed}));
    std::mt19937_64 g(seed);
    for (std::size_t fi = 0; fi < cache.frames().size(); ++fi) {
        const std::size_t n = g() % 40;
        for (std::size_t k = 0; k < n && cache.frames()[fi].alive; ++k) {
            const std::size_t b = g() % 72;
            if (!cache.frames()[fi].faulty.test(b)) cache.fail_byte(fi, b);
        }
    }
    cache.drain_failures();
    rate.assign(cache.rw().size(), 0.0);
    std::uniform_real_distribution<double> u(10.0, 1000.0);
    for (std::size_t i = 0; i < rate.size(); ++i)
        if (byte_alive(cache, i / 72, i % 72)) rate[i] = u(g);
    return cache;
}

} // namespace

TEST(Forecast, PredictTwoBytesExample) {
    const auto c = tiny_config(Policy::CMP, 1, 1);
    RWMap rw(c.geometry, 0);
    for (std::size_t i = 0; i < rw.size(); ++i) rw[i] = 1e15;
    rw[0] = 10;
    rw[1] = 20;
    Cache cache(c, rw);
    WbAvgTable table;
    table.mode = GroupMode::ByAlive;
    table.values[{1, -1}] = 1.0;
    const auto r = predict_k(cache, table, 1);
    ASSERT_EQ(r.deaths.size(), 1u);
    EXPECT_EQ(r.deaths[0].byte_index, 0u);
    EXPECT_DOUBLE_EQ(r.deaths[0].t, 10.0);
    EXPECT_DOUBLE_EQ(cache.rw()[1], 10.0);
    EXPECT_EQ(cache.rw()[0], 0.0);
    EXPECT_TRUE(cache.frames()[0].faulty.test(0));
}

TEST(Forecast, PredictTieBreaksByLowestIndex) {
    const auto c = tiny_config(Policy::CMP, 1, 2);
    RWMap rw(c.geometry, 0);
    for (std::size_t i = 0; i < rw.size(); ++i) rw[i] = 1e15;
    rw[100] = 5;
    rw[7] = 5;
    Cache cache(c, rw);
    WbAvgTable table;
    table.values[{2, -1}] = 1.0;
    const auto r = predict_k(cache, table, 2);
    ASSERT_EQ(r.deaths.size(), 2u);
    EXPECT_EQ(r.deaths[0].byte_index, 7u);
    EXPECT_EQ(r.deaths[1].byte_index, 100u);
    EXPECT_DOUBLE_EQ(r.deaths[1].t, 5.0);
}

TEST(Forecast, PredictNoProgressWhenAllRatesZero) {
    const auto c = tiny_config(Policy::CMP, 1, 1);
    Cache cache(c, init_rw_map(c.geometry, {100, 0, 1}));
    WbAvgTable table;
    table.values[{1, -1}] = 0.0;
    const auto r = predict_k(cache, table, 3);
    EXPECT_TRUE(r.no_progress);
    EXPECT_TRUE(r.deaths.empty());
    EXPECT_THROW(predict_k(cache, table, 0), std::invalid_argument);
}

TEST(Forecast, AggregateUniformRate) {
    const auto c = tiny_config(Policy::FD, 2, 4);
    Cache cache(c, init_rw_map(c.geometry, {100, 0, 1}));
    WBMap wb{std::vector<double>(cache.rw().size(), 3.5), 1.0};
    const auto t = aggregate(wb, cache, GroupMode::ByAlive);
    ASSERT_EQ(t.values.size(), 1u);
    EXPECT_DOUBLE_EQ(t.values.at({4, -1}), 3.5);
}

TEST(Forecast, AggregateMatchesGroupByOracle) {
    for (Policy p : {Policy::FD, Policy::FD6, Policy::CMP}) {
        for (std::uint64_t seed = 1; seed <= 10; ++seed) {
            std::vector<double> rate;
            auto cache = degraded_cache(p, seed, rate);
            for (GroupMode mode : {GroupMode::ByAlive, GroupMode::ByAliveAndClass}) {
                const auto table = aggregate(WBMap{rate, 1.0}, cache, mode);
                const auto ref = oracle::group_means(cache, rate, mode == GroupMode::ByAliveAndClass);
                ASSERT_EQ(table.values.size(), ref.size());
                for (const auto& [k, v] : ref) {
                    const GroupKey key{static_cast<std::uint32_t>(k.first), k.second};
                    ASSERT_TRUE(table.values.count(key));
                    EXPECT_NEAR(table.values.at(key), v, 1e-12 * v);
                }
            }
        }
    }
}

TEST(Forecast, FallbackPrefersSmallerAlive) {
    WbAvgTable t;
    t.mode = GroupMode::ByAliveAndClass;
    t.values[{2, 3}] = 1.0;
    t.values[{4, 3}] = 2.0;
    t.values[{3, 5}] = 3.0;
    bool fb = false;
    EXPECT_EQ(t.rate({3, 5}, &fb), 3.0);
    EXPECT_FALSE(fb);
    EXPECT_EQ(t.rate({3, 3}, &fb), 3.0);  // same A wins over exact class
    EXPECT_TRUE(fb);
    EXPECT_EQ(t.rate({5, 3}, &fb), 2.0);
    EXPECT_EQ(t.rate({1, 3}, &fb), 1.0);
    t.values.erase({3, 5});
    EXPECT_EQ(t.rate({3, 3}, &fb), 1.0);  // tie on A distance: smaller A
}

TEST(Forecast, PredictMatchesBruteForce) {
    for (Policy p : {Policy::FD, Policy::FD6, Policy::CMP}) {
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            std::vector<double> rate;
            auto cache = degraded_cache(p, seed, rate);
            const GroupMode mode = p == Policy::CMP ? GroupMode::ByAliveAndClass : GroupMode::ByAlive;
            const auto table = aggregate(WBMap{rate, 1.0}, cache, mode);
            Cache ref_cache = cache;
            const std::size_t k = 40;
            const auto got = predict_k(cache, table, k);
            const auto want = oracle::predict_bruteforce(ref_cache, table, k);
            ASSERT_EQ(got.deaths.size(), want.size()) << policy_name(p) << " seed " << seed;
            for (std::size_t i = 0; i < want.size(); ++i) {
                ASSERT_EQ(got.deaths[i].byte_index, want[i].index) << policy_name(p) << " seed " << seed << " #" << i;
                ASSERT_NEAR(got.deaths[i].t, want[i].t, 1e-9 * want[i].t);
            }
            for (std::size_t i = 0; i < cache.rw().size(); ++i)
                ASSERT_NEAR(cache.rw()[i], ref_cache.rw()[i], 1e-9 * std::max(1.0, ref_cache.rw()[i]));
            EXPECT_EQ(cache.effective_capacity(), ref_cache.effective_capacity());
        }
    }
}

TEST(Forecast, KStepsEqualRepeatedSingleSteps) {
    for (Policy p : {Policy::FD6, Policy::CMP}) {
        std::vector<double> rate;
        auto a = degraded_cache(p, 42, rate);
        Cache b = a;
        const GroupMode mode = p == Policy::CMP ? GroupMode::ByAliveAndClass : GroupMode::ByAlive;
        const auto table = aggregate(WBMap{rate, 1.0}, a, mode);
        const auto four = predict_k(a, table, 4);
        ASSERT_EQ(four.deaths.size(), 4u);
        double now = 0;
        for (int i = 0; i < 4; ++i) {
            const auto one = predict_k(b, table, 1);
            ASSERT_EQ(one.deaths.size(), 1u);
            now += one.deaths[0].t;
            EXPECT_EQ(one.deaths[0].byte_index, four.deaths[i].byte_index);
            EXPECT_NEAR(now, four.deaths[i].t, 1e-9 * now);
        }
    }
}

TEST(Forecast, DyingByteReachesZeroOthersStayPositive) {
    std::vector<double> rate;
    auto cache = degraded_cache(Policy::CMP, 7, rate);
    const auto before = cache.rw();
    const auto table = aggregate(WBMap{rate, 1.0}, cache, GroupMode::ByAliveAndClass);
    const auto r = predict_k(cache, table, 1);
    ASSERT_EQ(r.deaths.size(), 1u);
    const double t = r.deaths[0].t;
    for (std::size_t i = 0; i < before.size(); ++i) {
        if (!byte_alive(cache, i / 72, i % 72) && i != r.deaths[0].byte_index) continue;
        if (before[i] == 0) continue;
        if (i == r.deaths[0].byte_index) {
            EXPECT_EQ(cache.rw()[i], 0.0);
            continue;
        }
        const double g = table.rate(group_of(cache, i / 72, GroupMode::ByAliveAndClass)).value();
        EXPECT_NEAR(before[i] - cache.rw()[i], g * t, 1e-9 * before[i]);
        EXPECT_GT(cache.rw()[i], 0.0);
    }
}

TEST(Forecast, MeasureEpochConservation) {
    const auto c = tiny_config(Policy::CMP, 2, 4);
    Cache cache(c, init_rw_map(c.geometry, {1e4, 2e3, 3}));
    cache.fail_byte(0, 5);
    cache.drain_failures();
    const auto rw_before = cache.rw();
    const auto trace = small_trace(3);
    std::uint64_t cursor = 0;
    const auto m = measure_epoch(cache, trace, cursor, 100, 1000, 1e6);
    EXPECT_EQ(cursor, 1100u);
    EXPECT_DOUBLE_EQ(m.wb.window, 1000 / 1e6);
    double total = 0;
    for (double r : m.wb.rate) total += r * m.wb.window;
    EXPECT_NEAR(total, static_cast<double>(cache.stats().byte_writes), 1e-6);
    EXPECT_GT(total, 0);
    EXPECT_EQ(m.wb.rate[5], 0.0);
    EXPECT_EQ(cache.rw(), rw_before);  // wear is off while measuring
    EXPECT_TRUE(cache.wear());
    ASSERT_TRUE(m.perf.has_value());
    EXPECT_THROW(measure_epoch(cache, trace, cursor, 0, 0, 1e6), std::invalid_argument);
}

TEST(Forecast, NaiveSingleFrameAnalytic) {
    // FD, sigma 0: an incompressible block rewritten every event wears all
    // 72 bytes once per event, so the frame dies on event mu.
    const auto c = tiny_config(Policy::FD, 1, 1);
    std::mt19937_64 g(1);
    const std::vector<TraceEvent> trace = {{AccessKind::Write, 0, random_block(g)}};
    ForecastParams p;
    const auto tl = run_naive(c, init_rw_map(c.geometry, {100, 0, 1}), trace, p);
    ASSERT_EQ(tl.events.size(), 1u);
    EXPECT_EQ(tl.events[0].effect, DisablingEffect::FrameDisabled);
    EXPECT_DOUBLE_EQ(tl.events[0].t, 100 / p.event_rate);
    ASSERT_EQ(tl.samples.size(), 1u);
    EXPECT_EQ(tl.samples[0].capacity, 0u);
    EXPECT_TRUE(tl.complete);
}

TEST(Forecast, NaiveRotationAnalytic) {
    // CMP zero block: a 2-byte ECB rotating one position per write. Byte p>=1
    // is written by writes p-1 and p of every 72, so with mu=10 it dies on
    // event 4*72 + p + 1; byte 1 goes first.
    const auto c = tiny_config(Policy::CMP, 1, 1);
    const std::vector<TraceEvent> trace = {{AccessKind::Write, 0, Block(64, 0)}};
    ForecastParams p;
    p.max_events = 291;
    const auto tl = run_naive(c, init_rw_map(c.geometry, {10, 0, 1}), trace, p);
    ASSERT_FALSE(tl.events.empty());
    EXPECT_EQ(tl.events[0].byte, 1u);
    EXPECT_DOUBLE_EQ(tl.events[0].t, 290 / p.event_rate);
    EXPECT_FALSE(tl.complete);
    EXPECT_EQ(tl.status, "event budget exceeded");
}

TEST(Forecast, NaiveTinyCacheTerminates) {
    const auto c = tiny_config(Policy::CMP, 2, 2);
    const auto tl = run_naive(c, init_rw_map(c.geometry, {1e3, 200, 5}), small_trace(5), {});
    EXPECT_TRUE(tl.complete);
    ASSERT_FALSE(tl.samples.empty());
    EXPECT_LE(tl.samples.back().capacity_fraction, 0.5);
    expect_timeline_shape(tl);
    const auto again = run_naive(c, init_rw_map(c.geometry, {1e3, 200, 5}), small_trace(5), {});
    ASSERT_EQ(again.samples.size(), tl.samples.size());
    for (std::size_t i = 0; i < tl.samples.size(); ++i) {
        EXPECT_EQ(again.samples[i].t, tl.samples[i].t);
        EXPECT_EQ(again.samples[i].capacity, tl.samples[i].capacity);
    }
}

TEST(Forecast, StopFractionOneStopsImmediately) {
    const auto c = tiny_config(Policy::CMP, 2, 2);
    ForecastParams p;
    p.stop_fraction = 1.0;
    for (bool naive : {true, false}) {
        const auto rw = init_rw_map(c.geometry, {1e3, 200, 5});
        const auto tl = naive ? run_naive(c, rw, small_trace(5), p) : run_forecast(c, rw, small_trace(5), p);
        EXPECT_TRUE(tl.samples.empty());
        EXPECT_TRUE(tl.events.empty());
        EXPECT_TRUE(tl.complete);
    }
}

TEST(Forecast, EmptyTraceIsIncomplete) {
    const auto c = tiny_config(Policy::CMP, 2, 2);
    const auto rw = init_rw_map(c.geometry, {1e3, 200, 5});
    EXPECT_FALSE(run_naive(c, rw, {}, {}).complete);
    EXPECT_FALSE(run_forecast(c, rw, {}, {}).complete);
}

TEST(Forecast, ReadOnlyTraceHasNoProgress) {
    const auto c = tiny_config(Policy::CMP, 2, 2);
    std::vector<TraceEvent> trace = {{AccessKind::Read, 0, {}}, {AccessKind::Read, 64, {}}};
    const auto tl = run_forecast(c, init_rw_map(c.geometry, {1e3, 200, 5}), trace, {});
    EXPECT_FALSE(tl.complete);
    EXPECT_NE(tl.status.find("no progress"), std::string::npos);
}

TEST(Forecast, ForecastTinyCacheShape) {
    for (Policy p : {Policy::FD, Policy::FD6, Policy::CMP}) {
        const auto c = tiny_config(p, 2, 4);
        const auto tl = run_forecast(c, init_rw_map(c.geometry, {1e4, 2e3, 2}), small_trace(2), {});
        EXPECT_TRUE(tl.complete) << tl.status;
        ASSERT_FALSE(tl.samples.empty());
        EXPECT_LE(tl.samples.back().capacity_fraction, 0.5);
        expect_timeline_shape(tl);
        for (const auto& s : tl.samples) EXPECT_TRUE(s.perf.has_value());
    }
}

TEST(Forecast, DoublingKHalvesSimulations) {
    const auto c = tiny_config(Policy::CMP, 2, 4);
    auto run = [&](std::size_t k) {
        ForecastParams p;
        p.k = k;
        return run_forecast(c, init_rw_map(c.geometry, {1e4, 2e3, 4}), small_trace(4), p).simulations;
    };
    const auto s4 = run(4), s8 = run(8), s16 = run(16);
    EXPECT_NEAR(static_cast<double>(s4), 2.0 * static_cast<double>(s8), 2.0);
    EXPECT_NEAR(static_cast<double>(s8), 2.0 * static_cast<double>(s16), 2.0);
}

TEST(Forecast, ExactnessLimitReproducesNaiveOrder) {
    // Two frames written alternately with incompressible blocks: every byte
    // of a frame sees the same bandwidth and the trace is stationary.
    const auto c = tiny_config(Policy::FD6, 1, 2);
    std::mt19937_64 g(3);
    std::vector<TraceEvent> trace = {{AccessKind::Write, 0, random_block(g)}, {AccessKind::Write, 64, random_block(g)}};
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto rw = init_rw_map(c.geometry, {1e4, 2e3, seed});
        ForecastParams p;
        p.k = 1'000'000;
        const auto naive = run_naive(c, rw, trace, p);
        const auto fc = run_forecast(c, rw, trace, p);
        EXPECT_EQ(fc.simulations, 1u);
        ASSERT_EQ(naive.events.size(), fc.events.size()) << "seed " << seed;
        for (std::size_t i = 0; i < naive.events.size(); ++i) {
            EXPECT_EQ(naive.events[i].way, fc.events[i].way) << "seed " << seed << " #" << i;
            EXPECT_EQ(naive.events[i].byte, fc.events[i].byte) << "seed " << seed << " #" << i;
            EXPECT_EQ(naive.events[i].effect, fc.events[i].effect);
            EXPECT_NEAR(naive.events[i].t, fc.events[i].t, 2.0 / p.event_rate);
        }
    }
}

TEST(Forecast, TimeToFraction) {
    Timeline tl;
    tl.initial_capacity = 100;
    tl.add_sample(1, 90, std::nullopt);
    tl.add_sample(2, 60, std::nullopt);
    tl.add_sample(2, 50, std::nullopt);
    tl.add_sample(3, 40, std::nullopt);
    ASSERT_EQ(tl.samples.size(), 3u);
    EXPECT_EQ(tl.time_to_fraction(0.5), 2.0);
    EXPECT_EQ(tl.time_to_fraction(0.95), 1.0);
    EXPECT_FALSE(tl.time_to_fraction(0.1).has_value());
}
