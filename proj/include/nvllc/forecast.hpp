#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <tuple>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <stdexcept>
#include <string>
#include <vector>

#include "nvllc/cache.hpp"
#include "nvllc/endurance.hpp"
#include "nvllc/trace.hpp"

namespace nvllc {

enum class GroupMode { ByAlive, ByAliveAndClass };

struct ForecastParams {
    std::size_t k = 8;
    /// Measurement window in trace events; unset = 10x trace length.
    std::optional<std::uint64_t> window_events;
    /// Warmup before each measurement; unset = 1x trace length.
    std::optional<std::uint64_t> warmup_events;
    double stop_fraction = 0.5;
    double event_rate = 1e8;  // trace events per simulated second
    /// Exact mode gives up after this many trace events.
    std::uint64_t max_events = 1'000'000'000;
    std::uint64_t max_epochs = 1'000'000;
    /// Unset = ByAliveAndClass for CMP, ByAlive otherwise.
    std::optional<GroupMode> group_mode;
};

struct TimelineSample {
    double t = 0;
    std::uint64_t capacity = 0;
    double capacity_fraction = 0;
    std::optional<PerfProxy> perf;
};

struct DeathEvent {
    double t = 0;
    std::size_t set = 0;
    std::uint32_t way = 0;
    std::size_t byte = 0;
    DisablingEffect effect = DisablingEffect::ByteDisabled;

    std::size_t index(std::uint32_t ways, std::size_t frame_bytes) const {
        return (set * ways + way) * frame_bytes + byte;
    }
};

struct Timeline {
    std::vector<TimelineSample> samples;
    std::vector<DeathEvent> events;
    std::uint64_t initial_capacity = 0;
    bool complete = true;
    std::string status = "complete";
    std::uint64_t simulations = 0;       // measurement epochs (forecast mode)
    std::uint64_t events_simulated = 0;  // trace events processed, all modes
    std::uint64_t fallback_lookups = 0;  // bytes rated from a neighbouring group

    /// First time the capacity fraction is at or below f.
    std::optional<double> time_to_fraction(double f) const {
        for (const auto& s : samples)
            if (s.capacity_fraction <= f) return s.t;
        return std::nullopt;
    }

    void add_sample(double t, std::uint64_t capacity, std::optional<PerfProxy> perf) {
        const double frac = initial_capacity ? static_cast<double>(capacity) / static_cast<double>(initial_capacity) : 0;
        if (!samples.empty() && samples.back().t == t) {
            samples.back().capacity = capacity;
            samples.back().capacity_fraction = frac;
            return;
        }
        samples.push_back({t, capacity, frac, perf});
    }
};

/// Exact degradation: every masked write decrements the RW map.
inline Timeline run_naive(CacheConfig cfg, RWMap rw, const std::vector<TraceEvent>& trace,
                          const ForecastParams& p) {
    if (cfg.perf_window == 0) cfg.perf_window = std::max<std::size_t>(trace.size(), 1);
    Cache cache(cfg, std::move(rw));
    Timeline tl;
    tl.initial_capacity = cache.initial_capacity();
    const double floor = p.stop_fraction * static_cast<double>(tl.initial_capacity);
    if (static_cast<double>(cache.effective_capacity()) <= floor) return tl;
    if (trace.empty()) {
        tl.complete = false;
        tl.status = "empty trace";
        return tl;
    }

    const std::uint32_t ways = cache.ways();
    std::uint64_t n = 0;
    while (true) {
        if (n >= p.max_events) {
            tl.complete = false;
            tl.status = "event budget exceeded";
            break;
        }
        cache.access(trace[n % trace.size()]);
        ++n;
        if (!cache.has_failures()) continue;
        const double t = static_cast<double>(n) / p.event_rate;
        for (const auto& r : cache.drain_failures())
            tl.events.push_back({t, r.frame / ways, static_cast<std::uint32_t>(r.frame % ways), r.byte, r.effect});
        const auto cap = cache.effective_capacity();
        tl.add_sample(t, cap, cache.perf_proxy());
        if (static_cast<double>(cap) <= floor) break;
    }
    tl.events_simulated = n;
    return tl;
}

/// Writes per second for every degradable byte over one measurement window.
struct WBMap {
    std::vector<double> rate;
    double window = 0;  // seconds
};

struct EpochMeasurement {
    WBMap wb;
    std::optional<PerfProxy> perf;
};

/**
 * Run `warmup` then `window` trace events with wear disabled, starting at
 * `cursor` (advanced in place), and convert the per-byte write counts of the
 * window into rates.
 */
inline EpochMeasurement measure_epoch(Cache& cache, const std::vector<TraceEvent>& trace, std::uint64_t& cursor,
                                      std::uint64_t warmup, std::uint64_t window, double event_rate) {
    if (window == 0) throw std::invalid_argument("measurement window must be non-empty");
    if (trace.empty()) throw std::invalid_argument("measurement needs a non-empty trace");
    const bool wear = cache.wear();
    cache.set_wear(false);
    for (std::uint64_t i = 0; i < warmup; ++i) cache.access(trace[cursor++ % trace.size()]);
    const std::vector<std::uint64_t> before = cache.byte_writes();
    cache.reset_stats();
    for (std::uint64_t i = 0; i < window; ++i) cache.access(trace[cursor++ % trace.size()]);
    cache.set_wear(wear);

    EpochMeasurement m;
    m.wb.window = static_cast<double>(window) / event_rate;
    m.wb.rate.resize(before.size());
    const auto& after = cache.byte_writes();
    for (std::size_t i = 0; i < before.size(); ++i)
        m.wb.rate[i] = static_cast<double>(after[i] - before[i]) / m.wb.window;
    const auto& s = cache.stats();
    const auto total = s.hits + s.misses + s.bypasses;
    if (total > 0) {
        const double hr = static_cast<double>(s.hits) / static_cast<double>(total);
        m.perf = PerfProxy{hr, cache.config().hit_latency + (1.0 - hr) * cache.config().miss_penalty};
    }
    return m;
}

/// Group of a byte: alive frames in its set, plus its frame's class (or -1).
struct GroupKey {
    std::uint32_t alive = 0;
    int cls = -1;
    auto operator<=>(const GroupKey&) const = default;
};

struct WbAvgTable {
    GroupMode mode = GroupMode::ByAlive;
    std::map<GroupKey, double> values;

    /// Exact entry, or the nearest A (smaller first) and then nearest class.
    std::optional<double> rate(GroupKey key, bool* fallback = nullptr) const {
        if (auto it = values.find(key); it != values.end()) {
            if (fallback) *fallback = false;
            return it->second;
        }
        if (values.empty()) return std::nullopt;
        auto dist = [](long a, long b) { return a > b ? a - b : b - a; };
        auto score = [&](const GroupKey& g) {
            return std::make_tuple(dist(g.alive, key.alive), g.alive > key.alive, dist(g.cls, key.cls), g.cls > key.cls);
        };
        auto best = values.begin();
        for (auto it = values.begin(); it != values.end(); ++it)
            if (score(it->first) < score(best->first)) best = it;
        if (fallback) *fallback = true;
        return best->second;
    }
};

inline GroupKey group_of(const Cache& cache, std::size_t frame_index, GroupMode mode) {
    GroupKey k;
    k.alive = cache.alive_in_set(frame_index / cache.ways());
    if (mode == GroupMode::ByAliveAndClass) {
        const auto c = frame_class(cache.frames()[frame_index].usable_bytes(), cache.geometry().block_size);
        k.cls = c ? static_cast<int>(*c) : -1;
    }
    return k;
}

inline bool byte_alive(const Cache& cache, std::size_t frame_index, std::size_t byte) {
    const auto& f = cache.frames()[frame_index];
    return f.alive && !f.faulty.test(byte);
}

/// Unweighted per-byte mean of the measured rates within each group.
inline WbAvgTable aggregate(const WBMap& wb, const Cache& cache, GroupMode mode) {
    std::map<GroupKey, std::pair<double, std::uint64_t>> acc;
    const std::size_t fb = cache.frame_bytes();
    for (std::size_t fi = 0; fi < cache.frames().size(); ++fi) {
        if (!cache.frames()[fi].alive) continue;
        const GroupKey key = group_of(cache, fi, mode);
        auto& [sum, count] = acc[key];
        for (std::size_t b = 0; b < fb; ++b) {
            if (!byte_alive(cache, fi, b)) continue;
            sum += wb.rate[fi * fb + b];
            ++count;
        }
    }
    WbAvgTable t;
    t.mode = mode;
    for (const auto& [key, sc] : acc)
        if (sc.second > 0) t.values[key] = sc.first / static_cast<double>(sc.second);
    return t;
}

struct PredictedDeath {
    std::size_t byte_index = 0;
    double t = 0;  // since the start of this prediction run
    DisablingEffect effect = DisablingEffect::ByteDisabled;
    std::uint64_t capacity_after = 0;
};

struct PredictResult {
    std::vector<PredictedDeath> deaths;
    double elapsed = 0;
    bool no_progress = false;
    std::uint64_t fallbacks = 0;
};

/**
 * Predict up to k consecutive byte deaths from one rate table.
 *
 * Each alive byte wears at its group's rate, so its death time is fixed for
 * as long as it stays in that group. Deaths are popped from a min-heap keyed
 * on (time, byte index); when a death changes a set's alive-frame count or a
 * frame's class, the affected bytes are re-keyed from their wear so far.
 * The RW map is brought up to the time of the last death on return.
 *
 * Stops early once effective capacity drops to `capacity_floor`.
 */
inline PredictResult predict_k(Cache& cache, const WbAvgTable& table, std::size_t k,
                               double capacity_floor = -1) {
    if (k == 0) throw std::invalid_argument("k must be >= 1");
    PredictResult res;
    RWMap& rw = cache.rw();
    const std::size_t fb = cache.frame_bytes();
    const std::uint32_t ways = cache.ways();
    const std::size_t nbytes = rw.size();

    struct Track {
        double remaining = 0;  // at `since`
        double since = 0;
        double rate = 0;
        std::uint32_t version = 0;
        bool tracked = false;
    };
    std::vector<Track> tr(nbytes);

    using Entry = std::tuple<double, std::size_t, std::uint32_t>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;

    auto current = [&](std::size_t i, double now) {
        const auto& x = tr[i];
        return std::max(0.0, x.remaining - x.rate * (now - x.since));
    };
    auto release = [&](std::size_t i, double now) {
        if (!tr[i].tracked) return;
        rw[i] = current(i, now);
        tr[i].tracked = false;
        ++tr[i].version;
    };
    auto enroll_frame = [&](std::size_t fi, double now) {
        const GroupKey key = group_of(cache, fi, table.mode);
        bool fallback = false;
        const double rate = table.rate(key, &fallback).value_or(0.0);
        for (std::size_t b = 0; b < fb; ++b) {
            const std::size_t i = fi * fb + b;
            if (!byte_alive(cache, fi, b)) {
                release(i, now);
                continue;
            }
            const double rem = tr[i].tracked ? current(i, now) : rw[i];
            if (fallback) ++res.fallbacks;
            auto& x = tr[i];
            x = {rem, now, rate, x.version + 1, true};
            if (rate > 0) heap.emplace(now + rem / rate, i, x.version);
        }
    };

    for (std::size_t fi = 0; fi < cache.frames().size(); ++fi) {
        if (cache.frames()[fi].alive) enroll_frame(fi, 0.0);
    }

    double now = 0;
    while (res.deaths.size() < k) {
        while (!heap.empty()) {
            const auto [t, i, v] = heap.top();
            if (tr[i].tracked && tr[i].version == v) break;
            heap.pop();
        }
        if (heap.empty()) {
            res.no_progress = true;
            break;
        }
        const auto [t, i, v] = heap.top();
        heap.pop();
        now = std::max(now, t);

        const std::size_t fi = i / fb, b = i % fb, set = fi / ways;
        const std::uint32_t alive_before = cache.alive_in_set(set);
        const GroupKey class_before = group_of(cache, fi, table.mode);

        tr[i].tracked = false;
        ++tr[i].version;
        rw[i] = 0;
        const DisablingEffect effect = cache.fail_byte(fi, b);
        res.deaths.push_back({i, now, effect, cache.effective_capacity()});

        if (cache.alive_in_set(set) != alive_before) {
            for (std::uint32_t w = 0; w < ways; ++w) enroll_frame(set * ways + w, now);
        } else if (group_of(cache, fi, table.mode) != class_before) {
            enroll_frame(fi, now);
        }
        if (static_cast<double>(cache.effective_capacity()) <= capacity_floor) break;
    }

    for (std::size_t i = 0; i < nbytes; ++i) release(i, now);
    cache.drain_failures();
    res.elapsed = now;
    return res;
}

/// Epoch loop: measure, aggregate, predict k deaths, repeat.
inline Timeline run_forecast(CacheConfig cfg, RWMap rw, const std::vector<TraceEvent>& trace,
                             const ForecastParams& p) {
    cfg.perf_window = 0;
    Cache cache(cfg, std::move(rw));
    cache.set_wear(false);
    Timeline tl;
    tl.initial_capacity = cache.initial_capacity();
    const double floor = p.stop_fraction * static_cast<double>(tl.initial_capacity);
    if (static_cast<double>(cache.effective_capacity()) <= floor) return tl;
    if (trace.empty()) {
        tl.complete = false;
        tl.status = "empty trace";
        return tl;
    }
    const std::uint64_t window = p.window_events.value_or(10 * trace.size());
    const std::uint64_t warmup = p.warmup_events.value_or(trace.size());
    const GroupMode mode = p.group_mode.value_or(cfg.policy == Policy::CMP ? GroupMode::ByAliveAndClass
                                                                            : GroupMode::ByAlive);
    const std::uint32_t ways = cache.ways();
    const std::size_t fb = cache.frame_bytes();

    double now = 0;
    std::uint64_t cursor = 0;
    while (true) {
        if (tl.simulations >= p.max_epochs) {
            tl.complete = false;
            tl.status = "epoch budget exceeded";
            break;
        }
        const auto m = measure_epoch(cache, trace, cursor, warmup, window, p.event_rate);
        ++tl.simulations;
        tl.events_simulated += warmup + window;
        const auto table = aggregate(m.wb, cache, mode);
        const auto pr = predict_k(cache, table, p.k, floor);
        tl.fallback_lookups += pr.fallbacks;
        for (const auto& d : pr.deaths) {
            const double t = now + d.t;
            const std::size_t fi = d.byte_index / fb;
            tl.events.push_back({t, fi / ways, static_cast<std::uint32_t>(fi % ways), d.byte_index % fb, d.effect});
            tl.add_sample(t, d.capacity_after, m.perf);
        }
        now += pr.elapsed;
        if (pr.deaths.empty() && pr.no_progress) {
            tl.complete = false;
            tl.status = "no progress: no alive byte is being written";
            break;
        }
        if (static_cast<double>(cache.effective_capacity()) <= floor) break;
    }
    return tl;
}

} // namespace nvllc
