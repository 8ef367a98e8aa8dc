#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "nvllc/config.hpp"
#include "nvllc/forecast.hpp"
#include "nvllc/trace.hpp"

namespace nvllc {

/// Exit codes of the command-line verbs.
enum ExitCode : int { kExitOk = 0, kExitValidation = 1, kExitRuntime = 2, kExitIncomplete = 3 };

/// Fixed 9-significant-digit formatting used in every CSV.
inline std::string fmt9(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

inline std::vector<TraceEvent> load_trace(const ExperimentConfig& c) {
    if (!c.trace_path) return generate(c.trace);
    const std::string& p = *c.trace_path;
    if (p.size() >= 4 && p.compare(p.size() - 4, 4, ".csv") == 0) return read_trace_csv(p, c.cache.geometry.block_size);
    return read_trace(p);
}

/// One policy/seed run in the requested mode.
inline Timeline run_experiment(const ExperimentConfig& c, Policy policy, RunMode mode,
                               const std::vector<TraceEvent>& trace) {
    CacheConfig cc = c.cache;
    cc.policy = policy;
    RWMap rw = init_rw_map(cc.geometry, c.endurance);
    return mode == RunMode::Naive ? run_naive(cc, std::move(rw), trace, c.forecast)
                                  : run_forecast(cc, std::move(rw), trace, c.forecast);
}

inline void write_timeline_csv(std::ostream& os, const Timeline& tl) {
    os << "t_seconds,capacity_bytes,capacity_fraction,hit_rate,amat\n";
    for (const auto& s : tl.samples) {
        os << fmt9(s.t) << ',' << s.capacity << ',' << fmt9(s.capacity_fraction) << ',';
        if (s.perf) os << fmt9(s.perf->hit_rate) << ',' << fmt9(s.perf->amat);
        else os << ',';
        os << '\n';
    }
}

inline void write_events_csv(std::ostream& os, const Timeline& tl) {
    os << "t_seconds,set,way,byte,policy_effect\n";
    for (const auto& e : tl.events)
        os << fmt9(e.t) << ',' << e.set << ',' << e.way << ',' << e.byte << ',' << effect_name(e.effect) << '\n';
}

/// Plot-ready series: time normalized to the last sample.
inline void write_plot_data_csv(std::ostream& os, const Timeline& tl) {
    os << "t_normalized,capacity_fraction,amat\n";
    const double end = tl.samples.empty() ? 1.0 : tl.samples.back().t;
    for (const auto& s : tl.samples) {
        os << fmt9(end > 0 ? s.t / end : 0.0) << ',' << fmt9(s.capacity_fraction) << ',';
        if (s.perf) os << fmt9(s.perf->amat);
        os << '\n';
    }
}

inline void write_summary(std::ostream& os, const Timeline& tl, Policy policy, double stop_fraction) {
    os << "policy = " << policy_name(policy) << "\n"
       << "complete = " << (tl.complete ? "true" : "false") << "\n"
       << "status = " << tl.status << "\n"
       << "initial_capacity_bytes = " << tl.initial_capacity << "\n"
       << "samples = " << tl.samples.size() << "\n"
       << "deaths = " << tl.events.size() << "\n"
       << "simulations = " << tl.simulations << "\n"
       << "events_simulated = " << tl.events_simulated << "\n"
       << "fallback_lookups = " << tl.fallback_lookups << "\n";
    const auto t = tl.time_to_fraction(stop_fraction);
    os << "time_to_stop_seconds = " << (t ? fmt9(*t) : std::string("")) << "\n";
}

inline void write_file(const std::filesystem::path& p, const std::string& body) {
    std::ofstream os(p, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + p.string());
    os << body;
}

inline void export_run(const std::filesystem::path& dir, const std::string& prefix, const Timeline& tl,
                       Policy policy, double stop_fraction) {
    std::ostringstream a, b, c, d;
    write_timeline_csv(a, tl);
    write_events_csv(b, tl);
    write_plot_data_csv(c, tl);
    write_summary(d, tl, policy, stop_fraction);
    write_file(dir / (prefix + "timeline.csv"), a.str());
    write_file(dir / (prefix + "events.csv"), b.str());
    write_file(dir / (prefix + "plot_data.csv"), c.str());
    write_file(dir / (prefix + "summary.txt"), d.str());
}

struct CommandOptions {
    std::filesystem::path out = "out";
    std::optional<std::uint64_t> seed;
    bool quiet = false;
};

namespace detail {

inline ExperimentConfig effective(ExperimentConfig c, const CommandOptions& o) {
    if (o.seed) {
        c.reseed(*o.seed);
        c.compare_seeds.clear();
    }
    return c;
}

inline void log(const CommandOptions& o, const std::string& msg) {
    if (!o.quiet) std::cerr << msg << '\n';
}

inline int single_run(ExperimentConfig c, const CommandOptions& o, RunMode mode) {
    c = effective(std::move(c), o);
    c.mode = mode;
    std::filesystem::create_directories(o.out);
    write_file(o.out / "config.ini", to_ini(c));
    const auto trace = load_trace(c);
    const Timeline tl = run_experiment(c, c.cache.policy, mode, trace);
    export_run(o.out, "", tl, c.cache.policy, c.forecast.stop_fraction);
    log(o, std::string(policy_name(c.cache.policy)) + ": " + std::to_string(tl.events.size()) + " deaths, " +
               tl.status);
    return tl.complete ? kExitOk : kExitIncomplete;
}

} // namespace detail

/// Exact simulation; writes timeline/events/plot data into o.out.
inline int cmd_simulate(const ExperimentConfig& c, const CommandOptions& o) {
    return detail::single_run(c, o, RunMode::Naive);
}

/// Epoch forecasting; same outputs as cmd_simulate.
inline int cmd_forecast(const ExperimentConfig& c, const CommandOptions& o) {
    return detail::single_run(c, o, RunMode::Epoch);
}

struct CompareRow {
    Policy policy;
    std::uint64_t seed;
    std::optional<double> time_to_stop;
    bool complete;
};

/// Ratios of each policy's time-to-stop against the first listed policy,
/// per seed, plus a mean-ratio report.
inline int cmd_compare(const ExperimentConfig& base, const CommandOptions& o) {
    const ExperimentConfig c = detail::effective(base, o);
    std::filesystem::create_directories(o.out);
    write_file(o.out / "config.ini", to_ini(c));

    struct Job {
        Policy policy;
        std::uint64_t seed;
        std::future<Timeline> result;
    };
    std::vector<Job> jobs;
    std::vector<std::uint64_t> seeds = c.compare_seeds;
    if (seeds.empty()) seeds.push_back(c.endurance.seed);
    for (auto seed : seeds) {
        ExperimentConfig sc = c;
        if (!c.compare_seeds.empty()) sc.reseed(seed);
        auto trace = std::make_shared<const std::vector<TraceEvent>>(load_trace(sc));
        for (auto policy : c.compare_policies) {
            jobs.push_back({policy, seed, std::async(std::launch::async, [sc, policy, trace] {
                                return run_experiment(sc, policy, sc.mode, *trace);
                            })});
        }
    }

    std::vector<CompareRow> rows;
    bool all_complete = true;
    for (auto& j : jobs) {
        const Timeline tl = j.result.get();
        const std::string prefix = std::string(policy_name(j.policy)) + "_seed" + std::to_string(j.seed) + "_";
        export_run(o.out, prefix, tl, j.policy, c.forecast.stop_fraction);
        const auto t = tl.time_to_fraction(c.forecast.stop_fraction);
        rows.push_back({j.policy, j.seed, t, tl.complete});
        all_complete = all_complete && tl.complete && t.has_value();
    }

    const Policy baseline = c.compare_policies.front();
    std::map<std::uint64_t, std::optional<double>> base_t;
    for (const auto& r : rows)
        if (r.policy == baseline && !base_t.count(r.seed)) base_t[r.seed] = r.time_to_stop;

    std::ostringstream csv;
    csv << "policy,seed,time_to_stop_seconds,ratio_vs_" << policy_name(baseline) << ",complete\n";
    std::vector<std::pair<std::string, std::pair<double, int>>> mean;  // listing order, duplicates merged
    auto mean_slot = [&](const std::string& name) -> std::pair<double, int>& {
        for (auto& m : mean)
            if (m.first == name) return m.second;
        mean.push_back({name, {0.0, 0}});
        return mean.back().second;
    };
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        const auto bt = base_t[r.seed];
        std::optional<double> ratio;
        if (r.time_to_stop && bt && *bt > 0) ratio = *r.time_to_stop / *bt;
        csv << policy_name(r.policy) << ',' << r.seed << ',' << (r.time_to_stop ? fmt9(*r.time_to_stop) : "") << ','
            << (ratio ? fmt9(*ratio) : "") << ',' << (r.complete ? "true" : "false") << '\n';
        if (ratio) {
            auto& slot = mean_slot(std::string(policy_name(r.policy)));
            slot.first += *ratio;
            slot.second += 1;
        }
    }
    write_file(o.out / "compare.csv", csv.str());

    // Full-system reference ratios against FD, reported for context only.
    const std::map<std::string, double> reference = {{"FD", 1.0}, {"FD+6", 1.47}, {"CMP", 6.2}};
    std::ostringstream rep;
    rep << "policy,mean_ratio_vs_" << policy_name(baseline) << ",seeds,reference_ratio_vs_FD\n";
    for (const auto& [name, acc] : mean) {
        rep << name << ',' << fmt9(acc.first / acc.second) << ',' << acc.second << ',';
        if (auto it = reference.find(name); it != reference.end()) rep << fmt9(it->second);
        rep << '\n';
    }
    write_file(o.out / "ratios.csv", rep.str());
    if (!o.quiet) std::cerr << rep.str();
    return all_complete ? kExitOk : kExitIncomplete;
}

/// Generate the configured synthetic trace into o.out/trace.bin.
inline int cmd_gentrace(const ExperimentConfig& base, const CommandOptions& o) {
    const ExperimentConfig c = detail::effective(base, o);
    std::filesystem::create_directories(o.out);
    write_file(o.out / "config.ini", to_ini(c));
    const auto events = generate(c.trace);
    write_trace((o.out / "trace.bin").string(), events, c.trace.block_size);
    detail::log(o, "wrote " + std::to_string(events.size()) + " events");
    return kExitOk;
}

} // namespace nvllc
