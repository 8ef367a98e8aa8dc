#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "nvllc/cache.hpp"
#include "nvllc/endurance.hpp"
#include "nvllc/forecast.hpp"
#include "nvllc/trace.hpp"

namespace nvllc {

class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

enum class RunMode { Naive, Epoch };

struct ExperimentConfig {
    CacheConfig cache;
    EnduranceModel endurance;
    ForecastParams forecast;
    RunMode mode = RunMode::Epoch;
    std::optional<std::string> trace_path;
    TraceSpec trace;
    std::vector<Policy> compare_policies = {Policy::FD, Policy::FD6, Policy::CMP};
    /// Empty = a single run with the configured seeds.
    std::vector<std::uint64_t> compare_seeds;

    /// Overrides both the endurance and trace seeds.
    void reseed(std::uint64_t seed) {
        endurance.seed = seed;
        trace.seed = seed;
    }

    void validate() const {
        try {
            cache.geometry.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("cache: ") + e.what());
        }
        if (cache.stride % 2 == 0 || std::gcd(cache.stride, cache.geometry.frame_bytes()) != 1)
            throw ConfigError("cache.stride must be odd and coprime with the frame size");
        if (!(cache.hit_latency >= 0)) throw ConfigError("cache.hit_latency must be non-negative");
        if (!(cache.miss_penalty >= 0)) throw ConfigError("cache.miss_penalty must be non-negative");
        if (!(endurance.mu > 0)) throw ConfigError("endurance.mu must be positive");
        if (!(endurance.sigma >= 0)) throw ConfigError("endurance.sigma must be non-negative");
        if (forecast.k == 0) throw ConfigError("forecast.k must be >= 1");
        if (!(forecast.stop_fraction > 0 && forecast.stop_fraction <= 1))
            throw ConfigError("forecast.stop_fraction must be in (0,1]");
        if (!(forecast.event_rate > 0)) throw ConfigError("forecast.event_rate must be positive");
        if (forecast.window_events && *forecast.window_events == 0)
            throw ConfigError("forecast.epoch_window must be positive");
        if (trace_path && !std::filesystem::exists(*trace_path))
            throw ConfigError("trace.path: no such file '" + *trace_path + "'");
        if (!trace_path) {
            try {
                trace.validate();
            } catch (const std::invalid_argument& e) {
                throw ConfigError(e.what());
            }
            if (trace.block_size != cache.geometry.block_size)
                throw ConfigError("trace.block_size must match cache.block");
        }
        if (compare_policies.empty()) throw ConfigError("compare.policies must list at least one policy");
    }
};

namespace detail {

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        const auto b = tok.find_first_not_of(" \t");
        const auto e = tok.find_last_not_of(" \t");
        if (b != std::string::npos) out.push_back(tok.substr(b, e - b + 1));
    }
    return out;
}

template <typename T> T parse_value(const std::string& field, const std::string& raw) {
    std::istringstream is(raw);
    T v{};
    if constexpr (std::is_integral_v<T>) {
        // Accept scientific notation for large integer counts (e.g. 1e6).
        double d = 0;
        is >> d;
        if (!is || !is.eof() || d < 0 || d != static_cast<double>(static_cast<T>(d)))
            throw ConfigError(field + ": expected a non-negative integer, got '" + raw + "'");
        v = static_cast<T>(d);
    } else {
        is >> v;
        if (!is || !is.eof()) throw ConfigError(field + ": expected a number, got '" + raw + "'");
    }
    return v;
}

} // namespace detail

inline ExperimentConfig parse_config(std::istream& in) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("config syntax: ") + e.what());
    }

    static const std::set<std::string> known = {
        "cache.size",        "cache.ways",           "cache.block",          "cache.policy",
        "cache.stride",      "cache.hit_latency",    "cache.miss_penalty",   "endurance.mu",
        "endurance.sigma",   "endurance.sigma_fraction", "endurance.seed",   "forecast.mode",
        "forecast.k",        "forecast.epoch_window", "forecast.warmup",     "forecast.stop_fraction",
        "forecast.event_rate", "forecast.max_events", "forecast.max_epochs", "forecast.grouping",
        "trace.path",        "trace.length",         "trace.write_fraction", "trace.address_model",
        "trace.zipf_s",      "trace.stride",         "trace.footprint",      "trace.w_zeros",
        "trace.w_repeated",  "trace.w_small_delta",  "trace.w_random",       "trace.seed",
        "compare.policies",  "compare.seeds",
    };
    for (const auto& [section, body] : tree) {
        if (!body.data().empty()) throw ConfigError("key '" + section + "' must be inside a [section]");
        for (const auto& [key, _] : body)
            if (!known.count(section + "." + key)) throw ConfigError("unknown field " + section + "." + key);
    }

    auto get = [&](const std::string& path) -> std::optional<std::string> {
        if (auto v = tree.get_optional<std::string>(pt::ptree::path_type(path, '.'))) return *v;
        return std::nullopt;
    };
    ExperimentConfig c;
    auto num = [&]<typename T>(const std::string& path, T& dst) {
        if (auto v = get(path)) dst = detail::parse_value<T>(path, *v);
    };

    num("cache.size", c.cache.geometry.total_size);
    num("cache.ways", c.cache.geometry.ways);
    num("cache.block", c.cache.geometry.block_size);
    if (auto v = get("cache.policy")) {
        auto p = parse_policy(*v);
        if (!p) throw ConfigError("cache.policy: expected FD, FD+6 or CMP, got '" + *v + "'");
        c.cache.policy = *p;
    }
    num("cache.stride", c.cache.stride);
    num("cache.hit_latency", c.cache.hit_latency);
    num("cache.miss_penalty", c.cache.miss_penalty);

    num("endurance.mu", c.endurance.mu);
    double sigma_fraction = 0.2;
    num("endurance.sigma_fraction", sigma_fraction);
    c.endurance.sigma = sigma_fraction * c.endurance.mu;
    if (get("endurance.sigma") && get("endurance.sigma_fraction"))
        throw ConfigError("endurance.sigma and endurance.sigma_fraction are mutually exclusive");
    num("endurance.sigma", c.endurance.sigma);
    num("endurance.seed", c.endurance.seed);

    if (auto v = get("forecast.mode")) {
        if (*v == "naive") c.mode = RunMode::Naive;
        else if (*v == "epoch") c.mode = RunMode::Epoch;
        else throw ConfigError("forecast.mode: expected naive or epoch, got '" + *v + "'");
    }
    num("forecast.k", c.forecast.k);
    if (auto v = get("forecast.epoch_window")) c.forecast.window_events = detail::parse_value<std::uint64_t>("forecast.epoch_window", *v);
    if (auto v = get("forecast.warmup")) c.forecast.warmup_events = detail::parse_value<std::uint64_t>("forecast.warmup", *v);
    num("forecast.stop_fraction", c.forecast.stop_fraction);
    num("forecast.event_rate", c.forecast.event_rate);
    num("forecast.max_events", c.forecast.max_events);
    num("forecast.max_epochs", c.forecast.max_epochs);
    if (auto v = get("forecast.grouping")) {
        if (*v == "alive") c.forecast.group_mode = GroupMode::ByAlive;
        else if (*v == "alive_class") c.forecast.group_mode = GroupMode::ByAliveAndClass;
        else if (*v != "auto") throw ConfigError("forecast.grouping: expected auto, alive or alive_class");
    }

    if (auto v = get("trace.path"); v && !v->empty()) c.trace_path = *v;
    num("trace.length", c.trace.length);
    num("trace.write_fraction", c.trace.write_fraction);
    if (auto v = get("trace.address_model")) {
        if (*v == "uniform") c.trace.address_model = AddressModel::Uniform;
        else if (*v == "zipf" || *v == "zipfian") c.trace.address_model = AddressModel::Zipfian;
        else if (*v == "strided") c.trace.address_model = AddressModel::Strided;
        else throw ConfigError("trace.address_model: expected uniform, zipf or strided, got '" + *v + "'");
    }
    num("trace.zipf_s", c.trace.zipf_s);
    num("trace.stride", c.trace.stride);
    num("trace.footprint", c.trace.footprint);
    num("trace.w_zeros", c.trace.values.zeros);
    num("trace.w_repeated", c.trace.values.repeated);
    num("trace.w_small_delta", c.trace.values.small_delta);
    num("trace.w_random", c.trace.values.random);
    num("trace.seed", c.trace.seed);
    c.trace.block_size = c.cache.geometry.block_size;

    if (auto v = get("compare.policies")) {
        c.compare_policies.clear();
        for (const auto& s : detail::split_list(*v)) {
            auto p = parse_policy(s);
            if (!p) throw ConfigError("compare.policies: unknown policy '" + s + "'");
            c.compare_policies.push_back(*p);
        }
    }
    if (auto v = get("compare.seeds")) {
        c.compare_seeds.clear();
        for (const auto& s : detail::split_list(*v))
            c.compare_seeds.push_back(detail::parse_value<std::uint64_t>("compare.seeds", s));
    }

    c.validate();
    return c;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path);
    return parse_config(in);
}

/// Effective configuration as INI text; parse_config(to_ini(c)) reproduces c.
inline std::string to_ini(const ExperimentConfig& c) {
    auto g = [](double v) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    std::ostringstream os;
    os << "[cache]\n"
       << "size = " << c.cache.geometry.total_size << "\n"
       << "ways = " << c.cache.geometry.ways << "\n"
       << "block = " << c.cache.geometry.block_size << "\n"
       << "policy = " << policy_name(c.cache.policy) << "\n"
       << "stride = " << c.cache.stride << "\n"
       << "hit_latency = " << g(c.cache.hit_latency) << "\n"
       << "miss_penalty = " << g(c.cache.miss_penalty) << "\n\n";
    os << "[endurance]\n"
       << "mu = " << g(c.endurance.mu) << "\n"
       << "sigma = " << g(c.endurance.sigma) << "\n"
       << "seed = " << c.endurance.seed << "\n\n";
    os << "[forecast]\n"
       << "mode = " << (c.mode == RunMode::Naive ? "naive" : "epoch") << "\n"
       << "k = " << c.forecast.k << "\n";
    if (c.forecast.window_events) os << "epoch_window = " << *c.forecast.window_events << "\n";
    if (c.forecast.warmup_events) os << "warmup = " << *c.forecast.warmup_events << "\n";
    os << "stop_fraction = " << g(c.forecast.stop_fraction) << "\n"
       << "event_rate = " << g(c.forecast.event_rate) << "\n"
       << "max_events = " << c.forecast.max_events << "\n"
       << "max_epochs = " << c.forecast.max_epochs << "\n"
       << "grouping = "
       << (!c.forecast.group_mode ? "auto" : *c.forecast.group_mode == GroupMode::ByAlive ? "alive" : "alive_class")
       << "\n\n";
    os << "[trace]\n";
    if (c.trace_path) os << "path = " << *c.trace_path << "\n";
    const char* am = c.trace.address_model == AddressModel::Uniform   ? "uniform"
                     : c.trace.address_model == AddressModel::Zipfian ? "zipf"
                                                                      : "strided";
    os << "length = " << c.trace.length << "\n"
       << "write_fraction = " << g(c.trace.write_fraction) << "\n"
       << "address_model = " << am << "\n"
       << "zipf_s = " << g(c.trace.zipf_s) << "\n"
       << "stride = " << c.trace.stride << "\n"
       << "footprint = " << c.trace.footprint << "\n"
       << "w_zeros = " << g(c.trace.values.zeros) << "\n"
       << "w_repeated = " << g(c.trace.values.repeated) << "\n"
       << "w_small_delta = " << g(c.trace.values.small_delta) << "\n"
       << "w_random = " << g(c.trace.values.random) << "\n"
       << "seed = " << c.trace.seed << "\n\n";
    os << "[compare]\npolicies = ";
    for (std::size_t i = 0; i < c.compare_policies.size(); ++i)
        os << (i ? "," : "") << policy_name(c.compare_policies[i]);
    os << "\n";
    if (!c.compare_seeds.empty()) {
        os << "seeds = ";
        for (std::size_t i = 0; i < c.compare_seeds.size(); ++i) os << (i ? "," : "") << c.compare_seeds[i];
        os << "\n";
    }
    return os.str();
}

} // namespace nvllc
