#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include "nvllc/frame.hpp"
#include "nvllc/rng.hpp"

namespace nvllc {

/// Per-byte write endurance drawn from N(mu, sigma).
struct EnduranceModel {
    double mu = 1e11;
    double sigma = 0.2e11;
    std::uint64_t seed = 1;

    static EnduranceModel from_exponent(double w, double sigma_fraction, std::uint64_t seed) {
        const double mu = std::pow(10.0, w);
        return {mu, sigma_fraction * mu, seed};
    }

    void validate() const {
        if (!(mu > 0)) throw std::invalid_argument("endurance mu must be positive");
        if (!(sigma >= 0)) throw std::invalid_argument("endurance sigma must be non-negative");
    }
};

/**
 * Remaining writes per degradable byte, indexed frame-major:
 * (set * ways + way) * frame_bytes + byte.
 *
 * Stored as double so the forecaster can apply fractional wear. Exact-mode
 * simulation only ever subtracts 1, which stays exact below 2^53.
 */
class RWMap {
  public:
    RWMap() = default;
    RWMap(const CacheGeometry& g, std::uint64_t seed)
        : geometry_(g), seed_(seed), remaining_(static_cast<std::size_t>(g.byte_count()), 0.0) {}

    const CacheGeometry& geometry() const { return geometry_; }
    std::uint64_t seed() const { return seed_; }
    std::size_t size() const { return remaining_.size(); }

    double& operator[](std::size_t i) { return remaining_[i]; }
    double operator[](std::size_t i) const { return remaining_[i]; }
    const std::vector<double>& values() const { return remaining_; }

    double sum() const {
        double s = 0;
        for (double v : remaining_) s += v;
        return s;
    }

    bool operator==(const RWMap& o) const { return seed_ == o.seed_ && remaining_ == o.remaining_; }

  private:
    CacheGeometry geometry_;
    std::uint64_t seed_ = 0;
    std::vector<double> remaining_;
};

/// Draw every byte's budget independently, truncated below at 1 and rounded.
inline RWMap init_rw_map(const CacheGeometry& g, const EnduranceModel& model) {
    model.validate();
    RWMap rw(g, model.seed);
    Rng rng(model.seed);
    for (std::size_t i = 0; i < rw.size(); ++i) {
        const double x = model.sigma == 0 ? model.mu : model.mu + model.sigma * rng.normal();
        rw[i] = std::max(1.0, std::round(x));
    }
    return rw;
}

struct FailureEvent {
    std::size_t byte_index;
};

inline std::optional<FailureEvent> record_write(RWMap& rw, std::size_t index) {
    if (rw[index] <= 0) throw std::logic_error("write to worn-out byte " + std::to_string(index));
    rw[index] -= 1;
    if (rw[index] <= 0) {
        rw[index] = 0;
        return FailureEvent{index};
    }
    return std::nullopt;
}

enum class DisablingEffect { ByteDisabled, SpareRemapped, FrameDisabled };

inline constexpr std::string_view effect_name(DisablingEffect e) {
    switch (e) {
    case DisablingEffect::ByteDisabled: return "byte_disabled";
    case DisablingEffect::SpareRemapped: return "spare_remapped";
    case DisablingEffect::FrameDisabled: return "frame_disabled";
    }
    return "?";
}

struct FailureOutcome {
    DisablingEffect effect;
    bool block_invalidated = false;
};

/// Check-region size of a frame (block_size/8), recovered from its length.
inline std::size_t frame_check_region(const FrameState& f) { return f.size() / 9; }

/**
 * Apply one byte failure to a frame under the given disabling policy.
 *
 *  FD:    the frame is disabled.
 *  FD+6:  the byte is remapped to an ECP spare while credits last; the
 *         failure after the sixth disables the frame.
 *  CMP:   the byte is disabled; a resident block whose bytes include it is
 *         invalidated. The frame dies once its usable bytes no longer exceed
 *         the check region, i.e. it has no data capacity left.
 */
inline FailureOutcome apply_failure(Policy policy, FrameState& frame, std::size_t byte) {
    if (!frame.alive) throw std::logic_error("failure delivered to a dead frame");
    if (frame.faulty.test(byte)) throw std::logic_error("byte already failed");
    const bool was_valid = frame.valid;

    auto kill = [&] {
        frame.faulty.set(byte);
        frame.alive = false;
        frame.valid = false;
        return FailureOutcome{DisablingEffect::FrameDisabled, was_valid};
    };

    switch (policy) {
    case Policy::FD: return kill();
    case Policy::FD6:
        if (frame.ecp_remaining == 0) return kill();
        --frame.ecp_remaining;
        frame.faulty.set(byte);
        frame.spared.set(byte);
        return {DisablingEffect::SpareRemapped, false};
    case Policy::CMP: {
        bool hosts_block = false;
        if (frame.valid) {
            for (auto p : placement_positions(frame.unusable(), frame.meta.start, frame.meta.ecb_len))
                hosts_block = hosts_block || p == byte;
        }
        frame.faulty.set(byte);
        if (hosts_block) frame.valid = false;
        if (frame.usable_bytes() <= frame_check_region(frame)) return kill();
        return {DisablingEffect::ByteDisabled, was_valid && !frame.valid};
    }
    }
    return {DisablingEffect::ByteDisabled, false};
}

// RW map snapshot: "NVRWMAP1", u32 version, u32 block_size, u32 ways,
// u32 reserved, u64 total_size, u64 seed, u64 count, then count LE doubles.
inline constexpr char kRwMagic[8] = {'N', 'V', 'R', 'W', 'M', 'A', 'P', '1'};
inline constexpr std::uint32_t kRwVersion = 1;

namespace detail {
template <typename T> void put_le(std::ostream& os, T v) {
    unsigned char b[sizeof(T)];
    std::uint64_t u;
    if constexpr (std::is_same_v<T, double>) {
        std::memcpy(&u, &v, 8);
    } else {
        u = static_cast<std::uint64_t>(v);
    }
    for (std::size_t i = 0; i < sizeof(T); ++i) b[i] = static_cast<unsigned char>(u >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), sizeof(T));
}

template <typename T> T get_le(std::istream& is, const char* what) {
    unsigned char b[sizeof(T)];
    if (!is.read(reinterpret_cast<char*>(b), sizeof(T)))
        throw std::runtime_error(std::string("truncated RW map snapshot reading ") + what);
    std::uint64_t u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) u |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    if constexpr (std::is_same_v<T, double>) {
        double d;
        std::memcpy(&d, &u, 8);
        return d;
    } else {
        return static_cast<T>(u);
    }
}
} // namespace detail

inline void save_rw_map(const RWMap& rw, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path);
    os.write(kRwMagic, 8);
    const auto& g = rw.geometry();
    detail::put_le<std::uint32_t>(os, kRwVersion);
    detail::put_le<std::uint32_t>(os, g.block_size);
    detail::put_le<std::uint32_t>(os, g.ways);
    detail::put_le<std::uint32_t>(os, 0);
    detail::put_le<std::uint64_t>(os, g.total_size);
    detail::put_le<std::uint64_t>(os, rw.seed());
    detail::put_le<std::uint64_t>(os, rw.size());
    for (double v : rw.values()) detail::put_le<double>(os, v);
    if (!os) throw std::runtime_error("write failed: " + path);
}

inline RWMap load_rw_map(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path);
    char magic[8];
    if (!is.read(magic, 8) || std::memcmp(magic, kRwMagic, 8) != 0)
        throw std::runtime_error("not an RW map snapshot: " + path);
    if (detail::get_le<std::uint32_t>(is, "version") != kRwVersion)
        throw std::runtime_error("unsupported RW map version");
    CacheGeometry g;
    g.block_size = detail::get_le<std::uint32_t>(is, "block size");
    g.ways = detail::get_le<std::uint32_t>(is, "ways");
    detail::get_le<std::uint32_t>(is, "reserved");
    g.total_size = detail::get_le<std::uint64_t>(is, "total size");
    g.validate();
    const auto seed = detail::get_le<std::uint64_t>(is, "seed");
    const auto count = detail::get_le<std::uint64_t>(is, "count");
    if (count != g.byte_count()) throw std::runtime_error("RW map entry count does not match geometry");
    RWMap rw(g, seed);
    for (std::size_t i = 0; i < count; ++i) rw[i] = detail::get_le<double>(is, "entries");
    return rw;
}

} // namespace nvllc
