#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "nvllc/compression.hpp"
#include "nvllc/ecc.hpp"
#include "nvllc/rearrange.hpp"

namespace nvllc {

enum class Policy { FD, FD6, CMP };

inline constexpr std::string_view policy_name(Policy p) {
    switch (p) {
    case Policy::FD: return "FD";
    case Policy::FD6: return "FD+6";
    case Policy::CMP: return "CMP";
    }
    return "?";
}

inline std::optional<Policy> parse_policy(std::string_view s) {
    if (s == "FD") return Policy::FD;
    if (s == "FD+6" || s == "FD6") return Policy::FD6;
    if (s == "CMP") return Policy::CMP;
    return std::nullopt;
}

inline constexpr std::uint8_t kEcpEntries = 6;

/// Set-associative layout. Each frame holds block_size data bytes plus a
/// block_size/8 check region; every byte of both regions can wear out.
struct CacheGeometry {
    std::uint64_t total_size = 4ull << 20;
    std::uint32_t ways = 16;
    std::uint32_t block_size = 64;

    std::uint64_t set_count() const { return total_size / (std::uint64_t{ways} * block_size); }
    std::uint64_t frame_count() const { return set_count() * ways; }
    std::size_t check_bytes() const { return block_size / 8; }
    std::size_t frame_bytes() const { return block_size + check_bytes(); }
    std::uint64_t byte_count() const { return frame_count() * frame_bytes(); }

    void validate() const {
        auto pow2 = [](std::uint64_t v) { return v != 0 && (v & (v - 1)) == 0; };
        if (!pow2(total_size) || !pow2(ways) || !pow2(block_size))
            throw std::invalid_argument("cache size, ways and block size must be powers of two");
        if (!valid_block_size(block_size)) throw std::invalid_argument("block size must be >= 32");
        if (std::uint64_t{ways} * block_size > total_size)
            throw std::invalid_argument("cache must hold at least one set");
    }
};

/// Bytes a frame must have usable to host a compressed block plus its ECC.
inline std::size_t required_capacity(const CompressedBlock& cb) {
    const std::size_t n = compressed_size(cb);
    return n + check_byte_count(n);
}

inline std::size_t required_capacity(Encoding e, std::size_t block_size) {
    const std::size_t n = encoding_size(e, block_size);
    return n + check_byte_count(n);
}

/// Largest encoding class a frame with `usable` bytes can still host.
inline std::optional<Encoding> frame_class(std::size_t usable, std::size_t block_size) {
    std::optional<Encoding> best;
    for (Encoding e : kAllEncodings)
        if (required_capacity(e, block_size) <= usable) best = e;
    return best;
}

/// Tag-array metadata for the resident block; not subject to wear.
struct BlockMeta {
    Encoding encoding = Encoding::Uncompressed;
    std::vector<bool> base_mask;
    std::uint16_t start = 0;
    std::uint16_t ecb_len = 0;
};

struct FrameState {
    FaultBitmap faulty;   // cells that wore out
    FaultBitmap spared;   // subset of faulty remapped to non-wearing ECP spares
    bool alive = true;
    bool valid = false;
    bool dirty = false;
    std::uint64_t tag = 0;  // block address
    BlockMeta meta;
    std::uint8_t ecp_remaining = 0;
    std::uint64_t lru_stamp = 0;
    std::vector<std::uint8_t> cells;

    FrameState() = default;
    FrameState(std::size_t frame_bytes, Policy policy)
        : faulty(frame_bytes), spared(frame_bytes),
          ecp_remaining(policy == Policy::FD6 ? kEcpEntries : 0), cells(frame_bytes, 0) {}

    /// Positions that can no longer be written.
    FaultBitmap unusable() const { return faulty.without(spared); }
    std::size_t usable_bytes() const { return faulty.size() - faulty.count() + spared.count(); }
    std::size_t size() const { return faulty.size(); }
};

} // namespace nvllc
