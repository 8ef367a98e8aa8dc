#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace nvllc {

inline constexpr std::size_t kDefaultBlockSize = 64;

/**
 * Base-Delta-Immediate encoding classes, declared in ascending payload size
 * (which is also the order compress() tries them in).
 *
 * BkDd: k-byte elements stored as d-byte deltas against either an implicit
 * zero base or one explicit k-byte base.
 */
enum class Encoding : std::uint8_t {
    Zeros,
    Repeat,
    B8D1,
    B4D1,
    B8D2,
    B2D1,
    B4D2,
    B8D4,
    Uncompressed,
};

inline constexpr std::array<Encoding, 9> kAllEncodings = {
    Encoding::Zeros, Encoding::Repeat, Encoding::B8D1, Encoding::B4D1, Encoding::B8D2,
    Encoding::B2D1,  Encoding::B4D2,   Encoding::B8D4, Encoding::Uncompressed,
};

inline constexpr std::string_view encoding_name(Encoding e) {
    switch (e) {
    case Encoding::Zeros: return "Zeros";
    case Encoding::Repeat: return "Repeat";
    case Encoding::B8D1: return "B8D1";
    case Encoding::B4D1: return "B4D1";
    case Encoding::B8D2: return "B8D2";
    case Encoding::B2D1: return "B2D1";
    case Encoding::B4D2: return "B4D2";
    case Encoding::B8D4: return "B8D4";
    case Encoding::Uncompressed: return "Uncompressed";
    }
    return "?";
}

class CompressionError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct BaseDelta {
    std::size_t base_bytes;
    std::size_t delta_bytes;
};

/// Element and delta widths for the base-delta classes; {0,0} otherwise.
inline constexpr BaseDelta base_delta_shape(Encoding e) {
    switch (e) {
    case Encoding::B8D1: return {8, 1};
    case Encoding::B8D2: return {8, 2};
    case Encoding::B8D4: return {8, 4};
    case Encoding::B4D1: return {4, 1};
    case Encoding::B4D2: return {4, 2};
    case Encoding::B2D1: return {2, 1};
    default: return {0, 0};
    }
}

inline bool valid_block_size(std::size_t block_size) {
    return block_size >= 32 && (block_size & (block_size - 1)) == 0;
}

/// Payload size of an encoding class for the given block size.
inline std::size_t encoding_size(Encoding e, std::size_t block_size = kDefaultBlockSize) {
    switch (e) {
    case Encoding::Zeros: return 1;
    case Encoding::Repeat: return 8;
    case Encoding::Uncompressed: return block_size;
    default: {
        const auto [k, d] = base_delta_shape(e);
        return k + (block_size / k) * d;
    }
    }
}

/**
 * Result of compressing one block. The base-selection mask (one flag per
 * element, set when the element uses the explicit base) is metadata kept
 * next to the encoding tag, not part of the stored payload.
 */
struct CompressedBlock {
    Encoding encoding = Encoding::Uncompressed;
    std::vector<std::uint8_t> payload;
    std::vector<bool> base_mask;
    std::size_t block_size = kDefaultBlockSize;

    bool operator==(const CompressedBlock&) const = default;
};

inline std::size_t compressed_size(const CompressedBlock& cb) {
    return encoding_size(cb.encoding, cb.block_size);
}

namespace detail {

inline std::uint64_t load_le(const std::uint8_t* p, std::size_t n) {
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
}

inline void store_le(std::uint8_t* p, std::uint64_t v, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) p[i] = static_cast<std::uint8_t>(v >> (8 * i));
}

inline std::uint64_t width_mask(std::size_t bytes) {
    return bytes >= 8 ? ~std::uint64_t{0} : (std::uint64_t{1} << (8 * bytes)) - 1;
}

/// Sign-extend the low `bytes` bytes of v to 64 bits.
inline std::int64_t sign_extend(std::uint64_t v, std::size_t bytes) {
    if (bytes >= 8) return static_cast<std::int64_t>(v);
    const unsigned shift = static_cast<unsigned>(64 - 8 * bytes);
    return static_cast<std::int64_t>(v << shift) >> shift;
}

/// True if the k-byte two's-complement value v is representable in d bytes.
inline bool fits_delta(std::uint64_t v, std::size_t k, std::size_t d) {
    const std::int64_t s = sign_extend(v & width_mask(k), k);
    if (d >= 8) return true;
    const std::int64_t lim = std::int64_t{1} << (8 * d - 1);
    return s >= -lim && s < lim;
}

inline bool try_base_delta(std::span<const std::uint8_t> block, Encoding e, CompressedBlock& out) {
    const auto [k, d] = base_delta_shape(e);
    const std::size_t n = block.size() / k;
    const std::uint64_t km = width_mask(k);

    std::vector<std::uint8_t> payload(k + n * d, 0);
    std::vector<bool> mask(n, false);
    bool have_base = false;
    std::uint64_t base = 0;

    for (std::size_t i = 0; i < n; ++i) {
        const std::uint64_t v = load_le(block.data() + i * k, k);
        std::uint64_t delta;
        if (fits_delta(v, k, d)) {
            delta = v;
        } else {
            if (!have_base) {
                have_base = true;
                base = v;
            }
            delta = (v - base) & km;
            if (!fits_delta(delta, k, d)) return false;
            mask[i] = true;
        }
        store_le(payload.data() + k + i * d, delta, d);
    }
    store_le(payload.data(), base, k);
    out.encoding = e;
    out.payload = std::move(payload);
    out.base_mask = std::move(mask);
    return true;
}

} // namespace detail

/**
 * Compress a block with the first encoding that succeeds, in the order
 * Zeros, Repeat, B8D1, B4D1, B8D2, B2D1, B4D2, B8D4, Uncompressed.
 * The explicit base of a base-delta class is the first element that is not
 * representable as a delta from zero.
 */
inline CompressedBlock compress(std::span<const std::uint8_t> block) {
    if (!valid_block_size(block.size()))
        throw CompressionError("block size must be a power of two >= 32, got " +
                               std::to_string(block.size()));
    CompressedBlock cb;
    cb.block_size = block.size();

    bool zeros = true;
    for (auto b : block) zeros = zeros && b == 0;
    if (zeros) {
        cb.encoding = Encoding::Zeros;
        cb.payload.assign(1, 0);
        return cb;
    }

    bool repeat = true;
    for (std::size_t i = 8; i < block.size() && repeat; ++i) repeat = block[i] == block[i % 8];
    if (repeat) {
        cb.encoding = Encoding::Repeat;
        cb.payload.assign(block.begin(), block.begin() + 8);
        return cb;
    }

    for (Encoding e : kAllEncodings) {
        if (base_delta_shape(e).base_bytes == 0) continue;
        if (detail::try_base_delta(block, e, cb)) return cb;
    }

    cb.encoding = Encoding::Uncompressed;
    cb.payload.assign(block.begin(), block.end());
    cb.base_mask.clear();
    return cb;
}

/// Store a block without compression (used by the non-compressing policies).
inline CompressedBlock store_uncompressed(std::span<const std::uint8_t> block) {
    CompressedBlock cb;
    cb.block_size = block.size();
    cb.encoding = Encoding::Uncompressed;
    cb.payload.assign(block.begin(), block.end());
    return cb;
}

inline std::vector<std::uint8_t> decompress(const CompressedBlock& cb) {
    if (!valid_block_size(cb.block_size)) throw CompressionError("invalid block size");
    const std::size_t expected = compressed_size(cb);
    if (cb.payload.size() != expected)
        throw CompressionError("payload of " + std::string(encoding_name(cb.encoding)) + " must be " +
                               std::to_string(expected) + " bytes, got " +
                               std::to_string(cb.payload.size()));

    std::vector<std::uint8_t> out(cb.block_size, 0);
    switch (cb.encoding) {
    case Encoding::Zeros: return out;
    case Encoding::Repeat:
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = cb.payload[i % 8];
        return out;
    case Encoding::Uncompressed: return cb.payload;
    default: break;
    }

    const auto [k, d] = base_delta_shape(cb.encoding);
    const std::size_t n = cb.block_size / k;
    if (cb.base_mask.size() != n)
        throw CompressionError("base mask must have " + std::to_string(n) + " entries");
    const std::uint64_t base = detail::load_le(cb.payload.data(), k);
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint64_t raw = detail::load_le(cb.payload.data() + k + i * d, d);
        const auto delta = static_cast<std::uint64_t>(detail::sign_extend(raw, d));
        const std::uint64_t v = (cb.base_mask[i] ? base : 0) + delta;
        detail::store_le(out.data() + i * k, v, k);
    }
    return out;
}

} // namespace nvllc
