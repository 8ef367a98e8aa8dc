#pragma once

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace nvllc {

/// One bit per frame byte. In fault maps a set bit marks a disabled byte; in
/// write masks it marks a byte to be written.
class FaultBitmap {
  public:
    FaultBitmap() = default;
    explicit FaultBitmap(std::size_t bits) : bits_(bits), words_((bits + 63) / 64, 0) {}

    std::size_t size() const { return bits_; }
    bool test(std::size_t i) const { return (words_[i / 64] >> (i % 64)) & 1u; }
    void set(std::size_t i) { words_[i / 64] |= std::uint64_t{1} << (i % 64); }
    void reset(std::size_t i) { words_[i / 64] &= ~(std::uint64_t{1} << (i % 64)); }
    void clear() { std::fill(words_.begin(), words_.end(), 0); }

    std::size_t count() const {
        std::size_t n = 0;
        for (auto w : words_) n += static_cast<std::size_t>(std::popcount(w));
        return n;
    }
    std::size_t healthy_count() const { return bits_ - count(); }

    bool intersects(const FaultBitmap& o) const {
        for (std::size_t i = 0; i < words_.size() && i < o.words_.size(); ++i)
            if (words_[i] & o.words_[i]) return true;
        return false;
    }

    FaultBitmap without(const FaultBitmap& o) const {
        FaultBitmap r(*this);
        for (std::size_t i = 0; i < r.words_.size() && i < o.words_.size(); ++i) r.words_[i] &= ~o.words_[i];
        return r;
    }

    bool operator==(const FaultBitmap&) const = default;

  private:
    std::size_t bits_ = 0;
    std::vector<std::uint64_t> words_;
};

class CapacityExceeded : public std::runtime_error {
  public:
    CapacityExceeded(std::size_t need, std::size_t have)
        : std::runtime_error("block needs " + std::to_string(need) + " bytes, frame has " +
                             std::to_string(have) + " healthy") {}
};

/// Frame positions that host bytes 0..len-1: healthy positions scanned
/// circularly from `start`.
inline std::vector<std::size_t> placement_positions(const FaultBitmap& faults, std::size_t start,
                                                    std::size_t len) {
    const std::size_t n = faults.size();
    if (len > faults.healthy_count()) throw CapacityExceeded(len, faults.healthy_count());
    if (n > 0 && start >= n) throw std::out_of_range("start offset outside frame");
    std::vector<std::size_t> pos;
    pos.reserve(len);
    for (std::size_t k = 0; pos.size() < len; ++k) {
        const std::size_t p = (start + k) % n;
        if (!faults.test(p)) pos.push_back(p);
    }
    return pos;
}

/// Frame position of the slot-th healthy byte (slot taken mod healthy count).
/// Rotating `slot` by one per write spreads wear evenly over the healthy
/// bytes even when the frame is degraded.
inline std::size_t healthy_start(const FaultBitmap& faults, std::size_t slot) {
    const std::size_t healthy = faults.healthy_count();
    if (healthy == 0) throw CapacityExceeded(1, 0);
    slot %= healthy;
    for (std::size_t p = 0; p < faults.size(); ++p) {
        if (faults.test(p)) continue;
        if (slot-- == 0) return p;
    }
    return 0;
}

struct RearrangedBlock {
    std::vector<std::uint8_t> values;  // frame-length; meaningful where mask is set
    FaultBitmap mask;                  // write-enable per frame byte
};

inline RearrangedBlock rearrange(std::span<const std::uint8_t> ecb, const FaultBitmap& faults,
                                 std::size_t start) {
    RearrangedBlock out{std::vector<std::uint8_t>(faults.size(), 0), FaultBitmap(faults.size())};
    const auto pos = placement_positions(faults, start, ecb.size());
    for (std::size_t i = 0; i < pos.size(); ++i) {
        out.values[pos[i]] = ecb[i];
        out.mask.set(pos[i]);
    }
    return out;
}

inline std::vector<std::uint8_t> derange(std::span<const std::uint8_t> frame_bytes, const FaultBitmap& faults,
                                         std::size_t start, std::size_t len) {
    if (frame_bytes.size() != faults.size()) throw std::invalid_argument("frame/bitmap length mismatch");
    const auto pos = placement_positions(faults, start, len);
    std::vector<std::uint8_t> out(len);
    for (std::size_t i = 0; i < len; ++i) out[i] = frame_bytes[pos[i]];
    return out;
}

/// Cache-wide write counter selecting each block's starting offset.
class GlobalCounter {
  public:
    explicit GlobalCounter(std::uint64_t stride = 1, std::uint64_t value = 0) : value_(value), stride_(stride) {
        if (stride % 2 == 0) throw std::invalid_argument("rotation stride must be odd");
    }

    std::size_t next_start(std::size_t frame_size) {
        const auto s = static_cast<std::size_t>(value_ % frame_size);
        value_ += stride_;
        return s;
    }

    std::uint64_t value() const { return value_; }
    std::uint64_t stride() const { return stride_; }

  private:
    std::uint64_t value_;
    std::uint64_t stride_;
};

} // namespace nvllc
