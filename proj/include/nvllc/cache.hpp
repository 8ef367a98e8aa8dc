#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <utility>
#include <vector>

#include "nvllc/compression.hpp"
#include "nvllc/ecc.hpp"
#include "nvllc/endurance.hpp"
#include "nvllc/frame.hpp"
#include "nvllc/rearrange.hpp"
#include "nvllc/trace.hpp"

namespace nvllc {

inline constexpr std::uint64_t kSetHashMultiplier = 0x9E3779B97F4A7C15ull;

struct CacheConfig {
    CacheGeometry geometry;
    Policy policy = Policy::CMP;
    std::uint64_t stride = 1;
    double hit_latency = 20;
    double miss_penalty = 180;
    /// Accesses in the trailing window used by perf_proxy(); 0 = since reset_stats().
    std::size_t perf_window = 0;
};

struct WriteOutcome {
    bool placed = false;
    std::uint32_t way = 0;
};

struct ReadOutcome {
    bool hit = false;
    std::vector<std::uint8_t> data;
    DecodeStatus status;
};

struct PerfProxy {
    double hit_rate = 0;
    double amat = 0;
};

struct CacheStats {
    std::uint64_t hits = 0;
    std::uint64_t misses = 0;
    std::uint64_t bypasses = 0;
    std::uint64_t fills = 0;
    std::uint64_t fill_bypasses = 0;
    std::uint64_t writebacks = 0;
    std::uint64_t llc_writes = 0;
    std::uint64_t byte_writes = 0;
    std::uint64_t integrity_errors = 0;
    std::uint64_t uncorrectable = 0;
};

struct FailureRecord {
    std::size_t frame;
    std::size_t byte;
    DisablingEffect effect;
};

/**
 * Set-associative NV last-level cache with per-byte wear.
 *
 * Write path: compress (CMP only) -> SECDED encode -> pick an LRU victim
 * among frames with enough usable bytes -> rearrange onto the frame's
 * healthy bytes from the global counter's offset -> masked write.
 *
 * Byte wear is recorded in the RW map only while wear is enabled; the
 * per-byte write counters always advance, which is what the forecaster's
 * measurement epochs read.
 */
class Cache {
  public:
    using WriteObserver = std::function<void(std::size_t frame, const FaultBitmap& mask)>;

    Cache(CacheConfig cfg, RWMap rw)
        : cfg_(std::move(cfg)), rw_(std::move(rw)), counter_(cfg_.stride) {
        cfg_.geometry.validate();
        if (rw_.size() != cfg_.geometry.byte_count()) throw std::invalid_argument("RW map does not match geometry");
        const auto frames = static_cast<std::size_t>(cfg_.geometry.frame_count());
        frames_.reserve(frames);
        for (std::size_t i = 0; i < frames; ++i) frames_.emplace_back(frame_bytes(), cfg_.policy);
        // Bytes with no budget left start out failed.
        for (std::size_t f = 0; f < frames; ++f)
            for (std::size_t b = 0; b < frame_bytes(); ++b)
                if (rw_[f * frame_bytes() + b] <= 0 && !frames_[f].faulty.test(b)) {
                    if (frames_[f].alive) apply_failure(cfg_.policy, frames_[f], b);
                    else frames_[f].faulty.set(b);
                }
        byte_writes_.assign(rw_.size(), 0);
        set_bits_ = static_cast<unsigned>(std::countr_zero(cfg_.geometry.set_count()));
        for (const auto& f : frames_) capacity_ += contribution(f);
        initial_capacity_ = capacity_;
        if (cfg_.perf_window > 0) ring_.assign(cfg_.perf_window, 0);
    }

    const CacheConfig& config() const { return cfg_; }
    const CacheGeometry& geometry() const { return cfg_.geometry; }
    Policy policy() const { return cfg_.policy; }
    std::size_t frame_bytes() const { return cfg_.geometry.frame_bytes(); }
    std::uint32_t ways() const { return cfg_.geometry.ways; }
    std::size_t set_count() const { return static_cast<std::size_t>(cfg_.geometry.set_count()); }

    const std::vector<FrameState>& frames() const { return frames_; }
    const FrameState& frame(std::size_t set, std::uint32_t way) const { return frames_[set * ways() + way]; }
    const RWMap& rw() const { return rw_; }
    RWMap& rw() { return rw_; }
    const std::vector<std::uint64_t>& byte_writes() const { return byte_writes_; }
    const CacheStats& stats() const { return stats_; }
    const GlobalCounter& counter() const { return counter_; }

    void set_wear(bool on) { wear_ = on; }
    bool wear() const { return wear_; }
    void set_write_observer(WriteObserver obs) { observer_ = std::move(obs); }

    /// Multiplicative (Fibonacci) hash of the block address; top log2(sets) bits.
    std::size_t set_index(std::uint64_t address) const {
        if (set_bits_ == 0) return 0;
        const std::uint64_t h = (address / cfg_.geometry.block_size) * kSetHashMultiplier;
        return static_cast<std::size_t>(h >> (64 - set_bits_));
    }

    std::optional<std::uint32_t> lookup(std::uint64_t address) const {
        const std::size_t set = set_index(address);
        const std::uint64_t tag = address / cfg_.geometry.block_size;
        for (std::uint32_t w = 0; w < ways(); ++w) {
            const auto& f = frames_[set * ways() + w];
            if (f.valid && f.tag == tag) return w;
        }
        return std::nullopt;
    }

    /// Capacity-eligible LRU victim; invalid frames first (lowest way).
    std::optional<std::uint32_t> select_victim(std::size_t set, std::size_t need) const {
        std::optional<std::uint32_t> best;
        for (std::uint32_t w = 0; w < ways(); ++w) {
            const auto& f = frames_[set * ways() + w];
            if (!f.alive || f.usable_bytes() < need) continue;
            if (!f.valid) return w;
            if (!best || f.lru_stamp < frames_[set * ways() + *best].lru_stamp) best = w;
        }
        return best;
    }

    WriteOutcome write_block(std::uint64_t address, std::span<const std::uint8_t> data, bool dirty = true) {
        if (data.size() != cfg_.geometry.block_size) throw std::invalid_argument("block size mismatch");
        const std::size_t set = set_index(address);
        const std::uint64_t tag = address / cfg_.geometry.block_size;

        if (auto w = lookup(address)) {
            auto& old = frames_[set * ways() + *w];
            dirty = dirty || old.dirty;
            old.valid = false;
            old.dirty = false;
        }

        // (1) compress, (2) ECC
        const CompressedBlock cb = cfg_.policy == Policy::CMP ? compress(data) : store_uncompressed(data);
        const EccBlock ecb = secded_encode(cb.payload);
        const std::size_t need = ecb.total_len();

        // (3) replacement restricted to frames that can host the ECB
        const auto way = select_victim(set, need);
        if (!way) {
            if (dirty) ++stats_.writebacks;
            return {};
        }
        const std::size_t fi = set * ways() + *way;
        FrameState& f = frames_[fi];
        if (f.valid && f.dirty) ++stats_.writebacks;

        // (4) rearrangement onto healthy bytes
        const FaultBitmap unusable = f.unusable();
        const std::size_t start = healthy_start(unusable, counter_.next_start(unusable.healthy_count()));
        const RearrangedBlock rb = rearrange(ecb.bytes(), unusable, start);

        f.valid = true;
        f.dirty = dirty;
        f.tag = tag;
        f.meta = {cb.encoding, cb.base_mask, static_cast<std::uint16_t>(start), static_cast<std::uint16_t>(need)};
        f.lru_stamp = ++clock_;
        ++stats_.llc_writes;

        const std::size_t base = fi * frame_bytes();
        failed_scratch_.clear();
        for (std::size_t p = 0; p < frame_bytes(); ++p) {
            if (!rb.mask.test(p)) continue;
            f.cells[p] = rb.values[p];
            if (f.spared.test(p)) continue;  // the ECP spare absorbs this write
            ++byte_writes_[base + p];
            ++stats_.byte_writes;
            if (wear_) {
                if (auto ev = record_write(rw_, base + p)) failed_scratch_.push_back(p);
            }
        }
        if (observer_) observer_(fi, rb.mask);
        for (auto p : failed_scratch_) {
            if (!frames_[fi].alive) {
                // Frame already disabled by an earlier byte of this write.
                frames_[fi].faulty.set(p);
                continue;
            }
            fail_byte(fi, p);
        }
        return {true, *way};
    }

    ReadOutcome read_block(std::uint64_t address) {
        const auto w = lookup(address);
        if (!w) return {};
        const std::size_t fi = set_index(address) * ways() + *w;
        FrameState& f = frames_[fi];
        f.lru_stamp = ++clock_;

        const std::size_t data_len = encoding_size(f.meta.encoding, cfg_.geometry.block_size);
        const auto unusable = f.unusable();
        const auto stored = derange(f.cells, unusable, f.meta.start, f.meta.ecb_len);
        const auto dec = secded_decode(EccBlock::from_bytes(stored, data_len));

        ReadOutcome out;
        out.hit = true;
        out.status = dec.status;
        if (dec.status.kind == DecodeKind::Uncorrectable) {
            ++stats_.uncorrectable;
            return out;
        }
        CompressedBlock cb{f.meta.encoding, dec.data, f.meta.base_mask, cfg_.geometry.block_size};
        out.data = decompress(cb);

        if (!dec.corrected.empty()) {
            // Exception handler: the byte holding each corrected bit is declared failed.
            const auto pos = placement_positions(unusable, f.meta.start, f.meta.ecb_len);
            for (auto bit : dec.corrected) {
                const std::size_t p = pos[bit / 8];
                if (frames_[fi].alive && !frames_[fi].faulty.test(p)) {
                    rw_[fi * frame_bytes() + p] = 0;
                    fail_byte(fi, p);
                }
            }
        }
        return out;
    }

    /// Service one trace event against the backing memory image.
    void access(const TraceEvent& ev) {
        if (ev.kind == AccessKind::Read) {
            auto r = read_block(ev.address);
            if (r.hit && r.status.kind != DecodeKind::Uncorrectable) {
                ++stats_.hits;
                if (r.data != memory_value(ev.address)) ++stats_.integrity_errors;
                record_outcome(1);
                return;
            }
            if (r.hit) {
                // Uncorrectable: drop the copy and refetch.
                if (auto w = lookup(ev.address)) frames_[set_index(ev.address) * ways() + *w].valid = false;
            }
            ++stats_.misses;
            record_outcome(2);
            ++stats_.fills;
            const auto data = memory_value(ev.address);
            if (!write_block(ev.address, data, false).placed) ++stats_.fill_bypasses;
            return;
        }
        memory_[ev.address] = ev.payload;
        const bool resident = lookup(ev.address).has_value();
        if (!write_block(ev.address, ev.payload, true).placed) {
            ++stats_.bypasses;
            record_outcome(3);
        } else if (resident) {
            ++stats_.hits;
            record_outcome(1);
        } else {
            ++stats_.misses;
            record_outcome(2);
        }
    }

    /// Deliver a byte failure to a frame and log it.
    DisablingEffect fail_byte(std::size_t frame_index, std::size_t byte) {
        FrameState& f = frames_[frame_index];
        const bool dirty = f.valid && f.dirty;
        capacity_ -= contribution(f);
        const auto out = apply_failure(cfg_.policy, f, byte);
        capacity_ += contribution(f);
        rw_[frame_index * frame_bytes() + byte] = 0;
        if (out.block_invalidated && dirty) ++stats_.writebacks;
        if (!f.valid) f.dirty = false;
        failures_.push_back({frame_index, byte, out.effect});
        return out.effect;
    }

    /// Flip one stored bit and zero the byte's budget without notifying the
    /// frame, modelling a hard fault that the next read's SECDED will find.
    void inject_fault(std::size_t frame_index, std::size_t byte, unsigned bit) {
        frames_[frame_index].cells[byte] ^= static_cast<std::uint8_t>(1u << (bit % 8));
        rw_[frame_index * frame_bytes() + byte] = 0;
    }

    std::vector<FailureRecord> drain_failures() { return std::exchange(failures_, {}); }
    bool has_failures() const { return !failures_.empty(); }

    std::uint64_t initial_capacity() const { return initial_capacity_; }

    /// CMP: data bytes still usable in alive frames. FD/FD+6: alive frames x block.
    std::uint64_t effective_capacity() const { return capacity_; }

    /// Same quantity recomputed from frame state.
    std::uint64_t recompute_capacity() const {
        std::uint64_t cap = 0;
        for (const auto& f : frames_) cap += contribution(f);
        return cap;
    }

    std::uint32_t alive_in_set(std::size_t set) const {
        std::uint32_t n = 0;
        for (std::uint32_t w = 0; w < ways(); ++w) n += frames_[set * ways() + w].alive ? 1 : 0;
        return n;
    }

    std::optional<PerfProxy> perf_proxy() const {
        std::uint64_t hits = stats_.hits, total = stats_.hits + stats_.misses + stats_.bypasses;
        if (cfg_.perf_window > 0) {
            hits = ring_counts_[1];
            total = ring_counts_[1] + ring_counts_[2] + ring_counts_[3];
        }
        if (total == 0) return std::nullopt;
        const double hr = static_cast<double>(hits) / static_cast<double>(total);
        return PerfProxy{hr, cfg_.hit_latency + (1.0 - hr) * cfg_.miss_penalty};
    }

    void reset_stats() {
        stats_ = {};
        std::fill(ring_.begin(), ring_.end(), 0);
        ring_counts_ = {};
        ring_pos_ = 0;
    }

  private:
    std::uint64_t contribution(const FrameState& f) const {
        if (!f.alive) return 0;
        if (cfg_.policy != Policy::CMP) return cfg_.geometry.block_size;
        const std::size_t usable = f.usable_bytes(), check = cfg_.geometry.check_bytes();
        return usable > check ? usable - check : 0;
    }

    std::vector<std::uint8_t> memory_value(std::uint64_t address) const {
        auto it = memory_.find(address);
        if (it == memory_.end()) return std::vector<std::uint8_t>(cfg_.geometry.block_size, 0);
        return it->second;
    }

    void record_outcome(std::uint8_t kind) {
        if (ring_.empty()) return;
        if (ring_[ring_pos_] != 0) --ring_counts_[ring_[ring_pos_]];
        ring_[ring_pos_] = kind;
        ++ring_counts_[kind];
        ring_pos_ = (ring_pos_ + 1) % ring_.size();
    }

    CacheConfig cfg_;
    RWMap rw_;
    GlobalCounter counter_;
    std::vector<FrameState> frames_;
    std::vector<std::uint64_t> byte_writes_;
    std::unordered_map<std::uint64_t, std::vector<std::uint8_t>> memory_;
    std::vector<FailureRecord> failures_;
    std::vector<std::size_t> failed_scratch_;
    CacheStats stats_;
    WriteObserver observer_;
    std::uint64_t clock_ = 0;
    std::uint64_t initial_capacity_ = 0;
    std::uint64_t capacity_ = 0;
    unsigned set_bits_ = 0;
    bool wear_ = true;

    // Trailing access window: 1 hit, 2 miss, 3 bypass, 0 empty.
    std::vector<std::uint8_t> ring_;
    std::array<std::uint64_t, 4> ring_counts_{};
    std::size_t ring_pos_ = 0;
};

} // namespace nvllc
