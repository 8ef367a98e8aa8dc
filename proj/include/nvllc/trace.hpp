#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "nvllc/compression.hpp"
#include "nvllc/rng.hpp"

namespace nvllc {

enum class AccessKind : std::uint8_t { Read = 0, Write = 1 };

struct TraceEvent {
    AccessKind kind = AccessKind::Read;
    std::uint64_t address = 0;
    std::vector<std::uint8_t> payload;  // block_size bytes for writes, empty for reads

    bool operator==(const TraceEvent&) const = default;
};

enum class AddressModel { Uniform, Zipfian, Strided };

struct ValueMix {
    double zeros = 0.25;
    double repeated = 0.15;
    double small_delta = 0.30;
    double random = 0.30;
};

struct TraceSpec {
    std::uint64_t length = 10000;
    double write_fraction = 0.3;
    AddressModel address_model = AddressModel::Zipfian;
    double zipf_s = 0.8;
    std::uint64_t stride = 64;  // bytes, Strided only
    std::uint64_t footprint = 1 << 20;
    std::uint32_t block_size = 64;
    ValueMix values;
    std::uint64_t seed = 1;

    /// Throws std::invalid_argument naming the offending field.
    void validate() const {
        if (!(write_fraction >= 0 && write_fraction <= 1))
            throw std::invalid_argument("trace.write_fraction must be in [0,1]");
        if (!valid_block_size(block_size)) throw std::invalid_argument("trace.block_size invalid");
        if (footprint < block_size) throw std::invalid_argument("trace.footprint must be >= block size");
        if (address_model == AddressModel::Zipfian && !(zipf_s >= 0))
            throw std::invalid_argument("trace.zipf_s must be non-negative");
        if (address_model == AddressModel::Strided && (stride == 0 || stride % block_size != 0))
            throw std::invalid_argument("trace.stride must be a non-zero multiple of the block size");
        const double w[] = {values.zeros, values.repeated, values.small_delta, values.random};
        const char* names[] = {"trace.w_zeros", "trace.w_repeated", "trace.w_small_delta", "trace.w_random"};
        double sum = 0;
        for (int i = 0; i < 4; ++i) {
            if (!(w[i] >= 0)) throw std::invalid_argument(std::string(names[i]) + " must be non-negative");
            sum += w[i];
        }
        if (std::abs(sum - 1.0) > 1e-9)
            throw std::invalid_argument("trace value weights (w_zeros, w_repeated, w_small_delta, w_random) must sum to 1");
    }
};

namespace detail {

inline void fill_value(Rng& rng, const ValueMix& mix, std::vector<std::uint8_t>& out) {
    const double u = rng.uniform();
    if (u < mix.zeros) {
        std::fill(out.begin(), out.end(), 0);
    } else if (u < mix.zeros + mix.repeated) {
        std::uint64_t v = 0;
        while (v == 0) v = rng.next();
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<std::uint8_t>(v >> (8 * (i % 8)));
    } else if (u < mix.zeros + mix.repeated + mix.small_delta) {
        // Pointer-like 8-byte words around one random base, deltas within +-60.
        const std::uint64_t base = rng.next() | (std::uint64_t{1} << 62);
        for (std::size_t w = 0; w < out.size() / 8; ++w) {
            const auto delta = static_cast<std::int64_t>(rng.below(121)) - 60;
            store_le(out.data() + 8 * w, base + static_cast<std::uint64_t>(delta), 8);
        }
    } else {
        rng.fill(out);
    }
}

} // namespace detail

/// Deterministic synthetic trace.
inline std::vector<TraceEvent> generate(const TraceSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    const std::uint64_t blocks = spec.footprint / spec.block_size;

    std::vector<double> cdf;
    if (spec.address_model == AddressModel::Zipfian) {
        cdf.resize(blocks);
        double acc = 0;
        for (std::uint64_t i = 0; i < blocks; ++i) {
            acc += 1.0 / std::pow(static_cast<double>(i + 1), spec.zipf_s);
            cdf[i] = acc;
        }
        for (auto& c : cdf) c /= acc;
    }

    std::vector<TraceEvent> out;
    out.reserve(spec.length);
    std::uint64_t stride_cursor = 0;
    for (std::uint64_t n = 0; n < spec.length; ++n) {
        std::uint64_t block = 0;
        switch (spec.address_model) {
        case AddressModel::Uniform: block = rng.below(blocks); break;
        case AddressModel::Zipfian: {
            const double u = rng.uniform();
            block = static_cast<std::uint64_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
            block = std::min(block, blocks - 1);
            break;
        }
        case AddressModel::Strided:
            block = stride_cursor % blocks;
            stride_cursor += spec.stride / spec.block_size;
            break;
        }
        TraceEvent ev;
        ev.address = block * spec.block_size;
        if (rng.bernoulli(spec.write_fraction)) {
            ev.kind = AccessKind::Write;
            ev.payload.resize(spec.block_size);
            detail::fill_value(rng, spec.values, ev.payload);
        }
        out.push_back(std::move(ev));
    }
    return out;
}

class TraceParseError : public std::runtime_error {
  public:
    TraceParseError(const std::string& what, std::uint64_t offset)
        : std::runtime_error(what + " at byte offset " + std::to_string(offset)), offset_(offset) {}
    std::uint64_t offset() const { return offset_; }

  private:
    std::uint64_t offset_;
};

// Binary trace: 16-byte header ("NVLLCTRC", u32 version, u32 block size),
// then records of {u8 kind, u64 address} with block-size payload after writes.
// All integers little-endian.
inline constexpr char kTraceMagic[8] = {'N', 'V', 'L', 'L', 'C', 'T', 'R', 'C'};
inline constexpr std::uint32_t kTraceVersion = 1;

inline void write_trace(std::ostream& os, const std::vector<TraceEvent>& events,
                        std::uint32_t block_size = kDefaultBlockSize) {
    unsigned char hdr[16];
    std::memcpy(hdr, kTraceMagic, 8);
    detail::store_le(hdr + 8, kTraceVersion, 4);
    detail::store_le(hdr + 12, block_size, 4);
    os.write(reinterpret_cast<const char*>(hdr), 16);
    unsigned char rec[9];
    for (const auto& ev : events) {
        if (ev.address % block_size != 0) throw std::invalid_argument("unaligned trace address");
        rec[0] = static_cast<unsigned char>(ev.kind);
        detail::store_le(rec + 1, ev.address, 8);
        os.write(reinterpret_cast<const char*>(rec), 9);
        if (ev.kind == AccessKind::Write) {
            if (ev.payload.size() != block_size) throw std::invalid_argument("write payload size mismatch");
            os.write(reinterpret_cast<const char*>(ev.payload.data()), block_size);
        }
    }
}

inline void write_trace(const std::string& path, const std::vector<TraceEvent>& events,
                        std::uint32_t block_size = kDefaultBlockSize) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path);
    write_trace(os, events, block_size);
    if (!os) throw std::runtime_error("write failed: " + path);
}

inline std::vector<TraceEvent> read_trace(std::istream& is) {
    std::vector<TraceEvent> out;
    std::uint64_t offset = 0;
    unsigned char hdr[16];
    is.read(reinterpret_cast<char*>(hdr), 16);
    if (is.gcount() != 16) throw TraceParseError("truncated trace header", static_cast<std::uint64_t>(is.gcount()));
    if (std::memcmp(hdr, kTraceMagic, 8) != 0) throw TraceParseError("bad trace magic", 0);
    if (detail::load_le(hdr + 8, 4) != kTraceVersion) throw TraceParseError("unsupported trace version", 8);
    const auto block_size = static_cast<std::uint32_t>(detail::load_le(hdr + 12, 4));
    if (!valid_block_size(block_size)) throw TraceParseError("invalid block size", 12);
    offset = 16;

    unsigned char rec[9];
    while (true) {
        is.read(reinterpret_cast<char*>(rec), 9);
        const auto got = static_cast<std::uint64_t>(is.gcount());
        if (got == 0) break;
        if (got < 9) throw TraceParseError("truncated record", offset + got);
        if (rec[0] > 1) throw TraceParseError("bad record kind", offset);
        TraceEvent ev;
        ev.kind = static_cast<AccessKind>(rec[0]);
        ev.address = detail::load_le(rec + 1, 8);
        if (ev.address % block_size != 0) throw TraceParseError("unaligned address", offset + 1);
        offset += 9;
        if (ev.kind == AccessKind::Write) {
            ev.payload.resize(block_size);
            is.read(reinterpret_cast<char*>(ev.payload.data()), block_size);
            const auto p = static_cast<std::uint64_t>(is.gcount());
            if (p < block_size) throw TraceParseError("truncated payload", offset + p);
            offset += block_size;
        }
        out.push_back(std::move(ev));
    }
    return out;
}

inline std::vector<TraceEvent> read_trace(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path);
    return read_trace(is);
}

/// Plain-text import: `kind,address_hex,payload_hex` per line, kind R or W.
/// Blank lines, '#' comments and a leading `kind,...` header are skipped.
inline std::vector<TraceEvent> read_trace_csv(std::istream& is, std::uint32_t block_size = kDefaultBlockSize) {
    std::vector<TraceEvent> out;
    std::string line;
    std::uint64_t offset = 0;
    auto hexval = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        return -1;
    };
    while (std::getline(is, line)) {
        const std::uint64_t line_start = offset;
        offset += line.size() + 1;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#' || line.rfind("kind", 0) == 0) continue;

        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, ',')) f.push_back(tok);
        if (f.size() < 2) throw TraceParseError("expected kind,address_hex[,payload_hex]", line_start);

        TraceEvent ev;
        if (f[0] == "R" || f[0] == "r") ev.kind = AccessKind::Read;
        else if (f[0] == "W" || f[0] == "w") ev.kind = AccessKind::Write;
        else throw TraceParseError("bad kind '" + f[0] + "'", line_start);

        std::string a = f[1];
        if (a.rfind("0x", 0) == 0 || a.rfind("0X", 0) == 0) a = a.substr(2);
        if (a.empty() || a.size() > 16) throw TraceParseError("bad address", line_start);
        for (char c : a) {
            const int v = hexval(c);
            if (v < 0) throw TraceParseError("bad address digit", line_start);
            ev.address = (ev.address << 4) | static_cast<std::uint64_t>(v);
        }
        if (ev.address % block_size != 0) throw TraceParseError("unaligned address", line_start);

        if (ev.kind == AccessKind::Write) {
            const std::string p = f.size() > 2 ? f[2] : "";
            if (p.size() != 2 * block_size) throw TraceParseError("write payload must be " +
                                                                  std::to_string(2 * block_size) + " hex digits",
                                                                  line_start);
            ev.payload.resize(block_size);
            for (std::size_t i = 0; i < block_size; ++i) {
                const int hi = hexval(p[2 * i]), lo = hexval(p[2 * i + 1]);
                if (hi < 0 || lo < 0) throw TraceParseError("bad payload digit", line_start);
                ev.payload[i] = static_cast<std::uint8_t>(hi << 4 | lo);
            }
        }
        out.push_back(std::move(ev));
    }
    return out;
}

inline std::vector<TraceEvent> read_trace_csv(const std::string& path, std::uint32_t block_size = kDefaultBlockSize) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path);
    return read_trace_csv(is, block_size);
}

} // namespace nvllc
