#pragma once

#include <array>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace nvllc {

/**
 * (72,64) extended Hamming SECDED.
 *
 * Codeword positions 1..71 follow the classic Hamming layout: check bit i sits
 * at position 2^i (i = 0..6) and the 64 data bits fill the remaining positions
 * in ascending order. Bit 7 of the check byte is the overall parity, chosen so
 * that the whole 72-bit codeword has even parity.
 *
 * Data words shorter than 8 bytes are zero-padded for the computation only.
 */
namespace secded {

inline constexpr std::size_t kWordBytes = 8;
inline constexpr std::size_t kCodewordBits = 72;

struct Layout {
    std::array<std::uint8_t, 64> data_position{};  // codeword position of data bit j
    std::array<std::int8_t, 72> data_bit_at{};     // inverse; -1 for check positions
    std::array<std::uint64_t, 7> check_mask{};     // data bits covered by check bit i
};

inline constexpr Layout make_layout() {
    Layout l{};
    for (auto& v : l.data_bit_at) v = -1;
    std::size_t j = 0;
    for (std::uint8_t pos = 1; pos < 72; ++pos) {
        if ((pos & (pos - 1)) == 0) continue;
        l.data_position[j] = pos;
        l.data_bit_at[pos] = static_cast<std::int8_t>(j);
        for (int i = 0; i < 7; ++i)
            if (pos & (1u << i)) l.check_mask[i] |= std::uint64_t{1} << j;
        ++j;
    }
    return l;
}

inline constexpr Layout kLayout = make_layout();

inline unsigned parity(std::uint64_t v) { return static_cast<unsigned>(std::popcount(v) & 1); }

inline std::uint8_t hamming_bits(std::uint64_t word) {
    std::uint8_t c = 0;
    for (int i = 0; i < 7; ++i) c |= static_cast<std::uint8_t>(parity(word & kLayout.check_mask[i]) << i);
    return c;
}

/// Check byte for one 64-bit data word.
inline std::uint8_t encode_word(std::uint64_t word) {
    const std::uint8_t h = hamming_bits(word);
    const unsigned overall = parity(word) ^ parity(h);
    return static_cast<std::uint8_t>(h | (overall << 7));
}

enum class WordStatus { Clean, CorrectedData, CorrectedCheck, Uncorrectable };

struct WordDecode {
    WordStatus status = WordStatus::Clean;
    std::uint64_t word = 0;
    unsigned bit = 0;  // data bit (CorrectedData) or check bit (CorrectedCheck)
};

inline WordDecode decode_word(std::uint64_t word, std::uint8_t check) {
    const unsigned syndrome = (hamming_bits(word) ^ check) & 0x7Fu;
    const unsigned overall = parity(word) ^ parity(check);
    if (syndrome == 0 && overall == 0) return {WordStatus::Clean, word, 0};
    if (overall == 0) return {WordStatus::Uncorrectable, word, 0};
    if (syndrome == 0) return {WordStatus::CorrectedCheck, word, 7};
    if ((syndrome & (syndrome - 1)) == 0)
        return {WordStatus::CorrectedCheck, word, static_cast<unsigned>(std::countr_zero(syndrome))};
    if (syndrome >= kCodewordBits) return {WordStatus::Uncorrectable, word, 0};
    const auto j = static_cast<unsigned>(kLayout.data_bit_at[syndrome]);
    return {WordStatus::CorrectedData, word ^ (std::uint64_t{1} << j), j};
}

} // namespace secded

/// Compressed payload plus one check byte per started 64-bit word.
struct EccBlock {
    std::vector<std::uint8_t> data;
    std::vector<std::uint8_t> check_bits;

    std::size_t total_len() const { return data.size() + check_bits.size(); }

    /// Stored byte order: data bytes followed by check bytes.
    std::vector<std::uint8_t> bytes() const {
        std::vector<std::uint8_t> out(data);
        out.insert(out.end(), check_bits.begin(), check_bits.end());
        return out;
    }

    static EccBlock from_bytes(std::span<const std::uint8_t> stored, std::size_t data_len) {
        const std::size_t checks = (data_len + secded::kWordBytes - 1) / secded::kWordBytes;
        if (stored.size() != data_len + checks) throw std::invalid_argument("ECC block length mismatch");
        EccBlock b;
        b.data.assign(stored.begin(), stored.begin() + static_cast<std::ptrdiff_t>(data_len));
        b.check_bits.assign(stored.begin() + static_cast<std::ptrdiff_t>(data_len), stored.end());
        return b;
    }

    bool operator==(const EccBlock&) const = default;
};

inline std::size_t check_byte_count(std::size_t data_len) {
    return (data_len + secded::kWordBytes - 1) / secded::kWordBytes;
}

enum class DecodeKind { Clean, CorrectedSingle, Uncorrectable };

/// bit_position indexes the stored byte stream (data then check bytes), byte*8 + bit.
struct DecodeStatus {
    DecodeKind kind = DecodeKind::Clean;
    std::size_t bit_position = 0;

    bool operator==(const DecodeStatus&) const = default;
};

struct DecodeResult {
    std::vector<std::uint8_t> data;
    DecodeStatus status;
    /// Every corrected stored bit, one per word at most.
    std::vector<std::size_t> corrected;
};

inline EccBlock secded_encode(std::span<const std::uint8_t> data) {
    EccBlock out;
    out.data.assign(data.begin(), data.end());
    const std::size_t words = check_byte_count(data.size());
    out.check_bits.resize(words);
    for (std::size_t w = 0; w < words; ++w) {
        std::uint64_t word = 0;
        for (std::size_t b = 0; b < secded::kWordBytes; ++b) {
            const std::size_t i = w * secded::kWordBytes + b;
            if (i < data.size()) word |= static_cast<std::uint64_t>(data[i]) << (8 * b);
        }
        out.check_bits[w] = secded::encode_word(word);
    }
    return out;
}

inline DecodeResult secded_decode(const EccBlock& ecb) {
    DecodeResult r;
    r.data = ecb.data;
    const std::size_t n = ecb.data.size();
    if (ecb.check_bits.size() != check_byte_count(n)) {
        r.status.kind = DecodeKind::Uncorrectable;
        return r;
    }
    bool uncorrectable = false;
    for (std::size_t w = 0; w < ecb.check_bits.size(); ++w) {
        const std::size_t first = w * secded::kWordBytes;
        std::uint64_t word = 0;
        for (std::size_t b = 0; b < secded::kWordBytes && first + b < n; ++b)
            word |= static_cast<std::uint64_t>(ecb.data[first + b]) << (8 * b);

        const auto d = secded::decode_word(word, ecb.check_bits[w]);
        switch (d.status) {
        case secded::WordStatus::Clean: break;
        case secded::WordStatus::Uncorrectable: uncorrectable = true; break;
        case secded::WordStatus::CorrectedCheck:
            r.corrected.push_back((n + w) * 8 + d.bit);
            break;
        case secded::WordStatus::CorrectedData: {
            const std::size_t byte = first + d.bit / 8;
            // A correction landing in the zero padding cannot come from one stored flip.
            if (byte >= n) {
                uncorrectable = true;
                break;
            }
            r.data[byte] ^= static_cast<std::uint8_t>(1u << (d.bit % 8));
            r.corrected.push_back(byte * 8 + d.bit % 8);
            break;
        }
        }
    }
    if (uncorrectable) {
        r.status.kind = DecodeKind::Uncorrectable;
    } else if (!r.corrected.empty()) {
        r.status.kind = DecodeKind::CorrectedSingle;
        r.status.bit_position = r.corrected.front();
    }
    return r;
}

} // namespace nvllc
