#include <gtest/gtest.h>

#include <random>

#include "nvllc/ecc.hpp"
#include "oracles.hpp"

using namespace nvllc;

namespace {

std::vector<std::uint8_t> word_bytes(std::uint64_t w) {
    std::vector<std::uint8_t> b(8);
    for (int i = 0; i < 8; ++i) b[i] = static_cast<std::uint8_t>(w >> (8 * i));
    return b;
}

void flip(std::vector<std::uint8_t>& stored, std::size_t bit) {
    stored[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
}

} // namespace

TEST(Ecc, ZeroWordHasZeroCheck) {
    const auto e = secded_encode(std::vector<std::uint8_t>(8, 0));
    ASSERT_EQ(e.check_bits.size(), 1u);
    EXPECT_EQ(e.check_bits[0], 0x00);
}

TEST(Ecc, LayoutLengths) {
    for (std::size_t n : {1u, 7u, 8u, 9u, 16u, 20u, 34u, 64u}) {
        const auto e = secded_encode(std::vector<std::uint8_t>(n, 0x5A));
        EXPECT_EQ(e.check_bits.size(), (n + 7) / 8);
        EXPECT_EQ(e.total_len(), n + (n + 7) / 8);
        EXPECT_EQ(check_byte_count(n), (n + 7) / 8);
    }
}

TEST(Ecc, ShortPayloadPadsWithZeros) {
    const std::vector<std::uint8_t> one = {0xC3};
    const auto e = secded_encode(one);
    ASSERT_EQ(e.check_bits.size(), 1u);
    EXPECT_EQ(e.check_bits[0], oracle::secded_check(0xC3));
    EXPECT_EQ(e.data, one);
}

TEST(Ecc, MatchesParityMatrixOracle) {
    std::mt19937_64 g(1);
    for (int i = 0; i < 10000; ++i) {
        const std::uint64_t w = g();
        ASSERT_EQ(secded::encode_word(w), oracle::secded_check(w)) << std::hex << w;
        const auto e = secded_encode(word_bytes(w));
        ASSERT_EQ(e.check_bits[0], oracle::secded_check(w));
    }
}

TEST(Ecc, CleanRoundTrip) {
    std::mt19937_64 g(2);
    for (int i = 0; i < 1000; ++i) {
        std::vector<std::uint8_t> d(1 + g() % 64);
        for (auto& x : d) x = static_cast<std::uint8_t>(g());
        const auto r = secded_decode(secded_encode(d));
        EXPECT_EQ(r.status.kind, DecodeKind::Clean);
        EXPECT_EQ(r.data, d);
        EXPECT_TRUE(r.corrected.empty());
    }
}

TEST(Ecc, EverySingleFlipCorrects) {
    std::mt19937_64 g(3);
    for (int i = 0; i < 100; ++i) {
        const auto d = word_bytes(g());
        const auto stored = secded_encode(d).bytes();
        for (std::size_t bit = 0; bit < 72; ++bit) {
            auto s = stored;
            flip(s, bit);
            const auto r = secded_decode(EccBlock::from_bytes(s, 8));
            ASSERT_EQ(r.status.kind, DecodeKind::CorrectedSingle) << bit;
            ASSERT_EQ(r.status.bit_position, bit);
            ASSERT_EQ(r.data, d);
        }
    }
}

TEST(Ecc, EveryDoubleFlipDetected) {
    std::mt19937_64 g(4);
    for (int i = 0; i < 100; ++i) {
        const auto stored = secded_encode(word_bytes(g())).bytes();
        int pairs = 0;
        for (std::size_t a = 0; a < 72; ++a) {
            for (std::size_t b = a + 1; b < 72; ++b) {
                auto s = stored;
                flip(s, a);
                flip(s, b);
                ASSERT_EQ(secded_decode(EccBlock::from_bytes(s, 8)).status.kind, DecodeKind::Uncorrectable)
                    << a << "," << b;
                ++pairs;
            }
        }
        ASSERT_EQ(pairs, 2556);
    }
}

TEST(Ecc, SingleFlipInMultiWordBlock) {
    std::mt19937_64 g(5);
    std::vector<std::uint8_t> d(34);
    for (auto& x : d) x = static_cast<std::uint8_t>(g());
    const auto stored = secded_encode(d).bytes();
    ASSERT_EQ(stored.size(), 39u);
    for (std::size_t bit = 0; bit < stored.size() * 8; ++bit) {
        auto s = stored;
        flip(s, bit);
        const auto r = secded_decode(EccBlock::from_bytes(s, d.size()));
        ASSERT_EQ(r.status.kind, DecodeKind::CorrectedSingle);
        ASSERT_EQ(r.status.bit_position, bit);
        ASSERT_EQ(r.data, d);
    }
}

TEST(Ecc, ShortPayloadSingleFlips) {
    // A 1-byte payload: every stored bit (8 data + 8 check) is correctable.
    const std::vector<std::uint8_t> d = {0x7E};
    const auto stored = secded_encode(d).bytes();
    ASSERT_EQ(stored.size(), 2u);
    for (std::size_t bit = 0; bit < 16; ++bit) {
        auto s = stored;
        flip(s, bit);
        const auto r = secded_decode(EccBlock::from_bytes(s, 1));
        ASSERT_EQ(r.status.kind, DecodeKind::CorrectedSingle);
        ASSERT_EQ(r.status.bit_position, bit);
        ASSERT_EQ(r.data, d);
    }
}

TEST(Ecc, Deterministic) {
    const std::vector<std::uint8_t> d = {1, 2, 3, 4, 5, 6, 7, 8, 9};
    EXPECT_EQ(secded_encode(d).bytes(), secded_encode(d).bytes());
}
