#include <gtest/gtest.h>

#include <random>

#include "awg/bytes.hpp"
#include "awg/error.hpp"
#include "awg/memory.hpp"
#include "program_gen.hpp"

using namespace awg;
using awg::testing::entry;
using awg::testing::kEnd;
using awg::testing::kJump;

namespace {

SequenceEntry random_legal_entry(std::mt19937_64& rng)
{
    SequenceEntry e;
    e.length = awg::testing::uniform(rng, kMinEntryWords, kWdmCapacityWords);
    e.start_addr = awg::testing::uniform(rng, 0, static_cast<std::uint32_t>(kWdmCapacityWords - e.length));
    e.counter = static_cast<std::uint32_t>(rng());
    e.flags = static_cast<std::uint8_t>(rng() & kEntryFlagMask);
    e.trigger = static_cast<TriggerSource>(rng() & 3);
    e.jump_target = static_cast<std::uint16_t>(rng());
    return e;
}

} // namespace

TEST(EntryCodec, MinimalLegalEntryLayout)
{
    const auto w = encode_entry(entry(0, 4, 1));
    EXPECT_EQ(le::get_u32(&w[0]), 0u);
    EXPECT_EQ(le::get_u32(&w[4]), 4u);
    EXPECT_EQ(le::get_u32(&w[8]), 1u);
    EXPECT_EQ(w[12], 0);
    EXPECT_EQ(w[13], 0);
    EXPECT_EQ(le::get_u16(&w[14]), 0);
}

TEST(EntryCodec, FieldOffsets)
{
    const auto w = encode_entry(
        entry(0x1000, 0x20, 0x0A0B0C0D, kEnd | awg::testing::kHold, TriggerSource::InternalTimer, 0xBEEF));
    const EntryWord expect{0x00, 0x10, 0x00, 0x00, 0x20, 0x00, 0x00, 0x00,
                           0x0D, 0x0C, 0x0B, 0x0A, 0x0A, 0x03, 0xEF, 0xBE};
    EXPECT_EQ(w, expect);
}

TEST(EntryCodec, RoundTripRandomLegalEntries)
{
    std::mt19937_64 rng(1234);
    for (int i = 0; i < 10000; ++i) {
        const auto e = random_legal_entry(rng);
        const auto w = encode_entry(e);
        ASSERT_EQ(decode_entry(w), e) << "iteration " << i;
    }
}

TEST(EntryCodec, RejectsShortEntry)
{
    try {
        encode_entry(entry(0, 3));
        FAIL() << "length 3 accepted";
    } catch (const Error& err) {
        EXPECT_EQ(err.code(), Errc::InvariantViolation);
    }
}

TEST(EntryCodec, RejectsRangePastCapacity)
{
    EXPECT_THROW(encode_entry(entry(static_cast<std::uint32_t>(kWdmCapacityWords) - 3, 4)), Error);
    EXPECT_NO_THROW(encode_entry(entry(static_cast<std::uint32_t>(kWdmCapacityWords) - 4, 4)));
}

TEST(EntryCodec, DecodeAllZero)
{
    const EntryWord zero{};
    const auto e = decode_entry(zero);
    EXPECT_EQ(e.flags, 0);
    EXPECT_EQ(e.start_addr, 0u);
    EXPECT_EQ(e.length, 0u);
    EXPECT_EQ(e.counter, 0u);
    EXPECT_EQ(e.trigger, TriggerSource::None);
    EXPECT_EQ(e.jump_target, 0);
}

TEST(EntryCodec, DecodeDropsReservedBits)
{
    EntryWord w = pack_entry(entry(8, 16, 2, kEnd, TriggerSource::Software, 3));
    w[12] |= 0xF0;
    w[13] |= 0xFC;
    const auto e = decode_entry(w);
    EXPECT_EQ(e.flags, kEnd);
    EXPECT_EQ(e.trigger, TriggerSource::Software);
    EXPECT_EQ(e.length, 16u);
}

TEST(EntryCodec, PackedImageRoundTrip)
{
    std::vector<SequenceEntry> entries{entry(0, 4), entry(4, 8, 3, kEnd)};
    EXPECT_EQ(unpack_entries(pack_entries(entries)), entries);
    std::vector<std::uint8_t> odd(17);
    EXPECT_THROW(unpack_entries(odd), Error);
}

TEST(WaveformMemory, ReadbackIdentity)
{
    WaveformMemory wdm;
    const std::vector<SampleCode> s{1, -2, 3, -4, 32767, -32768, 0, 7};
    load_waveform(wdm, 0, s);
    EXPECT_EQ(wdm.read(0, 1), s);
    EXPECT_EQ(wdm.capacity_samples(), std::size_t{1} << 18);
}

TEST(WaveformMemory, WriteBeyondCapacity)
{
    WaveformMemory wdm;
    const std::vector<SampleCode> s(16, 5);
    try {
        load_waveform(wdm, kWdmCapacityWords - 1, s);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::OutOfRange);
    }
    // nothing was written
    EXPECT_EQ(wdm.read(kWdmCapacityWords - 1, 1), std::vector<SampleCode>(8, 0));
    EXPECT_NO_THROW(load_waveform(wdm, kWdmCapacityWords - 2, s));
}

TEST(WaveformMemory, MisalignedLength)
{
    WaveformMemory wdm;
    const std::vector<SampleCode> s(12, 1);
    try {
        load_waveform(wdm, 0, s);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::MisalignedLength);
    }
}

TEST(WaveformMemory, OverlappingWritesLastWriterWins)
{
    std::mt19937_64 rng(99);
    WaveformMemory wdm;
    std::vector<SampleCode> reference(kWdmCapacitySamples, 0);
    for (int round = 0; round < 200; ++round) {
        const auto words = awg::testing::uniform(rng, 1, 64);
        const auto offset = awg::testing::uniform(rng, 0, 512);
        std::vector<SampleCode> block(words * kSamplesPerWord);
        for (auto& v : block)
            v = static_cast<SampleCode>(rng());
        wdm.write(offset, block);
        std::copy(block.begin(), block.end(), reference.begin() + offset * kSamplesPerWord);
    }
    EXPECT_TRUE(std::equal(reference.begin(), reference.end(), wdm.samples().begin()));
}

TEST(WaveformMemory, WritesAreIdempotent)
{
    std::vector<SampleCode> block(64);
    for (std::size_t i = 0; i < block.size(); ++i)
        block[i] = static_cast<SampleCode>(i * 977);
    WaveformMemory once, twice;
    once.write(10, block);
    twice.write(10, block);
    twice.write(10, block);
    EXPECT_EQ(once, twice);
}

TEST(SequenceMemory, CapacityIsEnforced)
{
    SequenceMemory sdm;
    for (std::size_t i = 0; i < kSdmCapacity; ++i)
        sdm.push_back(entry(0, 4));
    EXPECT_THROW(sdm.push_back(entry(0, 4)), Error);
}

TEST(Validation, SingleLegalEntry)
{
    WaveformMemory wdm;
    SequenceMemory sdm(0, {entry(0, 4, 1, kEnd)});
    EXPECT_TRUE(validate_program(sdm, wdm).ok());
}

TEST(Validation, MinLength)
{
    WaveformMemory wdm;
    SequenceMemory sdm(0, {entry(0, 3, 1, kEnd)});
    const auto r = validate_program(sdm, wdm);
    ASSERT_EQ(r.violations.size(), 1u);
    EXPECT_EQ(r.violations[0], (Violation{0, Rule::MinLength}));
}

TEST(Validation, BadJump)
{
    WaveformMemory wdm;
    SequenceMemory sdm(0, {entry(0, 4), entry(0, 4, 1, kJump, TriggerSource::None, 2)});
    EXPECT_TRUE(validate_program(sdm, wdm).has(1, Rule::BadJump));
}

TEST(Validation, JumpWithEnd)
{
    WaveformMemory wdm;
    SequenceMemory sdm(0, {entry(0, 4, 1, kJump | kEnd, TriggerSource::None, 0)});
    EXPECT_TRUE(validate_program(sdm, wdm).has(0, Rule::JumpWithEnd));
}

TEST(Validation, OutOfRangeAndEmpty)
{
    WaveformMemory wdm;
    SequenceMemory sdm(0, {entry(static_cast<std::uint32_t>(kWdmCapacityWords) - 2, 4, 1, kEnd)});
    EXPECT_TRUE(validate_program(sdm, wdm).has(0, Rule::OutOfRange));
    EXPECT_TRUE(validate_program(SequenceMemory{}, wdm).has(Rule::EmptyProgram));
}

TEST(Validation, FallsOffEndOnlyWhenReachable)
{
    WaveformMemory wdm;
    SequenceMemory runs_off(0, {entry(0, 4), entry(0, 4)});
    EXPECT_TRUE(validate_program(runs_off, wdm).has(1, Rule::FallsOffEnd));

    SequenceMemory unreachable(0, {entry(0, 4, 1, kEnd), entry(0, 4)});
    EXPECT_TRUE(validate_program(unreachable, wdm).ok());

    SequenceMemory looped(0, {entry(0, 4), entry(0, 4, 2, kJump, TriggerSource::None, 0)});
    EXPECT_TRUE(validate_program(looped, wdm).ok());

    SequenceMemory forever(0, {entry(0, 4), entry(0, 4, 0)});
    EXPECT_TRUE(validate_program(forever, wdm).ok());
}

TEST(Validation, ReportsEveryViolation)
{
    WaveformMemory wdm;
    SequenceMemory sdm(0, {entry(0, 2), entry(static_cast<std::uint32_t>(kWdmCapacityWords), 1),
                           entry(0, 4, 1, kJump, TriggerSource::None, 9)});
    const auto r = validate_program(sdm, wdm);
    EXPECT_TRUE(r.has(0, Rule::MinLength));
    EXPECT_TRUE(r.has(1, Rule::MinLength));
    EXPECT_TRUE(r.has(1, Rule::OutOfRange));
    EXPECT_TRUE(r.has(2, Rule::BadJump));
}
