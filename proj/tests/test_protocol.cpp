#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "awg/bytes.hpp"
#include "awg/error.hpp"
#include "awg/protocol.hpp"
#include "awg/server.hpp"
#include "fuzz_gen.hpp"
#include "program_gen.hpp"

using namespace awg;
using proto::Frame;
using proto::Opcode;
using proto::ParseStatus;
using proto::Status;

namespace {

Frame cmd(Opcode op, std::uint8_t ch = 0, std::vector<std::uint8_t> payload = {})
{
    return Frame{static_cast<std::uint8_t>(op), ch, std::move(payload)};
}

std::vector<std::uint8_t> wdm_payload(std::uint32_t offset, std::span<const SampleCode> s)
{
    le::Writer w;
    w.u32(offset);
    w.bytes(pack_samples(s));
    return w.take();
}

std::vector<std::uint8_t> u32s(std::initializer_list<std::uint32_t> v)
{
    le::Writer w;
    for (auto x : v)
        w.u32(x);
    return w.take();
}

std::vector<std::uint8_t> u64(std::uint64_t v)
{
    le::Writer w;
    w.u64(v);
    return w.take();
}

// Bitwise CRC-32 (reflected 0xEDB88320), independent of zlib.
std::uint32_t crc32_bitwise(std::span<const std::uint8_t> b)
{
    std::uint32_t c = 0xFFFFFFFFu;
    for (auto x : b) {
        c ^= x;
        for (int k = 0; k < 8; ++k)
            c = (c >> 1) ^ (0xEDB88320u & (0u - (c & 1u)));
    }
    return ~c;
}

} // namespace

TEST(Frame, StopFrameIsFourteenBytesAndRoundTrips)
{
    const Frame stop = cmd(Opcode::Stop, 2);
    const auto bytes = proto::serialize_frame(stop);
    ASSERT_EQ(bytes.size(), 14u);
    EXPECT_EQ(bytes[0], 'A');
    EXPECT_EQ(bytes[3], '1');
    EXPECT_EQ(bytes[4], 0x06);
    EXPECT_EQ(bytes[5], 2);
    EXPECT_EQ(le::get_u32(&bytes[6]), 0u);
    const auto r = proto::parse_frame(bytes);
    ASSERT_EQ(r.status, ParseStatus::Ok);
    EXPECT_EQ(r.consumed, 14u);
    EXPECT_EQ(r.frame, stop);
}

TEST(Frame, CrcMatchesIndependentImplementation)
{
    EXPECT_EQ(proto::crc32(std::vector<std::uint8_t>{'1', '2', '3', '4', '5', '6', '7', '8', '9'}), 0xCBF43926u);
    std::mt19937_64 rng(3);
    for (int i = 0; i < 50; ++i) {
        const auto b = fuzz::random_bytes(rng, rng() % 3000);
        ASSERT_EQ(proto::crc32(b), crc32_bitwise(b));
    }
}

TEST(Frame, FlippedPayloadByteIsBadCrc)
{
    auto bytes = proto::serialize_frame(cmd(Opcode::RegWrite, 0, u32s({0x08, 20})));
    bytes[12] ^= 0x01;
    const auto r = proto::parse_frame(bytes);
    EXPECT_EQ(r.status, ParseStatus::BadCrc);
    EXPECT_EQ(r.consumed, bytes.size());
}

TEST(Frame, TruncatedNeedsMoreAndConsumesNothing)
{
    const auto bytes = proto::serialize_frame(cmd(Opcode::RegRead, 0, u32s({0x00})));
    for (std::size_t n = 0; n < bytes.size(); ++n) {
        const auto r = proto::parse_frame(std::span(bytes).first(n));
        EXPECT_EQ(r.status, ParseStatus::Truncated) << n;
        EXPECT_EQ(r.consumed, 0u);
    }
}

TEST(Frame, BadMagicSkipsOneByte)
{
    auto bytes = proto::serialize_frame(cmd(Opcode::Arm));
    bytes.insert(bytes.begin(), 0x00);
    auto r = proto::parse_frame(bytes);
    EXPECT_EQ(r.status, ParseStatus::BadMagic);
    EXPECT_EQ(r.consumed, 1u);
    r = proto::parse_frame(std::span(bytes).subspan(1));
    EXPECT_EQ(r.status, ParseStatus::Ok);
}

TEST(Frame, OversizeLengthIsTreatedAsCorruptHeader)
{
    std::vector<std::uint8_t> b{'A', 'W', 'G', '1', 0x01, 0, 0, 0, 0, 0};
    le::put_u32(&b[6], proto::kMaxPayload + 1);
    const auto r = proto::parse_frame(b);
    EXPECT_EQ(r.status, ParseStatus::BadMagic);
    EXPECT_EQ(r.consumed, 1u);
    Frame big = cmd(Opcode::WriteWdm);
    big.payload.resize(proto::kMaxPayload + 1);
    EXPECT_THROW(proto::serialize_frame(big), Error);
}

TEST(Frame, RoundTripProperty)
{
    std::mt19937_64 rng(11);
    for (int i = 0; i < 2000; ++i) {
        Frame f{static_cast<std::uint8_t>(rng()), static_cast<std::uint8_t>(rng()),
                fuzz::random_bytes(rng, rng() % 200)};
        const auto b = proto::serialize_frame(f);
        const auto r = proto::parse_frame(b);
        ASSERT_EQ(r.status, ParseStatus::Ok);
        ASSERT_EQ(r.consumed, b.size());
        ASSERT_EQ(r.frame, f);
    }
}

TEST(Frame, RandomBytesAlwaysClassify)
{
    std::mt19937_64 rng(12);
    for (int i = 0; i < 200000; ++i) {
        auto b = fuzz::random_bytes(rng, rng() % 40);
        if (rng() % 2 && b.size() >= 4)
            std::copy(proto::kFrameMagic.begin(), proto::kFrameMagic.end(), b.begin());
        const auto r = proto::parse_frame(b);
        ASSERT_LE(r.consumed, b.size());
        switch (r.status) {
        case ParseStatus::Ok:
            ASSERT_EQ(r.consumed, proto::kFrameOverhead + r.frame.payload.size());
            break;
        case ParseStatus::BadMagic:
            ASSERT_EQ(r.consumed, 1u);
            break;
        case ParseStatus::BadCrc:
            ASSERT_GE(r.consumed, proto::kFrameOverhead);
            break;
        case ParseStatus::Truncated:
            ASSERT_EQ(r.consumed, 0u);
            break;
        }
    }
}

TEST(Frame, ResponseRoundTrip)
{
    const proto::Response r{0x05, Status::ValidationFailed, 123456789012ull, {1, 2, 3}};
    const auto f = proto::make_response_frame(r, 3);
    EXPECT_EQ(f.opcode, 0x85);
    EXPECT_EQ(proto::decode_response(f), r);
    EXPECT_THROW(proto::decode_response(cmd(Opcode::Arm)), Error);
}

TEST(Frame, ReportRoundTrip)
{
    ValidationReport rep;
    rep.violations = {{0, Rule::MinLength}, {4095, Rule::BadJump}, {7, Rule::FallsOffEnd}};
    const auto back = proto::decode_report(proto::encode_report(rep));
    EXPECT_EQ(back.violations, rep.violations);
}

TEST(Frame, StatusPacketLayout)
{
    proto::StatusPacket p;
    p.board_id = 7;
    p.uptime_cycles = 0x0102030405060708ull;
    p.firmware_version = proto::reg::kFirmwareVersion;
    p.channels[2] = {ChannelStatus::Running, 513, 99};
    const auto b = proto::encode_status(p);
    ASSERT_EQ(b.size(), proto::kStatusPacketBytes);
    EXPECT_EQ(std::string(b.begin(), b.begin() + 4), "AWGS");
    EXPECT_EQ(le::get_u16(&b[4]), 7);
    EXPECT_EQ(le::get_u64(&b[6]), p.uptime_cycles);
    EXPECT_EQ(proto::decode_status(b), p);
    auto bad = b;
    bad[0] = 'X';
    EXPECT_FALSE(proto::decode_status(bad));
    EXPECT_FALSE(proto::decode_status(std::span(b).first(b.size() - 1)));
}

class ServerTest : public ::testing::Test {
protected:
    BoardServer server;

    proto::Response send(const Frame& f) { return server.handle(f); }

    void load_simple(std::uint8_t ch, std::uint32_t words, std::uint8_t flags = proto_flags_end(),
                     TriggerSource trig = TriggerSource::None)
    {
        std::vector<SampleCode> s(words * kSamplesPerWord);
        for (std::size_t i = 0; i < s.size(); ++i)
            s[i] = static_cast<SampleCode>(i * 37);
        ASSERT_EQ(send(cmd(Opcode::WriteWdm, ch, wdm_payload(0, s))).status, Status::Ok);
        std::vector<SequenceEntry> e{awg::testing::entry(0, words, 1, flags, trig)};
        ASSERT_EQ(send(cmd(Opcode::WriteSdm, ch, pack_entries(e))).status, Status::Ok);
    }

    static std::uint8_t proto_flags_end() { return static_cast<std::uint8_t>(EntryFlag::EndOfSequence); }
};

TEST_F(ServerTest, WdmWriteReadbackIsBitExact)
{
    std::mt19937_64 rng(5);
    std::vector<SampleCode> s(kWdmCapacitySamples);
    for (auto& v : s)
        v = static_cast<SampleCode>(rng());
    const auto w = send(cmd(Opcode::WriteWdm, 1, wdm_payload(0, s)));
    ASSERT_EQ(w.status, Status::Ok);
    const auto r = send(cmd(Opcode::ReadWdm, 1, u32s({0, static_cast<std::uint32_t>(kWdmCapacityWords)})));
    ASSERT_EQ(r.status, Status::Ok);
    EXPECT_EQ(r.data, pack_samples(s));
}

TEST_F(ServerTest, SdmWithLengthThreeEntryIsRejectedWithMinLength)
{
    std::vector<SequenceEntry> e{awg::testing::entry(0, 3, 1, awg::testing::kEnd)};
    const auto r = send(cmd(Opcode::WriteSdm, 0, pack_entries(e)));
    ASSERT_EQ(r.status, Status::ValidationFailed);
    const auto rep = proto::decode_report(r.data);
    EXPECT_TRUE(rep.has(0, Rule::MinLength));
    const auto rd = send(cmd(Opcode::ReadSdm, 0));
    EXPECT_EQ(unpack_entries(rd.data), e);
    EXPECT_EQ(send(cmd(Opcode::Arm, 0)).status, Status::ValidationFailed);
    EXPECT_EQ(server.board().status(0), ChannelStatus::Idle);
}

TEST_F(ServerTest, ArmThenSoftTriggerLogsTriggerSeenAtStamp)
{
    load_simple(2, 8, static_cast<std::uint8_t>(EntryFlag::WaitTrigger) | EntryFlag::EndOfSequence,
                TriggerSource::Software);
    ASSERT_EQ(send(cmd(Opcode::Arm, 2)).status, Status::Ok);
    ASSERT_EQ(send(cmd(Opcode::Advance, 0, u64(37))).status, Status::Ok);
    const auto t = send(cmd(Opcode::SoftTrig, 2));
    ASSERT_EQ(t.status, Status::Ok);
    EXPECT_EQ(t.cycle, 37u);
    send(cmd(Opcode::Advance, 0, u64(40)));
    const auto log = decode_events(send(cmd(Opcode::Events, 2)).data);
    const auto seen = std::find_if(log.begin(), log.end(), [](const Event& e) { return e.kind == EventKind::TriggerSeen; });
    ASSERT_NE(seen, log.end());
    EXPECT_EQ(seen->cycle, t.cycle);
    const auto start = std::find_if(log.begin(), log.end(), [](const Event& e) { return e.kind == EventKind::Start; });
    ASSERT_NE(start, log.end());
    EXPECT_EQ(start->cycle, t.cycle + kTriggerLatencyCycles);
}

TEST_F(ServerTest, StopDropsTriggersNotYetSeen)
{
    load_simple(1, 8, static_cast<std::uint8_t>(EntryFlag::WaitTrigger) | EntryFlag::EndOfSequence,
                TriggerSource::Software);
    ASSERT_EQ(send(cmd(Opcode::Arm, 1)).status, Status::Ok);
    send(cmd(Opcode::SoftTrig, 1)); // asserted, but no cycle has run yet
    ASSERT_EQ(send(cmd(Opcode::Stop, 1)).status, Status::Ok);
    ASSERT_EQ(send(cmd(Opcode::Arm, 1)).status, Status::Ok);
    send(cmd(Opcode::Advance, 0, u64(20)));
    EXPECT_EQ(server.board().status(1), ChannelStatus::ArmedWaitingTrigger);
}

TEST_F(ServerTest, WritesRejectedWhileRunning)
{
    load_simple(0, 4);
    // one entry repeating forever
    std::vector<SequenceEntry> e{awg::testing::entry(0, 4, 0)};
    ASSERT_EQ(send(cmd(Opcode::WriteSdm, 0, pack_entries(e))).status, Status::Ok);
    ASSERT_EQ(send(cmd(Opcode::Arm, 0)).status, Status::Ok);
    send(cmd(Opcode::Advance, 0, u64(10)));
    ASSERT_EQ(server.board().status(0), ChannelStatus::Running);
    const auto before = server.board().wdm(0);
    std::vector<SampleCode> s(8, 1);
    EXPECT_EQ(send(cmd(Opcode::WriteWdm, 0, wdm_payload(0, s))).status, Status::BusyRunning);
    EXPECT_EQ(send(cmd(Opcode::WriteSdm, 0, pack_entries(e))).status, Status::BusyRunning);
    EXPECT_EQ(send(cmd(Opcode::Arm, 0)).status, Status::BusyRunning);
    EXPECT_TRUE(server.board().wdm(0) == before);
    // other channels are unaffected
    EXPECT_EQ(send(cmd(Opcode::WriteWdm, 1, wdm_payload(0, s))).status, Status::Ok);
    EXPECT_EQ(send(cmd(Opcode::Stop, 0)).status, Status::Ok);
    EXPECT_EQ(send(cmd(Opcode::WriteWdm, 0, wdm_payload(0, s))).status, Status::Ok);
}

TEST_F(ServerTest, ErrorStatuses)
{
    EXPECT_EQ(send(cmd(Opcode::ReadSdm, 4)).status, Status::BadChannel);
    EXPECT_EQ(send(Frame{0x42, 0, {}}).status, Status::BadOpcode);
    EXPECT_EQ(send(cmd(Opcode::Arm, 1)).status, Status::NoProgram);
    EXPECT_EQ(send(cmd(Opcode::Stop, 0, {1})).status, Status::BadPayload);
    EXPECT_EQ(send(cmd(Opcode::ReadWdm, 0, u32s({kWdmCapacityWords - 1, 2}))).status, Status::BadPayload);
    // misaligned WDM payload and out-of-range offsets change nothing
    std::vector<std::uint8_t> odd = wdm_payload(0, std::vector<SampleCode>(8, 5));
    odd.push_back(0);
    EXPECT_EQ(send(cmd(Opcode::WriteWdm, 0, odd)).status, Status::BadPayload);
    EXPECT_EQ(send(cmd(Opcode::WriteWdm, 0, wdm_payload(kWdmCapacityWords - 1, std::vector<SampleCode>(16, 5)))).status,
              Status::BadPayload);
    EXPECT_TRUE(server.board().wdm(0) == WaveformMemory(0));
}

TEST_F(ServerTest, BenchOpcodesCanBeDisabled)
{
    BoardServer plain({}, ServerOptions{false});
    EXPECT_EQ(plain.handle(cmd(Opcode::Advance, 0, u64(1))).status, Status::BadOpcode);
    EXPECT_EQ(send(cmd(Opcode::Advance, 0, u64(1))).status, Status::Ok);
    EXPECT_EQ(send(cmd(Opcode::Advance, 0, u64((1ull << 24) + 1))).status, Status::BadPayload);
}

TEST_F(ServerTest, RegisterSemantics)
{
    auto read = [&](std::uint32_t a) {
        const auto r = send(cmd(Opcode::RegRead, 0, u32s({a})));
        EXPECT_EQ(r.status, Status::Ok);
        return le::get_u32(r.data.data());
    };
    auto write = [&](std::uint32_t a, std::uint32_t v) {
        EXPECT_EQ(send(cmd(Opcode::RegWrite, 0, u32s({a, v}))).status, Status::Ok);
    };
    EXPECT_EQ(read(proto::reg::FwVersion), proto::reg::kFirmwareVersion);
    EXPECT_EQ(read(proto::reg::DPipe), proto::reg::kDefaultDPipe);
    EXPECT_EQ(read(proto::reg::StatusPeriod), proto::reg::kDefaultStatusPeriod);
    for (std::uint32_t ch = 0; ch < 4; ++ch)
        EXPECT_EQ(read(proto::reg::TriggerDefault0 + 4 * ch), static_cast<std::uint32_t>(TriggerSource::External));

    write(proto::reg::DPipe, 21);
    EXPECT_EQ(read(proto::reg::DPipe), 21u);
    EXPECT_EQ(server.board().timing(3).pipeline_delay_cycles, 21u);
    write(proto::reg::TimerPeriod, 0xDEADBEEF);
    EXPECT_EQ(read(proto::reg::TimerPeriod), 0xDEADBEEFu);
    write(proto::reg::FwVersion, 1);
    EXPECT_EQ(read(proto::reg::FwVersion), proto::reg::kFirmwareVersion);
    for (std::uint32_t a : {0x14u, 0x18u, 0x1Cu, 0x34u, 0x100u, 0x01u}) {
        write(a, 77);
        EXPECT_EQ(read(a), 0u) << a;
    }
}

TEST_F(ServerTest, TriggerDefaultRegisterFeedsNoneEntries)
{
    send(cmd(Opcode::RegWrite, 0, u32s({proto::reg::TriggerDefault0 + 4, static_cast<std::uint32_t>(TriggerSource::Software)})));
    load_simple(1, 4, static_cast<std::uint8_t>(EntryFlag::WaitTrigger) | EntryFlag::EndOfSequence, TriggerSource::None);
    send(cmd(Opcode::Arm, 1));
    send(cmd(Opcode::Advance, 0, u64(5)));
    send(cmd(Opcode::SoftTrig, 1));
    send(cmd(Opcode::Advance, 0, u64(20)));
    EXPECT_EQ(server.board().status(1), ChannelStatus::Done);
}

TEST_F(ServerTest, IdleStatusIsAllIdle)
{
    const auto r = send(cmd(Opcode::StatusQuery));
    const auto p = proto::decode_status(r.data);
    ASSERT_TRUE(p);
    for (const auto& c : p->channels) {
        EXPECT_EQ(c.status, ChannelStatus::Idle);
        EXPECT_EQ(c.executed_words, 0u);
    }
    EXPECT_EQ(p->firmware_version, proto::reg::kFirmwareVersion);
}

TEST_F(ServerTest, TwelveWordRunReportsTwelveExecutedWords)
{
    load_simple(3, 12);
    send(cmd(Opcode::Arm, 3));
    send(cmd(Opcode::Advance, 0, u64(100)));
    const auto p = proto::decode_status(send(cmd(Opcode::StatusQuery)).data);
    ASSERT_TRUE(p);
    EXPECT_EQ(p->channels[3].status, ChannelStatus::Done);
    EXPECT_EQ(p->channels[3].executed_words, 12u);
    EXPECT_EQ(p->channels[0].executed_words, 0u);
    // cross-check against the event log: words between START and DONE
    const auto log = server.board().events(3);
    const auto start = std::find_if(log.begin(), log.end(), [](const Event& e) { return e.kind == EventKind::Start; });
    const auto done = std::find_if(log.begin(), log.end(), [](const Event& e) { return e.kind == EventKind::Done; });
    ASSERT_NE(start, log.end());
    ASSERT_NE(done, log.end());
    EXPECT_EQ(done->cycle - start->cycle, 12u);
    const auto& rec = server.board().recording(3);
    EXPECT_EQ(std::count(rec.valid.begin(), rec.valid.end(), 1), 12);
}

TEST_F(ServerTest, BroadcastPeriodAndMonotoneUptime)
{
    std::vector<proto::StatusPacket> got;
    server.set_status_sink([&](const proto::StatusPacket& p) { got.push_back(p); });
    send(cmd(Opcode::RegWrite, 0, u32s({proto::reg::StatusPeriod, 100})));
    load_simple(0, 12);
    send(cmd(Opcode::Arm, 0));
    send(cmd(Opcode::Advance, 0, u64(1050)));
    ASSERT_EQ(got.size(), 10u);
    for (std::size_t i = 0; i < got.size(); ++i) {
        EXPECT_EQ(got[i].uptime_cycles, 100 * (i + 1));
        if (i)
            EXPECT_GT(got[i].uptime_cycles, got[i - 1].uptime_cycles);
    }
    EXPECT_EQ(got.back().channels[0].executed_words, 12u);

    // broadcast can be switched off
    send(cmd(Opcode::RegWrite, 0, u32s({proto::reg::RunControl, 0})));
    send(cmd(Opcode::Advance, 0, u64(1000)));
    EXPECT_EQ(got.size(), 10u);
}

TEST(Session, PipelinedFramesGetOrderedResponses)
{
    BoardServer server;
    Session session(server);
    std::vector<std::uint8_t> stream;
    std::vector<std::uint8_t> ops;
    std::mt19937_64 rng(8);
    for (int i = 0; i < 200; ++i) {
        const std::uint32_t a = static_cast<std::uint32_t>(4 * (rng() % 5));
        Frame f = i % 2 ? cmd(Opcode::RegRead, 0, u32s({a})) : cmd(Opcode::RegWrite, 0, u32s({proto::reg::TimerPeriod, std::uint32_t(i)}));
        if (i % 7 == 0)
            f = cmd(Opcode::StatusQuery);
        ops.push_back(f.opcode);
        const auto b = proto::serialize_frame(f);
        stream.insert(stream.end(), b.begin(), b.end());
    }
    // delivered in arbitrary chunk sizes
    std::vector<std::uint8_t> out;
    for (std::size_t pos = 0; pos < stream.size();) {
        const std::size_t n = std::min<std::size_t>(1 + rng() % 50, stream.size() - pos);
        const auto o = session.feed(std::span(stream).subspan(pos, n));
        out.insert(out.end(), o.begin(), o.end());
        pos += n;
    }
    EXPECT_EQ(session.buffered(), 0u);
    std::size_t i = 0;
    for (std::size_t pos = 0; pos < out.size(); ++i) {
        const auto r = proto::parse_frame(std::span(out).subspan(pos));
        ASSERT_EQ(r.status, ParseStatus::Ok);
        ASSERT_LT(i, ops.size());
        EXPECT_EQ(proto::decode_response(r.frame).request_opcode, ops[i]);
        pos += r.consumed;
    }
    EXPECT_EQ(i, ops.size());
}

TEST(Session, RecoversAfterGarbageAndBadCrc)
{
    BoardServer server;
    Session session(server);
    std::vector<std::uint8_t> in{0x00, 'A', 'W', 0x13, 0x37};
    auto bad = proto::serialize_frame(cmd(Opcode::Stop));
    bad.back() ^= 0xFF;
    in.insert(in.end(), bad.begin(), bad.end());
    const auto good = proto::serialize_frame(cmd(Opcode::StatusQuery));
    in.insert(in.end(), good.begin(), good.end());
    const auto out = session.feed(in);
    auto r1 = proto::parse_frame(out);
    ASSERT_EQ(r1.status, ParseStatus::Ok);
    const auto e = proto::decode_response(r1.frame);
    EXPECT_EQ(r1.frame.opcode, proto::kErrorOpcode);
    EXPECT_EQ(e.status, Status::BadFrame);
    auto r2 = proto::parse_frame(std::span(out).subspan(r1.consumed));
    ASSERT_EQ(r2.status, ParseStatus::Ok);
    EXPECT_EQ(proto::decode_response(r2.frame).status, Status::Ok);
    EXPECT_EQ(r1.consumed + r2.consumed, out.size());
}

TEST(Session, FuzzedStreamStaysRecoverable)
{
    BoardServer server({}, ServerOptions{false});
    Session session(server);
    std::mt19937_64 rng(21);
    std::size_t responses = 0;
    int stalls = 0;
    auto check = [&](const std::vector<std::uint8_t>& out) {
        for (std::size_t pos = 0; pos < out.size(); ++responses) {
            const auto r = proto::parse_frame(std::span(out).subspan(pos));
            ASSERT_EQ(r.status, ParseStatus::Ok);
            ASSERT_TRUE(r.frame.opcode == proto::kErrorOpcode || (r.frame.opcode & proto::kResponseBit));
            ASSERT_NO_THROW(proto::decode_response(r.frame));
            pos += r.consumed;
        }
    };
    for (int i = 0; i < 10000; ++i) {
        check(session.feed(fuzz::mangle(rng, proto::serialize_frame(fuzz::random_command(rng)))));
        if (session.buffered() > 4096) {
            // garbage that decodes as a plausible length holds the session
            // until that many bytes arrive; filler flushes it
            ++stalls;
            check(session.feed(std::vector<std::uint8_t>(proto::kMaxPayload + proto::kFrameOverhead, 0)));
            ASSERT_EQ(session.buffered(), 0u);
            const auto out = session.feed(proto::serialize_frame(cmd(Opcode::StatusQuery)));
            const auto r = proto::parse_frame(out);
            ASSERT_EQ(r.status, ParseStatus::Ok);
            ASSERT_EQ(r.consumed, out.size());
            ASSERT_EQ(proto::decode_response(r.frame).status, Status::Ok);
        }
    }
    EXPECT_GT(responses, 1000u);
    EXPECT_GT(stalls, 0);
}

TEST(Fuzz, NoCrashAndNoPartialApplication)
{
    const auto o = fuzz::run_frame_fuzz(99, 1000000);
    EXPECT_EQ(o.violations, 0u);
    EXPECT_EQ(o.frames, 1000000u);
    // the mix reaches every outcome
    EXPECT_GT(o.parsed_ok, 400000u);
    EXPECT_GT(o.applied, 50000u);
    EXPECT_GT(o.bad_magic, 0u);
    EXPECT_GT(o.bad_crc, 0u);
    EXPECT_GT(o.truncated, 0u);
}
