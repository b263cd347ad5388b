#pragma once

// Command-frame fuzzing shared by the protocol tests and the acceptance run.
// Frames are mostly plausible commands (so that they reach the handlers)
// and then mangled in one of a few ways.

#include <cstdint>
#include <random>
#include <vector>

#include "awg/bytes.hpp"
#include "awg/memory.hpp"
#include "awg/protocol.hpp"
#include "awg/server.hpp"

namespace fuzz {

using awg::proto::Frame;
using awg::proto::Opcode;

inline std::vector<std::uint8_t> random_bytes(std::mt19937_64& rng, std::size_t n)
{
    std::vector<std::uint8_t> b(n);
    for (auto& x : b)
        x = static_cast<std::uint8_t>(rng());
    return b;
}

inline Frame random_command(std::mt19937_64& rng)
{
    static constexpr std::uint8_t ops[] = {0x01, 0x02, 0x03, 0x04, 0x05, 0x06, 0x07, 0x08, 0x09, 0x0A, 0x00, 0x42, 0x7F};
    Frame f;
    f.opcode = ops[rng() % std::size(ops)];
    f.channel = static_cast<std::uint8_t>(rng() % 6);
    awg::le::Writer w;
    switch (f.opcode) {
    case 0x01: {
        w.u32(static_cast<std::uint32_t>(rng() % (awg::kWdmCapacityWords + 8)));
        const std::size_t words = rng() % 6;
        const std::size_t extra = rng() % 8 == 0 ? 1 + rng() % 15 : 0;
        w.bytes(random_bytes(rng, words * 16 + extra));
        break;
    }
    case 0x02: {
        const std::size_t n = rng() % 5;
        std::vector<awg::SequenceEntry> entries(n);
        for (auto& e : entries) {
            e.flags = static_cast<std::uint8_t>(rng() % 16);
            e.start_addr = static_cast<std::uint32_t>(rng() % 64);
            e.length = static_cast<std::uint32_t>(rng() % 8);
            e.trigger = static_cast<awg::TriggerSource>(rng() % 4);
            e.counter = static_cast<std::uint32_t>(rng() % 3);
            e.jump_target = static_cast<std::uint16_t>(rng() % 6);
        }
        w.bytes(awg::pack_entries(entries));
        if (rng() % 8 == 0)
            w.u8(0);
        break;
    }
    case 0x03:
        w.u32(static_cast<std::uint32_t>(rng() % (awg::kWdmCapacityWords + 8)));
        w.u32(static_cast<std::uint32_t>(rng() % 8));
        break;
    case 0x08:
        w.u32(static_cast<std::uint32_t>(rng() % 0x40));
        w.u32(static_cast<std::uint32_t>(rng() % 8));
        break;
    case 0x09:
        w.u32(static_cast<std::uint32_t>(rng() % 0x40));
        break;
    default:
        if (rng() % 4 == 0)
            w.bytes(random_bytes(rng, rng() % 12));
        break;
    }
    f.payload = w.take();
    return f;
}

/// Serialised frame, intact about half the time, otherwise corrupted.
/// With `keep_length` the payload_len field survives, so a stream of such
/// frames never stalls waiting for a bogus length.
inline std::vector<std::uint8_t> mangle(std::mt19937_64& rng, std::vector<std::uint8_t> bytes, bool keep_length = false)
{
    const std::vector<std::uint8_t> len(bytes.begin() + 6, bytes.begin() + 10);
    switch (rng() % 8) {
    case 0: { // flip bits in one byte
        bytes[rng() % bytes.size()] ^= static_cast<std::uint8_t>(1 + rng() % 255);
        break;
    }
    case 1: { // several random bytes
        for (int k = 0; k < 3; ++k)
            bytes[rng() % bytes.size()] = static_cast<std::uint8_t>(rng());
        break;
    }
    case 2: // cut short
        bytes.resize(rng() % bytes.size());
        break;
    case 3: { // junk in front
        auto junk = random_bytes(rng, 1 + rng() % 8);
        bytes.insert(bytes.begin(), junk.begin(), junk.end());
        break;
    }
    default:
        break;
    }
    if (keep_length && bytes.size() >= 10 && bytes[0] == 'A')
        std::copy(len.begin(), len.end(), bytes.begin() + 6);
    return bytes;
}

/// Memories and registers, the state a failed command must not touch.
struct Shadow {
    std::vector<awg::WaveformMemory> wdm;
    std::vector<awg::SequenceMemory> sdm;
    awg::proto::RegisterMap regs;

    Shadow()
    {
        for (std::uint8_t ch = 0; ch < awg::kChannelsPerBoard; ++ch) {
            wdm.emplace_back(ch);
            sdm.emplace_back(ch);
        }
    }

    /// Mirrors a command the board reported as applied.
    void apply(const Frame& f, awg::proto::Status status)
    {
        using awg::proto::Status;
        awg::le::Reader in(f.payload);
        if (f.opcode == 0x01 && status == Status::Ok) {
            const auto off = in.u32();
            wdm[f.channel].write(off, awg::unpack_samples(in.bytes(in.remaining())));
        } else if (f.opcode == 0x02 && (status == Status::Ok || status == Status::ValidationFailed)) {
            sdm[f.channel].assign(awg::unpack_entries(f.payload));
        } else if (f.opcode == 0x08 && status == Status::Ok) {
            const auto addr = in.u32();
            regs.write(addr, in.u32());
        }
    }

    bool matches(awg::Board& b) const
    {
        for (std::size_t ch = 0; ch < awg::kChannelsPerBoard; ++ch)
            if (!(b.wdm(ch) == wdm[ch]) || !(b.sdm(ch) == sdm[ch]))
                return false;
        for (std::uint32_t a = 0; a < 0x40; a += 4)
            if (b.registers().read(a) != regs.read(a))
                return false;
        return true;
    }
};

struct FuzzOutcome {
    std::size_t frames = 0;
    std::size_t parsed_ok = 0;
    std::size_t bad_magic = 0;
    std::size_t bad_crc = 0;
    std::size_t truncated = 0;
    std::size_t applied = 0;
    std::size_t violations = 0; // parse contract or partial-application failures
};

/// Feeds `count` fuzzed frames, one at a time, through parse_frame and the
/// command handler, checking the parse contract and that board memories and
/// registers change exactly when a command reports success.
inline FuzzOutcome run_frame_fuzz(std::uint64_t seed, std::size_t count, std::size_t check_every = 5000)
{
    using awg::proto::ParseStatus;
    std::mt19937_64 rng(seed);
    awg::ServerOptions opts;
    opts.bench_opcodes = false;
    awg::BoardServer server({}, opts);
    Shadow shadow;
    FuzzOutcome out;
    for (std::size_t i = 0; i < count; ++i) {
        const Frame cmd = random_command(rng);
        const auto bytes = mangle(rng, awg::proto::serialize_frame(cmd));
        const auto r = awg::proto::parse_frame(bytes);
        ++out.frames;
        switch (r.status) {
        case ParseStatus::Ok: {
            ++out.parsed_ok;
            if (r.consumed == 0 || r.consumed > bytes.size() ||
                awg::proto::serialize_frame(r.frame) !=
                    std::vector<std::uint8_t>(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(r.consumed)))
                ++out.violations;
            const auto resp = server.handle(r.frame);
            if (resp.request_opcode != r.frame.opcode)
                ++out.violations;
            shadow.apply(r.frame, resp.status);
            if (resp.status == awg::proto::Status::Ok)
                ++out.applied;
            break;
        }
        case ParseStatus::BadMagic:
            ++out.bad_magic;
            if (r.consumed != 1)
                ++out.violations;
            break;
        case ParseStatus::BadCrc:
            ++out.bad_crc;
            if (r.consumed < awg::proto::kFrameOverhead || r.consumed > bytes.size())
                ++out.violations;
            break;
        case ParseStatus::Truncated:
            ++out.truncated;
            if (r.consumed != 0)
                ++out.violations;
            break;
        default:
            ++out.violations;
        }
        if ((i + 1) % check_every == 0 || i + 1 == count)
            if (!shadow.matches(server.board()))
                ++out.violations;
    }
    return out;
}

} // namespace fuzz
