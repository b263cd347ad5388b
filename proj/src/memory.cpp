#include "awg/memory.hpp"

#include <algorithm>
#include <sstream>

#include "awg/bytes.hpp"
#include "awg/error.hpp"

namespace awg {

const char* to_string(Errc code) noexcept
{
    switch (code) {
    case Errc::InvariantViolation: return "InvariantViolation";
    case Errc::OutOfRange: return "OutOfRange";
    case Errc::MisalignedLength: return "MisalignedLength";
    case Errc::CapacityExceeded: return "CapacityExceeded";
    case Errc::NoProgram: return "NoProgram";
    case Errc::NonTerminating: return "NonTerminating";
    case Errc::WrongLength: return "WrongLength";
    case Errc::NonCoherent: return "NonCoherent";
    case Errc::TooFewEvents: return "TooFewEvents";
    case Errc::MismatchedGrids: return "MismatchedGrids";
    case Errc::ConfigError: return "ConfigError";
    case Errc::ConnectionError: return "ConnectionError";
    case Errc::ProtocolError: return "ProtocolError";
    case Errc::RemoteError: return "RemoteError";
    }
    return "Unknown";
}

const char* to_string(Rule rule) noexcept
{
    switch (rule) {
    case Rule::EmptyProgram: return "EMPTY_PROGRAM";
    case Rule::MinLength: return "MIN_LENGTH";
    case Rule::OutOfRange: return "OUT_OF_RANGE";
    case Rule::BadJump: return "BAD_JUMP";
    case Rule::JumpWithEnd: return "JUMP_WITH_END";
    case Rule::FallsOffEnd: return "FALLS_OFF_END";
    }
    return "UNKNOWN";
}

EntryWord pack_entry(const SequenceEntry& e) noexcept
{
    EntryWord w{};
    le::put_u32(&w[0], e.start_addr);
    le::put_u32(&w[4], e.length);
    le::put_u32(&w[8], e.counter);
    w[12] = e.flags & kEntryFlagMask;
    w[13] = static_cast<std::uint8_t>(e.trigger) & 0x03;
    le::put_u16(&w[14], e.jump_target);
    return w;
}

EntryWord encode_entry(const SequenceEntry& e)
{
    if (e.length < kMinEntryWords)
        throw Error(Errc::InvariantViolation,
                    "entry length " + std::to_string(e.length) + " is below the minimum of 4 words");
    if (std::uint64_t{e.start_addr} + e.length > kWdmCapacityWords)
        throw Error(Errc::InvariantViolation, "entry range exceeds waveform memory");
    if ((e.flags & ~kEntryFlagMask) != 0 || static_cast<std::uint8_t>(e.trigger) > 3)
        throw Error(Errc::InvariantViolation, "reserved bits set");
    return pack_entry(e);
}

SequenceEntry decode_entry(std::span<const std::uint8_t, kEntryBytes> w) noexcept
{
    SequenceEntry e;
    e.start_addr = le::get_u32(&w[0]);
    e.length = le::get_u32(&w[4]);
    e.counter = le::get_u32(&w[8]);
    e.flags = w[12] & kEntryFlagMask;
    e.trigger = static_cast<TriggerSource>(w[13] & 0x03);
    e.jump_target = le::get_u16(&w[14]);
    return e;
}

std::vector<std::uint8_t> pack_entries(std::span<const SequenceEntry> entries)
{
    std::vector<std::uint8_t> out;
    out.reserve(entries.size() * kEntryBytes);
    for (const auto& e : entries) {
        auto w = pack_entry(e);
        out.insert(out.end(), w.begin(), w.end());
    }
    return out;
}

std::vector<SequenceEntry> unpack_entries(std::span<const std::uint8_t> bytes)
{
    if (bytes.size() % kEntryBytes != 0)
        throw Error(Errc::MisalignedLength, "SDM image is not a multiple of 16 bytes");
    std::vector<SequenceEntry> out;
    out.reserve(bytes.size() / kEntryBytes);
    for (std::size_t off = 0; off < bytes.size(); off += kEntryBytes)
        out.push_back(decode_entry(bytes.subspan(off).first<kEntryBytes>()));
    return out;
}

std::vector<std::uint8_t> pack_samples(std::span<const SampleCode> samples)
{
    std::vector<std::uint8_t> out(samples.size() * 2);
    for (std::size_t i = 0; i < samples.size(); ++i)
        le::put_u16(&out[2 * i], static_cast<std::uint16_t>(samples[i]));
    return out;
}

std::vector<SampleCode> unpack_samples(std::span<const std::uint8_t> bytes)
{
    if (bytes.size() % 2 != 0)
        throw Error(Errc::MisalignedLength, "odd byte count for 16-bit samples");
    std::vector<SampleCode> out(bytes.size() / 2);
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = static_cast<SampleCode>(le::get_u16(&bytes[2 * i]));
    return out;
}

WaveformMemory::WaveformMemory(std::uint8_t channel)
    : channel_(channel), samples_(kWdmCapacitySamples, 0)
{
}

void WaveformMemory::write(std::uint64_t word_offset, std::span<const SampleCode> samples)
{
    if (samples.size() % kSamplesPerWord != 0)
        throw Error(Errc::MisalignedLength, "sample count " + std::to_string(samples.size()) +
                                                " is not a multiple of 8");
    if (word_offset > capacity_words() ||
        samples.size() / kSamplesPerWord > capacity_words() - word_offset)
        throw Error(Errc::OutOfRange, "write past end of waveform memory");
    std::copy(samples.begin(), samples.end(), samples_.begin() + static_cast<std::ptrdiff_t>(word_offset * kSamplesPerWord));
}

std::vector<SampleCode> WaveformMemory::read(std::uint64_t word_offset, std::uint64_t word_count) const
{
    if (word_offset > capacity_words() || word_count > capacity_words() - word_offset)
        throw Error(Errc::OutOfRange, "read past end of waveform memory");
    auto first = samples_.begin() + static_cast<std::ptrdiff_t>(word_offset * kSamplesPerWord);
    return {first, first + static_cast<std::ptrdiff_t>(word_count * kSamplesPerWord)};
}

void WaveformMemory::clear()
{
    std::fill(samples_.begin(), samples_.end(), SampleCode{0});
}

SequenceMemory::SequenceMemory(std::uint8_t channel, std::vector<SequenceEntry> entries)
    : channel_(channel)
{
    assign(std::move(entries));
}

void SequenceMemory::push_back(const SequenceEntry& entry)
{
    if (entries_.size() >= kSdmCapacity)
        throw Error(Errc::CapacityExceeded, "sequence memory holds at most 4096 entries");
    entries_.push_back(entry);
}

void SequenceMemory::assign(std::vector<SequenceEntry> entries)
{
    if (entries.size() > kSdmCapacity)
        throw Error(Errc::CapacityExceeded, "sequence memory holds at most 4096 entries");
    entries_ = std::move(entries);
}

bool ValidationReport::has(Rule rule) const
{
    return std::any_of(violations.begin(), violations.end(), [&](const Violation& v) { return v.rule == rule; });
}

bool ValidationReport::has(std::size_t index, Rule rule) const
{
    return std::find(violations.begin(), violations.end(), Violation{index, rule}) != violations.end();
}

std::string ValidationReport::describe() const
{
    if (ok())
        return "ok";
    std::ostringstream os;
    for (std::size_t i = 0; i < violations.size(); ++i) {
        if (i)
            os << ", ";
        os << "{index:" << violations[i].index << ", rule:" << to_string(violations[i].rule) << "}";
    }
    return os.str();
}

std::int64_t successor_of(const SequenceMemory& sdm, std::size_t index)
{
    const auto& e = sdm[index];
    if (e.end_of_sequence() || e.infinite())
        return -1;
    if (e.jump())
        return e.jump_target;
    return static_cast<std::int64_t>(index) + 1;
}

ValidationReport validate_program(const SequenceMemory& sdm, const WaveformMemory& wdm)
{
    ValidationReport report;
    if (sdm.empty()) {
        report.violations.push_back({0, Rule::EmptyProgram});
        return report;
    }

    const std::size_t n = sdm.size();
    for (std::size_t i = 0; i < n; ++i) {
        const auto& e = sdm[i];
        if (e.length < kMinEntryWords)
            report.violations.push_back({i, Rule::MinLength});
        if (std::uint64_t{e.start_addr} + e.length > wdm.capacity_words())
            report.violations.push_back({i, Rule::OutOfRange});
        if (e.jump() && e.jump_target >= n)
            report.violations.push_back({i, Rule::BadJump});
        if (e.jump() && e.end_of_sequence())
            report.violations.push_back({i, Rule::JumpWithEnd});
    }

    // Walk the control-flow graph from entry 0; a reachable entry whose
    // fall-through successor is past the last entry would fetch garbage.
    std::vector<bool> seen(n, false);
    std::size_t at = 0;
    while (!seen[at]) {
        seen[at] = true;
        auto next = successor_of(sdm, at);
        if (next < 0)
            break;
        if (static_cast<std::size_t>(next) >= n) {
            if (!sdm[at].jump())
                report.violations.push_back({at, Rule::FallsOffEnd});
            break;
        }
        at = static_cast<std::size_t>(next);
    }

    std::stable_sort(report.violations.begin(), report.violations.end(),
                     [](const Violation& a, const Violation& b) { return a.index < b.index; });
    return report;
}

} // namespace awg
