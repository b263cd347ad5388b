#include "awg/protocol.hpp"

#include <algorithm>
#include <cstring>

#include <zlib.h>

#include "awg/bytes.hpp"
#include "awg/error.hpp"

namespace awg::proto {

const char* to_string(Opcode op) noexcept
{
    switch (op) {
    case Opcode::WriteWdm: return "WRITE_WDM";
    case Opcode::WriteSdm: return "WRITE_SDM";
    case Opcode::ReadWdm: return "READ_WDM";
    case Opcode::ReadSdm: return "READ_SDM";
    case Opcode::Arm: return "ARM";
    case Opcode::Stop: return "STOP";
    case Opcode::SoftTrig: return "SOFT_TRIG";
    case Opcode::RegWrite: return "REG_WRITE";
    case Opcode::RegRead: return "REG_READ";
    case Opcode::StatusQuery: return "STATUS_QUERY";
    case Opcode::Advance: return "ADVANCE";
    case Opcode::ExtTrigger: return "EXT_TRIGGER";
    case Opcode::Probe: return "PROBE";
    case Opcode::Capture: return "CAPTURE";
    case Opcode::Edges: return "EDGES";
    case Opcode::Events: return "EVENTS";
    case Opcode::Discard: return "DISCARD";
    }
    return "UNKNOWN";
}

bool is_standard_opcode(std::uint8_t op) noexcept { return op >= 0x01 && op <= 0x0A; }
bool is_bench_opcode(std::uint8_t op) noexcept { return op >= 0x10 && op <= 0x16; }

std::uint32_t crc32(std::span<const std::uint8_t> bytes) noexcept
{
    uLong c = ::crc32(0L, Z_NULL, 0);
    // zlib takes uInt lengths; feed in chunks
    std::size_t off = 0;
    while (off < bytes.size()) {
        const auto n = static_cast<uInt>(std::min<std::size_t>(bytes.size() - off, 1u << 30));
        c = ::crc32(c, bytes.data() + off, n);
        off += n;
    }
    return static_cast<std::uint32_t>(c);
}

std::vector<std::uint8_t> serialize_frame(const Frame& frame)
{
    if (frame.payload.size() > kMaxPayload)
        throw Error(Errc::ProtocolError, "payload of " + std::to_string(frame.payload.size()) + " bytes is too large");
    le::Writer w;
    w.reserve(kFrameOverhead + frame.payload.size());
    w.bytes(kFrameMagic);
    w.u8(frame.opcode);
    w.u8(frame.channel);
    w.u32(static_cast<std::uint32_t>(frame.payload.size()));
    w.bytes(frame.payload);
    w.u32(crc32(w.buffer()));
    return w.take();
}

const char* to_string(ParseStatus s) noexcept
{
    switch (s) {
    case ParseStatus::Ok: return "Ok";
    case ParseStatus::BadMagic: return "BadMagic";
    case ParseStatus::BadCrc: return "BadCrc";
    case ParseStatus::Truncated: return "Truncated";
    }
    return "?";
}

ParseResult parse_frame(std::span<const std::uint8_t> bytes)
{
    ParseResult r;
    const std::size_t magic_seen = std::min(bytes.size(), kFrameMagic.size());
    if (!std::equal(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(magic_seen), kFrameMagic.begin())) {
        r.status = ParseStatus::BadMagic;
        r.consumed = 1;
        return r;
    }
    if (bytes.size() < kHeaderBytes) {
        r.status = ParseStatus::Truncated;
        return r;
    }
    const std::uint32_t len = le::get_u32(&bytes[6]);
    if (len > kMaxPayload) {
        r.status = ParseStatus::BadMagic;
        r.consumed = 1;
        return r;
    }
    const std::size_t total = kFrameOverhead + len;
    if (bytes.size() < total) {
        r.status = ParseStatus::Truncated;
        return r;
    }
    r.consumed = total;
    const std::uint32_t want = le::get_u32(&bytes[kHeaderBytes + len]);
    if (crc32(bytes.first(kHeaderBytes + len)) != want) {
        r.status = ParseStatus::BadCrc;
        return r;
    }
    r.status = ParseStatus::Ok;
    r.frame.opcode = bytes[4];
    r.frame.channel = bytes[5];
    r.frame.payload.assign(bytes.begin() + kHeaderBytes, bytes.begin() + static_cast<std::ptrdiff_t>(kHeaderBytes + len));
    return r;
}

const char* to_string(Status s) noexcept
{
    switch (s) {
    case Status::Ok: return "OK";
    case Status::BadChannel: return "BAD_CHANNEL";
    case Status::BusyRunning: return "BUSY_RUNNING";
    case Status::ValidationFailed: return "VALIDATION_FAILED";
    case Status::BadOpcode: return "BAD_OPCODE";
    case Status::BadPayload: return "BAD_PAYLOAD";
    case Status::BadFrame: return "BAD_FRAME";
    case Status::NoProgram: return "NO_PROGRAM";
    }
    return "?";
}

Frame make_response_frame(const Response& r, std::uint8_t channel)
{
    Frame f;
    f.opcode = r.request_opcode == kErrorOpcode ? kErrorOpcode
                                                : static_cast<std::uint8_t>(r.request_opcode | kResponseBit);
    f.channel = channel;
    le::Writer w;
    w.reserve(9 + r.data.size());
    w.u8(static_cast<std::uint8_t>(r.status));
    w.u64(r.cycle);
    w.bytes(r.data);
    f.payload = w.take();
    return f;
}

Response decode_response(const Frame& f)
{
    if (!(f.opcode & kResponseBit))
        throw Error(Errc::ProtocolError, "frame is not a response");
    if (f.payload.size() < 9)
        throw Error(Errc::ProtocolError, "response payload too short");
    Response r;
    r.request_opcode = f.opcode == kErrorOpcode ? kErrorOpcode : static_cast<std::uint8_t>(f.opcode & ~kResponseBit);
    const auto st = f.payload[0];
    if (st > static_cast<std::uint8_t>(Status::NoProgram))
        throw Error(Errc::ProtocolError, "unknown response status " + std::to_string(st));
    r.status = static_cast<Status>(st);
    r.cycle = le::get_u64(&f.payload[1]);
    r.data.assign(f.payload.begin() + 9, f.payload.end());
    return r;
}

std::vector<std::uint8_t> encode_report(const ValidationReport& report)
{
    le::Writer w;
    const auto n = std::min<std::size_t>(report.violations.size(), 0xFFFF);
    w.u16(static_cast<std::uint16_t>(n));
    for (std::size_t i = 0; i < n; ++i) {
        w.u16(static_cast<std::uint16_t>(report.violations[i].index));
        w.u8(static_cast<std::uint8_t>(report.violations[i].rule));
    }
    return w.take();
}

ValidationReport decode_report(std::span<const std::uint8_t> bytes)
{
    le::Reader r(bytes);
    ValidationReport rep;
    const auto n = r.u16();
    for (std::uint16_t i = 0; i < n && r.ok(); ++i) {
        Violation v;
        v.index = r.u16();
        const auto rule = r.u8();
        if (rule > static_cast<std::uint8_t>(Rule::FallsOffEnd))
            throw Error(Errc::ProtocolError, "unknown validation rule " + std::to_string(rule));
        v.rule = static_cast<Rule>(rule);
        rep.violations.push_back(v);
    }
    if (!r.ok())
        throw Error(Errc::ProtocolError, "truncated validation report");
    return rep;
}

std::vector<std::uint8_t> encode_status(const StatusPacket& p)
{
    le::Writer w;
    w.bytes(kStatusMagic);
    w.u16(p.board_id);
    w.u64(p.uptime_cycles);
    for (const auto& c : p.channels) {
        w.u8(static_cast<std::uint8_t>(c.status));
        w.u16(c.current_index);
        w.u64(c.executed_words);
    }
    w.u32(p.firmware_version);
    return w.take();
}

std::optional<StatusPacket> decode_status(std::span<const std::uint8_t> bytes)
{
    if (bytes.size() != kStatusPacketBytes || !std::equal(kStatusMagic.begin(), kStatusMagic.end(), bytes.begin()))
        return std::nullopt;
    le::Reader r(bytes.subspan(4));
    StatusPacket p;
    p.board_id = r.u16();
    p.uptime_cycles = r.u64();
    for (auto& c : p.channels) {
        const auto st = r.u8();
        if (st > static_cast<std::uint8_t>(ChannelStatus::Fault))
            return std::nullopt;
        c.status = static_cast<ChannelStatus>(st);
        c.current_index = r.u16();
        c.executed_words = r.u64();
    }
    p.firmware_version = r.u32();
    return p;
}

RegisterMap::RegisterMap()
{
    regs_[static_cast<std::size_t>(slot(reg::FwVersion))] = reg::kFirmwareVersion;
    regs_[static_cast<std::size_t>(slot(reg::DPipe))] = reg::kDefaultDPipe;
    regs_[static_cast<std::size_t>(slot(reg::StatusPeriod))] = reg::kDefaultStatusPeriod;
    regs_[static_cast<std::size_t>(slot(reg::RunControl))] = reg::kRunStatusEnable;
    for (std::size_t ch = 0; ch < kChannelsPerBoard; ++ch)
        regs_[static_cast<std::size_t>(slot(reg::TriggerDefault0 + 4 * static_cast<std::uint32_t>(ch)))] =
            static_cast<std::uint32_t>(TriggerSource::External);
}

int RegisterMap::slot(std::uint32_t addr) noexcept
{
    if (addr % 4 != 0)
        return -1;
    if (addr <= reg::TimerPeriod)
        return static_cast<int>(addr / 4);
    if (addr >= reg::TriggerDefault0 && addr <= reg::RunControl)
        return 5 + static_cast<int>((addr - reg::TriggerDefault0) / 4);
    return -1;
}

std::uint32_t RegisterMap::read(std::uint32_t addr) const
{
    const int s = slot(addr);
    return s < 0 ? 0 : regs_[static_cast<std::size_t>(s)];
}

bool RegisterMap::write(std::uint32_t addr, std::uint32_t value)
{
    const int s = slot(addr);
    if (s < 0 || addr == reg::FwVersion)
        return false;
    regs_[static_cast<std::size_t>(s)] = value;
    return true;
}

TriggerSource RegisterMap::default_trigger(std::size_t channel) const
{
    return static_cast<TriggerSource>(read(reg::TriggerDefault0 + 4 * static_cast<std::uint32_t>(channel)) & 3u);
}

} // namespace awg::proto
