#include "awg/server.hpp"

#include <cmath>

#include "awg/bytes.hpp"
#include "awg/error.hpp"

namespace awg {

using proto::Opcode;
using proto::Response;
using proto::Status;

namespace {

Response reply(const proto::Frame& f, Status status, std::uint64_t cycle, std::vector<std::uint8_t> data = {})
{
    return Response{f.opcode, status, cycle, std::move(data)};
}

std::vector<std::uint8_t> text(const std::string& s) { return {s.begin(), s.end()}; }

bool busy(ChannelStatus s) { return s == ChannelStatus::Running || s == ChannelStatus::ArmedWaitingTrigger; }

bool channel_scoped(Opcode op)
{
    switch (op) {
    case Opcode::RegWrite:
    case Opcode::RegRead:
    case Opcode::StatusQuery:
    case Opcode::Advance:
    case Opcode::ExtTrigger:
        return false;
    default:
        return true;
    }
}

constexpr std::uint32_t kMaxProbeCount = 1u << 19;
constexpr std::uint32_t kMaxCaptureWords = 1u << 18;

} // namespace

BoardServer::BoardServer(BoardConfig config, ServerOptions options)
    : board_(std::move(config)), options_(options)
{
}

void BoardServer::set_status_sink(std::function<void(const proto::StatusPacket&)> sink)
{
    std::lock_guard lock(mutex_);
    board_.set_status_sink(std::move(sink));
}

Response BoardServer::handle(const proto::Frame& frame)
{
    std::lock_guard lock(mutex_);
    try {
        return dispatch(frame);
    } catch (const Error& e) {
        return reply(frame, Status::BadPayload, board_.cycle(), text(e.what()));
    }
}

Response BoardServer::dispatch(const proto::Frame& f)
{
    const std::uint64_t now = board_.cycle();
    const bool known = proto::is_standard_opcode(f.opcode) || (options_.bench_opcodes && proto::is_bench_opcode(f.opcode));
    if (!known)
        return reply(f, Status::BadOpcode, now, text("unknown opcode " + std::to_string(f.opcode)));
    const auto op = static_cast<Opcode>(f.opcode);
    const std::size_t ch = f.channel;
    if (channel_scoped(op) && ch >= kChannelsPerBoard)
        return reply(f, Status::BadChannel, now, text("no channel " + std::to_string(ch)));

    le::Reader in(f.payload);
    auto bad = [&](const std::string& why) { return reply(f, Status::BadPayload, now, text(why)); };
    auto exact = [&](std::size_t n) { return f.payload.size() == n; };

    switch (op) {
    case Opcode::WriteWdm: {
        if (f.payload.size() < 4 || (f.payload.size() - 4) % (2 * kSamplesPerWord) != 0)
            return bad("WRITE_WDM payload must be u32 offset plus whole words");
        if (busy(board_.status(ch)))
            return reply(f, Status::BusyRunning, now);
        const auto offset = in.u32();
        const auto samples = unpack_samples(in.bytes(in.remaining()));
        board_.wdm(ch).write(offset, samples);
        return reply(f, Status::Ok, now, proto::encode_report(board_.validate(ch)));
    }
    case Opcode::WriteSdm: {
        if (f.payload.size() % kEntryBytes != 0 || f.payload.size() / kEntryBytes > kSdmCapacity)
            return bad("WRITE_SDM payload must be at most 4096 whole 16-byte entries");
        if (busy(board_.status(ch)))
            return reply(f, Status::BusyRunning, now);
        board_.sdm(ch).assign(unpack_entries(f.payload));
        const auto report = board_.validate(ch);
        return reply(f, report.ok() ? Status::Ok : Status::ValidationFailed, now, proto::encode_report(report));
    }
    case Opcode::ReadWdm: {
        if (!exact(8))
            return bad("READ_WDM payload is u32 offset, u32 words");
        const auto offset = in.u32();
        const auto words = in.u32();
        return reply(f, Status::Ok, now, pack_samples(board_.wdm(ch).read(offset, words)));
    }
    case Opcode::ReadSdm:
        if (!exact(0))
            return bad("READ_SDM takes no payload");
        return reply(f, Status::Ok, now, pack_entries(board_.sdm(ch).entries()));
    case Opcode::Arm: {
        if (!exact(0))
            return bad("ARM takes no payload");
        if (board_.status(ch) == ChannelStatus::Running)
            return reply(f, Status::BusyRunning, now);
        if (board_.sdm(ch).empty())
            return reply(f, Status::NoProgram, now);
        const auto report = board_.validate(ch);
        if (!report.ok())
            return reply(f, Status::ValidationFailed, now, proto::encode_report(report));
        board_.arm(ch);
        return reply(f, Status::Ok, now);
    }
    case Opcode::Stop:
        if (!exact(0))
            return bad("STOP takes no payload");
        board_.stop(ch);
        return reply(f, Status::Ok, now);
    case Opcode::SoftTrig:
        if (!exact(0))
            return bad("SOFT_TRIG takes no payload");
        return reply(f, Status::Ok, board_.soft_trigger(ch));
    case Opcode::RegWrite: {
        if (!exact(8))
            return bad("REG_WRITE payload is u32 address, u32 value");
        const auto addr = in.u32();
        const auto value = in.u32();
        board_.registers().write(addr, value);
        return reply(f, Status::Ok, now);
    }
    case Opcode::RegRead: {
        if (!exact(4))
            return bad("REG_READ payload is u32 address");
        le::Writer w;
        w.u32(board_.registers().read(in.u32()));
        return reply(f, Status::Ok, now, w.take());
    }
    case Opcode::StatusQuery:
        if (!exact(0))
            return bad("STATUS_QUERY takes no payload");
        return reply(f, Status::Ok, now, proto::encode_status(board_.status_packet()));
    case Opcode::Advance: {
        if (!exact(8))
            return bad("ADVANCE payload is u64 cycles");
        const auto n = in.u64();
        if (n > options_.max_advance_cycles)
            return bad("ADVANCE of " + std::to_string(n) + " cycles exceeds the per-command limit");
        board_.advance(n);
        return reply(f, Status::Ok, board_.cycle());
    }
    case Opcode::ExtTrigger: {
        if (!exact(8))
            return bad("EXT_TRIGGER payload is f64 event time");
        const double t = in.f64();
        if (!std::isfinite(t) || t < 0)
            return bad("event time must be finite and non-negative");
        const auto arrivals = board_.external_trigger(t);
        le::Writer w;
        for (auto a : arrivals)
            w.u64(a);
        return reply(f, Status::Ok, now, w.take());
    }
    case Opcode::Probe: {
        if (!exact(17))
            return bad("PROBE payload is u8 tap, u64 start, u32 count, u32 stride");
        const auto tap = in.u8();
        const auto start = in.u64();
        const auto count = in.u32();
        const auto stride = in.u32();
        if (tap > static_cast<std::uint8_t>(ProbeTap::Jittered))
            return bad("unknown probe tap");
        if (count > kMaxProbeCount)
            return bad("probe count too large");
        const auto v = board_.probe(ch, static_cast<ProbeTap>(tap), start, count, stride);
        le::Writer w;
        w.reserve(v.size() * 8);
        for (double x : v)
            w.f64(x);
        return reply(f, Status::Ok, now, w.take());
    }
    case Opcode::Capture: {
        if (!exact(12))
            return bad("CAPTURE payload is u64 start word, u32 words");
        const auto start = in.u64();
        const auto count = in.u32();
        const auto& rec = board_.recording(ch);
        if (count > kMaxCaptureWords || start < rec.first_word || start + count > rec.end_word())
            return bad("capture range is outside the record");
        const auto off = static_cast<std::size_t>(start - rec.first_word);
        le::Writer w;
        w.reserve(count * (2 * kSamplesPerWord + 1));
        w.bytes(pack_samples(std::span<const SampleCode>(rec.samples).subspan(off * kSamplesPerWord,
                                                                              count * kSamplesPerWord)));
        w.bytes(std::span<const std::uint8_t>(rec.valid).subspan(off, count));
        return reply(f, Status::Ok, now, w.take());
    }
    case Opcode::Edges: {
        if (!exact(2))
            return bad("EDGES payload is i16 threshold");
        const auto e = board_.edges(ch, in.i16());
        if (e.size() * 16 + 4 + 9 > proto::kMaxPayload)
            return bad("too many edges; discard part of the record first");
        le::Writer w;
        w.u32(static_cast<std::uint32_t>(e.size()));
        for (const auto& x : e) {
            w.u64(x.sample);
            w.f64(x.time_s);
        }
        return reply(f, Status::Ok, now, w.take());
    }
    case Opcode::Events: {
        if (!exact(0))
            return bad("EVENTS takes no payload");
        auto bytes = encode_events(board_.events(ch));
        if (bytes.size() + 9 > proto::kMaxPayload)
            return bad("event log too large");
        return reply(f, Status::Ok, now, std::move(bytes));
    }
    case Opcode::Discard:
        if (!exact(8))
            return bad("DISCARD payload is u64 word");
        board_.discard(ch, in.u64());
        return reply(f, Status::Ok, now);
    }
    return reply(f, Status::BadOpcode, now);
}

std::vector<std::uint8_t> Session::feed(std::span<const std::uint8_t> bytes)
{
    buffer_.insert(buffer_.end(), bytes.begin(), bytes.end());
    std::vector<std::uint8_t> out;
    std::size_t pos = 0;
    while (pos < buffer_.size()) {
        auto r = proto::parse_frame(std::span<const std::uint8_t>(buffer_).subspan(pos));
        if (r.status == proto::ParseStatus::Truncated)
            break;
        pos += r.consumed;
        if (r.status == proto::ParseStatus::BadMagic)
            continue;
        std::uint8_t channel = 0;
        Response resp;
        if (r.status == proto::ParseStatus::BadCrc) {
            resp = Response{proto::kErrorOpcode, Status::BadFrame, 0, text("CRC mismatch")};
        } else {
            channel = r.frame.channel;
            resp = server_.handle(r.frame);
        }
        const auto bytes_out = proto::serialize_frame(proto::make_response_frame(resp, channel));
        out.insert(out.end(), bytes_out.begin(), bytes_out.end());
    }
    buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(pos));
    return out;
}

} // namespace awg
