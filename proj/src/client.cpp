#include "awg/client.hpp"

#include <algorithm>

#include "awg/bytes.hpp"
#include "awg/error.hpp"

namespace awg {

using proto::Opcode;
using proto::Response;
using proto::Status;

namespace {

constexpr std::uint64_t kAdvanceChunk = std::uint64_t{1} << 24;
constexpr std::uint32_t kProbeChunk = 1u << 19;
constexpr std::uint32_t kCaptureChunk = 1u << 18;
// keeps each WRITE_WDM frame well under the payload limit
constexpr std::size_t kWriteChunkWords = std::size_t{1} << 16;

std::string message_of(const Response& r)
{
    if (r.status == Status::ValidationFailed) {
        try {
            return proto::decode_report(r.data).describe();
        } catch (const Error&) {
        }
    }
    return std::string(r.data.begin(), r.data.end());
}

void expect_size(const Response& r, std::size_t n, const char* what)
{
    if (r.data.size() != n)
        throw Error(Errc::ProtocolError, std::string(what) + " response has " + std::to_string(r.data.size()) +
                                             " bytes, expected " + std::to_string(n));
}

} // namespace

RemoteError::RemoteError(Opcode op, Status status, std::string detail)
    : Error(Errc::RemoteError, std::string(proto::to_string(op)) + " -> " + proto::to_string(status) +
                                   (detail.empty() ? "" : " (" + detail + ")")),
      status_(status), detail_(std::move(detail))
{
}

AwgClient::AwgClient(std::unique_ptr<Transport> transport) : transport_(std::move(transport)) {}

Response AwgClient::read_response()
{
    std::uint8_t buf[1 << 16];
    for (;;) {
        auto r = proto::parse_frame(rx_);
        if (r.status == proto::ParseStatus::Ok) {
            rx_.erase(rx_.begin(), rx_.begin() + static_cast<std::ptrdiff_t>(r.consumed));
            auto resp = proto::decode_response(r.frame);
            last_cycle_ = resp.cycle;
            return resp;
        }
        if (r.status != proto::ParseStatus::Truncated)
            throw Error(Errc::ProtocolError, std::string("corrupt response stream: ") + proto::to_string(r.status));
        const auto n = transport_->receive(buf);
        if (n == 0)
            throw Error(Errc::ConnectionError, "connection closed by board");
        rx_.insert(rx_.end(), buf, buf + n);
    }
}

Response AwgClient::call(Opcode op, std::uint8_t channel, std::vector<std::uint8_t> payload)
{
    const proto::Frame f{static_cast<std::uint8_t>(op), channel, std::move(payload)};
    transport_->send(proto::serialize_frame(f));
    auto r = read_response();
    if (r.request_opcode != f.opcode)
        throw Error(Errc::ProtocolError, "response to opcode " + std::to_string(r.request_opcode) +
                                             " while waiting for " + proto::to_string(op));
    return r;
}

std::vector<Response> AwgClient::pipeline(std::span<const proto::Frame> frames)
{
    std::vector<std::uint8_t> out;
    for (const auto& f : frames) {
        const auto bytes = proto::serialize_frame(f);
        out.insert(out.end(), bytes.begin(), bytes.end());
    }
    transport_->send(out);
    std::vector<Response> responses;
    responses.reserve(frames.size());
    for (std::size_t i = 0; i < frames.size(); ++i)
        responses.push_back(read_response());
    return responses;
}

Response AwgClient::checked(Opcode op, std::uint8_t ch, std::vector<std::uint8_t> payload)
{
    auto r = call(op, ch, std::move(payload));
    if (r.status != Status::Ok)
        throw RemoteError(op, r.status, message_of(r));
    return r;
}

ValidationReport AwgClient::write_wdm(std::uint8_t ch, std::uint32_t word_offset, std::span<const SampleCode> samples)
{
    if (samples.size() % kSamplesPerWord != 0)
        throw Error(Errc::MisalignedLength, "WDM writes are whole 8-sample words");
    ValidationReport report;
    const std::size_t words = samples.size() / kSamplesPerWord;
    std::size_t done = 0;
    do {
        const std::size_t n = std::min(kWriteChunkWords, words - done);
        le::Writer w;
        w.reserve(4 + n * kSamplesPerWord * 2);
        w.u32(static_cast<std::uint32_t>(word_offset + done));
        w.bytes(pack_samples(samples.subspan(done * kSamplesPerWord, n * kSamplesPerWord)));
        report = proto::decode_report(checked(Opcode::WriteWdm, ch, w.take()).data);
        done += n;
    } while (done < words);
    return report;
}

std::vector<SampleCode> AwgClient::read_wdm(std::uint8_t ch, std::uint32_t word_offset, std::uint32_t words)
{
    le::Writer w;
    w.u32(word_offset);
    w.u32(words);
    const auto r = checked(Opcode::ReadWdm, ch, w.take());
    expect_size(r, std::size_t(words) * kSamplesPerWord * 2, "READ_WDM");
    return unpack_samples(r.data);
}

ValidationReport AwgClient::write_sdm(std::uint8_t ch, std::span<const SequenceEntry> entries)
{
    auto r = call(Opcode::WriteSdm, ch, pack_entries(entries));
    if (r.status != Status::Ok && r.status != Status::ValidationFailed)
        throw RemoteError(Opcode::WriteSdm, r.status, message_of(r));
    return proto::decode_report(r.data);
}

std::vector<SequenceEntry> AwgClient::read_sdm(std::uint8_t ch)
{
    return unpack_entries(checked(Opcode::ReadSdm, ch).data);
}

std::uint64_t AwgClient::arm(std::uint8_t ch) { return checked(Opcode::Arm, ch).cycle; }

void AwgClient::stop(std::uint8_t ch) { checked(Opcode::Stop, ch); }

std::uint64_t AwgClient::soft_trigger(std::uint8_t ch) { return checked(Opcode::SoftTrig, ch).cycle; }

void AwgClient::reg_write(std::uint32_t addr, std::uint32_t value)
{
    le::Writer w;
    w.u32(addr);
    w.u32(value);
    checked(Opcode::RegWrite, 0, w.take());
}

std::uint32_t AwgClient::reg_read(std::uint32_t addr)
{
    le::Writer w;
    w.u32(addr);
    const auto r = checked(Opcode::RegRead, 0, w.take());
    expect_size(r, 4, "REG_READ");
    return le::get_u32(r.data.data());
}

proto::StatusPacket AwgClient::status()
{
    const auto r = checked(Opcode::StatusQuery, 0);
    auto p = proto::decode_status(r.data);
    if (!p)
        throw Error(Errc::ProtocolError, "malformed status packet");
    return *p;
}

std::uint64_t AwgClient::advance(std::uint64_t cycles)
{
    std::uint64_t now = last_cycle_;
    do {
        const std::uint64_t n = std::min(cycles, kAdvanceChunk);
        le::Writer w;
        w.u64(n);
        now = checked(Opcode::Advance, 0, w.take()).cycle;
        cycles -= n;
    } while (cycles > 0);
    return now;
}

std::array<std::uint64_t, kChannelsPerBoard> AwgClient::ext_trigger(double event_time_s)
{
    le::Writer w;
    w.f64(event_time_s);
    const auto r = checked(Opcode::ExtTrigger, 0, w.take());
    expect_size(r, 8 * kChannelsPerBoard, "EXT_TRIGGER");
    std::array<std::uint64_t, kChannelsPerBoard> out{};
    le::Reader in(r.data);
    for (auto& c : out)
        c = in.u64();
    return out;
}

std::vector<double> AwgClient::probe(std::uint8_t ch, ProbeTap tap, std::uint64_t start, std::uint32_t count,
                                     std::uint32_t stride)
{
    // the jittered tap resamples the whole block at once, so it is never split
    const std::uint32_t chunk = tap == ProbeTap::Jittered ? std::max(count, 1u) : kProbeChunk;
    std::vector<double> out;
    out.reserve(count);
    std::uint32_t done = 0;
    while (done < count) {
        const std::uint32_t n = std::min(chunk, count - done);
        le::Writer w;
        w.u8(static_cast<std::uint8_t>(tap));
        w.u64(start + std::uint64_t(done) * stride);
        w.u32(n);
        w.u32(stride);
        const auto r = checked(Opcode::Probe, ch, w.take());
        expect_size(r, std::size_t(n) * 8, "PROBE");
        le::Reader in(r.data);
        for (std::uint32_t i = 0; i < n; ++i)
            out.push_back(in.f64());
        done += n;
    }
    return out;
}

AwgClient::Capture AwgClient::capture(std::uint8_t ch, std::uint64_t start_word, std::uint32_t words)
{
    Capture c;
    c.samples.reserve(std::size_t(words) * kSamplesPerWord);
    c.valid.reserve(words);
    std::uint32_t done = 0;
    while (done < words) {
        const std::uint32_t n = std::min(kCaptureChunk, words - done);
        le::Writer w;
        w.u64(start_word + done);
        w.u32(n);
        const auto r = checked(Opcode::Capture, ch, w.take());
        const std::size_t sample_bytes = std::size_t(n) * kSamplesPerWord * 2;
        expect_size(r, sample_bytes + n, "CAPTURE");
        const auto s = unpack_samples(std::span<const std::uint8_t>(r.data).first(sample_bytes));
        c.samples.insert(c.samples.end(), s.begin(), s.end());
        c.valid.insert(c.valid.end(), r.data.begin() + static_cast<std::ptrdiff_t>(sample_bytes), r.data.end());
        done += n;
    }
    return c;
}

std::vector<EdgeSample> AwgClient::edges(std::uint8_t ch, SampleCode threshold)
{
    le::Writer w;
    w.i16(threshold);
    const auto r = checked(Opcode::Edges, ch, w.take());
    le::Reader in(r.data);
    const auto n = in.u32();
    expect_size(r, 4 + std::size_t(n) * 16, "EDGES");
    std::vector<EdgeSample> out(n);
    for (auto& e : out) {
        e.sample = in.u64();
        e.time_s = in.f64();
    }
    return out;
}

EventLog AwgClient::events(std::uint8_t ch) { return decode_events(checked(Opcode::Events, ch).data); }

void AwgClient::discard(std::uint8_t ch, std::uint64_t word)
{
    le::Writer w;
    w.u64(word);
    checked(Opcode::Discard, ch, w.take());
}

} // namespace awg
