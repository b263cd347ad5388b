#include "awg/event_log.hpp"

#include <ostream>
#include <sstream>

#include "awg/bytes.hpp"
#include "awg/error.hpp"

namespace awg {

const char* to_string(EventKind kind) noexcept
{
    switch (kind) {
    case EventKind::Start: return "START";
    case EventKind::SegmentSwitch: return "SEGMENT_SWITCH";
    case EventKind::RepeatWrap: return "REPEAT_WRAP";
    case EventKind::TriggerSeen: return "TRIGGER_SEEN";
    case EventKind::Done: return "DONE";
    case EventKind::Fault: return "FAULT";
    }
    return "UNKNOWN";
}

void write_events_csv(std::ostream& os, std::span<const Event> events)
{
    os << "cycle,channel,event,entry_index\n";
    for (const auto& e : events)
        os << e.cycle << ',' << unsigned(e.channel) << ',' << to_string(e.kind) << ',' << e.entry_index << '\n';
}

std::string events_csv(std::span<const Event> events)
{
    std::ostringstream os;
    write_events_csv(os, events);
    return os.str();
}

std::vector<std::uint8_t> encode_events(std::span<const Event> events)
{
    le::Writer w;
    w.reserve(events.size() * (kEventRecordBytes + 1));
    for (const auto& e : events) {
        w.u8(kEventRecordBytes);
        w.u64(e.cycle);
        w.u8(e.channel);
        w.u8(static_cast<std::uint8_t>(e.kind));
        w.u16(e.entry_index);
    }
    return w.take();
}

EventLog decode_events(std::span<const std::uint8_t> bytes)
{
    EventLog out;
    le::Reader r(bytes);
    while (!r.at_end()) {
        if (r.u8() != kEventRecordBytes)
            throw Error(Errc::ProtocolError, "bad event record length");
        Event e;
        e.cycle = r.u64();
        e.channel = r.u8();
        auto kind = r.u8();
        e.entry_index = r.u16();
        if (!r.ok() || kind > static_cast<std::uint8_t>(EventKind::Fault))
            throw Error(Errc::ProtocolError, "truncated or invalid event record");
        e.kind = static_cast<EventKind>(kind);
        out.push_back(e);
    }
    return out;
}

} // namespace awg
