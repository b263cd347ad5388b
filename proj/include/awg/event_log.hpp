#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace awg {

enum class EventKind : std::uint8_t {
    Start = 0,
    SegmentSwitch = 1,
    RepeatWrap = 2,
    TriggerSeen = 3,
    Done = 4,
    Fault = 5,
};

const char* to_string(EventKind kind) noexcept;

/// A sequencer transition, stamped with the cycle at which it takes effect.
struct Event {
    std::uint64_t cycle = 0;
    std::uint8_t channel = 0;
    EventKind kind = EventKind::Start;
    std::uint16_t entry_index = 0;

    friend bool operator==(const Event&, const Event&) = default;
};

using EventLog = std::vector<Event>;

/// "cycle,channel,event,entry_index" with a header line.
void write_events_csv(std::ostream& os, std::span<const Event> events);
std::string events_csv(std::span<const Event> events);

// Binary records: u8 length (=12) then u64 cycle, u8 channel, u8 event,
// u16 entry_index, all little-endian.
inline constexpr std::uint8_t kEventRecordBytes = 12;

std::vector<std::uint8_t> encode_events(std::span<const Event> events);
/// Throws ProtocolError on a malformed record stream.
EventLog decode_events(std::span<const std::uint8_t> bytes);

} // namespace awg
