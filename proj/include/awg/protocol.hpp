#pragma once

// Host wire format. Command frames:
//   "AWG1" | opcode u8 | channel u8 | payload_len u32 | payload | crc32 u32
// crc32 (zlib polynomial) covers every byte before it. Responses use the
// same framing with opcode | 0x80 and a payload of
//   status u8 | cycle u64 | data.
// All integers are little-endian. docs/wire.md has the payload layouts.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "awg/memory.hpp"
#include "awg/sequencer.hpp"

namespace awg::proto {

inline constexpr std::array<std::uint8_t, 4> kFrameMagic{'A', 'W', 'G', '1'};
inline constexpr std::array<std::uint8_t, 4> kStatusMagic{'A', 'W', 'G', 'S'};
inline constexpr std::size_t kHeaderBytes = 10;
inline constexpr std::size_t kFrameOverhead = kHeaderBytes + 4;
/// Larger payload lengths are treated as a corrupt header.
inline constexpr std::uint32_t kMaxPayload = 8u << 20;

inline constexpr std::uint16_t kDefaultCommandPort = 5025;
inline constexpr std::uint16_t kDefaultStatusPort = 5026;

enum class Opcode : std::uint8_t {
    WriteWdm = 0x01,
    WriteSdm = 0x02,
    ReadWdm = 0x03,
    ReadSdm = 0x04,
    Arm = 0x05,
    Stop = 0x06,
    SoftTrig = 0x07,
    RegWrite = 0x08,
    RegRead = 0x09,
    StatusQuery = 0x0A,
    // bench opcodes, simulation only
    Advance = 0x10,
    ExtTrigger = 0x11,
    Probe = 0x12,
    Capture = 0x13,
    Edges = 0x14,
    Events = 0x15,
    Discard = 0x16,
};

inline constexpr std::uint8_t kResponseBit = 0x80;
/// Response opcode for frames that failed their CRC.
inline constexpr std::uint8_t kErrorOpcode = 0xFF;

const char* to_string(Opcode op) noexcept;
bool is_standard_opcode(std::uint8_t op) noexcept;
bool is_bench_opcode(std::uint8_t op) noexcept;

struct Frame {
    std::uint8_t opcode = 0;
    std::uint8_t channel = 0;
    std::vector<std::uint8_t> payload;

    friend bool operator==(const Frame&, const Frame&) = default;
};

std::uint32_t crc32(std::span<const std::uint8_t> bytes) noexcept;

/// Throws ProtocolError if the payload exceeds kMaxPayload.
std::vector<std::uint8_t> serialize_frame(const Frame& frame);

enum class ParseStatus : std::uint8_t { Ok, BadMagic, BadCrc, Truncated };

const char* to_string(ParseStatus s) noexcept;

struct ParseResult {
    ParseStatus status = ParseStatus::Truncated;
    /// Bytes to drop from the front of the buffer: the frame for Ok and
    /// BadCrc, one byte for BadMagic (resynchronise), none for Truncated.
    std::size_t consumed = 0;
    Frame frame;
};

/// Total over arbitrary input; never reads past `bytes`.
ParseResult parse_frame(std::span<const std::uint8_t> bytes);

enum class Status : std::uint8_t {
    Ok = 0,
    BadChannel = 1,
    BusyRunning = 2,
    ValidationFailed = 3,
    BadOpcode = 4,
    BadPayload = 5,
    BadFrame = 6,
    NoProgram = 7,
};

const char* to_string(Status s) noexcept;

struct Response {
    std::uint8_t request_opcode = 0;
    Status status = Status::Ok;
    std::uint64_t cycle = 0;
    std::vector<std::uint8_t> data;

    friend bool operator==(const Response&, const Response&) = default;
};

Frame make_response_frame(const Response& r, std::uint8_t channel);
/// Throws ProtocolError unless `f` is a well-formed response frame.
Response decode_response(const Frame& f);

/// u16 count, then count x (u16 entry index, u8 rule).
std::vector<std::uint8_t> encode_report(const ValidationReport& report);
ValidationReport decode_report(std::span<const std::uint8_t> bytes);

struct ChannelStatusRecord {
    ChannelStatus status = ChannelStatus::Idle;
    std::uint16_t current_index = 0;
    std::uint64_t executed_words = 0;

    friend bool operator==(const ChannelStatusRecord&, const ChannelStatusRecord&) = default;
};

struct StatusPacket {
    std::uint16_t board_id = 0;
    std::uint64_t uptime_cycles = 0;
    std::array<ChannelStatusRecord, kChannelsPerBoard> channels{};
    std::uint32_t firmware_version = 0;

    friend bool operator==(const StatusPacket&, const StatusPacket&) = default;
};

inline constexpr std::size_t kStatusPacketBytes = 4 + 2 + 8 + kChannelsPerBoard * 11 + 4;

std::vector<std::uint8_t> encode_status(const StatusPacket& p);
/// nullopt for anything that is not a well-formed status packet.
std::optional<StatusPacket> decode_status(std::span<const std::uint8_t> bytes);

namespace reg {
inline constexpr std::uint32_t BoardId = 0x00;
inline constexpr std::uint32_t FwVersion = 0x04; // read-only
inline constexpr std::uint32_t DPipe = 0x08;
inline constexpr std::uint32_t StatusPeriod = 0x0C;
inline constexpr std::uint32_t TimerPeriod = 0x10;
inline constexpr std::uint32_t TriggerDefault0 = 0x20; // + 4 * channel
inline constexpr std::uint32_t RunControl = 0x30;

inline constexpr std::uint32_t kRunTimerEnable = 1u << 0;
inline constexpr std::uint32_t kRunStatusEnable = 1u << 1;

inline constexpr std::uint32_t kFirmwareVersion = 0x00010200;
inline constexpr std::uint32_t kDefaultDPipe = 16;
inline constexpr std::uint32_t kDefaultStatusPeriod = 250'000'000; // 1 s of word clock
} // namespace reg

/// 32-bit configuration registers. Reserved addresses read 0 and ignore
/// writes; FW_VERSION ignores writes.
class RegisterMap {
public:
    RegisterMap();

    std::uint32_t read(std::uint32_t addr) const;
    /// Returns false when the write was ignored.
    bool write(std::uint32_t addr, std::uint32_t value);

    TriggerSource default_trigger(std::size_t channel) const;

private:
    static int slot(std::uint32_t addr) noexcept;

    std::array<std::uint32_t, 10> regs_{};
};

} // namespace awg::proto
