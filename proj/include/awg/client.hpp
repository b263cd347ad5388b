#pragma once

// Host-side client for one board. Speaks only the wire protocol, over any
// Transport. Calls are synchronous; pipeline() sends a batch first and then
// collects the responses in order.

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "awg/board.hpp"
#include "awg/error.hpp"
#include "awg/event_log.hpp"
#include "awg/protocol.hpp"
#include "awg/transport.hpp"

namespace awg {

/// A non-Ok response from the board.
class RemoteError : public Error {
public:
    RemoteError(proto::Opcode op, proto::Status status, std::string detail);

    proto::Status status() const noexcept { return status_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    proto::Status status_;
    std::string detail_;
};

class AwgClient {
public:
    explicit AwgClient(std::unique_ptr<Transport> transport);

    /// One request, one response; status is not checked. Throws
    /// ConnectionError if the peer closes, ProtocolError on a bad response.
    proto::Response call(proto::Opcode op, std::uint8_t channel, std::vector<std::uint8_t> payload = {});
    /// Sends every frame, then reads exactly one response per frame.
    std::vector<proto::Response> pipeline(std::span<const proto::Frame> frames);

    // Each of these throws RemoteError on a non-Ok status.
    ValidationReport write_wdm(std::uint8_t ch, std::uint32_t word_offset, std::span<const SampleCode> samples);
    std::vector<SampleCode> read_wdm(std::uint8_t ch, std::uint32_t word_offset, std::uint32_t words);
    /// Returns the board's validation report; ValidationFailed is not an error here.
    ValidationReport write_sdm(std::uint8_t ch, std::span<const SequenceEntry> entries);
    std::vector<SequenceEntry> read_sdm(std::uint8_t ch);
    /// Returns the cycle at which the channel was armed.
    std::uint64_t arm(std::uint8_t ch);
    void stop(std::uint8_t ch);
    /// Returns the cycle the trigger is stamped with.
    std::uint64_t soft_trigger(std::uint8_t ch);
    void reg_write(std::uint32_t addr, std::uint32_t value);
    std::uint32_t reg_read(std::uint32_t addr);
    proto::StatusPacket status();

    // bench opcodes
    /// Any number of cycles; split into commands the server accepts. Returns the new cycle.
    std::uint64_t advance(std::uint64_t cycles);
    std::array<std::uint64_t, kChannelsPerBoard> ext_trigger(double event_time_s);
    std::vector<double> probe(std::uint8_t ch, ProbeTap tap, std::uint64_t start, std::uint32_t count,
                              std::uint32_t stride = 1);
    struct Capture {
        std::vector<SampleCode> samples;
        std::vector<std::uint8_t> valid;
    };
    Capture capture(std::uint8_t ch, std::uint64_t start_word, std::uint32_t words);
    std::vector<EdgeSample> edges(std::uint8_t ch, SampleCode threshold);
    EventLog events(std::uint8_t ch);
    void discard(std::uint8_t ch, std::uint64_t word);

    std::uint64_t last_cycle() const { return last_cycle_; }

private:
    proto::Response read_response();
    proto::Response checked(proto::Opcode op, std::uint8_t ch, std::vector<std::uint8_t> payload = {});

    std::unique_ptr<Transport> transport_;
    std::vector<std::uint8_t> rx_;
    std::uint64_t last_cycle_ = 0;
};

} // namespace awg
