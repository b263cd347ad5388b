#pragma once

// Command handling for one board. Every frame gets exactly one response;
// a command either applies completely or not at all.

#include <cstdint>
#include <mutex>
#include <span>
#include <vector>

#include "awg/board.hpp"
#include "awg/protocol.hpp"

namespace awg {

struct ServerOptions {
    /// Accept the simulation-only bench opcodes (0x10..0x16).
    bool bench_opcodes = true;
    std::uint64_t max_advance_cycles = std::uint64_t{1} << 24;
};

class BoardServer {
public:
    explicit BoardServer(BoardConfig config = {}, ServerOptions options = {});

    /// Serialised by an internal mutex; safe to call from many connections.
    proto::Response handle(const proto::Frame& frame);

    /// Direct access for in-process tests; takes no lock.
    Board& board() { return board_; }
    const ServerOptions& options() const { return options_; }

    void set_status_sink(std::function<void(const proto::StatusPacket&)> sink);

private:
    proto::Response dispatch(const proto::Frame& frame);

    std::mutex mutex_;
    Board board_;
    ServerOptions options_;
};

/// Byte-stream adapter for one connection: buffers partial input, answers
/// every complete frame, resynchronises past garbage.
class Session {
public:
    explicit Session(BoardServer& server) : server_(server) {}

    /// Returns the serialised responses to every frame completed by `bytes`.
    std::vector<std::uint8_t> feed(std::span<const std::uint8_t> bytes);

    std::size_t buffered() const { return buffer_.size(); }

private:
    BoardServer& server_;
    std::vector<std::uint8_t> buffer_;
};

} // namespace awg
