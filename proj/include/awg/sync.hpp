#pragma once

// Multi-board array: shared word clock, trigger fan-out with per-board delay
// and per-channel skew, and a lockstep runner over every channel.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "awg/frontend.hpp"
#include "awg/memory.hpp"
#include "awg/sequencer.hpp"

namespace awg {


struct BoardDescriptor {
    std::uint16_t board_id = 0;
    double fanout_delay_s = 0;
    std::array<TimingModel, kChannelsPerBoard> channels{};
};

struct BoardTopology {
    double clock_hz = kWordClockHz;
    std::uint64_t rng_seed = 0;
    std::vector<BoardDescriptor> boards;

    std::size_t channel_count() const { return boards.size() * kChannelsPerBoard; }
    const TimingModel& channel(std::size_t global) const
    {
        return boards.at(global / kChannelsPerBoard).channels[global % kChannelsPerBoard];
    }
    TimingModel& channel(std::size_t global)
    {
        return boards.at(global / kChannelsPerBoard).channels[global % kChannelsPerBoard];
    }
};

/// `boards` boards with zero delays, zero skew and the given jitter; seeds
/// derived from `rng_seed`.
BoardTopology uniform_topology(std::size_t boards, double jitter_sigma_s = 0.0, std::uint64_t rng_seed = 0,
                               std::uint32_t d_pipe_cycles = 16);

/// Rederives every channel's jitter seed from `rng_seed`.
void reseed(BoardTopology& topo, std::uint64_t rng_seed);

/// Key-value text; see docs/topology.md. Throws ConfigError.
BoardTopology parse_topology(std::string_view text);
BoardTopology load_topology(const std::string& path);
std::string format_topology(const BoardTopology& topo);

/// First cycle boundary at or after `t`; never earlier than `t`.
std::uint64_t quantize_to_cycle(double t_s, double clock_hz = kWordClockHz);

struct TriggerArrival {
    double time_s = 0;         // event + fan-out + skew
    std::uint64_t cycle = 0;   // quantised for the FSM
    double quantization_s = 0; // cycle time minus time_s, >= 0
};

/// One arrival per channel, in global channel order (board-major).
std::vector<TriggerArrival> distribute_trigger(double event_time_s, const BoardTopology& topo);

struct ChannelProgram {
    SequenceMemory sdm;
    WaveformMemory wdm;
    SequencerConfig config{};
};

struct TimedStream {
    std::size_t channel = 0;
    RunResult run;
    TimingModel timing;
    std::vector<TriggerArrival> arrivals;

    /// Output time of sample k; the stream starts at cycle 0.
    double sample_time(std::uint64_t k) const { return timing.sample_time(0.0, k, k); }
};

/// Sample indices k with samples[k-1] < threshold <= samples[k].
std::vector<std::uint64_t> rising_edge_indices(std::span<const SampleCode> samples, SampleCode threshold);

/// Runs every channel for `n_cycles` from cycle 0 with the external trigger
/// arrivals of `event_times_s`. Results do not depend on `threads`.
/// Throws InvariantViolation naming the channel if a program is not valid.
std::vector<TimedStream> run_array(const BoardTopology& topo, std::span<const ChannelProgram> programs,
                                   std::span<const double> event_times_s, std::uint64_t n_cycles,
                                   unsigned threads = 1);

} // namespace awg
