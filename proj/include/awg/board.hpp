#pragma once

// One simulated AWG board: four channels sharing a word clock, their
// memories, sequencers, analog front ends and configuration registers.
// Output is recorded from ARM so that bench probes can read it back.

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <vector>

#include "awg/frontend.hpp"
#include "awg/memory.hpp"
#include "awg/protocol.hpp"
#include "awg/sequencer.hpp"
#include "awg/sync.hpp"

namespace awg {

enum class ProbeTap : std::uint8_t {
    Code = 0,        // raw DAC code
    DacVolts = 1,    // DAC output before the reconstruction filter
    Filtered = 2,    // low-passed differential output, as a meter sees it
    Jittered = 3,    // DAC output resampled with the channel's timing error
};

inline constexpr std::size_t kDefaultRecordCapWords = std::size_t{1} << 21;

struct BoardConfig {
    BoardDescriptor descriptor{};
    double v_fullscale = 0.5;
    std::size_t record_cap_words = kDefaultRecordCapWords;
};

/// Output words of one channel since its last ARM. Older words may have
/// been discarded; `first_word` is the index of the oldest one kept.
struct Recording {
    std::uint64_t arm_cycle = 0;
    std::uint64_t first_word = 0;
    std::vector<SampleCode> samples;
    std::vector<std::uint8_t> valid;

    std::uint64_t end_word() const { return first_word + valid.size(); }
};

struct EdgeSample {
    std::uint64_t sample = 0; // index since ARM
    double time_s = 0;        // on the board clock, with latency, skew and jitter
};

class Board {
public:
    explicit Board(BoardConfig config = {});

    std::uint16_t board_id() const;
    std::uint64_t cycle() const { return cycle_; }
    double time_s() const { return double(cycle_) * kCyclePeriodS; }

    WaveformMemory& wdm(std::size_t ch) { return chan(ch).wdm; }
    const WaveformMemory& wdm(std::size_t ch) const { return chan(ch).wdm; }
    SequenceMemory& sdm(std::size_t ch) { return chan(ch).sdm; }
    const SequenceMemory& sdm(std::size_t ch) const { return chan(ch).sdm; }
    const ChannelSequencer& sequencer(std::size_t ch) const { return chan(ch).seq; }
    ChannelStatus status(std::size_t ch) const { return chan(ch).seq.status(); }
    ValidationReport validate(std::size_t ch) const;

    void set_transfer(std::size_t ch, DacTransfer t) { chan(ch).transfer = std::move(t); }
    const DacTransfer& transfer(std::size_t ch) const { return chan(ch).transfer; }
    /// Timing of a channel with the current D_PIPE register applied.
    TimingModel timing(std::size_t ch) const;

    proto::RegisterMap& registers() { return regs_; }
    const proto::RegisterMap& registers() const { return regs_; }

    /// Throws NoProgram or InvariantViolation (program fails validation).
    void arm(std::size_t ch);
    void stop(std::size_t ch);
    /// Software trigger applied at the current cycle; returns that cycle.
    std::uint64_t soft_trigger(std::size_t ch);
    /// Global trigger event at `event_time_s` on the board clock. Returns the
    /// quantised arrival cycle per channel. Throws OutOfRange if an arrival
    /// would fall before the current cycle.
    std::array<std::uint64_t, kChannelsPerBoard> external_trigger(double event_time_s);

    void advance(std::uint64_t cycles);

    proto::StatusPacket status_packet() const;
    /// Called with a snapshot every STATUS_PERIOD cycles while enabled.
    void set_status_sink(std::function<void(const proto::StatusPacket&)> sink) { status_sink_ = std::move(sink); }

    const EventLog& events(std::size_t ch) const { return chan(ch).events; }
    const Recording& recording(std::size_t ch) const { return chan(ch).rec; }
    /// Drops recorded words before `word`.
    void discard(std::size_t ch, std::uint64_t word);

    /// Samples `start + i * stride` (indices since ARM). Jittered needs
    /// stride 1 and a power-of-two count. Throws OutOfRange or WrongLength.
    std::vector<double> probe(std::size_t ch, ProbeTap tap, std::uint64_t start, std::uint32_t count,
                              std::uint32_t stride) const;

    /// Rising crossings of `threshold` in the retained record.
    std::vector<EdgeSample> edges(std::size_t ch, SampleCode threshold) const;

private:
    struct Channel {
        WaveformMemory wdm;
        SequenceMemory sdm;
        ChannelSequencer seq;
        DacTransfer transfer;
        EventLog events;
        Recording rec;
        bool recording = false;
        std::map<std::uint64_t, std::uint8_t> pending; // cycle -> trigger source mask
    };

    Channel& chan(std::size_t ch);
    const Channel& chan(std::size_t ch) const;
    void trim(Channel& c);
    double sample_volts(const Channel& c, std::uint64_t sample) const;

    BoardConfig config_;
    proto::RegisterMap regs_;
    std::array<Channel, kChannelsPerBoard> channels_;
    std::uint64_t cycle_ = 0;
    Eigen::VectorXd taps_;
    std::function<void(const proto::StatusPacket&)> status_sink_;
};

} // namespace awg
