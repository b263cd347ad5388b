#pragma once

// Cycle-accurate per-channel sequencer. One call to step() is one 250 MHz
// word-clock cycle and produces one 8-sample word.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "awg/event_log.hpp"
#include "awg/memory.hpp"

namespace awg {

/// Cycles from a trigger edge to the first waveform word.
inline constexpr std::uint64_t kTriggerLatencyCycles = 2;
/// Cycles from the start of an entry until its successor is ready to play.
/// The successor's descriptor is resolved one cycle after the start; the
/// remaining cycles prime the waveform read path.
inline constexpr std::uint64_t kPrefetchLatencyCycles = 4;
inline constexpr std::uint64_t kDescriptorFetchCycles = 1;

enum class ChannelStatus : std::uint8_t {
    Idle = 0,
    ArmedWaitingTrigger = 1,
    Running = 2,
    Done = 3,
    Fault = 4,
};

const char* to_string(ChannelStatus s) noexcept;

enum class FaultKind : std::uint8_t {
    None = 0,
    BadFetch = 1,          // successor index past the end of the SDM
    IllegalDescriptor = 2, // entry fails the runtime descriptor check
    WdmOutOfRange = 3,     // waveform read beyond capacity
};

const char* to_string(FaultKind f) noexcept;

struct CycleInputs {
    bool external_trigger = false;
    bool software_trigger = false;
    bool timer_fire = false;

    bool any() const { return external_trigger || software_trigger || timer_fire; }
    bool fired(TriggerSource source) const;
};

struct SampleWord {
    std::array<SampleCode, kSamplesPerWord> samples{};
    bool valid = false;

    friend bool operator==(const SampleWord&, const SampleWord&) = default;
};

struct SequencerConfig {
    /// Source waited on by WAIT_TRIGGER entries whose trigger_source is NONE.
    TriggerSource default_trigger = TriggerSource::External;
    /// Runtime descriptor check mirrors validate_program. When false only the
    /// memory-safety checks remain (zero length, range, jump target), so
    /// entries shorter than 4 words play and prefetch starvation becomes observable.
    bool strict_descriptors = true;
};

struct ChannelSequencerState {
    ChannelStatus status = ChannelStatus::Idle;
    std::uint64_t cycle = 0;          // next cycle to execute
    std::uint16_t current_index = 0;
    std::optional<std::int64_t> prefetched_index; // successor of the current entry, once resolved
    std::uint64_t prefetch_resolved_cycle = 0;
    std::uint64_t prefetch_ready_cycle = 0;
    std::uint32_t word_ptr = 0;
    std::uint32_t repeats_left = 0;   // passes remaining including the current one; unused when infinite
    bool entry_pending = false;       // current entry has not emitted its first word yet
    bool started = false;             // START already logged since arm
    std::optional<std::uint64_t> release_cycle;  // first-word cycle of a triggered entry
    std::optional<std::uint64_t> latched_release; // boundary edge latched for the next entry
    SampleCode hold_value = 0;
    std::uint64_t executed_words = 0;
    std::uint64_t starvation_events = 0;
    bool starving = false;
    FaultKind fault = FaultKind::None;
};

class ChannelSequencer {
public:
    explicit ChannelSequencer(std::uint8_t channel = 0, SequencerConfig config = {});

    std::uint8_t channel() const { return channel_; }
    const SequencerConfig& config() const { return config_; }
    void set_config(const SequencerConfig& config) { config_ = config; }
    const ChannelSequencerState& state() const { return state_; }
    ChannelStatus status() const { return state_.status; }

    /// Loads entry 0 (resources ready) and waits for its trigger if it has
    /// WAIT_TRIGGER. Throws NoProgram for an empty SDM. The cycle counter
    /// is not reset.
    void arm(const SequenceMemory& sdm, EventLog* log = nullptr);

    /// Back to IDLE with zero output.
    void stop();

    /// Sets the cycle counter; only meaningful while IDLE.
    void set_cycle(std::uint64_t cycle) { state_.cycle = cycle; }

    /// Executes one cycle and writes 8 samples to `out`. Returns the valid flag.
    bool step(const SequenceMemory& sdm, const WaveformMemory& wdm, CycleInputs inputs,
              std::span<SampleCode, kSamplesPerWord> out, EventLog* log = nullptr);

    SampleWord step(const SequenceMemory& sdm, const WaveformMemory& wdm, CycleInputs inputs,
                    EventLog* log = nullptr);

    bool finished() const
    {
        return state_.status == ChannelStatus::Done || state_.status == ChannelStatus::Fault ||
               state_.status == ChannelStatus::Idle;
    }

private:
    TriggerSource effective_source(const SequenceEntry& e) const;
    bool descriptor_ok(const SequenceMemory& sdm, std::size_t index) const;
    void enter_entry(const SequenceMemory& sdm, std::size_t index, std::uint64_t effective_cycle,
                     EventLog* log);
    bool emit_running(const SequenceMemory& sdm, const WaveformMemory& wdm, std::uint64_t cycle,
                      std::span<SampleCode, kSamplesPerWord> out, EventLog* log);
    void fault(FaultKind kind, std::uint64_t cycle, EventLog* log);
    void emit_idle(std::span<SampleCode, kSamplesPerWord> out) const;
    void log_event(EventLog* log, std::uint64_t cycle, EventKind kind, std::uint16_t index) const;

    std::uint8_t channel_;
    SequencerConfig config_;
    ChannelSequencerState state_;
};

struct TriggerEvent {
    std::uint64_t cycle = 0;
    TriggerSource source = TriggerSource::External;

    friend bool operator==(const TriggerEvent&, const TriggerEvent&) = default;
};

enum class RunOutcome : std::uint8_t {
    Completed,
    MaxCyclesExceeded,
    Fault,
};

const char* to_string(RunOutcome o) noexcept;

/// Cycle-by-cycle output of a run. Word c holds samples [8c, 8c+8).
struct SampleStream {
    std::vector<SampleCode> samples;
    std::vector<std::uint8_t> valid;

    std::size_t words() const { return valid.size(); }
    std::span<const SampleCode, kSamplesPerWord> word(std::size_t c) const
    {
        return std::span<const SampleCode, kSamplesPerWord>(samples.data() + c * kSamplesPerWord, kSamplesPerWord);
    }

    friend bool operator==(const SampleStream&, const SampleStream&) = default;
};

struct RunResult {
    SampleStream stream;
    EventLog events;
    RunOutcome outcome = RunOutcome::Completed;
    std::uint64_t cycles = 0;
    std::uint64_t starvation_events = 0;
    FaultKind fault = FaultKind::None;
};

/// Arms at cycle 0 and steps until DONE, a fault, or `max_cycles`.
/// `triggers` need not be sorted.
RunResult run_program(const SequenceMemory& sdm, const WaveformMemory& wdm,
                      std::span<const TriggerEvent> triggers, std::uint64_t max_cycles,
                      SequencerConfig config = {}, std::uint8_t channel = 0);

/// Cycle-indexed trigger inputs built from an unsorted event list.
class TriggerSchedule {
public:
    explicit TriggerSchedule(std::span<const TriggerEvent> events);
    /// Inputs for `cycle`; cycles must be queried in nondecreasing order.
    CycleInputs at(std::uint64_t cycle);

private:
    std::vector<TriggerEvent> events_;
    std::size_t next_ = 0;
};

/// Brute-force expansion of a program into its expected cycle stream:
/// segments concatenated, repeats unrolled, trigger waits filled with the
/// idle value. No FSM or prefetch modelling. Without `max_cycles`, an
/// infinite program (counter 0, a JUMP loop, or a wait for a trigger that
/// never comes) throws NonTerminating.
SampleStream flatten_oracle(const SequenceMemory& sdm, const WaveformMemory& wdm,
                            std::span<const TriggerEvent> triggers,
                            std::optional<std::uint64_t> max_cycles = std::nullopt,
                            TriggerSource default_trigger = TriggerSource::External);

} // namespace awg
