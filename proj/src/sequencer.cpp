#include "awg/sequencer.hpp"

#include <algorithm>

#include "awg/error.hpp"

namespace awg {

const char* to_string(ChannelStatus s) noexcept
{
    switch (s) {
    case ChannelStatus::Idle: return "IDLE";
    case ChannelStatus::ArmedWaitingTrigger: return "ARMED_WAITING_TRIGGER";
    case ChannelStatus::Running: return "RUNNING";
    case ChannelStatus::Done: return "DONE";
    case ChannelStatus::Fault: return "FAULT";
    }
    return "UNKNOWN";
}

const char* to_string(FaultKind f) noexcept
{
    switch (f) {
    case FaultKind::None: return "NONE";
    case FaultKind::BadFetch: return "BAD_FETCH";
    case FaultKind::IllegalDescriptor: return "ILLEGAL_DESCRIPTOR";
    case FaultKind::WdmOutOfRange: return "WDM_OUT_OF_RANGE";
    }
    return "UNKNOWN";
}

const char* to_string(RunOutcome o) noexcept
{
    switch (o) {
    case RunOutcome::Completed: return "COMPLETED";
    case RunOutcome::MaxCyclesExceeded: return "MAX_CYCLES_EXCEEDED";
    case RunOutcome::Fault: return "FAULT";
    }
    return "UNKNOWN";
}

bool CycleInputs::fired(TriggerSource source) const
{
    switch (source) {
    case TriggerSource::None: return any();
    case TriggerSource::External: return external_trigger;
    case TriggerSource::Software: return software_trigger;
    case TriggerSource::InternalTimer: return timer_fire;
    }
    return false;
}

ChannelSequencer::ChannelSequencer(std::uint8_t channel, SequencerConfig config)
    : channel_(channel), config_(config)
{
}

TriggerSource ChannelSequencer::effective_source(const SequenceEntry& e) const
{
    return e.trigger == TriggerSource::None ? config_.default_trigger : e.trigger;
}

void ChannelSequencer::log_event(EventLog* log, std::uint64_t cycle, EventKind kind, std::uint16_t index) const
{
    if (log)
        log->push_back(Event{cycle, channel_, kind, index});
}

bool ChannelSequencer::descriptor_ok(const SequenceMemory& sdm, std::size_t index) const
{
    const auto& e = sdm[index];
    if (e.length == 0)
        return false;
    if (std::uint64_t{e.start_addr} + e.length > kWdmCapacityWords)
        return false;
    if (e.jump() && e.jump_target >= sdm.size())
        return false;
    if (config_.strict_descriptors) {
        if (e.length < kMinEntryWords)
            return false;
        if (e.jump() && e.end_of_sequence())
            return false;
    }
    return true;
}

void ChannelSequencer::fault(FaultKind kind, std::uint64_t cycle, EventLog* log)
{
    state_.status = ChannelStatus::Fault;
    state_.fault = kind;
    log_event(log, cycle, EventKind::Fault, state_.current_index);
}

void ChannelSequencer::emit_idle(std::span<SampleCode, kSamplesPerWord> out) const
{
    std::fill(out.begin(), out.end(), state_.hold_value);
}

void ChannelSequencer::enter_entry(const SequenceMemory& sdm, std::size_t index, std::uint64_t effective_cycle,
                                   EventLog* log)
{
    auto& s = state_;
    s.current_index = static_cast<std::uint16_t>(index);
    if (!descriptor_ok(sdm, index)) {
        fault(FaultKind::IllegalDescriptor, effective_cycle, log);
        return;
    }
    const auto& e = sdm[index];
    s.word_ptr = 0;
    s.repeats_left = e.counter;
    s.entry_pending = true;
    s.prefetched_index.reset();
    if (e.wait_trigger()) {
        s.status = ChannelStatus::ArmedWaitingTrigger;
        s.release_cycle = s.latched_release;
    } else {
        s.status = ChannelStatus::Running;
        s.release_cycle.reset();
    }
    s.latched_release.reset();
}

void ChannelSequencer::arm(const SequenceMemory& sdm, EventLog* log)
{
    if (sdm.empty())
        throw Error(Errc::NoProgram, "channel " + std::to_string(channel_) + " has an empty sequence memory");
    auto cycle = state_.cycle;
    state_ = ChannelSequencerState{};
    state_.cycle = cycle;
    // Entry 0 is prepared while arming.
    state_.prefetch_ready_cycle = cycle;
    enter_entry(sdm, 0, cycle, log);
}

void ChannelSequencer::stop()
{
    auto cycle = state_.cycle;
    state_ = ChannelSequencerState{};
    state_.cycle = cycle;
}

bool ChannelSequencer::emit_running(const SequenceMemory& sdm, const WaveformMemory& wdm, std::uint64_t c,
                                    std::span<SampleCode, kSamplesPerWord> out, EventLog* log)
{
    auto& s = state_;
    const auto& e = sdm[s.current_index];

    if (s.entry_pending) {
        if (c < s.prefetch_ready_cycle) {
            // The entry is due but its resources are not prepared yet.
            if (!s.starving) {
                ++s.starvation_events;
                s.starving = true;
            }
            emit_idle(out);
            return false;
        }
        s.starving = false;
        s.entry_pending = false;
        log_event(log, c, s.started ? EventKind::SegmentSwitch : EventKind::Start, s.current_index);
        s.started = true;
        s.prefetched_index = successor_of(sdm, s.current_index);
        s.prefetch_resolved_cycle = c + kDescriptorFetchCycles;
        s.prefetch_ready_cycle = c + kPrefetchLatencyCycles;
    }

    const std::uint64_t addr = std::uint64_t{e.start_addr} + s.word_ptr;
    if (addr >= wdm.capacity_words()) {
        fault(FaultKind::WdmOutOfRange, c, log);
        std::fill(out.begin(), out.end(), SampleCode{0});
        return false;
    }
    auto src = wdm.word(addr);
    std::copy(src.begin(), src.end(), out.begin());
    ++s.executed_words;

    if (++s.word_ptr < e.length)
        return true;

    if (e.infinite() || s.repeats_left > 1) {
        if (!e.infinite())
            --s.repeats_left;
        s.word_ptr = 0;
        log_event(log, c + 1, EventKind::RepeatWrap, s.current_index);
        return true;
    }

    s.hold_value = e.hold_last() ? out[kSamplesPerWord - 1] : SampleCode{0};
    if (e.end_of_sequence()) {
        s.status = ChannelStatus::Done;
        log_event(log, c + 1, EventKind::Done, s.current_index);
        return true;
    }
    const auto next = s.prefetched_index.value_or(-1);
    if (next < 0 || static_cast<std::size_t>(next) >= sdm.size()) {
        fault(FaultKind::BadFetch, c + 1, log);
        return true;
    }
    enter_entry(sdm, static_cast<std::size_t>(next), c + 1, log);
    return true;
}

bool ChannelSequencer::step(const SequenceMemory& sdm, const WaveformMemory& wdm, CycleInputs in,
                            std::span<SampleCode, kSamplesPerWord> out, EventLog* log)
{
    auto& s = state_;
    const std::uint64_t c = s.cycle++;

    switch (s.status) {
    case ChannelStatus::Idle:
    case ChannelStatus::Done:
    case ChannelStatus::Fault:
        emit_idle(out);
        return false;

    case ChannelStatus::ArmedWaitingTrigger: {
        const auto& e = sdm[s.current_index];
        if (in.any())
            log_event(log, c, EventKind::TriggerSeen, s.current_index);
        if (!s.release_cycle && in.fired(effective_source(e)))
            s.release_cycle = c + kTriggerLatencyCycles;
        if (s.release_cycle && c >= *s.release_cycle) {
            s.status = ChannelStatus::Running;
            s.release_cycle.reset();
            return emit_running(sdm, wdm, c, out, log);
        }
        emit_idle(out);
        return false;
    }

    case ChannelStatus::Running: {
        if (in.any()) {
            log_event(log, c, EventKind::TriggerSeen, s.current_index);
            // An edge on the cycle of a segment boundary belongs to the
            // entry that starts there, not to the one that is ending.
            const auto& e = sdm[s.current_index];
            const bool final_word = !s.entry_pending && s.word_ptr + 1 >= e.length &&
                                    !(e.infinite() || s.repeats_left > 1) && !e.end_of_sequence();
            if (final_word && s.prefetched_index && *s.prefetched_index >= 0 &&
                static_cast<std::size_t>(*s.prefetched_index) < sdm.size()) {
                const auto& next = sdm[static_cast<std::size_t>(*s.prefetched_index)];
                if (next.wait_trigger() && in.fired(effective_source(next)))
                    s.latched_release = c + kTriggerLatencyCycles;
            }
        }
        return emit_running(sdm, wdm, c, out, log);
    }
    }
    emit_idle(out);
    return false;
}

SampleWord ChannelSequencer::step(const SequenceMemory& sdm, const WaveformMemory& wdm, CycleInputs inputs,
                                  EventLog* log)
{
    SampleWord w;
    w.valid = step(sdm, wdm, inputs, std::span<SampleCode, kSamplesPerWord>(w.samples), log);
    return w;
}

TriggerSchedule::TriggerSchedule(std::span<const TriggerEvent> events) : events_(events.begin(), events.end())
{
    std::stable_sort(events_.begin(), events_.end(),
                     [](const TriggerEvent& a, const TriggerEvent& b) { return a.cycle < b.cycle; });
}

CycleInputs TriggerSchedule::at(std::uint64_t cycle)
{
    CycleInputs in;
    while (next_ < events_.size() && events_[next_].cycle < cycle)
        ++next_;
    while (next_ < events_.size() && events_[next_].cycle == cycle) {
        switch (events_[next_].source) {
        case TriggerSource::External: in.external_trigger = true; break;
        case TriggerSource::Software: in.software_trigger = true; break;
        case TriggerSource::InternalTimer: in.timer_fire = true; break;
        case TriggerSource::None: break;
        }
        ++next_;
    }
    return in;
}

RunResult run_program(const SequenceMemory& sdm, const WaveformMemory& wdm, std::span<const TriggerEvent> triggers,
                      std::uint64_t max_cycles, SequencerConfig config, std::uint8_t channel)
{
    RunResult result;
    ChannelSequencer seq(channel, config);
    seq.arm(sdm, &result.events);
    TriggerSchedule schedule(triggers);

    auto& stream = result.stream;
    // caps are often generous horizons, so reserve at most 4 Mi words
    const std::uint64_t hint = std::min<std::uint64_t>(max_cycles, std::uint64_t{1} << 22);
    stream.samples.reserve(hint * kSamplesPerWord);
    stream.valid.reserve(hint);
    std::uint64_t c = 0;
    for (; c < max_cycles && !seq.finished(); ++c) {
        stream.samples.resize(stream.samples.size() + kSamplesPerWord);
        std::span<SampleCode, kSamplesPerWord> out(stream.samples.data() + c * kSamplesPerWord, kSamplesPerWord);
        stream.valid.push_back(seq.step(sdm, wdm, schedule.at(c), out, &result.events) ? 1 : 0);
    }
    result.cycles = c;
    result.starvation_events = seq.state().starvation_events;
    result.fault = seq.state().fault;
    switch (seq.status()) {
    case ChannelStatus::Done: result.outcome = RunOutcome::Completed; break;
    case ChannelStatus::Fault: result.outcome = RunOutcome::Fault; break;
    default: result.outcome = RunOutcome::MaxCyclesExceeded; break;
    }
    return result;
}

} // namespace awg
