// Reference expansion of a sequence program. Deliberately written without
// any notion of FSM state, prefetch or cycle stepping: it walks the entry
// list and concatenates what each entry contributes.

#include <algorithm>
#include <set>

#include "awg/error.hpp"
#include "awg/sequencer.hpp"

namespace awg {

namespace {

bool matches(TriggerSource wanted, TriggerSource got)
{
    return wanted == TriggerSource::None || wanted == got;
}

struct Appender {
    SampleStream& out;
    std::optional<std::uint64_t> cap;

    bool full() const { return cap && out.words() >= *cap; }

    // Returns false once the cap is reached.
    bool idle(std::uint64_t words, SampleCode value)
    {
        for (std::uint64_t i = 0; i < words; ++i) {
            if (full())
                return false;
            out.samples.insert(out.samples.end(), kSamplesPerWord, value);
            out.valid.push_back(0);
        }
        return !full();
    }

    bool segment(const WaveformMemory& wdm, const SequenceEntry& e)
    {
        for (std::uint32_t w = 0; w < e.length; ++w) {
            if (full())
                return false;
            auto word = wdm.word(e.start_addr + w);
            out.samples.insert(out.samples.end(), word.begin(), word.end());
            out.valid.push_back(1);
        }
        return !full();
    }
};

} // namespace

SampleStream flatten_oracle(const SequenceMemory& sdm, const WaveformMemory& wdm,
                            std::span<const TriggerEvent> triggers, std::optional<std::uint64_t> max_cycles,
                            TriggerSource default_trigger)
{
    if (sdm.empty())
        throw Error(Errc::NoProgram, "empty program");

    std::vector<TriggerEvent> edges(triggers.begin(), triggers.end());
    std::stable_sort(edges.begin(), edges.end(),
                     [](const TriggerEvent& a, const TriggerEvent& b) { return a.cycle < b.cycle; });

    SampleStream out;
    Appender put{out, max_cycles};
    std::set<std::size_t> visited;
    std::size_t index = 0;
    SampleCode idle_value = 0;
    // Edges before this cycle can no longer start anything.
    std::uint64_t first_usable_edge = 0;

    while (true) {
        if (index >= sdm.size())
            throw Error(Errc::InvariantViolation, "program runs past its last entry");
        if (!max_cycles && !visited.insert(index).second)
            throw Error(Errc::NonTerminating, "JUMP loop without a cycle cap");
        const auto& e = sdm[index];
        if (e.length == 0 || std::uint64_t{e.start_addr} + e.length > wdm.capacity_words())
            throw Error(Errc::InvariantViolation, "entry " + std::to_string(index) + " is not playable");

        if (e.wait_trigger()) {
            const auto wanted = e.trigger == TriggerSource::None ? default_trigger : e.trigger;
            auto it = std::find_if(edges.begin(), edges.end(), [&](const TriggerEvent& t) {
                return t.cycle >= first_usable_edge && matches(wanted, t.source);
            });
            const std::uint64_t now = out.words();
            if (it == edges.end()) {
                if (!max_cycles)
                    throw Error(Errc::NonTerminating, "waits for a trigger that never arrives");
                put.idle(*max_cycles - std::min(*max_cycles, now), idle_value);
                return out;
            }
            const std::uint64_t release = it->cycle + kTriggerLatencyCycles;
            if (!put.idle(release - now, idle_value))
                return out;
            first_usable_edge = it->cycle + 1;
        }

        if (e.infinite()) {
            if (!max_cycles)
                throw Error(Errc::NonTerminating, "entry repeats forever");
            while (put.segment(wdm, e)) {
            }
            return out;
        }
        for (std::uint32_t pass = 0; pass < e.counter; ++pass)
            if (!put.segment(wdm, e))
                return out;

        // The final cycle of this entry may carry the edge for the next one.
        first_usable_edge = std::max<std::uint64_t>(first_usable_edge, out.words() - 1);
        const auto last = out.samples.back();
        idle_value = e.hold_last() ? last : SampleCode{0};
        if (e.end_of_sequence())
            return out;
        index = e.jump() ? e.jump_target : index + 1;
    }
}

} // namespace awg
