#pragma once

// Waveform data memory (WDM), sequence data memory (SDM), the 128-bit
// sequence entry encoding and static program validation.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace awg {

/// Two's complement DAC code; 0 is midscale (0 V).
using SampleCode = std::int16_t;

inline constexpr std::size_t kSamplesPerWord = 8;   // 2 GSPS / 250 MHz
inline constexpr std::size_t kWdmCapacitySamples = std::size_t{1} << 18;
inline constexpr std::size_t kWdmCapacityWords = kWdmCapacitySamples / kSamplesPerWord;
inline constexpr std::size_t kSdmCapacity = 4096;
inline constexpr std::uint32_t kMinEntryWords = 4;
inline constexpr std::size_t kEntryBytes = 16;
inline constexpr std::size_t kChannelsPerBoard = 4;

enum class TriggerSource : std::uint8_t {
    None = 0,
    External = 1,
    Software = 2,
    InternalTimer = 3,
};

enum class EntryFlag : std::uint8_t {
    WaitTrigger = 1u << 0,
    EndOfSequence = 1u << 1,
    Jump = 1u << 2,
    HoldLast = 1u << 3,
};

inline constexpr std::uint8_t kEntryFlagMask = 0x0F;

constexpr std::uint8_t operator|(EntryFlag a, EntryFlag b)
{
    return static_cast<std::uint8_t>(static_cast<std::uint8_t>(a) | static_cast<std::uint8_t>(b));
}
constexpr std::uint8_t operator|(std::uint8_t a, EntryFlag b)
{
    return static_cast<std::uint8_t>(a | static_cast<std::uint8_t>(b));
}

/// One sequencer instruction. `start_addr` and `length` are in 8-sample words;
/// `counter` 0 repeats forever, k >= 1 plays k times.
struct SequenceEntry {
    std::uint8_t flags = 0;
    std::uint32_t start_addr = 0;
    std::uint32_t length = 0;
    TriggerSource trigger = TriggerSource::None;
    std::uint32_t counter = 1;
    std::uint16_t jump_target = 0;

    constexpr bool has(EntryFlag f) const { return (flags & static_cast<std::uint8_t>(f)) != 0; }
    constexpr bool wait_trigger() const { return has(EntryFlag::WaitTrigger); }
    constexpr bool end_of_sequence() const { return has(EntryFlag::EndOfSequence); }
    constexpr bool jump() const { return has(EntryFlag::Jump); }
    constexpr bool hold_last() const { return has(EntryFlag::HoldLast); }
    constexpr bool infinite() const { return counter == 0; }

    friend bool operator==(const SequenceEntry&, const SequenceEntry&) = default;
};

using EntryWord = std::array<std::uint8_t, kEntryBytes>;

/// Checked encoder: throws InvariantViolation for entries that could never
/// be legal (length below the minimum, range beyond the WDM).
EntryWord encode_entry(const SequenceEntry& entry);

/// Encoder without semantic checks; used to put arbitrary (possibly illegal)
/// programs on the wire so that the far end can reject them.
EntryWord pack_entry(const SequenceEntry& entry) noexcept;

/// Total decode. Reserved flag bits and the upper six bits of the trigger
/// byte are dropped.
SequenceEntry decode_entry(std::span<const std::uint8_t, kEntryBytes> word) noexcept;

std::vector<std::uint8_t> pack_entries(std::span<const SequenceEntry> entries);
/// Decodes a whole SDM image; throws MisalignedLength if not a multiple of 16 bytes.
std::vector<SequenceEntry> unpack_entries(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> pack_samples(std::span<const SampleCode> samples);
std::vector<SampleCode> unpack_samples(std::span<const std::uint8_t> bytes);

class WaveformMemory {
public:
    explicit WaveformMemory(std::uint8_t channel = 0);

    std::uint8_t channel() const { return channel_; }
    std::size_t capacity_samples() const { return samples_.size(); }
    std::size_t capacity_words() const { return samples_.size() / kSamplesPerWord; }

    std::span<const SampleCode> samples() const { return samples_; }

    /// The 8 samples of word `addr`; `addr` must be below capacity_words().
    std::span<const SampleCode, kSamplesPerWord> word(std::size_t addr) const
    {
        return std::span<const SampleCode, kSamplesPerWord>(samples_.data() + addr * kSamplesPerWord,
                                                            kSamplesPerWord);
    }

    /// Replaces samples starting at word `word_offset`.
    /// Throws MisalignedLength or OutOfRange; on error nothing is written.
    void write(std::uint64_t word_offset, std::span<const SampleCode> samples);

    std::vector<SampleCode> read(std::uint64_t word_offset, std::uint64_t word_count) const;

    void clear();

    friend bool operator==(const WaveformMemory&, const WaveformMemory&) = default;

private:
    std::uint8_t channel_;
    std::vector<SampleCode> samples_;
};

inline void load_waveform(WaveformMemory& wdm, std::uint64_t word_offset, std::span<const SampleCode> samples)
{
    wdm.write(word_offset, samples);
}

class SequenceMemory {
public:
    explicit SequenceMemory(std::uint8_t channel = 0) : channel_(channel) {}
    SequenceMemory(std::uint8_t channel, std::vector<SequenceEntry> entries);

    std::uint8_t channel() const { return channel_; }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    static constexpr std::size_t capacity() { return kSdmCapacity; }

    const SequenceEntry& operator[](std::size_t i) const { return entries_[i]; }
    std::span<const SequenceEntry> entries() const { return entries_; }

    void push_back(const SequenceEntry& entry);
    void assign(std::vector<SequenceEntry> entries);
    void clear() { entries_.clear(); }

    friend bool operator==(const SequenceMemory&, const SequenceMemory&) = default;

private:
    std::uint8_t channel_;
    std::vector<SequenceEntry> entries_;
};

enum class Rule : std::uint8_t {
    EmptyProgram = 0,
    MinLength = 1,
    OutOfRange = 2,
    BadJump = 3,
    JumpWithEnd = 4,
    FallsOffEnd = 5,
};

const char* to_string(Rule rule) noexcept;

struct Violation {
    std::size_t index = 0;
    Rule rule = Rule::EmptyProgram;

    friend bool operator==(const Violation&, const Violation&) = default;
};

struct ValidationReport {
    std::vector<Violation> violations;

    bool ok() const { return violations.empty(); }
    bool has(Rule rule) const;
    bool has(std::size_t index, Rule rule) const;
    std::string describe() const;
};

/// Index of the entry that runs after `index` completes all of its repeats,
/// or -1 when the sequence ends there (END flag or an infinite repeat).
/// The result may be out of range; that is what FallsOffEnd/BadJump report.
std::int64_t successor_of(const SequenceMemory& sdm, std::size_t index);

/// Reports every violated invariant. An empty report guarantees that the
/// sequencer runs the program without a runtime fault.
ValidationReport validate_program(const SequenceMemory& sdm, const WaveformMemory& wdm);

} // namespace awg
