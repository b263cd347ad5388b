#pragma once

// Measurement procedures that drive boards through the client, the way a
// bench PC would: program, arm, trigger, read back through probe taps.

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "awg/client.hpp"
#include "awg/metrology.hpp"
#include "awg/sequencer.hpp"
#include "awg/sync.hpp"

namespace awg::procedures {

// ---- DAC nonlinearity profiles injected on the simulated board ----

/// Smooth random INL profile that is zero at both end codes and peaks at
/// exactly `peak_lsb`, so its endpoint-fit INL is the profile itself.
Eigen::VectorXd random_inl_profile(std::uint64_t seed, double peak_lsb);

/// a (x^3 - x) with x = code / 32768: a pure third-order bow.
Eigen::VectorXd cubic_inl_profile(double a_lsb);

// ---- linearity ----

struct RampSweepOptions {
    std::uint8_t channel = 0;
    /// Cycles spent on each code; a multiple of 4 (the minimum segment).
    std::uint32_t dwell_cycles = 64;
    /// Codes per SDM load; at most 4096.
    std::uint32_t batch_codes = 4096;
};

/// Plays all 65536 codes as a staircase, one sequencer entry per code, and
/// reads the settled filtered output in the middle of each step.
Eigen::VectorXd ramp_sweep(AwgClient& board, const RampSweepOptions& opt = {});

// ---- SFDR ----

struct SfdrOptions {
    std::uint8_t channel = 0;
    std::size_t record = 16384;
    double amplitude_codes = 32767;
    ProbeTap tap = ProbeTap::DacVolts;
};

struct SfdrTrace {
    double nominal_hz = 0;
    double frequency_hz = 0; // coherent frequency actually played
    std::vector<SampleCode> codes;
    Eigen::VectorXd volts;
    double sfdr_dbc = 0;
};

std::vector<SampleCode> coherent_tone(std::size_t n, std::size_t bin, double amplitude_codes);

SfdrTrace sfdr_point(AwgClient& board, double nominal_hz, const SfdrOptions& opt = {});
/// The 25 points 10, 20, ..., 250 MHz.
std::vector<SfdrTrace> sfdr_sweep(AwgClient& board, const SfdrOptions& opt = {});

// ---- phase noise ----

struct PhaseNoiseOptions {
    std::uint8_t channel = 0;
    std::size_t record = 65536;
    std::size_t windows = 8;
    double amplitude_codes = 32767;
    std::vector<std::size_t> offset_bins = default_offsets();

    static std::vector<std::size_t> default_offsets();
};

/// Loops a coherent tone and reads `windows` periods through the jittered tap.
PhaseNoiseCurve phase_noise(AwgClient& board, std::size_t carrier_bin, const PhaseNoiseOptions& opt = {});

// ---- multi-board jitter ----

struct JitterOptions {
    std::size_t events = 10000;
    std::size_t events_per_batch = 1000;
    std::uint32_t period_cycles = 64;
    /// Event time within its cycle; mid-cycle keeps trigger quantisation fixed.
    double phase_cycles = 10.5;
    SampleCode threshold = 8192;
    unsigned threads = 1;
};

/// The pulse program: a wait for the external trigger, then one rising
/// edge 8 samples into the segment.
ChannelProgram pulse_program();

/// Edge time minus event time for every channel (rows, board-major) and
/// event (columns). Boards run independently; the result does not depend on
/// `threads`.
Eigen::MatrixXd collect_edge_times(std::span<AwgClient* const> boards, const JitterOptions& opt = {});

// ---- seamless playback ----

struct PlaybackCheck {
    std::size_t words = 0;        // length of the expected stream
    std::size_t mismatched_words = 0;
    std::size_t gap_words = 0;    // expected valid, played invalid
    std::size_t events = 0;
    // fingerprints of the captured stream (samples then valid flags) and event log
    std::uint32_t stream_crc = 0;
    std::uint32_t events_crc = 0;
    bool passed() const { return mismatched_words == 0 && gap_words == 0; }
};

/// Loads the program, arms, issues software triggers at `trigger_cycles`
/// after ARM, and compares the captured output with flatten_oracle.
PlaybackCheck check_playback(AwgClient& board, std::uint8_t channel, const ChannelProgram& program,
                             std::span<const std::uint64_t> trigger_cycles);

/// A valid program with seamless segment switches: lengths 4..12, repeat
/// counts 1..3, occasional software waits, ending with END.
ChannelProgram random_program(std::mt19937_64& rng, std::size_t max_entries = 12);

/// Software trigger cycles that release every wait of `program`.
std::vector<std::uint64_t> trigger_plan(const ChannelProgram& program, std::uint64_t spacing = 40);

} // namespace awg::procedures
