#pragma once

// Scenario files: which boards exist, how their DACs are configured, which
// measurement suites to run against them and where the reports go.
// Format in docs/scenario.md.

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "awg/client.hpp"
#include "awg/server.hpp"
#include "awg/sync.hpp"

namespace awg {

enum class Suite { Linearity, Sfdr, Jitter, PhaseNoise, Seamless };

const char* suite_name(Suite s) noexcept;
Suite parse_suite(const std::string& name);

enum class DacProfileKind { None, Random, Cubic };

struct DacSpec {
    DacProfileKind kind = DacProfileKind::None;
    double peak_lsb = 1.9; // random
    double cubic_a = 0;    // cubic
    double v_fullscale = 0.5;
};

struct SkewExpectation {
    std::size_t from = 0; // global channel indices
    std::size_t to = 0;
    double skew_ps = 0;
};

struct Scenario {
    std::string name;
    BoardTopology topology = uniform_topology(1);
    std::uint64_t seed = 1;
    std::vector<Suite> suites;
    std::string output_dir;
    DacSpec dac;

    struct {
        std::vector<std::size_t> channels{0};
        double bound_lsb = 2.0;
        std::uint32_t dwell_cycles = 64;
        double recovery_tol_lsb = 1e-6;
    } linearity;

    struct {
        std::size_t channel = 0;
        std::size_t record = 16384;
        double amplitude = 32767;
        double min_dbc = 60;
    } sfdr;

    struct {
        std::size_t events = 10000;
        std::size_t batch = 1000;
        double std_lo_ps = 9.22;
        double std_hi_ps = 10.89;
        double band_margin = 0.10;
        double mean_ps = 9.9;
        double mean_tol = 0.10;
        std::vector<SkewExpectation> skews;
        double skew_tol_ps = 1.0;
    } jitter;

    struct {
        std::size_t channel = 0;
        std::size_t carrier_bin = 3277;
        std::size_t record = 65536;
        std::size_t windows = 8;
    } phase_noise;

    struct {
        std::size_t random_programs = 0;
        std::size_t channel = 0;
    } seamless;

    /// Program files by global channel, used by the seamless suite.
    std::map<std::size_t, ChannelProgram> programs;
    std::map<std::size_t, std::vector<std::uint64_t>> triggers;

    std::size_t boards() const { return topology.boards.size(); }
    bool runs(Suite s) const;
};

/// Relative file names resolve against `base_dir`. Throws ConfigError.
Scenario parse_scenario(std::string_view text, const std::string& base_dir = ".");
Scenario load_scenario(const std::string& path);

/// Board-side setup: timing from the topology (reseeded with the scenario
/// seed) and the DAC profile on every channel.
std::unique_ptr<BoardServer> make_board_server(const Scenario& s, std::size_t board, ServerOptions opt = {});

/// The injected INL profile of global channel `g`; empty for an ideal DAC.
Eigen::VectorXd dac_profile(const Scenario& s, std::size_t g);

struct SummaryLine {
    std::string key;
    std::string value;
    std::optional<bool> pass; // absent for informational lines
    std::string criterion;    // e.g. "<=2"
};

struct SuiteReport {
    Suite suite = Suite::Linearity;
    bool pass = true;
    std::vector<SummaryLine> lines;
    std::vector<std::pair<std::string, std::string>> files; // CSV name, content

    void add(std::string key, std::string value);
    void check(std::string key, std::string value, bool ok, std::string criterion);
};

struct ScenarioReport {
    std::string name;
    std::uint64_t seed = 0;
    std::vector<SuiteReport> suites;

    bool pass() const;
    std::string summary() const;
};

struct RunOptions {
    unsigned threads = 1;
};

/// Runs the selected suites through `boards` (one client per topology board).
ScenarioReport run_scenario(const Scenario& s, std::span<AwgClient* const> boards, const RunOptions& opt = {});

enum class Emit { Csv, Summary, Both };

/// Writes summary.txt and/or the CSV files into `dir`, creating it.
void write_reports(const ScenarioReport& r, const std::string& dir, Emit emit);

} // namespace awg
