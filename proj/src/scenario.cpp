#include "awg/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "awg/config_text.hpp"
#include "awg/error.hpp"
#include "awg/metrology.hpp"
#include "awg/procedures.hpp"
#include "awg/program_file.hpp"

namespace awg {

namespace fs = std::filesystem;
namespace pr = procedures;
using namespace cfg;

namespace {

constexpr Suite kAllSuites[] = {Suite::Linearity, Suite::Sfdr, Suite::Jitter, Suite::PhaseNoise, Suite::Seamless};

std::string fixed(double v, int digits)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string sci(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9e", v);
    return buf;
}

std::string resolve(const std::string& base, const std::string& path)
{
    const fs::path p(path);
    return p.is_absolute() ? path : (fs::path(base) / p).lexically_normal().string();
}

std::size_t as_size(const std::string& v, const std::string& key) { return static_cast<std::size_t>(parse_u64(v, key)); }

std::string chan_key(std::size_t g) { return "CH" + std::to_string(g); }

} // namespace

const char* suite_name(Suite s) noexcept
{
    switch (s) {
    case Suite::Linearity: return "linearity";
    case Suite::Sfdr: return "sfdr";
    case Suite::Jitter: return "jitter";
    case Suite::PhaseNoise: return "phase_noise";
    case Suite::Seamless: return "seamless";
    }
    return "?";
}

Suite parse_suite(const std::string& name)
{
    for (auto s : kAllSuites)
        if (name == suite_name(s))
            return s;
    throw Error(Errc::ConfigError, "unknown suite '" + name + "'");
}

bool Scenario::runs(Suite s) const { return std::find(suites.begin(), suites.end(), s) != suites.end(); }

Scenario parse_scenario(std::string_view text, const std::string& base_dir)
{
    KeyValues kv(text, "scenario");
    Scenario s;
    s.name = kv.require("name");
    if (s.name.empty() || s.name.find_first_of("/\\ ") != std::string::npos)
        throw Error(Errc::ConfigError, "scenario name must be a nonempty word");
    if (auto v = kv.take("topology"))
        s.topology = load_topology(resolve(base_dir, *v));
    if (auto v = kv.take("seed"))
        s.seed = parse_u64(*v, "seed");
    for (const auto& name : split_list(kv.require("suites"))) {
        const Suite suite = parse_suite(name);
        if (!s.runs(suite))
            s.suites.push_back(suite);
    }
    s.output_dir = kv.take("output").value_or("out/" + s.name);

    if (auto v = kv.take("dac.profile")) {
        if (*v == "none")
            s.dac.kind = DacProfileKind::None;
        else if (*v == "random")
            s.dac.kind = DacProfileKind::Random;
        else if (*v == "cubic")
            s.dac.kind = DacProfileKind::Cubic;
        else
            throw Error(Errc::ConfigError, "dac.profile must be none, random or cubic");
    }
    if (auto v = kv.take("dac.peak_lsb"))
        s.dac.peak_lsb = parse_double(*v, "dac.peak_lsb");
    if (auto v = kv.take("dac.cubic_a"))
        s.dac.cubic_a = parse_double(*v, "dac.cubic_a");
    if (auto v = kv.take("dac.v_fullscale"))
        s.dac.v_fullscale = parse_double(*v, "dac.v_fullscale");
    if (s.dac.peak_lsb < 0 || !(s.dac.v_fullscale > 0))
        throw Error(Errc::ConfigError, "dac.peak_lsb must be >= 0 and dac.v_fullscale > 0");

    const std::size_t channels = s.topology.channel_count();
    auto channel = [&](const std::string& v, const std::string& key) {
        const auto g = as_size(v, key);
        if (g >= channels)
            throw Error(Errc::ConfigError, key + ": channel " + v + " is not in the topology");
        return g;
    };

    if (auto v = kv.take("linearity.channels")) {
        s.linearity.channels.clear();
        for (const auto& c : split_list(*v))
            s.linearity.channels.push_back(channel(c, "linearity.channels"));
    }
    if (auto v = kv.take("linearity.bound_lsb"))
        s.linearity.bound_lsb = parse_double(*v, "linearity.bound_lsb");
    if (auto v = kv.take("linearity.dwell_cycles"))
        s.linearity.dwell_cycles = static_cast<std::uint32_t>(parse_u64(*v, "linearity.dwell_cycles"));
    if (auto v = kv.take("linearity.recovery_tol_lsb"))
        s.linearity.recovery_tol_lsb = parse_double(*v, "linearity.recovery_tol_lsb");

    if (auto v = kv.take("sfdr.channel"))
        s.sfdr.channel = channel(*v, "sfdr.channel");
    if (auto v = kv.take("sfdr.record"))
        s.sfdr.record = as_size(*v, "sfdr.record");
    if (auto v = kv.take("sfdr.amplitude"))
        s.sfdr.amplitude = parse_double(*v, "sfdr.amplitude");
    if (auto v = kv.take("sfdr.min_dbc"))
        s.sfdr.min_dbc = parse_double(*v, "sfdr.min_dbc");

    if (auto v = kv.take("jitter.events"))
        s.jitter.events = as_size(*v, "jitter.events");
    if (auto v = kv.take("jitter.batch"))
        s.jitter.batch = as_size(*v, "jitter.batch");
    if (auto v = kv.take("jitter.std_band_ps")) {
        const auto b = parse_doubles(*v, "jitter.std_band_ps");
        if (b.size() != 2 || b[1] < b[0])
            throw Error(Errc::ConfigError, "jitter.std_band_ps needs lo, hi");
        s.jitter.std_lo_ps = b[0];
        s.jitter.std_hi_ps = b[1];
    }
    if (auto v = kv.take("jitter.band_margin"))
        s.jitter.band_margin = parse_double(*v, "jitter.band_margin");
    if (auto v = kv.take("jitter.mean_ps"))
        s.jitter.mean_ps = parse_double(*v, "jitter.mean_ps");
    if (auto v = kv.take("jitter.mean_tol"))
        s.jitter.mean_tol = parse_double(*v, "jitter.mean_tol");
    if (auto v = kv.take("jitter.skew_tol_ps"))
        s.jitter.skew_tol_ps = parse_double(*v, "jitter.skew_tol_ps");

    if (auto v = kv.take("phase_noise.channel"))
        s.phase_noise.channel = channel(*v, "phase_noise.channel");
    if (auto v = kv.take("phase_noise.carrier_bin"))
        s.phase_noise.carrier_bin = as_size(*v, "phase_noise.carrier_bin");
    if (auto v = kv.take("phase_noise.record"))
        s.phase_noise.record = as_size(*v, "phase_noise.record");
    if (auto v = kv.take("phase_noise.windows"))
        s.phase_noise.windows = as_size(*v, "phase_noise.windows");
    if (4 * s.phase_noise.carrier_bin >= s.phase_noise.record / 2)
        throw Error(Errc::ConfigError, "phase_noise.carrier_bin: four times the carrier must stay below Nyquist");

    if (auto v = kv.take("seamless.random_programs"))
        s.seamless.random_programs = as_size(*v, "seamless.random_programs");
    if (auto v = kv.take("seamless.channel"))
        s.seamless.channel = channel(*v, "seamless.channel");

    // indexed keys: jitter.skew.<from>.<to>, program.<g>, triggers.<g>
    std::vector<std::string> indexed;
    for (const auto& [key, val] : kv.rest())
        indexed.push_back(key);
    for (const auto& key : indexed) {
        std::size_t idx = 0;
        std::string field;
        const std::string val = *kv.take(key);
        if (split_indexed(key, "jitter.skew.", idx, field)) {
            SkewExpectation e;
            e.from = channel(std::to_string(idx), key);
            e.to = channel(field, key);
            e.skew_ps = parse_double(val, key);
            s.jitter.skews.push_back(e);
        } else if (key.rfind("program.", 0) == 0) {
            const auto g = channel(key.substr(8), key);
            s.programs[g] = load_program(resolve(base_dir, val), static_cast<std::uint8_t>(g % kChannelsPerBoard));
        } else if (key.rfind("triggers.", 0) == 0) {
            s.triggers[channel(key.substr(9), key)] = parse_u64s(val, key);
        } else {
            throw Error(Errc::ConfigError, "scenario: unknown key " + key);
        }
    }
    for (const auto& [g, t] : s.triggers)
        if (!s.programs.count(g))
            throw Error(Errc::ConfigError, "triggers." + std::to_string(g) + " without program." + std::to_string(g));
    return s;
}

Scenario load_scenario(const std::string& path)
{
    try {
        return parse_scenario(read_file(path), fs::path(path).parent_path().string());
    } catch (const Error& e) {
        if (e.code() == Errc::ConfigError)
            throw Error(Errc::ConfigError, path + ": " + std::string(e.what()).substr(std::strlen("ConfigError: ")));
        throw;
    }
}

Eigen::VectorXd dac_profile(const Scenario& s, std::size_t g)
{
    switch (s.dac.kind) {
    case DacProfileKind::Random:
        return pr::random_inl_profile(splitmix64(s.seed + 0xA5A5A5A5ull * (g + 1)), s.dac.peak_lsb);
    case DacProfileKind::Cubic:
        return pr::cubic_inl_profile(s.dac.cubic_a);
    case DacProfileKind::None:
        break;
    }
    return {};
}

std::unique_ptr<BoardServer> make_board_server(const Scenario& s, std::size_t board, ServerOptions opt)
{
    BoardTopology topo = s.topology;
    reseed(topo, s.seed);
    BoardConfig cfg;
    cfg.descriptor = topo.boards.at(board);
    cfg.v_fullscale = s.dac.v_fullscale;
    auto server = std::make_unique<BoardServer>(cfg, opt);
    for (std::size_t ch = 0; ch < kChannelsPerBoard; ++ch) {
        auto p = dac_profile(s, board * kChannelsPerBoard + ch);
        if (p.size() > 0)
            server->board().set_transfer(ch, DacTransfer(s.dac.v_fullscale, std::move(p)));
    }
    return server;
}

void SuiteReport::add(std::string key, std::string value)
{
    lines.push_back({std::move(key), std::move(value), std::nullopt, {}});
}

void SuiteReport::check(std::string key, std::string value, bool ok, std::string criterion)
{
    lines.push_back({std::move(key), std::move(value), ok, std::move(criterion)});
    pass = pass && ok;
}

bool ScenarioReport::pass() const
{
    for (const auto& s : suites)
        if (!s.pass)
            return false;
    return true;
}

std::string ScenarioReport::summary() const
{
    std::ostringstream os;
    os << "# awgsim report v1\n";
    os << "scenario=" << name << "\n";
    os << "seed=" << seed << "\n";
    for (const auto& s : suites) {
        os << "[" << suite_name(s.suite) << "]\n";
        for (const auto& l : s.lines) {
            os << l.key << "=" << l.value;
            if (l.pass)
                os << "; " << (*l.pass ? "PASS" : "FAIL") << l.criterion;
            os << "\n";
        }
        os << "SUITE=" << (s.pass ? "PASS" : "FAIL") << "\n";
    }
    os << "RESULT=" << (pass() ? "PASS" : "FAIL") << "\n";
    return os.str();
}

namespace {

AwgClient& client_of(std::span<AwgClient* const> boards, std::size_t g)
{
    return *boards[g / kChannelsPerBoard];
}

std::uint8_t local(std::size_t g) { return static_cast<std::uint8_t>(g % kChannelsPerBoard); }

SuiteReport linearity(const Scenario& s, std::span<AwgClient* const> boards)
{
    SuiteReport r;
    r.suite = Suite::Linearity;
    const double lsb = s.dac.v_fullscale / kCodeOffset;
    const std::string bound = "<=" + fmt_double(s.linearity.bound_lsb);
    for (std::size_t g : s.linearity.channels) {
        const auto v = pr::ramp_sweep(client_of(boards, g), {local(g), s.linearity.dwell_cycles, 4096});
        const auto m = compute_inl_dnl(v, lsb);
        const std::string k = chan_key(g);
        r.add(k + "_CODES", std::to_string(kCodeCount));
        r.add(k + "_STEPS", std::to_string(kSweepSteps));
        r.check(k + "_INL_MAX_LSB", fixed(m.max_abs_inl, 9), m.max_abs_inl <= s.linearity.bound_lsb, bound);
        r.check(k + "_DNL_MAX_LSB", fixed(m.max_abs_dnl, 9), m.max_abs_dnl <= s.linearity.bound_lsb, bound);

        // the injected profile is known to the scenario, so recovery is checkable
        const Eigen::VectorXd p = dac_profile(s, g);
        Eigen::VectorXd ideal(static_cast<Eigen::Index>(kCodeCount));
        for (Eigen::Index c = 0; c < ideal.size(); ++c)
            ideal[c] = (double(c) - kCodeOffset + (p.size() ? p[c] : 0.0)) * lsb;
        const auto e = compute_inl_dnl(ideal, lsb);
        const double err = std::max(std::fabs(m.max_abs_inl - e.max_abs_inl), std::fabs(m.max_abs_dnl - e.max_abs_dnl));
        r.add(k + "_INJECTED_INL_MAX_LSB", fixed(e.max_abs_inl, 9));
        r.add(k + "_INJECTED_DNL_MAX_LSB", fixed(e.max_abs_dnl, 9));
        r.check(k + "_RECOVERY_ERROR_LSB", sci(err), err <= s.linearity.recovery_tol_lsb,
                "<=" + fmt_double(s.linearity.recovery_tol_lsb));

        std::string csv = "code,volts,inl_lsb,dnl_lsb\n";
        csv.reserve(kCodeCount * 48);
        for (Eigen::Index c = 0; c < v.size(); ++c) {
            csv += std::to_string(c - Eigen::Index(kCodeOffset)) + "," + sci(v[c]) + "," + fixed(m.inl[c], 9) + ",";
            csv += (c + 1 < v.size() ? fixed(m.dnl[c], 9) : std::string()) + "\n";
        }
        r.files.emplace_back("linearity_ch" + std::to_string(g) + ".csv", std::move(csv));
    }
    return r;
}

SuiteReport sfdr(const Scenario& s, std::span<AwgClient* const> boards)
{
    SuiteReport r;
    r.suite = Suite::Sfdr;
    pr::SfdrOptions opt;
    opt.channel = local(s.sfdr.channel);
    opt.record = s.sfdr.record;
    opt.amplitude_codes = s.sfdr.amplitude;
    const auto sweep = pr::sfdr_sweep(client_of(boards, s.sfdr.channel), opt);
    std::string csv = "nominal_hz,frequency_hz,sfdr_dbc\n";
    double worst = kSfdrCeilingDb;
    for (const auto& t : sweep) {
        csv += fixed(t.nominal_hz, 0) + "," + fixed(t.frequency_hz, 3) + "," + fixed(t.sfdr_dbc, 6) + "\n";
        worst = std::min(worst, t.sfdr_dbc);
    }
    r.files.emplace_back("sfdr.csv", std::move(csv));
    r.check("POINTS", std::to_string(sweep.size()), sweep.size() == 25, "==25");
    r.check("SFDR_MIN_DBC", fixed(worst, 6), worst >= s.sfdr.min_dbc, ">=" + fmt_double(s.sfdr.min_dbc));
    return r;
}

SuiteReport jitter(const Scenario& s, std::span<AwgClient* const> boards, unsigned threads)
{
    SuiteReport r;
    r.suite = Suite::Jitter;
    pr::JitterOptions opt;
    opt.events = s.jitter.events;
    opt.events_per_batch = s.jitter.batch;
    opt.threads = threads;
    const auto m = pr::collect_edge_times(boards, opt);
    const auto st = jitter_statistics(m);
    const double lo = s.jitter.std_lo_ps * (1 - s.jitter.band_margin);
    const double hi = s.jitter.std_hi_ps * (1 + s.jitter.band_margin);
    std::string csv = "channel,board,latency_ps,std_ps,skew_from_ch0_ps\n";
    bool in_band = true;
    for (Eigen::Index g = 0; g < m.rows(); ++g) {
        const double sd = st.std_ps[std::size_t(g)];
        in_band = in_band && sd >= lo && sd <= hi;
        csv += std::to_string(g) + "," + std::to_string(g / kChannelsPerBoard) + "," + fixed(m.row(g).mean() * 1e12, 6) +
               "," + fixed(sd, 6) + "," + fixed(st.skew_ps(0, g), 6) + "\n";
    }
    r.files.emplace_back("jitter.csv", std::move(csv));
    r.add("CHANNELS", std::to_string(m.rows()));
    r.add("EVENTS", std::to_string(m.cols()));
    const std::string band = " in [" + fixed(lo, 3) + "," + fixed(hi, 3) + "]";
    r.check("STD_MIN_PS", fixed(st.min_std_ps, 6), in_band, band);
    r.check("STD_MAX_PS", fixed(st.max_std_ps, 6), in_band, band);
    const double mlo = s.jitter.mean_ps * (1 - s.jitter.mean_tol), mhi = s.jitter.mean_ps * (1 + s.jitter.mean_tol);
    r.check("STD_MEAN_PS", fixed(st.mean_std_ps, 6), st.mean_std_ps >= mlo && st.mean_std_ps <= mhi,
            " in [" + fixed(mlo, 3) + "," + fixed(mhi, 3) + "]");
    for (const auto& e : s.jitter.skews) {
        const double got = st.skew_ps(Eigen::Index(e.from), Eigen::Index(e.to));
        r.check("SKEW_" + std::to_string(e.from) + "_" + std::to_string(e.to) + "_PS", fixed(got, 6),
                std::fabs(got - e.skew_ps) <= s.jitter.skew_tol_ps,
                " within " + fmt_double(s.jitter.skew_tol_ps) + " of " + fmt_double(e.skew_ps));
    }
    return r;
}

SuiteReport phase_noise(const Scenario& s, std::span<AwgClient* const> boards)
{
    SuiteReport r;
    r.suite = Suite::PhaseNoise;
    pr::PhaseNoiseOptions opt;
    opt.channel = local(s.phase_noise.channel);
    opt.record = s.phase_noise.record;
    opt.windows = s.phase_noise.windows;
    auto& c = client_of(boards, s.phase_noise.channel);
    std::vector<PhaseNoiseCurve> curves;
    for (std::size_t mult : {1, 2, 4})
        curves.push_back(pr::phase_noise(c, s.phase_noise.carrier_bin * mult, opt));

    std::string csv = "offset_hz";
    for (const auto& cv : curves)
        csv += ",dbc_hz_at_" + fixed(cv.carrier_hz, 0);
    csv += "\n";
    for (std::size_t i = 0; i < curves[0].offset_hz.size(); ++i) {
        csv += fixed(curves[0].offset_hz[i], 3);
        for (const auto& cv : curves)
            csv += "," + fixed(cv.dbc_hz[i], 6);
        csv += "\n";
    }
    r.files.emplace_back("phase_noise.csv", std::move(csv));
    for (const auto& cv : curves)
        r.add("CARRIER_HZ", fixed(cv.carrier_hz, 3));
    const double one = phase_noise_scaling_check(curves[0], curves[1]);
    const double two = phase_noise_scaling_check(curves[0], curves[2]);
    r.check("SHIFT_X2_DB", fixed(one, 6), std::fabs(one - 6.02) <= 0.5, " in 6.02+-0.5");
    r.check("SHIFT_X4_DB", fixed(two, 6), std::fabs(two - 12.04) <= 0.7, " in 12.04+-0.7");
    return r;
}

SuiteReport seamless(const Scenario& s, std::span<AwgClient* const> boards)
{
    SuiteReport r;
    r.suite = Suite::Seamless;
    std::string csv = "program,channel,triggers,words,mismatched_words,gap_words,events,stream_crc,events_crc\n";
    std::size_t failed = 0, total = 0;
    auto run = [&](const std::string& label, std::size_t g, const ChannelProgram& p, std::vector<std::uint64_t> trig) {
        auto& c = client_of(boards, g);
        c.reg_write(proto::reg::TriggerDefault0 + 4u * local(g), static_cast<std::uint32_t>(p.config.default_trigger));
        const auto res = pr::check_playback(c, local(g), p, trig);
        char crc[32];
        std::snprintf(crc, sizeof crc, "%08x,%08x", res.stream_crc, res.events_crc);
        csv += label + "," + std::to_string(g) + "," + std::to_string(trig.size()) + "," + std::to_string(res.words) + "," +
               std::to_string(res.mismatched_words) + "," + std::to_string(res.gap_words) + "," +
               std::to_string(res.events) + "," + crc + "\n";
        failed += !res.passed();
        ++total;
    };
    for (const auto& [g, p] : s.programs) {
        auto it = s.triggers.find(g);
        run("file_ch" + std::to_string(g), g, p, it != s.triggers.end() ? it->second : pr::trigger_plan(p));
    }
    std::mt19937_64 rng(s.seed);
    for (std::size_t i = 0; i < s.seamless.random_programs; ++i) {
        const auto p = pr::random_program(rng);
        run("random_" + std::to_string(i), s.seamless.channel, p, pr::trigger_plan(p));
    }
    r.files.emplace_back("seamless.csv", std::move(csv));
    r.add("PROGRAMS", std::to_string(total));
    r.check("FAILED_PROGRAMS", std::to_string(failed), failed == 0, "==0");
    return r;
}

} // namespace

ScenarioReport run_scenario(const Scenario& s, std::span<AwgClient* const> boards, const RunOptions& opt)
{
    if (boards.size() != s.boards())
        throw Error(Errc::ConfigError, "scenario needs " + std::to_string(s.boards()) + " boards, got " +
                                           std::to_string(boards.size()));
    ScenarioReport out;
    out.name = s.name;
    out.seed = s.seed;
    for (Suite suite : kAllSuites) {
        if (!s.runs(suite))
            continue;
        switch (suite) {
        case Suite::Linearity: out.suites.push_back(linearity(s, boards)); break;
        case Suite::Sfdr: out.suites.push_back(sfdr(s, boards)); break;
        case Suite::Jitter: out.suites.push_back(jitter(s, boards, opt.threads)); break;
        case Suite::PhaseNoise: out.suites.push_back(phase_noise(s, boards)); break;
        case Suite::Seamless: out.suites.push_back(seamless(s, boards)); break;
        }
    }
    return out;
}

void write_reports(const ScenarioReport& r, const std::string& dir, Emit emit)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec)
        throw Error(Errc::ConfigError, "cannot create output directory " + dir + ": " + ec.message());
    auto put = [&](const std::string& name, const std::string& content) {
        std::ofstream f(fs::path(dir) / name, std::ios::binary | std::ios::trunc);
        f << content;
        if (!f)
            throw Error(Errc::ConfigError, "cannot write " + (fs::path(dir) / name).string());
    };
    if (emit != Emit::Csv)
        put("summary.txt", r.summary());
    if (emit != Emit::Summary)
        for (const auto& s : r.suites)
            for (const auto& [name, content] : s.files)
                put(name, content);
}

} // namespace awg
