// Acceptance run: one PASS/FAIL line per criterion, exit 1 if any fails.
//
//   acceptance [--only N[,N...]] [--source-dir DIR]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <set>
#include <string>

#include <CLI11.hpp>
#include <unsupported/Eigen/FFT>

#include "awg/client.hpp"
#include "awg/config_text.hpp"
#include "awg/procedures.hpp"
#include "awg/scenario.hpp"
#include "awg/server.hpp"
#include "awg/transport.hpp"
#include "fuzz_gen.hpp"
#include "program_gen.hpp"

#ifndef AWG_SOURCE_DIR
#define AWG_SOURCE_DIR "."
#endif

using namespace awg;
namespace pr = awg::procedures;
namespace tg = awg::testing;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string num(double v, int prec = 3)
{
    char b[64];
    std::snprintf(b, sizeof b, "%.*f", prec, v);
    return b;
}

struct Verdict {
    bool pass = false;
    std::string detail;
};

// Cycles the oracle plays but the run leaves empty. Trigger waits are idle
// in both, so only a missed segment switch counts.
std::size_t gaps(const SampleStream& run, const SampleStream& want)
{
    std::size_t n = 0;
    for (std::size_t c = 0; c < want.words(); ++c)
        n += want.valid[c] && (c >= run.words() || !run.valid[c]) ? 1 : 0;
    return n;
}

// Empty cycles between the first and last played word.
std::size_t holes(const SampleStream& s)
{
    std::size_t first = s.words(), last = 0, n = 0;
    for (std::size_t c = 0; c < s.words(); ++c)
        if (s.valid[c]) {
            first = std::min(first, c);
            last = c;
        }
    for (std::size_t c = first; c < last; ++c)
        n += s.valid[c] ? 0 : 1;
    return n;
}

struct Bench {
    std::vector<std::unique_ptr<BoardServer>> servers;
    std::vector<std::unique_ptr<AwgClient>> clients;
    std::vector<AwgClient*> ptrs;

    explicit Bench(const Scenario& s)
    {
        for (std::size_t b = 0; b < s.boards(); ++b) {
            servers.push_back(make_board_server(s, b));
            clients.push_back(std::make_unique<AwgClient>(std::make_unique<LoopbackTransport>(*servers.back())));
            ptrs.push_back(clients.back().get());
        }
    }
};

// ---- 1 ----
Verdict seamless()
{
    const auto t0 = Clock::now();
    std::mt19937_64 rng(20240601);
    tg::GenOptions opt;
    opt.waits = true;
    opt.final_jump = true;
    const int n = 1000;
    int bad = 0, no_wait = 0;
    std::size_t gap = 0;
    for (int i = 0; i < n; ++i) {
        const auto g = tg::random_valid_program(rng, opt);
        if (!validate_program(g.sdm, g.wdm).ok()) {
            ++bad;
            continue;
        }
        const std::uint64_t cap = 3000;
        const auto run = run_program(g.sdm, g.wdm, g.triggers, cap);
        const auto want = flatten_oracle(g.sdm, g.wdm, g.triggers, g.terminates ? std::nullopt : std::optional(cap));
        gap += gaps(run.stream, want);
        const bool waits = std::any_of(g.sdm.entries().begin(), g.sdm.entries().end(),
                                       [](const SequenceEntry& e) { return e.has(EntryFlag::WaitTrigger); });
        if (!waits) {
            ++no_wait;
            gap += holes(run.stream);
        }
        if (run.outcome == RunOutcome::Fault || run.starvation_events != 0 || run.stream != want)
            ++bad;
    }
    const double secs = seconds_since(t0);
    return {bad == 0 && gap == 0 && secs <= 60.0,
            std::to_string(n) + " programs (" + std::to_string(no_wait) + " without waits), " + std::to_string(bad) +
                " mismatched, " + std::to_string(gap) + " gap cycles, " + num(secs, 2) + " s"};
}

// ---- 2 ----
Verdict min_length()
{
    std::mt19937_64 rng(4);
    int caught = 0;
    const int n = 1000;
    for (int i = 0; i < n; ++i) {
        auto g = tg::random_valid_program(rng, {});
        std::vector<SequenceEntry> entries(g.sdm.entries().begin(), g.sdm.entries().end());
        entries[rng() % entries.size()].length = 3;
        g.sdm.assign(std::move(entries));
        caught += validate_program(g.sdm, g.wdm).has(Rule::MinLength) ? 1 : 0;
    }
    WaveformMemory wdm;
    tg::fill_ramp(wdm, 0, 8, 0);
    const SequenceMemory adversarial(
        0, {tg::entry(0, 1), tg::entry(1, 1), tg::entry(2, 1), tg::entry(3, 1), tg::entry(4, 1, 1, tg::kEnd)});
    SequencerConfig loose;
    loose.strict_descriptors = false;
    const auto run = run_program(adversarial, wdm, {}, 100, loose);
    return {caught == n && run.starvation_events >= 1,
            std::to_string(caught) + "/" + std::to_string(n) + " length-3 programs rejected, " +
                std::to_string(run.starvation_events) + " starvations on length-1 entries"};
}

// ---- 3 ----
struct Extremes {
    long double inl = 0, dnl = 0;
};

// Endpoint-fit maxima straight from the profile: v_k = (k - 32768 + p_k) / 32768.
Extremes profile_extremes(const Eigen::VectorXd& p)
{
    const std::size_t n = kCodeCount;
    auto v = [&](std::size_t k) { return (static_cast<long double>(k) - 32768.0L + p[Eigen::Index(k)]) / 32768.0L; };
    const long double lsb = (v(n - 1) - v(0)) / (n - 1);
    Extremes e;
    for (std::size_t k = 0; k < n; ++k) {
        e.inl = std::max(e.inl, std::fabs((v(k) - v(0) - k * lsb) / lsb));
        if (k + 1 < n)
            e.dnl = std::max(e.dnl, std::fabs((v(k + 1) - v(k)) * 32768.0L - 1.0L));
    }
    return e;
}

Verdict linearity()
{
    std::string detail;
    bool ok = true;
    double slowest = 0;
    struct Case {
        double peak;
        bool expect_pass;
    };
    for (const auto [peak, expect_pass] : {Case{1.9, true}, Case{1.999, true}, Case{2.001, false}}) {
        const auto p = pr::random_inl_profile(1000 + std::uint64_t(peak * 1000), peak);
        BoardServer server;
        server.board().set_transfer(0, DacTransfer(0.5, p));
        AwgClient client(std::make_unique<LoopbackTransport>(server));
        const auto t0 = Clock::now();
        const auto r = compute_inl_dnl(pr::ramp_sweep(client), 0.5 / kCodeOffset);
        slowest = std::max(slowest, seconds_since(t0));
        const auto e = profile_extremes(p);
        const double di = std::fabs(r.max_abs_inl - double(e.inl)), dd = std::fabs(r.max_abs_dnl - double(e.dnl));
        ok = ok && di <= 1e-6 && dd <= 1e-6 && r.pass() == expect_pass;
        if (!detail.empty())
            detail += "; ";
        detail += "peak " + num(peak) + ": INL err " + num(di * 1e9, 3) + "e-9, DNL err " + num(dd * 1e9, 3) +
                  "e-9, " + (r.pass() ? "within bound" : "over bound");
    }
    ok = ok && slowest <= 60.0;
    return {ok, detail + "; sweep " + num(slowest, 2) + " s"};
}

// ---- 4 ----
double fft_oracle_sfdr(const Eigen::VectorXd& x, double f0_hz)
{
    const std::size_t n = std::size_t(x.size());
    Eigen::FFT<double> fft;
    std::vector<double> in(x.data(), x.data() + n);
    std::vector<std::complex<double>> out;
    fft.fwd(out, in);
    const auto k0 = std::size_t(std::llround(f0_hz * double(n) / kSampleRateHz));
    double spur = 0;
    for (std::size_t k = 1; k <= n / 2; ++k)
        if (k != k0)
            spur = std::max(spur, std::norm(out[k]));
    return 10 * std::log10(std::norm(out[k0]) / spur);
}

Verdict sfdr()
{
    BoardServer server;
    server.board().set_transfer(0, DacTransfer(0.5, pr::cubic_inl_profile(1.5)));
    AwgClient client(std::make_unique<LoopbackTransport>(server));
    const auto traces = pr::sfdr_sweep(client);
    double worst = 0;
    bool span_ok = traces.size() == 25 && traces.front().nominal_hz == 10e6 && traces.back().nominal_hz == 250e6;
    for (const auto& t : traces)
        worst = std::max(worst, std::fabs(t.sfdr_dbc - fft_oracle_sfdr(t.volts, t.frequency_hz)));

    const std::size_t n = 16384, k0 = 1229, k1 = 3001;
    Eigen::VectorXd x(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double ph = 2 * std::numbers::pi * double(i) / double(n);
        x[Eigen::Index(i)] = 32000 * std::sin(ph * double(k0)) + 32 * std::sin(ph * double(k1));
    }
    const double spur = compute_sfdr(x, double(k0) * kSampleRateHz / double(n));
    const bool ok = span_ok && worst <= 0.1 && std::fabs(spur - 60.0) <= 0.1;
    return {ok, std::to_string(traces.size()) + " points " + num(traces.front().nominal_hz / 1e6, 0) + "-" +
                    num(traces.back().nominal_hz / 1e6, 0) + " MHz, max oracle diff " + num(worst, 6) +
                    " dB, constructed spur " + num(spur, 3) + " dBc"};
}

// ---- 5 ----
Verdict jitter(const std::string& src)
{
    const auto s = load_scenario(src + "/scenarios/paper-iii-d.scn");
    Bench b(s);
    pr::JitterOptions opt;
    opt.events = 10000;
    const auto st = jitter_statistics(pr::collect_edge_times(b.ptrs, opt));
    const double lo = 9.22 * 0.9, hi = 10.89 * 1.1;
    bool ok = st.std_ps.size() == 40 && st.min_std_ps >= lo && st.max_std_ps <= hi &&
              std::fabs(st.mean_std_ps - 9.9) <= 0.99;
    std::string skews;
    for (const auto& e : s.jitter.skews) {
        if (e.skew_ps == 0)
            continue;
        const double got = st.skew_ps(Eigen::Index(e.from), Eigen::Index(e.to));
        ok = ok && std::fabs(got - e.skew_ps) <= 1.0;
        skews += ", skew " + std::to_string(e.from) + "->" + std::to_string(e.to) + " " + num(got, 2) + " ps";
    }
    return {ok, std::to_string(st.std_ps.size()) + " channels, std " + num(st.min_std_ps, 2) + "-" +
                    num(st.max_std_ps, 2) + " ps, mean " + num(st.mean_std_ps, 2) + " ps" + skews};
}

// ---- 6 ----
Verdict phase_noise(const std::string& src)
{
    const auto s = load_scenario(src + "/scenarios/phase-noise.scn");
    Bench b(s);
    pr::PhaseNoiseOptions opt;
    opt.record = s.phase_noise.record;
    opt.windows = s.phase_noise.windows;
    std::vector<PhaseNoiseCurve> c;
    for (std::size_t m : {1, 2, 4})
        c.push_back(pr::phase_noise(*b.ptrs[0], s.phase_noise.carrier_bin * m, opt));
    const double one = phase_noise_scaling_check(c[0], c[1]);
    const double two = phase_noise_scaling_check(c[0], c[2]);
    return {std::fabs(one - 6.02) <= 0.5 && std::fabs(two - 12.04) <= 0.7,
            "doubling " + num(one, 2) + " dB, two octaves " + num(two, 2) + " dB"};
}

// ---- 7 ----
bool same_reports(const ScenarioReport& a, const ScenarioReport& b)
{
    if (a.summary() != b.summary() || a.suites.size() != b.suites.size())
        return false;
    for (std::size_t i = 0; i < a.suites.size(); ++i)
        if (a.suites[i].files != b.suites[i].files)
            return false;
    return true;
}

Verdict determinism(const std::string& src)
{
    auto topo = uniform_topology(4, 0.0, 42);
    for (std::size_t g = 0; g < topo.channel_count(); ++g)
        topo.channel(g).skew_s = double(g % 5) * 37e-12;
    std::mt19937_64 rng(42);
    std::vector<ChannelProgram> progs;
    tg::GenOptions gopt;
    gopt.waits = true;
    for (std::size_t g = 0; g < topo.channel_count(); ++g) {
        auto gen = tg::random_valid_program(rng, gopt);
        progs.push_back({gen.sdm, gen.wdm, {}});
    }
    std::vector<double> events;
    for (int i = 0; i < 40; ++i)
        events.push_back(100e-9 + i * 211.7e-9);
    const auto one = run_array(topo, progs, events, 5000, 1);
    const auto again = run_array(topo, progs, events, 5000, 1);
    const auto many = run_array(topo, progs, events, 5000, 4);
    std::size_t diff = 0;
    for (std::size_t g = 0; g < one.size(); ++g)
        for (const auto* o : {&again[g], &many[g]})
            diff += o->run.stream == one[g].run.stream && encode_events(o->run.events) == encode_events(one[g].run.events)
                        ? 0
                        : 1;

    const auto s = load_scenario(src + "/scenarios/determinism.scn");
    auto report = [&](unsigned threads) {
        Bench b(s);
        return run_scenario(s, b.ptrs, {threads});
    };
    const auto r1 = report(1), r2 = report(1), r4 = report(4);
    const bool reports = same_reports(r1, r2) && same_reports(r1, r4);
    return {diff == 0 && reports && r1.pass(),
            std::to_string(one.size()) + " channels x 3 runs, " + std::to_string(diff) +
                " stream/event differences; determinism scenario reports " + (reports ? "identical" : "differ")};
}

// ---- 8 ----
Verdict robustness()
{
    const auto f = fuzz::run_frame_fuzz(99, 1000000);
    BoardServer server;
    TcpServer tcp(server, {"127.0.0.1", 0});
    tcp.start();
    AwgClient c(TcpTransport::connect(tcp.endpoint()));
    std::size_t mismatched = 0;
    std::mt19937_64 rng(8);
    for (std::uint8_t ch = 0; ch < kChannelsPerBoard; ++ch) {
        std::vector<SampleCode> img(kWdmCapacitySamples);
        for (auto& v : img)
            v = static_cast<SampleCode>(rng());
        c.write_wdm(ch, 0, img);
        mismatched += c.read_wdm(ch, 0, kWdmCapacityWords) == img ? 0 : 1;
    }
    tcp.stop();
    return {f.frames == 1000000 && f.violations == 0 && mismatched == 0,
            std::to_string(f.frames) + " fuzzed frames, " + std::to_string(f.violations) + " violations; " +
                std::to_string(kChannelsPerBoard - mismatched) + "/4 full images bit-exact over TCP"};
}

// ---- 9 ----
Verdict throughput()
{
    // A 1024-word tone looped by JUMP: the sequencer streams words and the
    // DAC converts every sample.
    WaveformMemory wdm;
    std::vector<SampleCode> tone = pr::coherent_tone(1024 * kSamplesPerWord, 101, 30000);
    wdm.write(0, tone);
    const SequenceMemory sdm(0, {tg::entry(0, 512), tg::entry(512, 512, 1, tg::kJump, TriggerSource::None, 0)});
    const DacTransfer dac(0.5, pr::random_inl_profile(3, 1.5));
    const std::uint64_t cycles = 4'000'000;
    // converted block by block into one buffer, as a streaming front end would
    std::vector<double> volts(1 << 16);
    double checksum = 0;
    const auto t0 = Clock::now();
    const auto run = run_program(sdm, wdm, {}, cycles);
    const std::span<const SampleCode> codes(run.stream.samples);
    for (std::size_t i = 0; i < codes.size(); i += volts.size()) {
        const auto block = codes.subspan(i, std::min(volts.size(), codes.size() - i));
        dac.convert(block, volts);
        checksum += volts[block.size() - 1];
    }
    const double secs = seconds_since(t0);
    const double rate = double(codes.size()) / secs;
    const bool produced = codes.size() == cycles * kSamplesPerWord && run.starvation_events == 0 && std::isfinite(checksum);
    return {produced && rate >= 100e6,
            num(rate / 1e6, 1) + " MS/s/channel over " + std::to_string(codes.size()) + " samples"};
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Acceptance criteria, one line each"};
    std::string only;
    std::string src = AWG_SOURCE_DIR;
    app.add_option("--only", only, "comma list of criteria to run");
    app.add_option("--source-dir", src, "checkout holding scenarios/");
    CLI11_PARSE(app, argc, argv);

    std::set<int> pick;
    for (const auto& s : cfg::split_list(only))
        pick.insert(int(cfg::parse_u64(s, "--only")));

    const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
        {"seamless switching", seamless},
        {"minimum length", min_length},
        {"linearity closed loop", linearity},
        {"sfdr sweep", sfdr},
        {"jitter statistics", [&] { return jitter(src); }},
        {"phase-noise scaling", [&] { return phase_noise(src); }},
        {"determinism", [&] { return determinism(src); }},
        {"protocol robustness", robustness},
        {"throughput", throughput},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = int(i) + 1;
        if (!pick.empty() && !pick.count(id))
            continue;
        Verdict v;
        try {
            v = criteria[i].second();
        } catch (const std::exception& e) {
            v = {false, std::string("error: ") + e.what()};
        }
        failed += v.pass ? 0 : 1;
        std::printf("%s %d %s: %s\n", v.pass ? "PASS" : "FAIL", id, criteria[i].first, v.detail.c_str());
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
