#include "awg/sync.hpp"

#include <atomic>
#include <cmath>
#include <sstream>
#include <thread>

#include "awg/config_text.hpp"
#include "awg/error.hpp"

namespace awg {

using namespace cfg;

namespace {

std::uint64_t channel_seed(std::uint64_t rng_seed, std::size_t global)
{
    return splitmix64(rng_seed ^ (0x632BE59BD9B4E019ull * (global + 1)));
}

} // namespace

BoardTopology uniform_topology(std::size_t boards, double jitter_sigma_s, std::uint64_t rng_seed,
                               std::uint32_t d_pipe_cycles)
{
    BoardTopology t;
    t.boards.resize(boards);
    for (std::size_t b = 0; b < boards; ++b) {
        t.boards[b].board_id = static_cast<std::uint16_t>(b);
        for (auto& ch : t.boards[b].channels) {
            ch.pipeline_delay_cycles = d_pipe_cycles;
            ch.jitter_sigma_s = jitter_sigma_s;
        }
    }
    reseed(t, rng_seed);
    return t;
}

void reseed(BoardTopology& topo, std::uint64_t rng_seed)
{
    topo.rng_seed = rng_seed;
    for (std::size_t g = 0; g < topo.channel_count(); ++g)
        topo.channel(g).rng_seed = channel_seed(rng_seed, g);
}

BoardTopology parse_topology(std::string_view text)
{
    cfg::KeyValues kv(text, "topology");
    for (const auto& [key, val] : kv.rest())
        if (val.empty())
            throw Error(Errc::ConfigError, "topology: empty value for " + key);
    auto take = [&](const std::string& key) { return kv.take(key); };

    const auto boards_s = take("boards");
    if (!boards_s)
        throw Error(Errc::ConfigError, "topology needs 'boards'");
    const auto boards = parse_u64(*boards_s, "boards");
    if (boards == 0 || boards > 256)
        throw Error(Errc::ConfigError, "boards must be in 1..256");

    std::uint32_t d_pipe = 16;
    if (auto v = take("d_pipe_cycles"))
        d_pipe = static_cast<std::uint32_t>(parse_u64(*v, "d_pipe_cycles"));
    double sigma = 0;
    if (auto v = take("jitter_sigma_ps"))
        sigma = parse_double(*v, "jitter_sigma_ps") * 1e-12;
    std::uint64_t seed = 0;
    if (auto v = take("rng_seed"))
        seed = parse_u64(*v, "rng_seed");

    BoardTopology topo = uniform_topology(boards, sigma, seed, d_pipe);
    // per-channel sigma drawn uniformly from [lo, hi], reproducibly from rng_seed
    if (auto v = take("jitter_sigma_range_ps")) {
        const auto r = parse_doubles(*v, "jitter_sigma_range_ps");
        if (r.size() != 2 || r[0] < 0 || r[1] < r[0])
            throw Error(Errc::ConfigError, "jitter_sigma_range_ps needs lo, hi with 0 <= lo <= hi");
        for (std::size_t g = 0; g < topo.channel_count(); ++g) {
            const double u = double(splitmix64(seed ^ (0x9E6C63D0676A9A99ull * (g + 1))) >> 11) * 0x1p-53;
            topo.channel(g).jitter_sigma_s = (r[0] + u * (r[1] - r[0])) * 1e-12;
        }
    }
    if (auto v = take("clock_hz")) {
        topo.clock_hz = parse_double(*v, "clock_hz");
        if (topo.clock_hz != kWordClockHz)
            throw Error(Errc::ConfigError, "clock_hz must be 250000000 (the word clock is fixed)");
    }

    for (const auto& [key, val] : kv.rest()) {
        std::size_t idx = 0;
        std::string field;
        if (split_indexed(key, "board.", idx, field)) {
            if (idx >= topo.boards.size())
                throw Error(Errc::ConfigError, key + ": no such board");
            auto& b = topo.boards[idx];
            if (field == "fanout_delay_ps")
                b.fanout_delay_s = parse_double(val, key) * 1e-12;
            else if (field == "id")
                b.board_id = static_cast<std::uint16_t>(parse_u64(val, key));
            else
                throw Error(Errc::ConfigError, "unknown key " + key);
            if (b.fanout_delay_s < 0)
                throw Error(Errc::ConfigError, key + " must not be negative");
        } else if (split_indexed(key, "channel.", idx, field)) {
            if (idx >= topo.channel_count())
                throw Error(Errc::ConfigError, key + ": no such channel");
            auto& ch = topo.channel(idx);
            if (field == "skew_ps")
                ch.skew_s = parse_double(val, key) * 1e-12;
            else if (field == "jitter_sigma_ps")
                ch.jitter_sigma_s = parse_double(val, key) * 1e-12;
            else if (field == "d_pipe_cycles")
                ch.pipeline_delay_cycles = static_cast<std::uint32_t>(parse_u64(val, key));
            else
                throw Error(Errc::ConfigError, "unknown key " + key);
            if (ch.jitter_sigma_s < 0)
                throw Error(Errc::ConfigError, key + " must not be negative");
        } else {
            throw Error(Errc::ConfigError, "unknown key " + key);
        }
    }
    return topo;
}

BoardTopology load_topology(const std::string& path)
{
    return parse_topology(read_file(path));
}

std::string format_topology(const BoardTopology& topo)
{
    std::ostringstream os;
    os << "boards = " << topo.boards.size() << "\n";
    os << "clock_hz = " << fmt_double(topo.clock_hz) << "\n";
    os << "rng_seed = " << topo.rng_seed << "\n";
    for (std::size_t b = 0; b < topo.boards.size(); ++b) {
        os << "board." << b << ".id = " << topo.boards[b].board_id << "\n";
        os << "board." << b << ".fanout_delay_ps = " << fmt_double(topo.boards[b].fanout_delay_s * 1e12) << "\n";
    }
    for (std::size_t g = 0; g < topo.channel_count(); ++g) {
        const auto& ch = topo.channel(g);
        os << "channel." << g << ".d_pipe_cycles = " << ch.pipeline_delay_cycles << "\n";
        os << "channel." << g << ".skew_ps = " << fmt_double(ch.skew_s * 1e12) << "\n";
        os << "channel." << g << ".jitter_sigma_ps = " << fmt_double(ch.jitter_sigma_s * 1e12) << "\n";
    }
    return os.str();
}

std::uint64_t quantize_to_cycle(double t_s, double clock_hz)
{
    if (!(t_s >= 0))
        throw Error(Errc::InvariantViolation, "trigger time must be >= 0");
    const double period = 1.0 / clock_hz;
    auto c = static_cast<std::uint64_t>(std::ceil(t_s * clock_hz));
    while (double(c) * period < t_s)
        ++c;
    while (c > 0 && double(c - 1) * period >= t_s)
        --c;
    return c;
}

std::vector<TriggerArrival> distribute_trigger(double event_time_s, const BoardTopology& topo)
{
    if (!(event_time_s >= 0))
        throw Error(Errc::InvariantViolation, "event time must be >= 0");
    std::vector<TriggerArrival> out;
    out.reserve(topo.channel_count());
    for (const auto& b : topo.boards)
        for (const auto& ch : b.channels) {
            TriggerArrival a;
            a.time_s = std::max(0.0, event_time_s + b.fanout_delay_s + ch.skew_s);
            a.cycle = quantize_to_cycle(a.time_s, topo.clock_hz);
            a.quantization_s = double(a.cycle) / topo.clock_hz - a.time_s;
            out.push_back(a);
        }
    return out;
}

std::vector<std::uint64_t> rising_edge_indices(std::span<const SampleCode> samples, SampleCode threshold)
{
    std::vector<std::uint64_t> out;
    for (std::size_t k = 1; k < samples.size(); ++k)
        if (samples[k - 1] < threshold && samples[k] >= threshold)
            out.push_back(k);
    return out;
}

std::vector<TimedStream> run_array(const BoardTopology& topo, std::span<const ChannelProgram> programs,
                                   std::span<const double> event_times_s, std::uint64_t n_cycles, unsigned threads)
{
    const std::size_t n = topo.channel_count();
    if (programs.size() != n)
        throw Error(Errc::ConfigError, "run_array needs one program per channel: " + std::to_string(n) +
                                           " channels, " + std::to_string(programs.size()) + " programs");
    for (std::size_t ch = 0; ch < n; ++ch) {
        const auto report = validate_program(programs[ch].sdm, programs[ch].wdm);
        if (!report.ok())
            throw Error(Errc::InvariantViolation, "channel " + std::to_string(ch) + ": " + report.describe());
    }

    std::vector<TimedStream> out(n);
    std::vector<std::vector<TriggerArrival>> arrivals(n);
    for (double t : event_times_s) {
        const auto a = distribute_trigger(t, topo);
        for (std::size_t ch = 0; ch < n; ++ch)
            arrivals[ch].push_back(a[ch]);
    }

    auto run_one = [&](std::size_t ch) {
        std::vector<TriggerEvent> trig;
        trig.reserve(arrivals[ch].size());
        for (const auto& a : arrivals[ch])
            trig.push_back({a.cycle, TriggerSource::External});
        auto& ts = out[ch];
        ts.channel = ch;
        ts.timing = topo.channel(ch);
        ts.arrivals = arrivals[ch];
        ts.run = run_program(programs[ch].sdm, programs[ch].wdm, trig, n_cycles, programs[ch].config,
                             static_cast<std::uint8_t>(ch));
    };

    const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
    if (workers == 1) {
        for (std::size_t ch = 0; ch < n; ++ch)
            run_one(ch);
        return out;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (unsigned w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
            try {
                for (std::size_t ch = next++; ch < n; ch = next++)
                    run_one(ch);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    for (auto& t : pool)
        t.join();
    for (auto& e : errors)
        if (e)
            std::rethrow_exception(e);
    return out;
}

} // namespace awg
