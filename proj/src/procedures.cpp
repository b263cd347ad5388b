#include "awg/procedures.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <thread>

#include "awg/error.hpp"

namespace awg::procedures {

namespace {

std::uint64_t start_cycle(AwgClient& board, std::uint8_t ch)
{
    for (const auto& e : board.events(ch))
        if (e.kind == EventKind::Start)
            return e.cycle;
    throw Error(Errc::InvariantViolation, "channel " + std::to_string(ch) + " never started");
}

Eigen::VectorXd to_vector(const std::vector<double>& v) { return Eigen::Map<const Eigen::VectorXd>(v.data(), Eigen::Index(v.size())); }

} // namespace

Eigen::VectorXd random_inl_profile(std::uint64_t seed, double peak_lsb)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    constexpr int kModes = 24;
    std::array<double, kModes> amp{};
    for (int j = 0; j < kModes; ++j)
        amp[j] = g(rng) / (j + 1);
    const double n = double(kCodeCount - 1);
    Eigen::VectorXd p(kCodeCount);
    for (Eigen::Index k = 0; k < p.size(); ++k) {
        double s = 0;
        for (int j = 0; j < kModes; ++j)
            s += amp[j] * std::sin(std::numbers::pi * (j + 1) * double(k) / n);
        p[k] = s;
    }
    p[0] = 0;
    p[p.size() - 1] = 0;
    const double peak = p.cwiseAbs().maxCoeff();
    if (peak == 0)
        return p;
    return p * (peak_lsb / peak);
}

Eigen::VectorXd cubic_inl_profile(double a_lsb)
{
    Eigen::VectorXd p(kCodeCount);
    for (Eigen::Index k = 0; k < p.size(); ++k) {
        const double x = double(k - kCodeOffset) / kCodeOffset;
        p[k] = a_lsb * (x * x * x - x);
    }
    return p;
}

Eigen::VectorXd ramp_sweep(AwgClient& board, const RampSweepOptions& opt)
{
    if (opt.dwell_cycles < kMinEntryWords || opt.dwell_cycles % kMinEntryWords != 0)
        throw Error(Errc::ConfigError, "dwell must be a positive multiple of 4 cycles");
    if (opt.batch_codes == 0 || opt.batch_codes > kSdmCapacity || kCodeCount % opt.batch_codes != 0)
        throw Error(Errc::ConfigError, "batch size must divide 65536 and fit the SDM");
    const std::uint8_t ch = opt.channel;
    const std::uint32_t n = opt.batch_codes;
    const std::uint32_t seg = kMinEntryWords;
    Eigen::VectorXd v(kCodeCount);

    std::vector<SampleCode> wave(std::size_t(n) * seg * kSamplesPerWord);
    std::vector<SequenceEntry> sdm(n);
    for (std::uint32_t k = 0; k < n; ++k) {
        auto& e = sdm[k];
        e.start_addr = k * seg;
        e.length = seg;
        e.counter = opt.dwell_cycles / seg;
    }
    sdm.front().flags = static_cast<std::uint8_t>(EntryFlag::WaitTrigger);
    sdm.front().trigger = TriggerSource::Software;
    sdm.back().flags |= static_cast<std::uint8_t>(EntryFlag::EndOfSequence);

    for (std::uint32_t first = 0; first < kCodeCount; first += n) {
        for (std::uint32_t k = 0; k < n; ++k) {
            const auto code = static_cast<SampleCode>(int(first + k) - kCodeOffset);
            std::fill_n(wave.begin() + std::ptrdiff_t(k) * seg * kSamplesPerWord, seg * kSamplesPerWord, code);
        }
        board.write_wdm(ch, 0, wave);
        const auto report = board.write_sdm(ch, sdm);
        if (!report.ok())
            throw Error(Errc::InvariantViolation, "sweep program rejected: " + report.describe());
        const std::uint64_t armed = board.arm(ch);
        board.soft_trigger(ch);
        board.advance(std::uint64_t(n) * opt.dwell_cycles + kTriggerLatencyCycles + 8);
        const std::uint64_t word0 = start_cycle(board, ch) - armed;
        const std::uint64_t step = std::uint64_t(opt.dwell_cycles) * kSamplesPerWord;
        const auto mid = board.probe(ch, ProbeTap::Filtered, word0 * kSamplesPerWord + step / 2, n,
                                     static_cast<std::uint32_t>(step));
        std::copy(mid.begin(), mid.end(), v.data() + first);
        board.stop(ch);
    }
    return v;
}

std::vector<SampleCode> coherent_tone(std::size_t n, std::size_t bin, double amplitude_codes)
{
    std::vector<SampleCode> s(n);
    for (std::size_t i = 0; i < n; ++i) {
        // exact phase reduction keeps the tone periodic in n to the last bit
        const double ph = 2.0 * std::numbers::pi * double((bin * i) % n) / double(n);
        s[i] = static_cast<SampleCode>(std::lround(amplitude_codes * std::sin(ph)));
    }
    return s;
}

namespace {

/// Loads `codes` as one endlessly repeating segment and plays it.
/// Returns the record word at which playback starts.
std::uint64_t play_loop(AwgClient& board, std::uint8_t ch, const std::vector<SampleCode>& codes,
                        std::uint64_t cycles)
{
    const auto words = static_cast<std::uint32_t>(codes.size() / kSamplesPerWord);
    board.write_wdm(ch, 0, codes);
    SequenceEntry e;
    e.length = words;
    e.counter = 0;
    const std::vector<SequenceEntry> sdm{e};
    const auto report = board.write_sdm(ch, sdm);
    if (!report.ok())
        throw Error(Errc::InvariantViolation, "tone program rejected: " + report.describe());
    const std::uint64_t armed = board.arm(ch);
    board.advance(cycles + 8);
    return start_cycle(board, ch) - armed;
}

void check_record(std::size_t n)
{
    if (n == 0 || (n & (n - 1)) != 0 || n % kSamplesPerWord != 0 || n > kWdmCapacitySamples)
        throw Error(Errc::ConfigError, "record length must be a power of two that fits the WDM");
}

} // namespace

SfdrTrace sfdr_point(AwgClient& board, double nominal_hz, const SfdrOptions& opt)
{
    check_record(opt.record);
    SfdrTrace t;
    t.nominal_hz = nominal_hz;
    t.frequency_hz = nearest_coherent_frequency(nominal_hz, opt.record);
    t.codes = coherent_tone(opt.record, coherent_bin(t.frequency_hz, opt.record), opt.amplitude_codes);
    const std::uint64_t word0 = play_loop(board, opt.channel, t.codes, opt.record / kSamplesPerWord);
    const auto v = board.probe(opt.channel, opt.tap, word0 * kSamplesPerWord, static_cast<std::uint32_t>(opt.record));
    board.stop(opt.channel);
    t.volts = to_vector(v);
    t.sfdr_dbc = compute_sfdr(t.volts, t.frequency_hz);
    return t;
}

std::vector<SfdrTrace> sfdr_sweep(AwgClient& board, const SfdrOptions& opt)
{
    std::vector<SfdrTrace> out;
    for (double f : sfdr_sweep_frequencies())
        out.push_back(sfdr_point(board, f, opt));
    return out;
}

std::vector<std::size_t> PhaseNoiseOptions::default_offsets()
{
    std::vector<std::size_t> o;
    for (std::size_t m = 4; m <= 1024; m *= 2)
        o.push_back(m);
    return o;
}

PhaseNoiseCurve phase_noise(AwgClient& board, std::size_t carrier_bin, const PhaseNoiseOptions& opt)
{
    check_record(opt.record);
    if (opt.windows == 0)
        throw Error(Errc::ConfigError, "phase noise needs at least one window");
    const auto codes = coherent_tone(opt.record, carrier_bin, opt.amplitude_codes);
    const std::uint64_t word0 = play_loop(board, opt.channel, codes, opt.windows * opt.record / kSamplesPerWord);
    std::vector<Eigen::VectorXd> records;
    for (std::size_t w = 0; w < opt.windows; ++w)
        records.push_back(to_vector(board.probe(opt.channel, ProbeTap::Jittered,
                                                word0 * kSamplesPerWord + w * opt.record,
                                                static_cast<std::uint32_t>(opt.record))));
    board.stop(opt.channel);
    return measure_phase_noise(records, carrier_bin, opt.offset_bins);
}

ChannelProgram pulse_program()
{
    ChannelProgram p;
    std::vector<SampleCode> s(64, -16384);
    std::fill(s.begin() + 8, s.begin() + 32, SampleCode{16384});
    p.wdm.write(0, s);
    SequenceEntry wait;
    wait.length = 4;
    wait.flags = static_cast<std::uint8_t>(EntryFlag::WaitTrigger);
    wait.trigger = TriggerSource::External;
    SequenceEntry back;
    back.start_addr = 4;
    back.length = 4;
    back.flags = static_cast<std::uint8_t>(EntryFlag::Jump);
    back.jump_target = 0;
    p.sdm.assign({wait, back});
    return p;
}

namespace {

void collect_board(AwgClient& b, std::size_t board_index, const JitterOptions& opt, Eigen::MatrixXd& out)
{
    const auto prog = pulse_program();
    const auto image = prog.wdm.read(0, 8);
    std::array<std::uint64_t, kChannelsPerBoard> armed{};
    for (std::uint8_t ch = 0; ch < kChannelsPerBoard; ++ch) {
        b.write_wdm(ch, 0, image);
        if (!b.write_sdm(ch, prog.sdm.entries()).ok())
            throw Error(Errc::InvariantViolation, "pulse program rejected");
        armed[ch] = b.arm(ch);
    }
    const std::uint64_t base = b.advance(16);
    std::uint64_t now = base;
    for (std::size_t first = 0; first < opt.events; first += opt.events_per_batch) {
        const std::size_t last = std::min(opt.events, first + opt.events_per_batch);
        std::vector<double> t(last - first);
        for (std::size_t e = first; e < last; ++e) {
            t[e - first] = (double(base) + double(opt.period_cycles) * double(e) + opt.phase_cycles) * kCyclePeriodS;
            b.ext_trigger(t[e - first]);
        }
        const std::uint64_t end = base + std::uint64_t(opt.period_cycles) * last;
        now = b.advance(end - now);
        for (std::uint8_t ch = 0; ch < kChannelsPerBoard; ++ch) {
            const auto edges = b.edges(ch, opt.threshold);
            if (edges.size() != t.size())
                throw Error(Errc::InvariantViolation, "board " + std::to_string(board_index) + " channel " +
                                                          std::to_string(ch) + ": " + std::to_string(edges.size()) +
                                                          " edges for " + std::to_string(t.size()) + " events");
            const auto row = Eigen::Index(board_index * kChannelsPerBoard + ch);
            for (std::size_t i = 0; i < t.size(); ++i)
                out(row, Eigen::Index(first + i)) = edges[i].time_s - t[i];
            b.discard(ch, now - armed[ch]);
        }
    }
    for (std::uint8_t ch = 0; ch < kChannelsPerBoard; ++ch)
        b.stop(ch);
}

} // namespace

Eigen::MatrixXd collect_edge_times(std::span<AwgClient* const> boards, const JitterOptions& opt)
{
    if (opt.events < 2)
        throw Error(Errc::TooFewEvents, "jitter needs at least two events");
    if (opt.events_per_batch == 0 || opt.period_cycles < 16)
        throw Error(Errc::ConfigError, "bad jitter batch or period");
    Eigen::MatrixXd out(Eigen::Index(boards.size() * kChannelsPerBoard), Eigen::Index(opt.events));
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(boards.size());
    auto worker = [&] {
        for (std::size_t i; (i = next++) < boards.size();) {
            try {
                collect_board(*boards[i], i, opt, out);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const unsigned n = std::max(1u, std::min<unsigned>(opt.threads, static_cast<unsigned>(boards.size())));
    std::vector<std::thread> pool;
    for (unsigned k = 1; k < n; ++k)
        pool.emplace_back(worker);
    worker();
    for (auto& th : pool)
        th.join();
    for (auto& e : errors)
        if (e)
            std::rethrow_exception(e);
    return out;
}

PlaybackCheck check_playback(AwgClient& board, std::uint8_t channel, const ChannelProgram& program,
                             std::span<const std::uint64_t> trigger_cycles)
{
    std::vector<std::uint64_t> trig(trigger_cycles.begin(), trigger_cycles.end());
    std::sort(trig.begin(), trig.end());
    const auto default_source =
        static_cast<TriggerSource>(board.reg_read(proto::reg::TriggerDefault0 + 4u * channel) & 0x3);
    std::vector<TriggerEvent> events;
    for (auto c : trig)
        events.push_back({c, TriggerSource::Software});
    std::uint64_t play = 0;
    for (const auto& e : program.sdm.entries())
        play += std::uint64_t(e.length) * std::max<std::uint32_t>(e.counter, 1);
    const std::uint64_t horizon = (trig.empty() ? 0 : trig.back()) + play + 64;
    const auto expect = flatten_oracle(program.sdm, program.wdm, events, horizon, default_source);

    // only the part of the image the program uses goes over the wire
    std::uint64_t top = 0;
    for (const auto& e : program.sdm.entries())
        top = std::max<std::uint64_t>(top, std::uint64_t(e.start_addr) + e.length);
    board.write_wdm(channel, 0, program.wdm.read(0, top));
    const auto report = board.write_sdm(channel, program.sdm.entries());
    if (!report.ok())
        throw Error(Errc::InvariantViolation, "program rejected: " + report.describe());
    const std::uint64_t armed = board.arm(channel);
    std::uint64_t now = armed;
    for (auto c : trig) {
        if (armed + c > now)
            now = board.advance(armed + c - now);
        board.soft_trigger(channel);
    }
    const std::uint64_t end = armed + expect.words() + 1;
    if (end > now)
        board.advance(end - now);
    const auto got = board.capture(channel, 0, static_cast<std::uint32_t>(expect.words()));
    const auto log = board.events(channel);
    board.stop(channel);

    PlaybackCheck r;
    auto bytes = pack_samples(got.samples);
    bytes.insert(bytes.end(), got.valid.begin(), got.valid.end());
    r.stream_crc = proto::crc32(bytes);
    r.events = log.size();
    r.events_crc = proto::crc32(encode_events(log));
    r.words = expect.words();
    for (std::size_t w = 0; w < r.words; ++w) {
        const bool same = got.valid[w] == expect.valid[w] &&
                          std::equal(expect.samples.begin() + std::ptrdiff_t(w * kSamplesPerWord),
                                     expect.samples.begin() + std::ptrdiff_t((w + 1) * kSamplesPerWord),
                                     got.samples.begin() + std::ptrdiff_t(w * kSamplesPerWord));
        if (!same)
            ++r.mismatched_words;
        if (expect.valid[w] && !got.valid[w])
            ++r.gap_words;
    }
    return r;
}

ChannelProgram random_program(std::mt19937_64& rng, std::size_t max_entries)
{
    auto pick = [&](std::uint32_t lo, std::uint32_t hi) { return std::uniform_int_distribution<std::uint32_t>(lo, hi)(rng); };
    constexpr std::uint32_t kRegion = 1024;
    ChannelProgram p;
    std::vector<SampleCode> data(std::size_t(kRegion) * kSamplesPerWord);
    for (auto& v : data)
        v = static_cast<SampleCode>(rng());
    p.wdm.write(0, data);
    const std::size_t n = pick(1, static_cast<std::uint32_t>(std::max<std::size_t>(max_entries, 1)));
    std::vector<SequenceEntry> entries(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto& e = entries[i];
        e.length = pick(kMinEntryWords, 12);
        e.start_addr = pick(0, kRegion - e.length);
        e.counter = pick(1, 3);
        if (pick(0, 5) == 0) {
            e.flags = static_cast<std::uint8_t>(EntryFlag::WaitTrigger);
            e.trigger = TriggerSource::Software;
        }
        if (pick(0, 7) == 0)
            e.flags |= static_cast<std::uint8_t>(EntryFlag::HoldLast);
    }
    entries.back().flags |= static_cast<std::uint8_t>(EntryFlag::EndOfSequence);
    p.sdm.assign(std::move(entries));
    return p;
}

std::vector<std::uint64_t> trigger_plan(const ChannelProgram& program, std::uint64_t spacing)
{
    std::uint64_t play = 0;
    std::uint64_t waits = 0;
    for (const auto& e : program.sdm.entries()) {
        play += std::uint64_t(e.length) * std::max<std::uint32_t>(e.counter, 1);
        waits += e.wait_trigger();
    }
    if (waits == 0)
        return {};
    // a trigger every `spacing` cycles; ones that land while the channel is
    // playing are ignored, the next one releases the wait
    const std::uint64_t span = play + waits * (spacing + kTriggerLatencyCycles + 1);
    std::vector<std::uint64_t> out;
    for (std::uint64_t c = spacing; c <= span + spacing; c += spacing)
        out.push_back(c);
    return out;
}

} // namespace awg::procedures
