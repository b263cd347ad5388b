#include "awg/board.hpp"

#include "awg/error.hpp"
#include "awg/spectrum.hpp"

namespace awg {

namespace {

std::uint8_t source_bit(TriggerSource s) { return static_cast<std::uint8_t>(1u << static_cast<unsigned>(s)); }

} // namespace

Board::Board(BoardConfig config) : config_(std::move(config)), taps_(lowpass_taps())
{
    for (std::size_t ch = 0; ch < kChannelsPerBoard; ++ch) {
        auto& c = channels_[ch];
        const auto id = static_cast<std::uint8_t>(ch);
        c.wdm = WaveformMemory(id);
        c.sdm = SequenceMemory(id);
        c.seq = ChannelSequencer(id);
        c.transfer = DacTransfer(config_.v_fullscale);
    }
    regs_.write(proto::reg::BoardId, config_.descriptor.board_id);
    if (config_.descriptor.channels[0].pipeline_delay_cycles != proto::reg::kDefaultDPipe)
        regs_.write(proto::reg::DPipe, config_.descriptor.channels[0].pipeline_delay_cycles);
}

Board::Channel& Board::chan(std::size_t ch)
{
    if (ch >= kChannelsPerBoard)
        throw Error(Errc::OutOfRange, "no channel " + std::to_string(ch));
    return channels_[ch];
}

const Board::Channel& Board::chan(std::size_t ch) const
{
    if (ch >= kChannelsPerBoard)
        throw Error(Errc::OutOfRange, "no channel " + std::to_string(ch));
    return channels_[ch];
}

std::uint16_t Board::board_id() const { return static_cast<std::uint16_t>(regs_.read(proto::reg::BoardId)); }

ValidationReport Board::validate(std::size_t ch) const { return validate_program(chan(ch).sdm, chan(ch).wdm); }

TimingModel Board::timing(std::size_t ch) const
{
    TimingModel t = config_.descriptor.channels.at(ch);
    t.pipeline_delay_cycles = regs_.read(proto::reg::DPipe);
    t.skew_s += config_.descriptor.fanout_delay_s;
    return t;
}

void Board::arm(std::size_t ch)
{
    auto& c = chan(ch);
    if (c.sdm.empty())
        throw Error(Errc::NoProgram, "channel " + std::to_string(ch) + " has no program");
    const auto report = validate_program(c.sdm, c.wdm);
    if (!report.ok())
        throw Error(Errc::InvariantViolation, "channel " + std::to_string(ch) + ": " + report.describe());
    SequencerConfig cfg;
    cfg.default_trigger = regs_.default_trigger(ch);
    c.seq.set_config(cfg);
    c.seq.set_cycle(cycle_);
    c.events.clear();
    c.seq.arm(c.sdm, &c.events);
    c.rec = Recording{};
    c.rec.arm_cycle = cycle_;
    c.recording = true;
    c.pending.erase(c.pending.begin(), c.pending.lower_bound(cycle_));
}

void Board::stop(std::size_t ch)
{
    auto& c = chan(ch);
    c.seq.stop();
    c.recording = false;
    // triggers asserted before the stop must not release the next run
    c.pending.clear();
}

std::uint64_t Board::soft_trigger(std::size_t ch)
{
    chan(ch).pending[cycle_] |= source_bit(TriggerSource::Software);
    return cycle_;
}

std::array<std::uint64_t, kChannelsPerBoard> Board::external_trigger(double event_time_s)
{
    std::array<std::uint64_t, kChannelsPerBoard> out{};
    const auto& d = config_.descriptor;
    for (std::size_t ch = 0; ch < kChannelsPerBoard; ++ch) {
        const double t = event_time_s + d.fanout_delay_s + d.channels[ch].skew_s;
        if (!(t >= 0))
            throw Error(Errc::OutOfRange, "trigger arrival before time zero");
        out[ch] = quantize_to_cycle(t);
        if (out[ch] < cycle_)
            throw Error(Errc::OutOfRange, "trigger arrival at cycle " + std::to_string(out[ch]) +
                                              " is before the current cycle " + std::to_string(cycle_));
    }
    for (std::size_t ch = 0; ch < kChannelsPerBoard; ++ch)
        channels_[ch].pending[out[ch]] |= source_bit(TriggerSource::External);
    return out;
}

void Board::trim(Channel& c)
{
    const std::size_t cap = std::max<std::size_t>(config_.record_cap_words, 1);
    if (c.rec.valid.size() <= cap)
        return;
    const std::size_t drop = c.rec.valid.size() - cap / 2;
    c.rec.valid.erase(c.rec.valid.begin(), c.rec.valid.begin() + static_cast<std::ptrdiff_t>(drop));
    c.rec.samples.erase(c.rec.samples.begin(),
                        c.rec.samples.begin() + static_cast<std::ptrdiff_t>(drop * kSamplesPerWord));
    c.rec.first_word += drop;
}

void Board::advance(std::uint64_t cycles)
{
    using namespace proto;
    const std::uint32_t run = regs_.read(reg::RunControl);
    const std::uint64_t timer = (run & reg::kRunTimerEnable) ? regs_.read(reg::TimerPeriod) : 0;
    const std::uint64_t status_period =
        (run & reg::kRunStatusEnable) && status_sink_ ? regs_.read(reg::StatusPeriod) : 0;
    const std::uint64_t chunk = std::max<std::uint64_t>(config_.record_cap_words / 2, 1);

    while (cycles > 0) {
        const std::uint64_t n = std::min(cycles, chunk);
        const std::uint64_t end = cycle_ + n;
        std::array<std::size_t, kChannelsPerBoard> base{};
        for (std::size_t ch = 0; ch < kChannelsPerBoard; ++ch) {
            auto& c = channels_[ch];
            if (!c.recording)
                continue;
            base[ch] = c.rec.valid.size();
            c.rec.valid.resize(base[ch] + n);
            c.rec.samples.resize((base[ch] + n) * kSamplesPerWord);
        }
        for (; cycle_ < end; ++cycle_) {
            const bool timer_fire = timer != 0 && cycle_ % timer == 0;
            const std::size_t i = static_cast<std::size_t>(n - (end - cycle_));
            for (std::size_t ch = 0; ch < kChannelsPerBoard; ++ch) {
                auto& c = channels_[ch];
                std::uint8_t mask = 0;
                if (!c.pending.empty() && c.pending.begin()->first == cycle_) {
                    mask = c.pending.begin()->second;
                    c.pending.erase(c.pending.begin());
                }
                if (!c.recording)
                    continue;
                CycleInputs in;
                in.external_trigger = mask & source_bit(TriggerSource::External);
                in.software_trigger = mask & source_bit(TriggerSource::Software);
                in.timer_fire = timer_fire;
                const std::size_t w = base[ch] + i;
                c.rec.valid[w] = c.seq.step(
                    c.sdm, c.wdm, in,
                    std::span<SampleCode, kSamplesPerWord>(c.rec.samples.data() + w * kSamplesPerWord, kSamplesPerWord),
                    &c.events);
            }
            if (status_period != 0 && (cycle_ + 1) % status_period == 0) {
                ++cycle_;
                status_sink_(status_packet());
                --cycle_;
            }
        }
        for (auto& c : channels_)
            if (c.recording)
                trim(c);
        cycles -= n;
    }
}

proto::StatusPacket Board::status_packet() const
{
    proto::StatusPacket p;
    p.board_id = board_id();
    p.uptime_cycles = cycle_;
    p.firmware_version = regs_.read(proto::reg::FwVersion);
    for (std::size_t ch = 0; ch < kChannelsPerBoard; ++ch) {
        const auto& s = channels_[ch].seq.state();
        p.channels[ch] = {s.status, s.current_index, s.executed_words};
    }
    return p;
}

void Board::discard(std::size_t ch, std::uint64_t word)
{
    auto& r = chan(ch).rec;
    if (word <= r.first_word)
        return;
    const auto drop = static_cast<std::size_t>(std::min<std::uint64_t>(word - r.first_word, r.valid.size()));
    r.valid.erase(r.valid.begin(), r.valid.begin() + static_cast<std::ptrdiff_t>(drop));
    r.samples.erase(r.samples.begin(), r.samples.begin() + static_cast<std::ptrdiff_t>(drop * kSamplesPerWord));
    r.first_word += drop;
}

double Board::sample_volts(const Channel& c, std::uint64_t sample) const
{
    const std::uint64_t first = c.rec.first_word * kSamplesPerWord;
    if (sample < first || sample >= first + c.rec.samples.size())
        return 0.0;
    return c.transfer.convert(c.rec.samples[static_cast<std::size_t>(sample - first)]);
}

std::vector<double> Board::probe(std::size_t ch, ProbeTap tap, std::uint64_t start, std::uint32_t count,
                                 std::uint32_t stride) const
{
    const auto& c = chan(ch);
    const std::uint64_t first = c.rec.first_word * kSamplesPerWord;
    const std::uint64_t end = c.rec.end_word() * kSamplesPerWord;
    if (count == 0)
        return {};
    if (stride == 0)
        throw Error(Errc::OutOfRange, "probe stride must be positive");
    const std::uint64_t last = start + std::uint64_t(count - 1) * stride;
    if (start < first || last >= end || last < start)
        throw Error(Errc::OutOfRange, "probe range [" + std::to_string(start) + ", " + std::to_string(last) +
                                          "] is outside the record [" + std::to_string(first) + ", " +
                                          std::to_string(end) + ")");
    std::vector<double> out(count);
    switch (tap) {
    case ProbeTap::Code:
        for (std::uint32_t i = 0; i < count; ++i)
            out[i] = c.rec.samples[static_cast<std::size_t>(start + std::uint64_t(i) * stride - first)];
        break;
    case ProbeTap::DacVolts:
        for (std::uint32_t i = 0; i < count; ++i)
            out[i] = sample_volts(c, start + std::uint64_t(i) * stride);
        break;
    case ProbeTap::Filtered: {
        const auto k = taps_.size();
        const auto half = (k - 1) / 2;
        std::vector<double> window(static_cast<std::size_t>(k));
        for (std::uint32_t i = 0; i < count; ++i) {
            const std::uint64_t s = start + std::uint64_t(i) * stride;
            for (Eigen::Index j = 0; j < k; ++j) {
                const auto idx = static_cast<std::int64_t>(s) - half + j;
                window[static_cast<std::size_t>(j)] = idx < 0 ? 0.0 : sample_volts(c, static_cast<std::uint64_t>(idx));
            }
            const double y = fir_output_at(window, taps_, static_cast<std::size_t>(half));
            const auto pair = differential_outputs(y);
            out[i] = pair.plus - pair.minus;
        }
        break;
    }
    case ProbeTap::Jittered: {
        if (stride != 1 || !dsp::is_power_of_two(count))
            throw Error(Errc::WrongLength, "jittered probe needs stride 1 and a power-of-two count");
        const auto t = timing(ch);
        Eigen::VectorXd v(count), dt(count);
        const std::uint64_t abs0 = c.rec.arm_cycle * kSamplesPerWord + start;
        for (std::uint32_t i = 0; i < count; ++i) {
            v[i] = sample_volts(c, start + i);
            dt[i] = t.jitter(abs0 + i);
        }
        const Eigen::VectorXd y = apply_timing_error(v, dt);
        std::copy(y.data(), y.data() + y.size(), out.begin());
        break;
    }
    default:
        throw Error(Errc::OutOfRange, "unknown probe tap " + std::to_string(static_cast<int>(tap)));
    }
    return out;
}

std::vector<EdgeSample> Board::edges(std::size_t ch, SampleCode threshold) const
{
    const auto& c = chan(ch);
    const auto t = timing(ch);
    const std::uint64_t first = c.rec.first_word * kSamplesPerWord;
    const std::uint64_t arm0 = c.rec.arm_cycle * kSamplesPerWord;
    std::vector<EdgeSample> out;
    for (std::uint64_t k : rising_edge_indices(c.rec.samples, threshold)) {
        const std::uint64_t s = first + k;
        out.push_back({s, t.sample_time(0.0, arm0 + s, arm0 + s)});
    }
    return out;
}

} // namespace awg
