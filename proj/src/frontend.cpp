#include "awg/frontend.hpp"

#include <cmath>
#include <numbers>

#include "awg/error.hpp"
#include "awg/spectrum.hpp"

namespace awg {

DacTransfer::DacTransfer(double v_fullscale)
    : v_fullscale_(v_fullscale), inl_(Eigen::VectorXd::Zero(kCodeCount))
{
    rebuild();
}

DacTransfer::DacTransfer(double v_fullscale, Eigen::VectorXd inl_profile_lsb)
    : v_fullscale_(v_fullscale), inl_(std::move(inl_profile_lsb))
{
    if (static_cast<std::size_t>(inl_.size()) != kCodeCount)
        throw Error(Errc::WrongLength, "INL profile must have 65536 entries, got " + std::to_string(inl_.size()));
    rebuild();
}

void DacTransfer::rebuild()
{
    table_.resize(kCodeCount);
    for (std::size_t i = 0; i < kCodeCount; ++i) {
        const double code = static_cast<double>(static_cast<int>(i) - kCodeOffset);
        table_[static_cast<Eigen::Index>(i)] = v_fullscale_ * (code + inl_[static_cast<Eigen::Index>(i)]) / kCodeOffset;
    }
}

void DacTransfer::convert(std::span<const SampleCode> codes, std::span<double> volts) const
{
    const double* table = table_.data();
    const std::size_t n = std::min(codes.size(), volts.size());
    for (std::size_t i = 0; i < n; ++i)
        volts[i] = table[codes[i] + kCodeOffset];
}

Eigen::VectorXd DacTransfer::convert(std::span<const SampleCode> codes) const
{
    Eigen::VectorXd v(static_cast<Eigen::Index>(codes.size()));
    convert(codes, std::span<double>(v.data(), codes.size()));
    return v;
}

Eigen::VectorXd lowpass_taps(double cutoff_hz, double sample_rate_hz, int taps)
{
    if (taps < 1 || taps % 2 == 0)
        throw Error(Errc::ConfigError, "filter tap count must be odd");
    const double fc = cutoff_hz / sample_rate_hz;
    const double mid = (taps - 1) / 2.0;
    Eigen::VectorXd h(taps);
    for (int n = 0; n < taps; ++n) {
        const double x = n - mid;
        const double sinc = x == 0.0 ? 2.0 * fc : std::sin(2.0 * std::numbers::pi * fc * x) / (std::numbers::pi * x);
        const double phase = 2.0 * std::numbers::pi * n / (taps - 1);
        const double window = taps == 1 ? 1.0 : 0.42 - 0.5 * std::cos(phase) + 0.08 * std::cos(2.0 * phase);
        h[n] = sinc * window;
    }
    for (int n = 0; n < taps / 2; ++n)
        h[taps - 1 - n] = h[n];
    h /= h.sum();
    return h;
}

double fir_output_at(std::span<const double> x, const Eigen::VectorXd& taps, std::size_t index)
{
    const auto k = static_cast<std::ptrdiff_t>(taps.size());
    const auto center = (k - 1) / 2;
    const auto n = static_cast<std::ptrdiff_t>(x.size());
    const auto i = static_cast<std::ptrdiff_t>(index);
    double acc = 0;
    for (std::ptrdiff_t j = 0; j < k; ++j) {
        const auto src = i + center - j;
        if (src >= 0 && src < n)
            acc += taps[j] * x[static_cast<std::size_t>(src)];
    }
    return acc;
}

double iq_upconvert(double i, double q, const IqPlate& plate, double t)
{
    const double phase = 2.0 * std::numbers::pi * plate.lo_frequency_hz * t;
    return plate.lo_amplitude * (i * std::cos(phase) - q * std::sin(phase));
}

Eigen::VectorXd iq_upconvert(const Eigen::VectorXd& i, const Eigen::VectorXd& q, const IqPlate& plate,
                             const Eigen::VectorXd& t)
{
    if (i.size() != q.size() || i.size() != t.size())
        throw Error(Errc::WrongLength, "I, Q and time vectors differ in length");
    Eigen::VectorXd rf(i.size());
    for (Eigen::Index k = 0; k < i.size(); ++k)
        rf[k] = iq_upconvert(i[k], q[k], plate, t[k]);
    return rf;
}

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

double gaussian_from_key(std::uint64_t key)
{
    const std::uint64_t a = splitmix64(key);
    const std::uint64_t b = splitmix64(a ^ 0xD1B54A32D192ED03ull);
    const double u1 = (static_cast<double>(a >> 11) + 1.0) * 0x1.0p-53; // (0, 1]
    const double u2 = static_cast<double>(b >> 11) * 0x1.0p-53;         // [0, 1)
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double TimingModel::jitter(std::uint64_t k) const
{
    if (jitter_sigma_s == 0.0)
        return 0.0;
    return jitter_sigma_s * gaussian_from_key(splitmix64(rng_seed) + k);
}

TimedTrace timestamp_samples(const Eigen::VectorXd& volts, const TimingModel& timing, double stream_start_s,
                             std::uint64_t first_sample_index)
{
    TimedTrace trace;
    trace.volts = volts;
    trace.time.resize(volts.size());
    for (Eigen::Index k = 0; k < volts.size(); ++k)
        trace.time[k] = timing.sample_time(stream_start_s, static_cast<std::uint64_t>(k),
                                           first_sample_index + static_cast<std::uint64_t>(k));
    return trace;
}

Eigen::VectorXd apply_timing_error(const Eigen::VectorXd& volts, const Eigen::VectorXd& dt, double sample_rate_hz)
{
    if (volts.size() != dt.size())
        throw Error(Errc::WrongLength, "timing error vector length differs from the record");
    const Eigen::VectorXd slope = dsp::spectral_derivative(volts, sample_rate_hz);
    return volts - dt.cwiseProduct(slope);
}

} // namespace awg
