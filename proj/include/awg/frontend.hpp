#pragma once

// Analog output chain: DAC transfer with injectable nonlinearity,
// differential split, reconstruction low-pass, IQ mixer plate and the
// output timing model (pipeline latency, skew, jitter).

#include <algorithm>
#include <cstdint>
#include <span>
#include <utility>

#include <Eigen/Core>

#include "awg/memory.hpp"

namespace awg {

inline constexpr double kSampleRateHz = 2.0e9;
inline constexpr double kWordClockHz = 250.0e6;
inline constexpr double kSamplePeriodS = 1.0 / kSampleRateHz;
inline constexpr double kCyclePeriodS = 1.0 / kWordClockHz;
inline constexpr std::size_t kCodeCount = 65536;
inline constexpr int kCodeOffset = 32768;

/// v = v_fullscale * (code + inl[code + 32768]) / 32768.
class DacTransfer {
public:
    explicit DacTransfer(double v_fullscale = 0.5);
    /// Throws WrongLength unless `inl_profile_lsb` has 65536 entries.
    DacTransfer(double v_fullscale, Eigen::VectorXd inl_profile_lsb);

    double v_fullscale() const { return v_fullscale_; }
    double lsb_volts() const { return v_fullscale_ / kCodeOffset; }
    const Eigen::VectorXd& inl_profile() const { return inl_; }

    double convert(SampleCode code) const { return table_[code + kCodeOffset]; }

    void convert(std::span<const SampleCode> codes, std::span<double> volts) const;
    Eigen::VectorXd convert(std::span<const SampleCode> codes) const;

private:
    void rebuild();

    double v_fullscale_;
    Eigen::VectorXd inl_;
    Eigen::VectorXd table_;
};

inline double dac_convert(SampleCode code, const DacTransfer& transfer) { return transfer.convert(code); }

struct DifferentialPair {
    double plus = 0;
    double minus = 0;
};

inline DifferentialPair differential_outputs(double v) { return {0.5 * v, -0.5 * v}; }

/// Differential voltage seen by a meter across the pair.
template <typename Derived>
auto differential_sense(const Eigen::MatrixBase<Derived>& plus, const Eigen::MatrixBase<Derived>& minus)
{
    return (plus - minus).eval();
}

inline constexpr double kDefaultCutoffHz = 500.0e6;
inline constexpr int kDefaultFilterTaps = 63;

/// Linear-phase windowed-sinc (Blackman) low-pass taps, normalised to unity DC gain.
Eigen::VectorXd lowpass_taps(double cutoff_hz = kDefaultCutoffHz, double sample_rate_hz = kSampleRateHz,
                             int taps = kDefaultFilterTaps);

/// Zero-phase aligned FIR: y[n] = sum_k h[k] x[n + (K-1)/2 - k], zero outside the record.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> fir_filter(const Eigen::MatrixBase<Derived>& x,
                                                                      const Eigen::VectorXd& taps)
{
    using Scalar = typename Derived::Scalar;
    const Eigen::Index n = x.size();
    const Eigen::Index k = taps.size();
    const Eigen::Index center = (k - 1) / 2;
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> y = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::Index lo = std::max<Eigen::Index>(0, i + center - (n - 1));
        const Eigen::Index hi = std::min<Eigen::Index>(k - 1, i + center);
        Scalar acc = 0;
        for (Eigen::Index j = lo; j <= hi; ++j)
            acc += Scalar(taps[j]) * x[i + center - j];
        y[i] = acc;
    }
    return y;
}

/// One output point of fir_filter, for probing long records cheaply.
double fir_output_at(std::span<const double> x, const Eigen::VectorXd& taps, std::size_t index);

inline Eigen::VectorXd lowpass_filter(const Eigen::VectorXd& samples, double cutoff_hz = kDefaultCutoffHz)
{
    return fir_filter(samples, lowpass_taps(cutoff_hz));
}

/// One LO split four ways; each port drives one IQ mixer.
struct IqPlate {
    double lo_frequency_hz = 6.0e9;
    double lo_amplitude = 1.0;
    static constexpr int kSplitterPorts = 4;
};

/// rf(t) = A_lo * (i cos(2 pi f t) - q sin(2 pi f t)).
double iq_upconvert(double i, double q, const IqPlate& plate, double t);

Eigen::VectorXd iq_upconvert(const Eigen::VectorXd& i, const Eigen::VectorXd& q, const IqPlate& plate,
                             const Eigen::VectorXd& t);

/// Deterministic output timing of one channel.
struct TimingModel {
    std::uint32_t pipeline_delay_cycles = 16;
    double skew_s = 0.0;
    double jitter_sigma_s = 0.0;
    std::uint64_t rng_seed = 0;

    /// Timing error of output sample `k` (global sample index), ~ N(0, sigma^2).
    /// Counter-based: the value depends only on (seed, k).
    double jitter(std::uint64_t k) const;

    /// Nominal plus jitter time of sample `k` of a stream whose first word
    /// is clocked at `stream_start_s`.
    double sample_time(double stream_start_s, std::uint64_t k, std::uint64_t jitter_index) const
    {
        return stream_start_s + pipeline_delay_cycles * kCyclePeriodS + skew_s + double(k) * kSamplePeriodS +
               jitter(jitter_index);
    }
};

/// Standard normal deviate from a 64-bit key (splitmix64 + Box-Muller).
double gaussian_from_key(std::uint64_t key);
std::uint64_t splitmix64(std::uint64_t x);

struct TimedTrace {
    Eigen::VectorXd time;
    Eigen::VectorXd volts;
};

/// Stamps sample k with stream_start + D_pipe*4 ns + skew + k*0.5 ns + jitter_k.
/// `first_sample_index` offsets the jitter counter so that consecutive
/// slices of one stream draw independent jitter.
TimedTrace timestamp_samples(const Eigen::VectorXd& volts, const TimingModel& timing, double stream_start_s,
                             std::uint64_t first_sample_index = 0);

/// What a uniformly sampling receiver sees when the samples of a periodic
/// band-limited record leave the DAC with timing errors `dt`:
/// y_k = v_k - dt_k * v'(k T), v' from the spectral derivative.
Eigen::VectorXd apply_timing_error(const Eigen::VectorXd& volts, const Eigen::VectorXd& dt,
                                   double sample_rate_hz = kSampleRateHz);

} // namespace awg
