#pragma once

// Measurement analysis: INL/DNL from a code sweep, coherent-FFT SFDR,
// multi-channel jitter and skew statistics, phase-noise curves.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "awg/error.hpp"
#include "awg/frontend.hpp"
#include "awg/spectrum.hpp"

namespace awg {

inline constexpr double kLinearityBoundLsb = 2.0;
inline constexpr std::size_t kSweepSteps = kCodeCount - 1;

struct LinearityReport {
    Eigen::VectorXd dnl; // kCodeCount - 1 entries
    Eigen::VectorXd inl; // kCodeCount entries
    double max_abs_dnl = 0;
    double max_abs_inl = 0;
    double lsb_volts = 0;   // endpoint-fit step
    double dnl_lsb_volts = 0; // step DNL is normalised to

    bool pass(double bound_lsb = kLinearityBoundLsb) const
    {
        return max_abs_inl <= bound_lsb && max_abs_dnl <= bound_lsb;
    }
};

/// Endpoint fit through v[0] and v[65535]:
///   lsb = (v[65535] - v[0]) / 65535
///   inl[k] = (v[k] - v[0] - k lsb) / lsb
///   dnl[k] = (v[k+1] - v[k]) / ideal_lsb - 1
/// `ideal_lsb_volts` of 0 normalises DNL by the endpoint lsb as well.
/// Throws WrongLength unless 65536 readings are given.
template <typename Derived>
LinearityReport compute_inl_dnl(const Eigen::MatrixBase<Derived>& v_in, double ideal_lsb_volts = 0.0)
{
    if (static_cast<std::size_t>(v_in.size()) != kCodeCount)
        throw Error(Errc::WrongLength, "linearity sweep needs 65536 readings, got " + std::to_string(v_in.size()));
    const Eigen::VectorXd v = v_in.template cast<double>();
    const Eigen::Index n = v.size();
    LinearityReport r;
    r.lsb_volts = (v[n - 1] - v[0]) / double(n - 1);
    r.dnl_lsb_volts = ideal_lsb_volts > 0.0 ? ideal_lsb_volts : r.lsb_volts;
    r.dnl = (v.tail(n - 1) - v.head(n - 1)) / r.dnl_lsb_volts - Eigen::VectorXd::Ones(n - 1);
    r.inl.resize(n);
    for (Eigen::Index k = 0; k < n; ++k)
        r.inl[k] = (v[k] - v[0] - double(k) * r.lsb_volts) / r.lsb_volts;
    r.max_abs_dnl = r.dnl.cwiseAbs().maxCoeff();
    r.max_abs_inl = r.inl.cwiseAbs().maxCoeff();
    return r;
}

/// Reported when no spur bin carries any power.
inline constexpr double kSfdrCeilingDb = 400.0;

struct SfdrPoint {
    double frequency_hz = 0;
    double sfdr_dbc = 0;
};

/// Carrier bin of `f0` in an `n`-point record; throws NonCoherent unless
/// f0 lands on an integer bin.
std::size_t coherent_bin(double f0_hz, std::size_t n, double sample_rate_hz = kSampleRateHz);

/// Frequency of the odd bin nearest to `nominal_hz`. Odd bins keep the
/// quantisation error from repeating within the record.
double nearest_coherent_frequency(double nominal_hz, std::size_t n, double sample_rate_hz = kSampleRateHz);

/// Carrier power minus the largest non-DC, non-carrier bin of a rectangular
/// (window-free) FFT, in dB. Length must be a power of two.
double compute_sfdr(const Eigen::VectorXd& samples, double f0_hz, double sample_rate_hz = kSampleRateHz);

/// The 25 nominal sweep frequencies 10, 20, ..., 250 MHz.
std::vector<double> sfdr_sweep_frequencies();

struct JitterReport {
    std::vector<double> std_ps;      // per channel, population convention
    Eigen::MatrixXd skew_ps;         // skew(i, j) = mean(t_j - t_i)
    double mean_std_ps = 0;
    double min_std_ps = 0;
    double max_std_ps = 0;
};

/// `edge_times_s(ch, event)`: edge time of each channel for each event,
/// measured from the event. Needs at least two events.
JitterReport jitter_statistics(const Eigen::MatrixXd& edge_times_s);

struct PhaseNoiseCurve {
    double carrier_hz = 0;
    std::vector<double> offset_hz;
    std::vector<double> dbc_hz;
};

/// Single-sideband phase noise of white timing jitter sampled at `fs`:
/// L = 10 log10((2 pi fc sigma)^2 / fs), flat over offset.
PhaseNoiseCurve analytic_phase_noise(double carrier_hz, double sigma_s, const std::vector<double>& offsets_hz,
                                     double sample_rate_hz = kSampleRateHz);

/// Phase noise read from equal-length records of a coherent tone at
/// `carrier_bin`, averaged over the records. Offset m is the mean of the
/// bins in [m, 2m) on both sides of the carrier.
PhaseNoiseCurve measure_phase_noise(const std::vector<Eigen::VectorXd>& records, std::size_t carrier_bin,
                                    const std::vector<std::size_t>& offset_bins,
                                    double sample_rate_hz = kSampleRateHz);

/// Mean of b - a over the shared offset grid, in dB. Throws MismatchedGrids.
double phase_noise_scaling_check(const PhaseNoiseCurve& a, const PhaseNoiseCurve& b);

} // namespace awg
