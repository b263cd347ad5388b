#include "awg/metrology.hpp"

#include <algorithm>
#include <numbers>
#include <numeric>

namespace awg {

std::size_t coherent_bin(double f0_hz, std::size_t n, double sample_rate_hz)
{
    const double cycles = f0_hz * double(n) / sample_rate_hz;
    const double k = std::round(cycles);
    if (std::abs(cycles - k) > 1e-9 * std::max(1.0, cycles) || k < 1 || k >= double(n) / 2)
        throw Error(Errc::NonCoherent, "carrier at " + std::to_string(f0_hz) + " Hz is not on an FFT bin");
    return static_cast<std::size_t>(k);
}

double nearest_coherent_frequency(double nominal_hz, std::size_t n, double sample_rate_hz)
{
    const double cycles = nominal_hz * double(n) / sample_rate_hz;
    double k = 2.0 * std::floor(cycles / 2.0) + 1.0;
    if (std::abs(k + 2.0 - cycles) < std::abs(k - cycles))
        k += 2.0;
    return k * sample_rate_hz / double(n);
}

double compute_sfdr(const Eigen::VectorXd& samples, double f0_hz, double sample_rate_hz)
{
    const auto n = static_cast<std::size_t>(samples.size());
    if (!dsp::is_power_of_two(n))
        throw Error(Errc::WrongLength, "SFDR record length must be a power of two");
    const std::size_t k0 = coherent_bin(f0_hz, n, sample_rate_hz);
    const Eigen::VectorXd p = dsp::power_spectrum(samples);
    double spur = 0;
    for (Eigen::Index k = 1; k < p.size(); ++k)
        if (static_cast<std::size_t>(k) != k0)
            spur = std::max(spur, p[k]);
    const double carrier = p[static_cast<Eigen::Index>(k0)];
    if (spur <= 0.0)
        return kSfdrCeilingDb;
    return std::min(kSfdrCeilingDb, dsp::db10(carrier / spur));
}

std::vector<double> sfdr_sweep_frequencies()
{
    std::vector<double> f;
    for (int i = 1; i <= 25; ++i)
        f.push_back(10e6 * i);
    return f;
}

JitterReport jitter_statistics(const Eigen::MatrixXd& t)
{
    if (t.cols() < 2)
        throw Error(Errc::TooFewEvents, "jitter statistics need at least two events per channel");
    const Eigen::Index ch = t.rows();
    JitterReport r;
    // centred on each channel's first edge to keep the ps-scale spread exact
    const Eigen::MatrixXd d = t.colwise() - t.col(0);
    const Eigen::VectorXd mean = d.rowwise().mean();
    r.std_ps.resize(static_cast<std::size_t>(ch));
    for (Eigen::Index i = 0; i < ch; ++i) {
        const double var = (d.row(i).array() - mean[i]).square().mean();
        r.std_ps[static_cast<std::size_t>(i)] = std::sqrt(var) * 1e12;
    }
    r.skew_ps.resize(ch, ch);
    for (Eigen::Index i = 0; i < ch; ++i)
        for (Eigen::Index j = 0; j < ch; ++j)
            r.skew_ps(i, j) = i == j ? 0.0 : (t.row(j) - t.row(i)).mean() * 1e12;
    if (ch > 0) {
        r.mean_std_ps = std::accumulate(r.std_ps.begin(), r.std_ps.end(), 0.0) / double(ch);
        r.min_std_ps = *std::min_element(r.std_ps.begin(), r.std_ps.end());
        r.max_std_ps = *std::max_element(r.std_ps.begin(), r.std_ps.end());
    }
    return r;
}

PhaseNoiseCurve analytic_phase_noise(double carrier_hz, double sigma_s, const std::vector<double>& offsets_hz,
                                     double sample_rate_hz)
{
    PhaseNoiseCurve c;
    c.carrier_hz = carrier_hz;
    c.offset_hz = offsets_hz;
    const double w = 2.0 * std::numbers::pi * carrier_hz * sigma_s;
    c.dbc_hz.assign(offsets_hz.size(), dsp::db10(w * w / sample_rate_hz));
    return c;
}

PhaseNoiseCurve measure_phase_noise(const std::vector<Eigen::VectorXd>& records, std::size_t carrier_bin,
                                    const std::vector<std::size_t>& offset_bins, double sample_rate_hz)
{
    if (records.empty())
        throw Error(Errc::WrongLength, "phase noise needs at least one record");
    const auto n = static_cast<std::size_t>(records.front().size());
    Eigen::VectorXd p = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n / 2 + 1));
    for (const auto& r : records) {
        if (static_cast<std::size_t>(r.size()) != n)
            throw Error(Errc::WrongLength, "phase noise records differ in length");
        p += dsp::power_spectrum(r);
    }
    p /= double(records.size());

    PhaseNoiseCurve c;
    c.carrier_hz = double(carrier_bin) * sample_rate_hz / double(n);
    const double bin_hz = sample_rate_hz / double(n);
    const double carrier = p[static_cast<Eigen::Index>(carrier_bin)];
    for (auto m : offset_bins) {
        if (m == 0 || carrier_bin < 2 * m || carrier_bin + 2 * m > n / 2)
            throw Error(Errc::MismatchedGrids, "offset " + std::to_string(m) + " bins leaves the spectrum");
        double acc = 0;
        for (std::size_t d = m; d < 2 * m; ++d)
            acc += p[static_cast<Eigen::Index>(carrier_bin + d)] + p[static_cast<Eigen::Index>(carrier_bin - d)];
        const double noise = acc / double(2 * m);
        // White jitter folds the image sideband onto every bin, doubling
        // the per-bin power relative to a single sideband.
        c.offset_hz.push_back(double(m) * bin_hz);
        c.dbc_hz.push_back(dsp::db10(noise / carrier / bin_hz / 2.0));
    }
    return c;
}

double phase_noise_scaling_check(const PhaseNoiseCurve& a, const PhaseNoiseCurve& b)
{
    if (a.offset_hz != b.offset_hz || a.dbc_hz.size() != a.offset_hz.size() ||
        b.dbc_hz.size() != b.offset_hz.size() || a.offset_hz.empty())
        throw Error(Errc::MismatchedGrids, "phase noise curves are on different offset grids");
    double s = 0;
    for (std::size_t i = 0; i < a.dbc_hz.size(); ++i)
        s += b.dbc_hz[i] - a.dbc_hz[i];
    return s / double(a.dbc_hz.size());
}

} // namespace awg
