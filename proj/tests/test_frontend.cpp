#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include <unsupported/Eigen/FFT>

#include "awg/error.hpp"
#include "awg/frontend.hpp"
#include "awg/spectrum.hpp"

using namespace awg;
using std::numbers::pi;

namespace {

Eigen::VectorXd tone(std::size_t n, double cycles, double amp = 1.0, double phase = 0.0)
{
    Eigen::VectorXd x(static_cast<Eigen::Index>(n));
    for (std::size_t k = 0; k < n; ++k)
        x[static_cast<Eigen::Index>(k)] = amp * std::cos(2 * pi * cycles * double(k) / double(n) + phase);
    return x;
}

Eigen::VectorXcd eigen_fft(const Eigen::VectorXd& x)
{
    Eigen::FFT<double> fft;
    fft.SetFlag(Eigen::FFT<double>::Unscaled);
    fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
    std::vector<double> in(x.data(), x.data() + x.size());
    std::vector<std::complex<double>> out;
    fft.fwd(out, in);
    return Eigen::Map<Eigen::VectorXcd>(out.data(), static_cast<Eigen::Index>(out.size()));
}

} // namespace

TEST(DacConvert, Examples)
{
    const DacTransfer ideal;
    EXPECT_EQ(dac_convert(0, ideal), 0.0);
    EXPECT_DOUBLE_EQ(dac_convert(32767, ideal), 0.5 * 32767.0 / 32768.0);
    EXPECT_DOUBLE_EQ(dac_convert(-32768, ideal), -0.5);

    Eigen::VectorXd inl = Eigen::VectorXd::Zero(65536);
    inl[1000 + 32768] = 2.0;
    const DacTransfer bent(0.5, inl);
    EXPECT_NEAR(dac_convert(1000, bent), dac_convert(1000, ideal) + 2 * 0.5 / 32768, 1e-15);
    EXPECT_EQ(dac_convert(1001, bent), dac_convert(1001, ideal));
}

TEST(DacConvert, ProfileLengthChecked)
{
    try {
        DacTransfer(0.5, Eigen::VectorXd::Zero(65535));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::WrongLength);
    }
}

TEST(DacConvert, MonotoneUnderBoundedStepDeviation)
{
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> step(-0.99, 0.99);
    for (int trial = 0; trial < 20; ++trial) {
        // random walk INL whose per-step change stays below 1 LSB
        Eigen::VectorXd inl(65536);
        inl[0] = 0;
        for (Eigen::Index k = 1; k < inl.size(); ++k)
            inl[k] = std::clamp(inl[k - 1] + step(rng), -50.0, 50.0);
        const DacTransfer t(0.5, inl);
        for (int c = -32768; c < 32767; ++c)
            ASSERT_LT(t.convert(static_cast<SampleCode>(c)), t.convert(static_cast<SampleCode>(c + 1)));
    }
}

TEST(Differential, SplitAndCommonMode)
{
    const auto z = differential_outputs(0.0);
    EXPECT_EQ(z.plus, 0.0);
    EXPECT_EQ(z.minus, 0.0);
    const auto p = differential_outputs(0.4);
    EXPECT_DOUBLE_EQ(p.plus, 0.2);
    EXPECT_DOUBLE_EQ(p.minus, -0.2);

    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int i = 0; i < 1000; ++i) {
        const double v = u(rng);
        const auto d = differential_outputs(v);
        EXPECT_EQ(d.plus + d.minus, 0.0);
        EXPECT_EQ(d.plus - d.minus, v);
    }
}

TEST(Lowpass, UnityDcGain)
{
    const Eigen::VectorXd dc = Eigen::VectorXd::Constant(512, 0.3);
    const auto y = lowpass_filter(dc);
    for (Eigen::Index k = 64; k < 448; ++k)
        EXPECT_NEAR(y[k], 0.3, 1e-12);
}

TEST(Lowpass, ImpulseReturnsTaps)
{
    const auto h = lowpass_taps();
    ASSERT_EQ(h.size(), kDefaultFilterTaps);
    Eigen::VectorXd x = Eigen::VectorXd::Zero(200);
    x[100] = 1.0;
    const auto y = lowpass_filter(x);
    // zero-phase alignment puts the centre tap on the impulse
    for (Eigen::Index j = 0; j < h.size(); ++j)
        EXPECT_NEAR(y[100 - 31 + j], h[j], 1e-15);
    for (Eigen::Index j = 0; j < h.size(); ++j)
        EXPECT_DOUBLE_EQ(h[j], h[h.size() - 1 - j]);
}

TEST(Lowpass, StopbandAttenuation)
{
    const std::size_t n = 4096;
    // 100 MHz and 900 MHz at 2 GSPS, both on exact bins
    const double c100 = 100e6 / kSampleRateHz * n;
    const double c900 = 900e6 / kSampleRateHz * n;
    const Eigen::VectorXd x = tone(n, c100) + tone(n, c900);
    const auto y = lowpass_filter(x);
    const Eigen::VectorXd mid = y.segment(1024, 2048);
    const auto spec = eigen_fft(mid);
    const double p100 = std::norm(spec[static_cast<Eigen::Index>(c100 / 2)]);
    const double p900 = std::norm(spec[static_cast<Eigen::Index>(c900 / 2)]);
    EXPECT_GE(dsp::db10(p100 / p900), 40.0);

    const double fir_at = fir_output_at(std::span<const double>(x.data(), n), lowpass_taps(), 2000);
    EXPECT_NEAR(fir_at, y[2000], 1e-12);
}

TEST(IqPlate, Examples)
{
    const IqPlate plate;
    EXPECT_DOUBLE_EQ(iq_upconvert(1.0, 0.0, plate, 0.0), 1.0);
    for (double t : {0.0, 1e-9, 3.7e-7})
        EXPECT_EQ(iq_upconvert(0.0, 0.0, plate, t), 0.0);
    EXPECT_EQ(IqPlate::kSplitterPorts, 4);
}

TEST(IqPlate, ConstantIqGivesSingleLineWithPhase)
{
    const std::size_t n = 1024;
    IqPlate plate;
    plate.lo_frequency_hz = 125e6; // bin 64 at 2 GSPS
    const double phi = 0.7;
    const Eigen::VectorXd t = Eigen::VectorXd::LinSpaced(n, 0.0, double(n - 1) / kSampleRateHz);
    const auto rf = iq_upconvert(Eigen::VectorXd::Constant(n, std::cos(phi)),
                                 Eigen::VectorXd::Constant(n, std::sin(phi)), plate, t);
    const auto spec = eigen_fft(rf);
    for (Eigen::Index k = 0; k < spec.size(); ++k) {
        if (k == 64)
            continue;
        EXPECT_LT(std::abs(spec[k]), 1e-9) << k;
    }
    EXPECT_NEAR(std::abs(spec[64]), n / 2.0, 1e-9);
    EXPECT_NEAR(std::arg(spec[64]), phi, 1e-9);
}

TEST(Timing, LatencyArithmetic)
{
    TimingModel m;
    m.pipeline_delay_cycles = 2;
    EXPECT_DOUBLE_EQ(m.sample_time(1e-6, 0, 0), 1e-6 + 8e-9);
    EXPECT_DOUBLE_EQ(m.sample_time(0.0, 3, 3), 8e-9 + 1.5e-9);
    const auto tr = timestamp_samples(Eigen::VectorXd::Ones(4), m, 0.0);
    EXPECT_DOUBLE_EQ(tr.time[0], 8e-9);
    EXPECT_DOUBLE_EQ(tr.time[3], 9.5e-9);
}

TEST(Timing, SkewIsConstantOffset)
{
    TimingModel a, b;
    b.skew_s = 100e-12;
    for (std::uint64_t k = 0; k < 100; ++k)
        EXPECT_NEAR(b.sample_time(2e-6, k, k) - a.sample_time(2e-6, k, k), 100e-12, 1e-18);
}

TEST(Timing, JitterStatistics)
{
    TimingModel m;
    m.jitter_sigma_s = 10e-12;
    m.rng_seed = 42;
    double s = 0, s2 = 0;
    const int n = 10000;
    for (int k = 0; k < n; ++k) {
        const double j = m.jitter(static_cast<std::uint64_t>(k));
        s += j;
        s2 += j * j;
    }
    const double mean = s / n;
    const double sd = std::sqrt(s2 / n - mean * mean);
    EXPECT_GE(sd, 9e-12);
    EXPECT_LE(sd, 11e-12);
}

TEST(Timing, DeterministicWithAndWithoutJitter)
{
    TimingModel m;
    m.jitter_sigma_s = 5e-12;
    m.rng_seed = 9;
    const Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(64, -1, 1);
    EXPECT_EQ(timestamp_samples(v, m, 1e-6, 100).time, timestamp_samples(v, m, 1e-6, 100).time);
    m.rng_seed = 10;
    EXPECT_NE(timestamp_samples(v, m, 1e-6, 100).time[0], (TimingModel{16, 0, 5e-12, 9}.sample_time(1e-6, 0, 100)));
    m.jitter_sigma_s = 0;
    EXPECT_EQ(m.jitter(12345), 0.0);
}

TEST(Spectrum, FftMatchesEigenOracle)
{
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g;
    for (std::size_t n : {2u, 8u, 256u, 4096u}) {
        Eigen::VectorXd x(static_cast<Eigen::Index>(n));
        for (auto& v : x)
            v = g(rng);
        const auto ours = dsp::fft_real(x);
        const auto ref = eigen_fft(x);
        for (Eigen::Index k = 0; k < ref.size(); ++k)
            ASSERT_NEAR(std::abs(ours[k] - ref[k]), 0.0, 1e-9 * std::sqrt(double(n)));
        auto back = ours;
        dsp::fft_inplace(back, true);
        EXPECT_LT((back.real() - x).cwiseAbs().maxCoeff(), 1e-12);
    }
    Eigen::VectorXd bad(12);
    EXPECT_THROW(dsp::fft_real(bad), Error);
}

TEST(Spectrum, SpectralDerivativeOfSine)
{
    const std::size_t n = 1024;
    const double f = 37.0 / n * kSampleRateHz;
    const auto x = tone(n, 37, 1.0, 0.3);
    const auto d = dsp::spectral_derivative(x, kSampleRateHz);
    for (std::size_t k = 0; k < n; ++k) {
        const double expect = -2 * pi * f * std::sin(2 * pi * 37.0 * double(k) / double(n) + 0.3);
        ASSERT_NEAR(d[static_cast<Eigen::Index>(k)] / (2 * pi * f), expect / (2 * pi * f), 1e-10);
    }
}

TEST(Timing, ApplyTimingErrorMatchesShiftedTone)
{
    const std::size_t n = 2048;
    const double cycles = 101;
    const double f = cycles / n * kSampleRateHz;
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g(0.0, 1e-12);
    Eigen::VectorXd dt(static_cast<Eigen::Index>(n));
    for (auto& v : dt)
        v = g(rng);
    const auto y = apply_timing_error(tone(n, cycles), dt);
    for (std::size_t k = 0; k < n; ++k) {
        const double t = double(k) / kSampleRateHz - dt[static_cast<Eigen::Index>(k)];
        ASSERT_NEAR(y[static_cast<Eigen::Index>(k)], std::cos(2 * pi * f * t), 1e-5);
    }
}
