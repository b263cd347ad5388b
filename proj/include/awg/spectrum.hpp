#pragma once

// Radix-2 FFT and power-spectrum helpers shared by the analog front end
// and the metrology code.

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <vector>

#include <Eigen/Core>

#include "awg/error.hpp"

namespace awg::dsp {

template <typename Scalar>
using ComplexVector = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1>;

constexpr bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

/// In-place iterative radix-2 decimation-in-time FFT. `inverse` applies the
/// 1/N scale.
template <typename Scalar>
void fft_inplace(ComplexVector<Scalar>& x, bool inverse = false)
{
    const std::size_t n = static_cast<std::size_t>(x.size());
    if (!is_power_of_two(n))
        throw Error(Errc::WrongLength, "FFT length must be a power of two");

    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1)
            j ^= bit;
        j ^= bit;
        if (i < j)
            std::swap(x[static_cast<Eigen::Index>(i)], x[static_cast<Eigen::Index>(j)]);
    }

    const Scalar sign = inverse ? Scalar(1) : Scalar(-1);
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const std::size_t half = len / 2;
        // Twiddles computed directly per index rather than by recurrence to
        // keep rounding error flat across the transform.
        std::vector<std::complex<Scalar>> tw(half);
        for (std::size_t k = 0; k < half; ++k) {
            const Scalar a = sign * Scalar(2) * std::numbers::pi_v<Scalar> * Scalar(k) / Scalar(len);
            tw[k] = {std::cos(a), std::sin(a)};
        }
        for (std::size_t i = 0; i < n; i += len) {
            for (std::size_t k = 0; k < half; ++k) {
                auto& a = x[static_cast<Eigen::Index>(i + k)];
                auto& b = x[static_cast<Eigen::Index>(i + k + half)];
                const auto t = b * tw[k];
                b = a - t;
                a = a + t;
            }
        }
    }
    if (inverse)
        x /= Scalar(n);
}

template <typename Derived>
ComplexVector<typename Derived::Scalar> fft_real(const Eigen::MatrixBase<Derived>& signal)
{
    using Scalar = typename Derived::Scalar;
    ComplexVector<Scalar> x = signal.template cast<std::complex<Scalar>>();
    fft_inplace(x);
    return x;
}

/// |X_k|^2 for k = 0..N/2 of a real signal.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> power_spectrum(const Eigen::MatrixBase<Derived>& signal)
{
    using Scalar = typename Derived::Scalar;
    const auto spec = fft_real(signal);
    const Eigen::Index half = spec.size() / 2 + 1;
    return spec.head(half).cwiseAbs2().template cast<Scalar>();
}

/// Derivative of a periodic, band-limited record, computed in the frequency
/// domain. `sample_rate` in Hz gives d/dt in units per second.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1>
spectral_derivative(const Eigen::MatrixBase<Derived>& signal, typename Derived::Scalar sample_rate)
{
    using Scalar = typename Derived::Scalar;
    auto x = fft_real(signal);
    const Eigen::Index n = x.size();
    const Scalar df = sample_rate / Scalar(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        Eigen::Index m = k <= n / 2 ? k : k - n;
        if (2 * k == n)
            m = 0; // Nyquist bin has no well-defined derivative for real data
        x[k] *= std::complex<Scalar>(0, Scalar(2) * std::numbers::pi_v<Scalar> * df * Scalar(m));
    }
    fft_inplace(x, true);
    return x.real();
}

inline double db10(double ratio) { return 10.0 * std::log10(ratio); }

} // namespace awg::dsp
