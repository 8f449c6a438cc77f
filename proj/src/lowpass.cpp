#include "stepfuse/lowpass.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace stepfuse {

namespace {

// Quality factors of the two Butterworth pole pairs for order 4:
// Q_i = 1 / (2 cos(theta_i)), theta = pi/8 and 3pi/8.
constexpr double kQ1 = 0.54119610014619698;
constexpr double kQ2 = 1.30656296487637653;

Biquad bilinear_lowpass(double q, double warp) {
    // Analog prototype 1/(s^2 + s/Q + 1) with s = warp * (1 - z^-1)/(1 + z^-1).
    const double k2 = warp * warp;
    const double norm = 1.0 / (k2 + warp / q + 1.0);
    Biquad s;
    s.b0 = norm;
    s.b1 = 2.0 * norm;
    s.b2 = norm;
    s.a1 = 2.0 * (1.0 - k2) * norm;
    s.a2 = (k2 - warp / q + 1.0) * norm;
    return s;
}

// Direct-form II transposed pass over the signal, in place. The state is
// initialized to the steady-state response of a constant x[0], which keeps
// DC inputs transient-free.
void iir_pass(std::vector<double>& x, const Biquad& s) {
    const double x0 = x.empty() ? 0.0 : x.front();
    double s1 = (s.b1 - s.a1 + s.b2 - s.a2) * x0;
    double s2 = (s.b2 - s.a2) * x0;
    for (double& v : x) {
        const double in = v;
        const double out = s.b0 * in + s1;
        s1 = s.b1 * in - s.a1 * out + s2;
        s2 = s.b2 * in - s.a2 * out;
        v = out;
    }
}

}  // namespace

std::array<Biquad, 2> butterworth_lowpass_sos(double cutoff_hz, double sample_hz) {
    if (!(sample_hz > 0.0) || !(cutoff_hz > 0.0) || !(cutoff_hz < 0.5 * sample_hz)) {
        throw std::invalid_argument("butterworth_lowpass_sos: need 0 < cutoff < sample_rate/2, got cutoff=" +
                                    std::to_string(cutoff_hz) + " fs=" + std::to_string(sample_hz));
    }
    const double warp = 1.0 / std::tan(std::numbers::pi * cutoff_hz / sample_hz);
    return {bilinear_lowpass(kQ1, warp), bilinear_lowpass(kQ2, warp)};
}

std::vector<double> filtfilt(std::span<const double> x, const std::array<Biquad, 2>& sos) {
    const int n = static_cast<int>(x.size());
    if (n < kFiltfiltWarmup) {
        throw std::length_error("filtfilt: input length " + std::to_string(n) +
                                " is below the warm-up length " + std::to_string(kFiltfiltWarmup));
    }
    const int pad = std::min(kFiltfiltWarmup, n - 1);

    // Odd reflection about both endpoints suppresses edge transients.
    std::vector<double> ext;
    ext.reserve(n + 2 * pad);
    for (int i = pad; i >= 1; --i) ext.push_back(2.0 * x[0] - x[i]);
    ext.insert(ext.end(), x.begin(), x.end());
    for (int i = 1; i <= pad; ++i) ext.push_back(2.0 * x[n - 1] - x[n - 1 - i]);

    for (const Biquad& s : sos) iir_pass(ext, s);
    std::reverse(ext.begin(), ext.end());
    for (const Biquad& s : sos) iir_pass(ext, s);
    std::reverse(ext.begin(), ext.end());

    return {ext.begin() + pad, ext.begin() + pad + n};
}

std::vector<double> lowpass_filter(std::span<const double> x, double cutoff_hz, double sample_hz) {
    return filtfilt(x, butterworth_lowpass_sos(cutoff_hz, sample_hz));
}

}  // namespace stepfuse
