#pragma once

#include <array>
#include <span>
#include <vector>

namespace stepfuse {

/// One second-order IIR section, normalized (a0 = 1).
struct Biquad {
    double b0 = 0.0, b1 = 0.0, b2 = 0.0;
    double a1 = 0.0, a2 = 0.0;
};

/// Fourth-order Butterworth low-pass as two cascaded second-order sections,
/// designed by bilinear transform with cutoff prewarping.
/// Throws std::invalid_argument unless 0 < cutoff_hz < sample_hz/2.
std::array<Biquad, 2> butterworth_lowpass_sos(double cutoff_hz, double sample_hz);

/// Number of reflected samples prepended/appended by filtfilt (3x the
/// filter order); inputs shorter than this are rejected.
inline constexpr int kFiltfiltWarmup = 12;

/// Zero-phase forward-backward application of the cascade. Same length as
/// input. Throws std::length_error when x.size() < kFiltfiltWarmup.
std::vector<double> filtfilt(std::span<const double> x, const std::array<Biquad, 2>& sos);

/// Convenience: design + filtfilt in one call.
std::vector<double> lowpass_filter(std::span<const double> x, double cutoff_hz, double sample_hz);

}  // namespace stepfuse
