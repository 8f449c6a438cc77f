#include "stepfuse/pdr.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "stepfuse/angles.hpp"
#include "stepfuse/lowpass.hpp"

namespace stepfuse {

void PdrConfig::validate() const {
    if (!(peak_min > 0.0) || !(peak_min < peak_max)) {
        throw std::invalid_argument("PdrConfig: need 0 < peak_min < peak_max");
    }
    if (!(min_peak_spacing > 0.0)) {
        throw std::invalid_argument("PdrConfig: min_peak_spacing must be positive");
    }
    if (window < 3 || window % 2 == 0) {
        throw std::invalid_argument("PdrConfig: window must be odd and >= 3");
    }
    if (!(cutoff_hz > 0.0)) {
        throw std::invalid_argument("PdrConfig: cutoff_hz must be positive");
    }
    if (!(step_coeff > 0.0)) {
        throw std::invalid_argument("PdrConfig: step_coeff must be positive");
    }
}

std::vector<int> detect_steps(std::span<const double> filtered_magnitude, const PdrConfig& cfg,
                              double sample_hz) {
    cfg.validate();
    const int n = static_cast<int>(filtered_magnitude.size());
    const int half = cfg.window / 2;
    std::vector<int> peaks;
    double last_kept_t = -std::numeric_limits<double>::infinity();

    for (int i = 0; i < n; ++i) {
        const double d = filtered_magnitude[i] - cfg.gravity;
        if (!(d > cfg.peak_min && d < cfg.peak_max)) continue;

        // Local maximum inside the window; plateau ties resolve to the
        // earliest sample (strict on the left, non-strict on the right).
        const int lo = std::max(0, i - half);
        const int hi = std::min(n - 1, i + half);
        bool is_max = true;
        for (int j = lo; j < i && is_max; ++j) {
            if (filtered_magnitude[j] - cfg.gravity >= d) is_max = false;
        }
        for (int j = i + 1; j <= hi && is_max; ++j) {
            if (filtered_magnitude[j] - cfg.gravity > d) is_max = false;
        }
        if (!is_max) continue;

        const double t = i / sample_hz;
        if (t - last_kept_t > cfg.min_peak_spacing) {
            peaks.push_back(i);
            last_kept_t = t;
        }
    }
    return peaks;
}

double estimate_step_length(double az_max, double az_min, double k_coeff) {
    if (az_max < az_min) {
        throw std::invalid_argument("estimate_step_length: az_max < az_min (" +
                                    std::to_string(az_max) + " < " + std::to_string(az_min) + ")");
    }
    return k_coeff * std::pow(az_max - az_min, 0.25);
}

HeadingState update_heading(std::span<const ImuSample> interval, const HeadingState& prev) {
    if (interval.size() < 2) return prev;
    Eigen::Quaterniond q = prev.attitude;
    for (size_t i = 0; i + 1 < interval.size(); ++i) {
        const double dt = interval[i + 1].t - interval[i].t;
        const Eigen::Vector3d w_mid = 0.5 * (interval[i].gyro + interval[i + 1].gyro);
        q = (q * quat_exp(w_mid * dt)).normalized();
    }
    return {q, yaw_of(q)};
}

Position2 dead_reckon(const Position2& prev, double step_length, double heading) {
    return {prev.x + step_length * std::cos(heading), prev.y + step_length * std::sin(heading)};
}

namespace {

double median_sample_rate(std::span<const ImuSample> log) {
    std::vector<double> dts;
    dts.reserve(log.size());
    for (size_t i = 0; i + 1 < log.size(); ++i) dts.push_back(log[i + 1].t - log[i].t);
    std::nth_element(dts.begin(), dts.begin() + dts.size() / 2, dts.end());
    return 1.0 / dts[dts.size() / 2];
}

// Vertical acceleration series over [lo, hi] (inclusive), along the gravity
// direction estimated from the window mean of the filtered axes, or raw body z.
std::pair<double, double> vertical_extremes(std::span<const ImuSample> log,
                                            const std::array<std::vector<double>, 3>& filtered_axes,
                                            int lo, int hi, PdrConfig::VerticalAxis mode) {
    Eigen::Vector3d axis = Eigen::Vector3d::UnitZ();
    if (mode == PdrConfig::VerticalAxis::GravityProjected) {
        Eigen::Vector3d mean = Eigen::Vector3d::Zero();
        for (int i = lo; i <= hi; ++i) {
            mean += Eigen::Vector3d(filtered_axes[0][i], filtered_axes[1][i], filtered_axes[2][i]);
        }
        if (mean.norm() > 1e-9) axis = mean.normalized();
    }
    double az_max = -std::numeric_limits<double>::infinity();
    double az_min = std::numeric_limits<double>::infinity();
    for (int i = lo; i <= hi; ++i) {
        const double az = log[i].accel.dot(axis);
        az_max = std::max(az_max, az);
        az_min = std::min(az_min, az);
    }
    return {az_max, az_min};
}

}  // namespace

PdrResult run_pdr(std::span<const ImuSample> log, const PdrConfig& cfg, Position2 origin) {
    cfg.validate();
    PdrResult result;
    if (log.empty()) return result;
    for (size_t i = 0; i + 1 < log.size(); ++i) {
        if (!(log[i + 1].t > log[i].t)) {
            throw std::invalid_argument("run_pdr: log time does not strictly increase at sample " +
                                        std::to_string(i + 1));
        }
    }
    if (log.size() < static_cast<size_t>(kFiltfiltWarmup)) {
        throw std::invalid_argument("run_pdr: log too short for filtering (" +
                                    std::to_string(log.size()) + " samples)");
    }

    const double fs = median_sample_rate(log);
    const int n = static_cast<int>(log.size());

    std::vector<double> magnitude(n);
    std::array<std::vector<double>, 3> axes;
    for (auto& a : axes) a.resize(n);
    for (int i = 0; i < n; ++i) {
        magnitude[i] = log[i].accel.norm();
        for (int a = 0; a < 3; ++a) axes[a][i] = log[i].accel[a];
    }

    const auto sos = butterworth_lowpass_sos(cfg.cutoff_hz, fs);
    const std::vector<double> filtered = filtfilt(magnitude, sos);
    std::array<std::vector<double>, 3> filtered_axes;
    for (int a = 0; a < 3; ++a) filtered_axes[a] = filtfilt(axes[a], sos);

    const std::vector<int> peaks = detect_steps(filtered, cfg, fs);

    HeadingState heading{Eigen::Quaterniond(Eigen::AngleAxisd(cfg.initial_heading, Eigen::Vector3d::UnitZ())),
                         wrap_pi(cfg.initial_heading)};
    Position2 pos = origin;
    result.trajectory.push_back({0, log.front().t, pos.x, pos.y, std::nullopt});

    int prev_peak = 0;
    for (size_t s = 0; s < peaks.size(); ++s) {
        const int peak = peaks[s];
        const int k = static_cast<int>(s) + 1;

        // Heading integrates over the inter-peak interval; the vertical
        // window is the closed back half of it so the trough between two
        // gait pulses stays inside.
        heading = update_heading(log.subspan(prev_peak, peak - prev_peak + 1), heading);
        const int az_lo = s == 0 ? 0 : (prev_peak + peak) / 2;
        const auto [az_max, az_min] = vertical_extremes(log, filtered_axes, az_lo, peak, cfg.vertical);
        const double length = estimate_step_length(az_max, az_min, cfg.step_coeff);

        pos = dead_reckon(pos, length, heading.heading);
        result.steps.push_back({k, log[peak].t, length, heading.heading, az_max, az_min});
        result.trajectory.push_back({k, log[peak].t, pos.x, pos.y, std::nullopt});
        prev_peak = peak;
    }
    return result;
}

}  // namespace stepfuse
