#pragma once

#include <span>
#include <vector>

#include <Eigen/Geometry>

#include "stepfuse/types.hpp"

namespace stepfuse {

/// Step detection and dead-reckoning parameters. Defaults target normal
/// walking (1.5-2.5 Hz cadence) sampled at 100 Hz.
struct PdrConfig {
    double peak_min = 0.8;          // m/s^2, lower bound on the (|a|-g) peak
    double peak_max = 6.0;          // m/s^2, upper bound
    double min_peak_spacing = 0.3;  // s, minimum time between adjacent peaks
    int window = 31;                // samples, odd; local-maximum validation
    double cutoff_hz = 3.0;         // low-pass cutoff
    double step_coeff = 0.48;       // step-length coefficient K
    double gravity = 9.80665;       // m/s^2
    double initial_heading = 0.0;   // rad, world frame

    enum class VerticalAxis {
        GravityProjected,  // project onto gravity estimated per step window
        BodyZ,             // raw body z axis
    };
    VerticalAxis vertical = VerticalAxis::GravityProjected;

    /// Throws std::invalid_argument on an out-of-range field.
    void validate() const;
};

/// Peak candidates of the filtered acceleration magnitude: local maxima of
/// (magnitude - gravity) within the sliding window, inside the amplitude
/// band, separated by more than the minimum spacing. Returns sample indices
/// in time order.
std::vector<int> detect_steps(std::span<const double> filtered_magnitude, const PdrConfig& cfg,
                              double sample_hz);

/// Step length from the vertical-acceleration dynamic range:
/// K * (az_max - az_min)^(1/4). Throws std::invalid_argument if az_max < az_min.
double estimate_step_length(double az_max, double az_min, double k_coeff);

/// Attitude plus its yaw, kept consistent by the heading update.
struct HeadingState {
    Eigen::Quaterniond attitude = Eigen::Quaterniond::Identity();  // body to world
    double heading = 0.0;  // rad, (-pi, pi]
};

/// Propagates attitude over one step interval by midpoint-rule integration of
/// the gyro samples and extracts the yaw. Fewer than two samples leave the
/// state unchanged.
HeadingState update_heading(std::span<const ImuSample> interval, const HeadingState& prev);

/// One step of the position recursion: p + S * (cos psi, sin psi).
Position2 dead_reckon(const Position2& prev, double step_length, double heading);

struct PdrResult {
    std::vector<StepEvent> steps;
    std::vector<TrajectoryPoint> trajectory;  // k=0 start row + one row per step
};

/// Full pipeline: filter, detect steps, estimate lengths and headings, fold
/// the position update. The log must be strictly time-ordered (throws
/// std::invalid_argument otherwise). An empty log yields an empty result.
PdrResult run_pdr(std::span<const ImuSample> log, const PdrConfig& cfg,
                  Position2 origin = {0.0, 0.0});

}  // namespace stepfuse
