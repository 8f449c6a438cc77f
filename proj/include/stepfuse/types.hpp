#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace stepfuse {

inline constexpr int kGlobalDescriptorDim = 64;
inline constexpr int kLocalDescriptorDim = 32;

/// One timestamped accelerometer + gyroscope reading. Accel in m/s^2
/// (specific force, reads +g on the up axis at rest), gyro in rad/s,
/// both in the body frame. t strictly increases within a log.
struct ImuSample {
    double t = 0.0;
    Eigen::Vector3d accel = Eigen::Vector3d::Zero();
    Eigen::Vector3d gyro = Eigen::Vector3d::Zero();
};

/// Detected gait event. Indices are 1-based and contiguous within a run.
struct StepEvent {
    int index = 0;
    double t_peak = 0.0;
    double length = 0.0;   // meters, >= 0
    double heading = 0.0;  // radians, (-pi, pi]
    double az_max = 0.0;   // m/s^2, vertical accel extremes over the step
    double az_min = 0.0;
};

/// Horizontal world-frame position in meters.
struct Position2 {
    double x = 0.0;
    double y = 0.0;

    Position2() = default;
    Position2(double px, double py) : x(px), y(py) {}
    explicit Position2(const Eigen::Vector2d& v) : x(v.x()), y(v.y()) {}

    Eigen::Vector2d vec() const { return {x, y}; }

    friend Position2 operator+(const Position2& a, const Position2& b) {
        return {a.x + b.x, a.y + b.y};
    }
    friend Position2 operator-(const Position2& a, const Position2& b) {
        return {a.x - b.x, a.y - b.y};
    }
    double norm() const { return std::sqrt(x * x + y * y); }
};

/// Rigid camera pose, camera-to-world: `rotation` maps camera axes into the
/// world frame and `translation` is the camera center in world meters.
/// Camera convention: +z optical axis (forward), +x right, +y down.
struct Pose6 {
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();

    /// Throws std::invalid_argument if rotation is not special-orthogonal
    /// to 1e-9 or translation is not finite.
    void validate() const;
};

/// Horizontal projection of a camera pose: world-frame x,y of the center.
Position2 project_pose_to_xy(const Pose6& pose);

struct PinholeIntrinsics {
    double fx = 0.0, fy = 0.0;
    double cx = 0.0, cy = 0.0;
    int width = 0, height = 0;
};

/// Map keypoint: pixel position, unit local descriptor, optional landmark link.
struct MapKeypoint {
    double u = 0.0, v = 0.0;
    Eigen::VectorXd descriptor;
    std::int64_t landmark_id = -1;  // -1 when not linked to a landmark
};

struct FrameRecord {
    int id = 0;
    Pose6 pose;
    Eigen::VectorXd global_descriptor;  // unit norm
    std::vector<MapKeypoint> keypoints;
};

struct Landmark {
    std::int64_t id = 0;
    Eigen::Vector3d position = Eigen::Vector3d::Zero();
};

/// Pre-built sparse feature map: frames with known poses and descriptors,
/// 3D landmarks, and frame covisibility (frames sharing >= 1 landmark).
struct FeatureMapDB {
    std::vector<FrameRecord> frames;
    std::vector<Landmark> landmarks;
    std::map<int, std::vector<int>> covisibility;  // frame id -> sorted frame ids
    PinholeIntrinsics intrinsics;
    double map_scale = 1.0;  // meters per unit, fixed to 1 after load

    /// Structural invariants: landmark references resolve, covisibility is
    /// symmetric, descriptors unit-norm to 1e-6. Throws std::invalid_argument.
    void validate() const;
};

/// Recomputes the covisibility relation from shared landmark ids.
std::map<int, std::vector<int>> compute_covisibility(const FeatureMapDB& db);

/// Extracted features of one query image.
struct QueryFeatures {
    Eigen::VectorXd global_descriptor;  // unit norm
    struct Keypoint {
        double u = 0.0, v = 0.0;
        Eigen::VectorXd descriptor;  // unit norm
    };
    std::vector<Keypoint> keypoints;
    PinholeIntrinsics intrinsics;
};

/// Horizontal position fix produced by relocalization (or read from file /
/// synthesized). `accepted` mirrors the fusion gate: inliers > gate.
struct RelocObservation {
    int k = 0;
    Position2 position;
    int inliers = 0;
    bool accepted = false;
    std::string source = "pipeline";  // pipeline | file | simulator
};

/// Horizontal positioning error statistics of a trajectory against truth.
struct MetricsReport {
    double rmse = 0.0;
    double max_error = 0.0;
    double loop_error = 0.0;
    std::vector<double> per_step_errors;
};

/// One estimated trajectory row; truth columns optional.
struct TrajectoryPoint {
    int k = 0;
    double t = 0.0;
    double x = 0.0, y = 0.0;
    std::optional<Position2> truth;
};

/// One ground-truth row emitted by the simulator.
struct TruthPoint {
    int k = 0;
    double t = 0.0;
    double x = 0.0, y = 0.0;
    double psi = 0.0;
};

}  // namespace stepfuse
