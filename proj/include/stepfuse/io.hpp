#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "stepfuse/types.hpp"

namespace stepfuse::io {

// All writers produce byte-stable output for identical inputs; doubles are
// written with shortest round-trip formatting, so every read-back compares
// bit-exact. Readers throw std::runtime_error with file/line context on
// malformed input.

// --- IMU log CSV: header `t,ax,ay,az,gx,gy,gz` ---------------------------
void write_imu_csv(const std::filesystem::path& path, const std::vector<ImuSample>& log);
std::vector<ImuSample> read_imu_csv(const std::filesystem::path& path);

// --- Trajectory CSV: `k,t,x,y` plus optional `x_true,y_true` -------------
void write_trajectory_csv(const std::filesystem::path& path,
                          const std::vector<TrajectoryPoint>& traj);
std::vector<TrajectoryPoint> read_trajectory_csv(const std::filesystem::path& path);

// --- Ground truth CSV: `k,t,x_true,y_true,psi_true` ----------------------
void write_truth_csv(const std::filesystem::path& path, const std::vector<TruthPoint>& truth);
std::vector<TruthPoint> read_truth_csv(const std::filesystem::path& path);

// --- Feature map JSON -----------------------------------------------------
void write_map_json(const std::filesystem::path& path, const FeatureMapDB& db);
FeatureMapDB read_map_json(const std::filesystem::path& path);  // validates invariants

// --- Step events JSON-lines ------------------------------------------------
void write_steps_jsonl(const std::filesystem::path& path, const std::vector<StepEvent>& steps);
std::vector<StepEvent> read_steps_jsonl(const std::filesystem::path& path);

// --- Relocalization observations JSON-lines --------------------------------
// Fields k,x,y,inliers,accepted,source; `success` is accepted as an alias
// for `accepted` on read.
void write_observations_jsonl(const std::filesystem::path& path,
                              const std::vector<RelocObservation>& obs);
std::vector<RelocObservation> read_observations_jsonl(const std::filesystem::path& path);

// --- Query features JSON-lines ---------------------------------------------
struct QueryRecord {
    int k = 0;
    double t = 0.0;
    QueryFeatures features;
};
void write_queries_jsonl(const std::filesystem::path& path, const std::vector<QueryRecord>& queries);
// Intrinsics are not stored per line; the caller supplies them (from the map).
std::vector<QueryRecord> read_queries_jsonl(const std::filesystem::path& path,
                                            const PinholeIntrinsics& intrinsics);

// --- Metrics JSON -----------------------------------------------------------
void write_metrics_json(const std::filesystem::path& path, const MetricsReport& report);
MetricsReport read_metrics_json(const std::filesystem::path& path);

/// Shortest round-trip decimal form of a double (used by all CSV writers).
std::string format_double(double v);

}  // namespace stepfuse::io
