#pragma once

#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "stepfuse/types.hpp"

namespace stepfuse {

/// Group of covisible map frames seeded by one retrieved frame, capped at
/// `kClusterCap` members, together with the union of their landmark ids.
struct SceneCluster {
    int seed_frame = -1;
    std::vector<int> frame_ids;
    std::vector<std::int64_t> landmark_ids;
};

inline constexpr int kClusterCap = 20;

/// 2D-3D correspondence: query pixel, resolved landmark.
struct Correspondence {
    Eigen::Vector2d pixel = Eigen::Vector2d::Zero();
    Eigen::Vector3d point = Eigen::Vector3d::Zero();
    std::int64_t landmark_id = -1;
    double distance_sq = 0.0;  // descriptor distance of the accepted match
};

struct RansacParams {
    double pixel_threshold = 3.0;  // px, inlier gate on reprojection error
    int max_iterations = 1000;
    double confidence = 0.99;      // adaptive stopping target
    int early_stop_inliers = 100;  // consensus size that ends the loop early
    int min_inliers = 12;          // success requires at least this many
    std::uint64_t seed = 0;
};

struct RelocResult {
    Pose6 pose;  // camera-to-world
    int inliers = 0;
    int cluster_id = -1;  // index into the cluster list used, -1 on failure
    std::vector<Correspondence> correspondences;  // final inlier set
    bool success = false;
};

struct RelocConfig {
    int retrieval_k = 10;
    int max_clusters = 5;
    double lowe_ratio = 0.8;
    int early_accept_inliers = 50;  // stop iterating clusters at this consensus
    RansacParams ransac;
    std::uint64_t seed = 0;
};

/// Read-only acceleration structures over a FeatureMapDB: flattened global
/// descriptors for retrieval and per-frame landmark-linked descriptor blocks
/// for matching. Safe to share across concurrent relocalize calls.
class MapIndex {
  public:
    explicit MapIndex(const FeatureMapDB& db);

    const FeatureMapDB& db() const { return *db_; }
    int frame_count() const { return static_cast<int>(db_->frames.size()); }

    const Eigen::MatrixXd& global_descriptors() const { return global_; }

    /// Landmark-linked keypoints of one frame, flattened column-major.
    struct MatchableBlock {
        Eigen::MatrixXd descriptors;            // dim x count
        std::vector<std::int64_t> landmark_ids;  // per column
    };
    const MatchableBlock& matchable(int frame_id) const;

    const std::vector<int>& covisible(int frame_id) const;
    Eigen::Vector3d landmark_position(std::int64_t id) const;
    const FrameRecord& frame(int frame_id) const;

  private:
    const FeatureMapDB* db_;
    Eigen::MatrixXd global_;  // D_g x F, column i = frame at index i
    std::vector<int> frame_ids_;  // column -> frame id
    std::unordered_map<int, int> frame_index_;  // frame id -> column
    std::vector<MatchableBlock> matchable_;
    std::unordered_map<std::int64_t, Eigen::Vector3d> landmark_pos_;
    std::vector<int> empty_;

    friend std::vector<int> retrieve_top_k(const Eigen::VectorXd&, const MapIndex&, int);
};

/// Frame ids ranked by ascending Euclidean distance between global
/// descriptors; ties break toward the smaller frame id.
std::vector<int> retrieve_top_k(const Eigen::VectorXd& query_gd, const MapIndex& index, int k);

/// Expands retrieved frames into covisibility clusters: each not-yet-absorbed
/// retrieved frame seeds a cluster of frames sharing >= 1 landmark with it,
/// capped at kClusterCap members (seed kept, rest ranked by shared-landmark
/// count). Returns up to max_clusters clusters sorted by descending size.
std::vector<SceneCluster> expand_covisible_clusters(const std::vector<int>& retrieved,
                                                    const MapIndex& index, int max_clusters);

/// Pooled nearest-neighbor matching of query keypoints against every
/// landmark-linked keypoint in the cluster, filtered by Lowe's ratio test
/// (d1/d2 <= ratio). At most one correspondence per query keypoint; duplicate
/// landmark targets keep the smallest distance.
std::vector<Correspondence> match_local_features(const QueryFeatures& query,
                                                 const SceneCluster& cluster,
                                                 const MapIndex& index, double ratio);

/// Camera pose from 2D-3D correspondences: DLT on 6-point minimal samples
/// inside a RANSAC loop with adaptive stopping and early termination, then
/// Gauss-Newton refinement on the consensus set. Fewer than 6 correspondences
/// (or no non-degenerate sample) yields a failure result.
RelocResult solve_pnp_ransac(std::span<const Correspondence> correspondences,
                             const PinholeIntrinsics& intrinsics, const RansacParams& params);

/// Three-stage pipeline: retrieval, cluster expansion, per-cluster matching +
/// PnP-RANSAC. Returns the first result whose inlier count reaches
/// early_accept_inliers, otherwise the best-inlier result over all clusters.
RelocResult relocalize(const QueryFeatures& query, const MapIndex& index, const RelocConfig& cfg);

}  // namespace stepfuse
