#include "stepfuse/relocalizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <Eigen/SVD>

#include "stepfuse/angles.hpp"
#include "stepfuse/kernels.hpp"

namespace stepfuse {

namespace {

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    // splitmix64 step
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// World-to-camera rigid transform used internally by the PnP solver.
struct CameraPose {
    Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
    Eigen::Vector3d t = Eigen::Vector3d::Zero();
};

inline Eigen::Vector2d project(const CameraPose& pose, const Eigen::Vector3d& x,
                               const PinholeIntrinsics& intr, double* depth = nullptr) {
    const Eigen::Vector3d pc = pose.R * x + pose.t;
    if (depth) *depth = pc.z();
    return {intr.fx * pc.x() / pc.z() + intr.cx, intr.fy * pc.y() / pc.z() + intr.cy};
}

int count_inliers(const CameraPose& pose, std::span<const Correspondence> corrs,
                  const PinholeIntrinsics& intr, double threshold, std::vector<int>* inliers) {
    const double thr_sq = threshold * threshold;
    int count = 0;
    if (inliers) inliers->clear();
    for (size_t i = 0; i < corrs.size(); ++i) {
        double depth = 0.0;
        const Eigen::Vector2d px = project(pose, corrs[i].point, intr, &depth);
        if (depth <= 0.0) continue;
        if ((px - corrs[i].pixel).squaredNorm() <= thr_sq) {
            ++count;
            if (inliers) inliers->push_back(static_cast<int>(i));
        }
    }
    return count;
}

// 3D points of a minimal sample must span three dimensions; DLT degenerates
// on collinear and coplanar configurations.
bool sample_degenerate(const std::vector<Eigen::Vector3d>& pts) {
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (const auto& p : pts) mean += p;
    mean /= static_cast<double>(pts.size());
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (const auto& p : pts) {
        const Eigen::Vector3d d = p - mean;
        cov += d * d.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
    const Eigen::Vector3d ev = es.eigenvalues();  // ascending
    return !(ev(0) > 1e-10 * std::max(ev(2), 1e-12));
}

// Direct linear transform over >= 6 correspondences in normalized image
// coordinates; returns false when the system is unusable.
bool solve_dlt(std::span<const Correspondence> corrs, std::span<const int> idx,
               const PinholeIntrinsics& intr, CameraPose* out) {
    const int m = static_cast<int>(idx.size());
    Eigen::MatrixXd a(2 * m, 12);
    for (int r = 0; r < m; ++r) {
        const Correspondence& c = corrs[idx[r]];
        const double xn = (c.pixel.x() - intr.cx) / intr.fx;
        const double yn = (c.pixel.y() - intr.cy) / intr.fy;
        const Eigen::Vector3d& p = c.point;
        a.row(2 * r) << p.x(), p.y(), p.z(), 1, 0, 0, 0, 0, -xn * p.x(), -xn * p.y(), -xn * p.z(), -xn;
        a.row(2 * r + 1) << 0, 0, 0, 0, p.x(), p.y(), p.z(), 1, -yn * p.x(), -yn * p.y(), -yn * p.z(), -yn;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinV);
    const Eigen::VectorXd v = svd.matrixV().col(11);

    Eigen::Matrix<double, 3, 4> proj;
    proj << v(0), v(1), v(2), v(3), v(4), v(5), v(6), v(7), v(8), v(9), v(10), v(11);
    Eigen::Matrix3d m3 = proj.leftCols<3>();
    if (m3.determinant() < 0) {
        proj = -proj;
        m3 = -m3;
    }
    Eigen::JacobiSVD<Eigen::Matrix3d> rsvd(m3, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const double scale = rsvd.singularValues().mean();
    if (!(scale > 1e-12)) return false;
    Eigen::Matrix3d r = rsvd.matrixU() * rsvd.matrixV().transpose();
    if (r.determinant() < 0) {
        // should not happen once det(m3) > 0, but keep the solver total
        r = rsvd.matrixU() * Eigen::Vector3d(1, 1, -1).asDiagonal() * rsvd.matrixV().transpose();
    }
    out->R = r;
    out->t = proj.col(3) / scale;
    return out->t.allFinite();
}

// Gauss-Newton on SE(3), left-multiplied increment [dt; dw], minimizing
// pixel reprojection error over the given subset.
void refine_pose(std::span<const Correspondence> corrs, std::span<const int> idx,
                 const PinholeIntrinsics& intr, CameraPose* pose) {
    for (int iter = 0; iter < 20; ++iter) {
        Eigen::Matrix<double, 6, 6> h = Eigen::Matrix<double, 6, 6>::Zero();
        Eigen::Matrix<double, 6, 1> b = Eigen::Matrix<double, 6, 1>::Zero();
        for (int i : idx) {
            const Eigen::Vector3d pc = pose->R * corrs[i].point + pose->t;
            if (pc.z() <= 1e-9) continue;
            const double iz = 1.0 / pc.z();
            const Eigen::Vector2d px(intr.fx * pc.x() * iz + intr.cx,
                                     intr.fy * pc.y() * iz + intr.cy);
            const Eigen::Vector2d res = px - corrs[i].pixel;

            Eigen::Matrix<double, 2, 3> dpi;
            dpi << intr.fx * iz, 0, -intr.fx * pc.x() * iz * iz,
                   0, intr.fy * iz, -intr.fy * pc.y() * iz * iz;
            Eigen::Matrix<double, 3, 6> dpc;
            dpc.leftCols<3>() = Eigen::Matrix3d::Identity();
            dpc.rightCols<3>() << 0, pc.z(), -pc.y(), -pc.z(), 0, pc.x(), pc.y(), -pc.x(), 0;
            // dpc wrt dw is -[pc]x
            const Eigen::Matrix<double, 2, 6> jac = dpi * dpc;
            h += jac.transpose() * jac;
            b -= jac.transpose() * res;
        }
        const Eigen::Matrix<double, 6, 1> delta = h.ldlt().solve(b);
        if (!delta.allFinite()) return;
        pose->t += delta.head<3>();
        const Eigen::Quaterniond dq = quat_exp(delta.tail<3>());
        pose->R = (dq.toRotationMatrix() * pose->R).eval();
        if (delta.lpNorm<Eigen::Infinity>() < 1e-12) break;
    }
}

}  // namespace

// --- MapIndex ------------------------------------------------------------------

MapIndex::MapIndex(const FeatureMapDB& db) : db_(&db) {
    const int f = static_cast<int>(db.frames.size());
    const int dim_g = f > 0 ? static_cast<int>(db.frames.front().global_descriptor.size())
                            : kGlobalDescriptorDim;
    global_.resize(dim_g, f);
    frame_ids_.resize(f);
    matchable_.resize(f);
    for (int c = 0; c < f; ++c) {
        const FrameRecord& frame = db.frames[c];
        global_.col(c) = frame.global_descriptor;
        frame_ids_[c] = frame.id;
        frame_index_[frame.id] = c;

        int linked = 0;
        for (const auto& kp : frame.keypoints) {
            if (kp.landmark_id >= 0) ++linked;
        }
        const int dim_l = frame.keypoints.empty()
                              ? kLocalDescriptorDim
                              : static_cast<int>(frame.keypoints.front().descriptor.size());
        MatchableBlock& block = matchable_[c];
        block.descriptors.resize(dim_l, linked);
        block.landmark_ids.reserve(linked);
        int col = 0;
        for (const auto& kp : frame.keypoints) {
            if (kp.landmark_id < 0) continue;
            block.descriptors.col(col++) = kp.descriptor;
            block.landmark_ids.push_back(kp.landmark_id);
        }
    }
    for (const auto& lm : db.landmarks) landmark_pos_[lm.id] = lm.position;
}

const MapIndex::MatchableBlock& MapIndex::matchable(int frame_id) const {
    return matchable_[frame_index_.at(frame_id)];
}

const std::vector<int>& MapIndex::covisible(int frame_id) const {
    auto it = db_->covisibility.find(frame_id);
    return it == db_->covisibility.end() ? empty_ : it->second;
}

Eigen::Vector3d MapIndex::landmark_position(std::int64_t id) const {
    return landmark_pos_.at(id);
}

const FrameRecord& MapIndex::frame(int frame_id) const {
    return db_->frames[frame_index_.at(frame_id)];
}

// --- Retrieval -----------------------------------------------------------------

std::vector<int> retrieve_top_k(const Eigen::VectorXd& query_gd, const MapIndex& index, int k) {
    if (k < 1) throw std::invalid_argument("retrieve_top_k: k must be >= 1");
    const int f = index.frame_count();
    if (f == 0) throw std::invalid_argument("retrieve_top_k: empty map");

    std::vector<double> dist(f);
    kernels::squared_distances(query_gd.data(), index.global_.data(),
                               static_cast<int>(query_gd.size()), f, dist.data());

    std::vector<int> order(f);
    std::iota(order.begin(), order.end(), 0);
    const auto& ids = index.frame_ids_;
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (dist[a] != dist[b]) return dist[a] < dist[b];
        return ids[a] < ids[b];
    });
    order.resize(std::min(k, f));
    std::vector<int> out(order.size());
    for (size_t i = 0; i < order.size(); ++i) out[i] = ids[order[i]];
    return out;
}

// --- Cluster expansion ------------------------------------------------------------

std::vector<SceneCluster> expand_covisible_clusters(const std::vector<int>& retrieved,
                                                    const MapIndex& index, int max_clusters) {
    std::set<int> absorbed;
    std::vector<SceneCluster> clusters;

    for (size_t rank = 0; rank < retrieved.size(); ++rank) {
        const int seed = retrieved[rank];
        if (absorbed.count(seed)) continue;  // already part of an earlier cluster

        // Shared-landmark counts against the seed rank covisible members.
        std::set<std::int64_t> seed_lms(index.matchable(seed).landmark_ids.begin(),
                                        index.matchable(seed).landmark_ids.end());
        std::vector<std::pair<int, int>> members;  // (shared count, frame id)
        for (int other : index.covisible(seed)) {
            int shared = 0;
            for (std::int64_t lm : index.matchable(other).landmark_ids) {
                if (seed_lms.count(lm)) ++shared;
            }
            if (shared > 0) members.emplace_back(shared, other);
        }
        std::sort(members.begin(), members.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return a.second < b.second;
        });

        SceneCluster cluster;
        cluster.seed_frame = seed;
        cluster.frame_ids.push_back(seed);
        for (const auto& [shared, id] : members) {
            if (static_cast<int>(cluster.frame_ids.size()) >= kClusterCap) break;
            cluster.frame_ids.push_back(id);
        }

        std::set<std::int64_t> lm_union;
        for (int id : cluster.frame_ids) {
            absorbed.insert(id);
            const auto& lms = index.matchable(id).landmark_ids;
            lm_union.insert(lms.begin(), lms.end());
        }
        cluster.landmark_ids.assign(lm_union.begin(), lm_union.end());
        clusters.push_back(std::move(cluster));
    }

    std::stable_sort(clusters.begin(), clusters.end(), [](const SceneCluster& a, const SceneCluster& b) {
        return a.frame_ids.size() > b.frame_ids.size();
    });
    if (static_cast<int>(clusters.size()) > max_clusters) clusters.resize(max_clusters);
    return clusters;
}

// --- Local feature matching ----------------------------------------------------------

std::vector<Correspondence> match_local_features(const QueryFeatures& query,
                                                 const SceneCluster& cluster,
                                                 const MapIndex& index, double ratio) {
    if (!(ratio > 0.0 && ratio < 1.0)) {
        throw std::invalid_argument("match_local_features: ratio must be in (0, 1)");
    }
    const int m = static_cast<int>(query.keypoints.size());
    if (m == 0 || cluster.frame_ids.empty()) return {};

    const int dim = static_cast<int>(query.keypoints.front().descriptor.size());
    Eigen::MatrixXd queries(dim, m);
    for (int j = 0; j < m; ++j) queries.col(j) = query.keypoints[j].descriptor;

    std::vector<kernels::DescriptorSpan> pools;
    std::vector<const std::vector<std::int64_t>*> pool_lms;
    pools.reserve(cluster.frame_ids.size());
    for (int id : cluster.frame_ids) {
        const auto& block = index.matchable(id);
        if (block.landmark_ids.empty()) continue;
        pools.push_back({block.descriptors.data(), static_cast<int>(block.landmark_ids.size())});
        pool_lms.push_back(&block.landmark_ids);
    }
    if (pools.empty()) return {};

    std::vector<kernels::NearestTwo> nn(m);
    kernels::nearest_two(queries.data(), m, pools, dim, nn.data());

    // Flat candidate index -> landmark id
    std::vector<std::int64_t> flat_lms;
    for (const auto* lms : pool_lms) flat_lms.insert(flat_lms.end(), lms->begin(), lms->end());

    // Lowe ratio on distances (not squared); single-candidate pools pass.
    std::unordered_map<std::int64_t, Correspondence> best_per_landmark;
    for (int j = 0; j < m; ++j) {
        if (nn[j].index < 0) continue;
        const double d1 = std::sqrt(nn[j].d1_sq);
        const double d2 = std::sqrt(nn[j].d2_sq);
        if (std::isfinite(d2) && d1 > ratio * d2) continue;
        const std::int64_t lm = flat_lms[nn[j].index];
        Correspondence c{{query.keypoints[j].u, query.keypoints[j].v},
                         index.landmark_position(lm), lm, nn[j].d1_sq};
        auto it = best_per_landmark.find(lm);
        if (it == best_per_landmark.end() || c.distance_sq < it->second.distance_sq) {
            best_per_landmark[lm] = std::move(c);
        }
    }

    std::vector<Correspondence> out;
    out.reserve(best_per_landmark.size());
    for (auto& [lm, c] : best_per_landmark) out.push_back(std::move(c));
    std::sort(out.begin(), out.end(), [](const Correspondence& a, const Correspondence& b) {
        return a.landmark_id < b.landmark_id;
    });
    return out;
}

// --- PnP-RANSAC -------------------------------------------------------------------------

RelocResult solve_pnp_ransac(std::span<const Correspondence> correspondences,
                             const PinholeIntrinsics& intrinsics, const RansacParams& params) {
    constexpr int kSampleSize = 6;
    RelocResult result;
    const int n = static_cast<int>(correspondences.size());
    if (n < kSampleSize) return result;

    std::mt19937_64 rng(params.seed);
    std::uniform_int_distribution<int> pick(0, n - 1);

    CameraPose best_pose;
    int best_inliers = 0;
    bool have_model = false;

    int needed = params.max_iterations;
    std::vector<int> sample(kSampleSize);
    std::vector<Eigen::Vector3d> sample_pts(kSampleSize);
    for (int iter = 0; iter < needed && best_inliers < params.early_stop_inliers; ++iter) {
        // distinct indices
        for (int s = 0; s < kSampleSize; ++s) {
            int candidate;
            bool repeat;
            do {
                candidate = pick(rng);
                repeat = false;
                for (int q = 0; q < s; ++q) repeat |= sample[q] == candidate;
            } while (repeat);
            sample[s] = candidate;
        }
        for (int s = 0; s < kSampleSize; ++s) sample_pts[s] = correspondences[sample[s]].point;
        if (sample_degenerate(sample_pts)) continue;

        CameraPose pose;
        if (!solve_dlt(correspondences, sample, intrinsics, &pose)) continue;
        const int inliers = count_inliers(pose, correspondences, intrinsics,
                                          params.pixel_threshold, nullptr);
        if (inliers > best_inliers) {
            best_inliers = inliers;
            best_pose = pose;
            have_model = true;
            // adaptive stopping at the configured confidence
            const double w = static_cast<double>(inliers) / n;
            const double p_good = std::pow(w, kSampleSize);
            if (p_good >= 1.0 - 1e-12) {
                needed = iter + 1;
            } else if (p_good > 0.0) {
                const double est = std::log(1.0 - params.confidence) / std::log(1.0 - p_good);
                needed = std::min(needed, iter + 1 + static_cast<int>(std::ceil(est)));
            }
        }
    }

    if (!have_model || best_inliers < kSampleSize) return result;

    // Polish on the consensus set, re-gate, and polish once more if the
    // inlier set changed.
    std::vector<int> inlier_idx;
    count_inliers(best_pose, correspondences, intrinsics, params.pixel_threshold, &inlier_idx);
    for (int round = 0; round < 2 && static_cast<int>(inlier_idx.size()) >= kSampleSize; ++round) {
        refine_pose(correspondences, inlier_idx, intrinsics, &best_pose);
        std::vector<int> next;
        count_inliers(best_pose, correspondences, intrinsics, params.pixel_threshold, &next);
        const bool stable = next == inlier_idx;
        inlier_idx = std::move(next);
        if (stable) break;
    }

    result.inliers = static_cast<int>(inlier_idx.size());
    result.success = result.inliers >= std::max(params.min_inliers, kSampleSize);
    result.pose.rotation = best_pose.R.transpose();
    result.pose.translation = -best_pose.R.transpose() * best_pose.t;
    result.correspondences.reserve(inlier_idx.size());
    for (int i : inlier_idx) result.correspondences.push_back(correspondences[i]);
    return result;
}

// --- Full pipeline -------------------------------------------------------------------------

RelocResult relocalize(const QueryFeatures& query, const MapIndex& index, const RelocConfig& cfg) {
    RelocResult best;
    if (index.frame_count() == 0 || query.global_descriptor.size() == 0) return best;

    const std::vector<int> retrieved = retrieve_top_k(query.global_descriptor, index, cfg.retrieval_k);
    const std::vector<SceneCluster> clusters =
        expand_covisible_clusters(retrieved, index, cfg.max_clusters);

    for (size_t ci = 0; ci < clusters.size(); ++ci) {
        const auto corrs = match_local_features(query, clusters[ci], index, cfg.lowe_ratio);
        if (static_cast<int>(corrs.size()) < 6) continue;
        RansacParams rp = cfg.ransac;
        rp.seed = mix_seed(cfg.seed, ci);
        RelocResult r = solve_pnp_ransac(corrs, query.intrinsics, rp);
        r.cluster_id = static_cast<int>(ci);
        if (r.success && r.inliers >= cfg.early_accept_inliers) return r;
        if (r.inliers > best.inliers || (!best.success && r.success)) best = std::move(r);
    }
    return best;
}

}  // namespace stepfuse
