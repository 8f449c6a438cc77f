#include "stepfuse/types.hpp"

#include <cmath>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>

namespace stepfuse {

void Pose6::validate() const {
    const Eigen::Matrix3d err = rotation.transpose() * rotation - Eigen::Matrix3d::Identity();
    if (err.cwiseAbs().maxCoeff() > 1e-9 || std::abs(rotation.determinant() - 1.0) > 1e-9) {
        throw std::invalid_argument("Pose6: rotation is not special-orthogonal");
    }
    if (!translation.allFinite()) {
        throw std::invalid_argument("Pose6: translation is not finite");
    }
}

Position2 project_pose_to_xy(const Pose6& pose) {
    return {pose.translation.x(), pose.translation.y()};
}

void FeatureMapDB::validate() const {
    std::unordered_set<std::int64_t> landmark_ids;
    landmark_ids.reserve(landmarks.size());
    for (const auto& lm : landmarks) landmark_ids.insert(lm.id);

    std::unordered_set<int> frame_ids;
    for (const auto& f : frames) {
        frame_ids.insert(f.id);
        if (std::abs(f.global_descriptor.norm() - 1.0) > 1e-6) {
            throw std::invalid_argument("map: frame " + std::to_string(f.id) +
                                        " global descriptor is not unit norm");
        }
        for (const auto& kp : f.keypoints) {
            if (kp.landmark_id >= 0 && !landmark_ids.count(kp.landmark_id)) {
                throw std::invalid_argument("map: frame " + std::to_string(f.id) +
                                            " references missing landmark " +
                                            std::to_string(kp.landmark_id));
            }
            if (std::abs(kp.descriptor.norm() - 1.0) > 1e-6) {
                throw std::invalid_argument("map: frame " + std::to_string(f.id) +
                                            " has a non-unit local descriptor");
            }
        }
    }

    for (const auto& [id, links] : covisibility) {
        if (!frame_ids.count(id)) {
            throw std::invalid_argument("map: covisibility references unknown frame " +
                                        std::to_string(id));
        }
        for (int other : links) {
            auto it = covisibility.find(other);
            const bool back = it != covisibility.end() &&
                              std::find(it->second.begin(), it->second.end(), id) != it->second.end();
            if (!back) {
                throw std::invalid_argument("map: covisibility is not symmetric between frames " +
                                            std::to_string(id) + " and " + std::to_string(other));
            }
        }
    }
}

std::map<int, std::vector<int>> compute_covisibility(const FeatureMapDB& db) {
    // landmark -> frames observing it
    std::unordered_map<std::int64_t, std::vector<int>> observers;
    for (const auto& f : db.frames) {
        for (const auto& kp : f.keypoints) {
            if (kp.landmark_id >= 0) observers[kp.landmark_id].push_back(f.id);
        }
    }
    std::map<int, std::set<int>> links;
    for (const auto& f : db.frames) links[f.id];  // every frame gets an entry
    for (const auto& [lm, frames] : observers) {
        for (size_t i = 0; i < frames.size(); ++i) {
            for (size_t j = i + 1; j < frames.size(); ++j) {
                if (frames[i] == frames[j]) continue;
                links[frames[i]].insert(frames[j]);
                links[frames[j]].insert(frames[i]);
            }
        }
    }
    std::map<int, std::vector<int>> out;
    for (auto& [id, s] : links) out.emplace(id, std::vector<int>(s.begin(), s.end()));
    return out;
}

}  // namespace stepfuse
