#include "stepfuse/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace stepfuse::io {

using ordered_json = nlohmann::ordered_json;

namespace {

std::string loc(const std::filesystem::path& path, size_t line) {
    return path.string() + ":" + std::to_string(line);
}

[[noreturn]] void fail(const std::filesystem::path& path, size_t line, const std::string& what) {
    throw std::runtime_error(loc(path, line) + ": " + what);
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open for reading: " + path.string());
    return in;
}

double parse_double(std::string_view s, const std::filesystem::path& path, size_t line) {
    double v = 0.0;
    const char* begin = s.data();
    const char* end = begin + s.size();
    auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc{} || ptr != end) fail(path, line, "bad number '" + std::string(s) + "'");
    return v;
}

long parse_long(std::string_view s, const std::filesystem::path& path, size_t line) {
    long v = 0;
    const char* begin = s.data();
    const char* end = begin + s.size();
    auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc{} || ptr != end) fail(path, line, "bad integer '" + std::string(s) + "'");
    return v;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    size_t start = 0;
    while (true) {
        const size_t pos = s.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(s.substr(start));
            break;
        }
        out.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

ordered_json vec_to_json(const Eigen::VectorXd& v) {
    ordered_json a = ordered_json::array();
    for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

Eigen::VectorXd json_to_vec(const nlohmann::json& a) {
    Eigen::VectorXd v(a.size());
    for (size_t i = 0; i < a.size(); ++i) v[static_cast<int>(i)] = a[i].get<double>();
    return v;
}

ordered_json pose_to_json(const Pose6& p) {
    ordered_json r = ordered_json::array();
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) r.push_back(p.rotation(i, j));
    }
    ordered_json t = ordered_json::array({p.translation.x(), p.translation.y(), p.translation.z()});
    return ordered_json{{"rotation", std::move(r)}, {"translation", std::move(t)}};
}

Pose6 json_to_pose(const nlohmann::json& j) {
    Pose6 p;
    const auto& r = j.at("rotation");
    for (int i = 0; i < 3; ++i) {
        for (int c = 0; c < 3; ++c) p.rotation(i, c) = r.at(i * 3 + c).get<double>();
    }
    const auto& t = j.at("translation");
    p.translation = {t.at(0).get<double>(), t.at(1).get<double>(), t.at(2).get<double>()};
    return p;
}

}  // namespace

std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

// --- IMU CSV -----------------------------------------------------------------

void write_imu_csv(const std::filesystem::path& path, const std::vector<ImuSample>& log) {
    auto out = open_out(path);
    out << "t,ax,ay,az,gx,gy,gz\n";
    for (const auto& s : log) {
        out << format_double(s.t);
        for (int i = 0; i < 3; ++i) out << ',' << format_double(s.accel[i]);
        for (int i = 0; i < 3; ++i) out << ',' << format_double(s.gyro[i]);
        out << '\n';
    }
}

std::vector<ImuSample> read_imu_csv(const std::filesystem::path& path) {
    auto in = open_in(path);
    std::string line;
    size_t line_no = 0;
    if (!std::getline(in, line)) fail(path, 1, "empty file");
    ++line_no;
    if (line != "t,ax,ay,az,gx,gy,gz") fail(path, 1, "bad IMU CSV header '" + line + "'");

    std::vector<ImuSample> log;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto f = split(line, ',');
        if (f.size() != 7) fail(path, line_no, "expected 7 fields");
        ImuSample s;
        s.t = parse_double(f[0], path, line_no);
        for (int i = 0; i < 3; ++i) s.accel[i] = parse_double(f[1 + i], path, line_no);
        for (int i = 0; i < 3; ++i) s.gyro[i] = parse_double(f[4 + i], path, line_no);
        if (!log.empty() && !(s.t > log.back().t)) {
            fail(path, line_no, "timestamps must strictly increase");
        }
        log.push_back(s);
    }
    return log;
}

// --- Trajectory CSV ------------------------------------------------------------

void write_trajectory_csv(const std::filesystem::path& path,
                          const std::vector<TrajectoryPoint>& traj) {
    auto out = open_out(path);
    const bool with_truth = !traj.empty() && traj.front().truth.has_value();
    out << (with_truth ? "k,t,x,y,x_true,y_true\n" : "k,t,x,y\n");
    for (const auto& p : traj) {
        out << p.k << ',' << format_double(p.t) << ',' << format_double(p.x) << ','
            << format_double(p.y);
        if (with_truth) {
            if (!p.truth) throw std::runtime_error("trajectory: inconsistent truth columns");
            out << ',' << format_double(p.truth->x) << ',' << format_double(p.truth->y);
        }
        out << '\n';
    }
}

std::vector<TrajectoryPoint> read_trajectory_csv(const std::filesystem::path& path) {
    auto in = open_in(path);
    std::string line;
    size_t line_no = 1;
    if (!std::getline(in, line)) fail(path, 1, "empty file");
    bool with_truth = false;
    if (line == "k,t,x,y,x_true,y_true") {
        with_truth = true;
    } else if (line != "k,t,x,y") {
        fail(path, 1, "bad trajectory CSV header '" + line + "'");
    }
    std::vector<TrajectoryPoint> traj;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto f = split(line, ',');
        if (f.size() != (with_truth ? 6u : 4u)) fail(path, line_no, "wrong field count");
        TrajectoryPoint p;
        p.k = static_cast<int>(parse_long(f[0], path, line_no));
        p.t = parse_double(f[1], path, line_no);
        p.x = parse_double(f[2], path, line_no);
        p.y = parse_double(f[3], path, line_no);
        if (with_truth) {
            p.truth = Position2{parse_double(f[4], path, line_no), parse_double(f[5], path, line_no)};
        }
        traj.push_back(p);
    }
    return traj;
}

// --- Ground truth CSV ------------------------------------------------------------

void write_truth_csv(const std::filesystem::path& path, const std::vector<TruthPoint>& truth) {
    auto out = open_out(path);
    out << "k,t,x_true,y_true,psi_true\n";
    for (const auto& p : truth) {
        out << p.k << ',' << format_double(p.t) << ',' << format_double(p.x) << ','
            << format_double(p.y) << ',' << format_double(p.psi) << '\n';
    }
}

std::vector<TruthPoint> read_truth_csv(const std::filesystem::path& path) {
    auto in = open_in(path);
    std::string line;
    size_t line_no = 1;
    if (!std::getline(in, line)) fail(path, 1, "empty file");
    if (line != "k,t,x_true,y_true,psi_true") fail(path, 1, "bad truth CSV header '" + line + "'");
    std::vector<TruthPoint> truth;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto f = split(line, ',');
        if (f.size() != 5) fail(path, line_no, "expected 5 fields");
        TruthPoint p;
        p.k = static_cast<int>(parse_long(f[0], path, line_no));
        p.t = parse_double(f[1], path, line_no);
        p.x = parse_double(f[2], path, line_no);
        p.y = parse_double(f[3], path, line_no);
        p.psi = parse_double(f[4], path, line_no);
        truth.push_back(p);
    }
    return truth;
}

// --- Map JSON ---------------------------------------------------------------------

void write_map_json(const std::filesystem::path& path, const FeatureMapDB& db) {
    ordered_json j;
    j["intrinsics"] = {{"fx", db.intrinsics.fx}, {"fy", db.intrinsics.fy},
                       {"cx", db.intrinsics.cx}, {"cy", db.intrinsics.cy},
                       {"width", db.intrinsics.width}, {"height", db.intrinsics.height}};
    j["map_scale"] = db.map_scale;

    ordered_json frames = ordered_json::array();
    for (const auto& f : db.frames) {
        ordered_json kps = ordered_json::array();
        for (const auto& kp : f.keypoints) {
            kps.push_back({{"u", kp.u}, {"v", kp.v}, {"landmark_id", kp.landmark_id},
                           {"descriptor", vec_to_json(kp.descriptor)}});
        }
        frames.push_back({{"id", f.id}, {"pose", pose_to_json(f.pose)},
                          {"global_descriptor", vec_to_json(f.global_descriptor)},
                          {"keypoints", std::move(kps)}});
    }
    j["frames"] = std::move(frames);

    ordered_json lms = ordered_json::array();
    for (const auto& lm : db.landmarks) {
        lms.push_back({{"id", lm.id}, {"position", ordered_json::array({lm.position.x(), lm.position.y(), lm.position.z()})}});
    }
    j["landmarks"] = std::move(lms);

    ordered_json covis = ordered_json::array();
    for (const auto& [id, links] : db.covisibility) {
        covis.push_back({{"frame", id}, {"covisible", links}});
    }
    j["covisibility"] = std::move(covis);

    auto out = open_out(path);
    out << j.dump() << '\n';
}

FeatureMapDB read_map_json(const std::filesystem::path& path) {
    auto in = open_in(path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
    FeatureMapDB db;
    const auto& intr = j.at("intrinsics");
    db.intrinsics = {intr.at("fx"), intr.at("fy"), intr.at("cx"), intr.at("cy"),
                     intr.at("width"), intr.at("height")};
    db.map_scale = j.value("map_scale", 1.0);
    for (const auto& fj : j.at("frames")) {
        FrameRecord f;
        f.id = fj.at("id");
        f.pose = json_to_pose(fj.at("pose"));
        f.global_descriptor = json_to_vec(fj.at("global_descriptor"));
        for (const auto& kj : fj.at("keypoints")) {
            MapKeypoint kp;
            kp.u = kj.at("u");
            kp.v = kj.at("v");
            kp.landmark_id = kj.at("landmark_id");
            kp.descriptor = json_to_vec(kj.at("descriptor"));
            f.keypoints.push_back(std::move(kp));
        }
        db.frames.push_back(std::move(f));
    }
    for (const auto& lj : j.at("landmarks")) {
        const auto& p = lj.at("position");
        db.landmarks.push_back({lj.at("id"), Eigen::Vector3d(p.at(0), p.at(1), p.at(2))});
    }
    for (const auto& cj : j.at("covisibility")) {
        db.covisibility[cj.at("frame").get<int>()] = cj.at("covisible").get<std::vector<int>>();
    }
    db.validate();
    return db;
}

// --- Step events JSONL ---------------------------------------------------------------

void write_steps_jsonl(const std::filesystem::path& path, const std::vector<StepEvent>& steps) {
    auto out = open_out(path);
    for (const auto& s : steps) {
        ordered_json j{{"k", s.index}, {"t", s.t_peak}, {"length", s.length},
                       {"heading", s.heading}, {"az_max", s.az_max}, {"az_min", s.az_min}};
        out << j.dump() << '\n';
    }
}

std::vector<StepEvent> read_steps_jsonl(const std::filesystem::path& path) {
    auto in = open_in(path);
    std::vector<StepEvent> steps;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            fail(path, line_no, e.what());
        }
        steps.push_back({j.at("k"), j.at("t"), j.at("length"), j.at("heading"),
                         j.at("az_max"), j.at("az_min")});
    }
    return steps;
}

// --- Observations JSONL -----------------------------------------------------------------

void write_observations_jsonl(const std::filesystem::path& path,
                              const std::vector<RelocObservation>& obs) {
    auto out = open_out(path);
    for (const auto& o : obs) {
        ordered_json j{{"k", o.k}, {"x", o.position.x}, {"y", o.position.y},
                       {"inliers", o.inliers}, {"accepted", o.accepted}, {"source", o.source}};
        out << j.dump() << '\n';
    }
}

std::vector<RelocObservation> read_observations_jsonl(const std::filesystem::path& path) {
    auto in = open_in(path);
    std::vector<RelocObservation> obs;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            fail(path, line_no, e.what());
        }
        RelocObservation o;
        o.k = j.at("k");
        o.position = {j.at("x"), j.at("y")};
        o.inliers = j.at("inliers");
        if (j.contains("accepted")) {
            o.accepted = j.at("accepted");
        } else if (j.contains("success")) {
            o.accepted = j.at("success");
        } else {
            fail(path, line_no, "missing 'accepted' (or 'success') field");
        }
        o.source = j.value("source", "file");
        obs.push_back(std::move(o));
    }
    return obs;
}

// --- Queries JSONL -----------------------------------------------------------------------

void write_queries_jsonl(const std::filesystem::path& path, const std::vector<QueryRecord>& queries) {
    auto out = open_out(path);
    for (const auto& q : queries) {
        ordered_json kps = ordered_json::array();
        for (const auto& kp : q.features.keypoints) {
            kps.push_back({{"u", kp.u}, {"v", kp.v}, {"descriptor", vec_to_json(kp.descriptor)}});
        }
        ordered_json j{{"k", q.k}, {"t", q.t},
                       {"global_descriptor", vec_to_json(q.features.global_descriptor)},
                       {"keypoints", std::move(kps)}};
        out << j.dump() << '\n';
    }
}

std::vector<QueryRecord> read_queries_jsonl(const std::filesystem::path& path,
                                            const PinholeIntrinsics& intrinsics) {
    auto in = open_in(path);
    std::vector<QueryRecord> queries;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            fail(path, line_no, e.what());
        }
        QueryRecord q;
        q.k = j.at("k");
        q.t = j.at("t");
        q.features.global_descriptor = json_to_vec(j.at("global_descriptor"));
        q.features.intrinsics = intrinsics;
        for (const auto& kj : j.at("keypoints")) {
            q.features.keypoints.push_back({kj.at("u"), kj.at("v"), json_to_vec(kj.at("descriptor"))});
        }
        queries.push_back(std::move(q));
    }
    return queries;
}

// --- Metrics JSON ---------------------------------------------------------------------------

void write_metrics_json(const std::filesystem::path& path, const MetricsReport& report) {
    ordered_json j{{"rmse", report.rmse}, {"max_error", report.max_error},
                   {"loop_error", report.loop_error}, {"per_step_errors", report.per_step_errors}};
    auto out = open_out(path);
    out << j.dump(2) << '\n';
}

MetricsReport read_metrics_json(const std::filesystem::path& path) {
    auto in = open_in(path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
    MetricsReport r;
    r.rmse = j.at("rmse");
    r.max_error = j.at("max_error");
    r.loop_error = j.at("loop_error");
    r.per_step_errors = j.at("per_step_errors").get<std::vector<double>>();
    return r;
}

}  // namespace stepfuse::io
