#include "velocal/tracking.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace velocal {

namespace {

constexpr const char* kTracksHeader = "# velocal-tracks v1";

void push_split(TrackSet& out, FeatureTrack&& t) {
    if (!t.obs.empty()) out.tracks.push_back(std::move(t));
}

}  // namespace

TrackSet read_tracks_stream(std::istream& in, const std::string& name) {
    std::string line;
    if (!std::getline(in, line) || line != kTracksHeader)
        throw ValidationError(name + ": missing header '" + std::string(kTracksHeader) + "'");

    TrackSet out;
    FeatureTrack cur;
    bool have_cur = false;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        std::int64_t id;
        int frame;
        double t, u, v, z;
        char c;
        if (!(ss >> id >> c >> frame >> c >> t >> c >> u >> c >> v >> c >> z))
            throw IoError(name + ":" + std::to_string(line_no) + ": malformed track row");
        if (have_cur && (id != cur.id || frame != cur.frames.back() + 1)) {
            push_split(out, std::move(cur));
            cur = FeatureTrack{};
            have_cur = false;
        }
        if (have_cur && t <= cur.obs.back().t)
            throw IoError(name + ":" + std::to_string(line_no) +
                          ": timestamps not strictly increasing within track");
        cur.id = id;
        cur.frames.push_back(frame);
        cur.obs.push_back({t, Vec2(u, v), z});
        have_cur = true;
        out.frame_times[frame] = t;
    }
    push_split(out, std::move(cur));
    return out;
}

TrackSet read_tracks(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open tracks file: " + path);
    return read_tracks_stream(in, path);
}

void write_tracks(const TrackSet& tracks, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write tracks file: " + path);
    out << kTracksHeader << "\n";
    char buf[256];
    for (const FeatureTrack& t : tracks.tracks) {
        for (size_t i = 0; i < t.obs.size(); ++i) {
            const FeatureObservation& o = t.obs[i];
            std::snprintf(buf, sizeof(buf), "%lld,%d,%.17g,%.9f,%.9f,%.9f\n",
                          static_cast<long long>(t.id), t.frames[i], o.t, o.pixel.x(),
                          o.pixel.y(), o.depth);
            out << buf;
        }
    }
    if (!out) throw IoError("write failure: " + path);
}

TrackSet gate_tracks(const TrackSet& in, int min_frames, double min_depth, double max_depth) {
    TrackSet out;
    out.frame_times = in.frame_times;
    for (const FeatureTrack& t : in.tracks) {
        FeatureTrack cur;
        cur.id = t.id;
        for (size_t i = 0; i < t.obs.size(); ++i) {
            const bool ok = t.obs[i].depth >= min_depth && t.obs[i].depth <= max_depth;
            if (!ok) {
                if (static_cast<int>(cur.obs.size()) >= min_frames)
                    push_split(out, std::move(cur));
                cur = FeatureTrack{};
                cur.id = t.id;
                continue;
            }
            cur.frames.push_back(t.frames[i]);
            cur.obs.push_back(t.obs[i]);
        }
        if (static_cast<int>(cur.obs.size()) >= min_frames) push_split(out, std::move(cur));
    }
    return out;
}

std::vector<std::pair<std::int64_t, FeatureObservation>> frame_view(const TrackSet& tracks,
                                                                    double t) {
    bool known = false;
    for (const auto& [frame, ft] : tracks.frame_times)
        if (ft == t) { known = true; break; }
    if (!known) throw ValidationError("unknown frame time " + std::to_string(t));
    std::vector<std::pair<std::int64_t, FeatureObservation>> out;
    for (const FeatureTrack& tr : tracks.tracks)
        for (const FeatureObservation& o : tr.obs)
            if (o.t == t) out.emplace_back(tr.id, o);
    return out;
}

Rotation3 relative_rotation_kabsch(const std::vector<std::pair<Vec3, Vec3>>& pairs) {
    if (pairs.size() < 3)
        throw DegenerateGeometryError("Kabsch needs at least 3 point pairs");
    Vec3 mean0 = Vec3::Zero(), mean1 = Vec3::Zero();
    for (const auto& [p0, p1] : pairs) {
        mean0 += p0;
        mean1 += p1;
    }
    mean0 /= double(pairs.size());
    mean1 /= double(pairs.size());
    Mat3 cov = Mat3::Zero();
    for (const auto& [p0, p1] : pairs) cov += (p0 - mean0) * (p1 - mean1).transpose();
    Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
    // rank 2 suffices for a unique rotation; rank <2 is degenerate (collinear points)
    if (svd.singularValues()(1) < 1e-12 * std::max(1.0, svd.singularValues()(0)))
        throw DegenerateGeometryError("Kabsch covariance is rank deficient");
    Mat3 D = Mat3::Identity();
    if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) D(2, 2) = -1.0;
    return Rotation3(Mat3(svd.matrixU() * D * svd.matrixV().transpose()));
}

std::optional<RelativeRotation> ransac_relative_rotation(
    const std::vector<std::pair<std::int64_t, FeatureObservation>>& obs0,
    const std::vector<std::pair<std::int64_t, FeatureObservation>>& obs1,
    const CameraIntrinsics& intr, const RansacParams& params, std::mt19937_64& rng) {
    // match by track id
    std::map<std::int64_t, Vec3> pts0;
    for (const auto& [id, o] : obs0) pts0[id] = back_project(o.pixel, o.depth, intr);
    struct Match {
        Vec3 p0, p1;
    };
    std::vector<Match> matches;
    double t0 = 0.0, t1 = 0.0;
    for (const auto& [id, o] : obs1) {
        auto it = pts0.find(id);
        if (it == pts0.end()) continue;
        matches.push_back({it->second, back_project(o.pixel, o.depth, intr)});
        t1 = o.t;
    }
    if (!obs0.empty()) t0 = obs0.front().second.t;
    const int n = static_cast<int>(matches.size());
    if (n < 3) return std::nullopt;

    auto threshold = [&](const Match& m) {
        return params.inlier_threshold_rel * m.p1.z() + params.inlier_threshold_abs;
    };
    auto count_inliers = [&](const Rotation3& R, const Vec3& t, std::vector<int>* idx) {
        // rotation-compensated point transfer with the hypothesis translation
        // (taken from the minimal sample so outliers cannot shift it)
        int count = 0;
        for (int i = 0; i < n; ++i) {
            const double err = (matches[i].p0 - (R * matches[i].p1 + t)).norm();
            if (err < threshold(matches[i])) {
                ++count;
                if (idx) idx->push_back(i);
            }
        }
        return count;
    };

    std::uniform_int_distribution<int> pick(0, n - 1);
    int best_inliers = -1;
    Rotation3 best_R;
    Vec3 best_t = Vec3::Zero();
    int iterations = params.max_iterations;
    for (int it = 0; it < iterations; ++it) {
        int a = pick(rng), b = pick(rng), c = pick(rng);
        if (a == b || b == c || a == c) continue;
        std::vector<std::pair<Vec3, Vec3>> sample = {{matches[a].p0, matches[a].p1},
                                                     {matches[b].p0, matches[b].p1},
                                                     {matches[c].p0, matches[c].p1}};
        Rotation3 R;
        try {
            R = relative_rotation_kabsch(sample);
        } catch (const DegenerateGeometryError&) {
            continue;
        }
        Vec3 s0 = Vec3::Zero(), s1 = Vec3::Zero();
        for (const auto& [p0, p1] : sample) {
            s0 += p0;
            s1 += R * p1;
        }
        const Vec3 t_hyp = (s0 - s1) / 3.0;
        const int inliers = count_inliers(R, t_hyp, nullptr);
        if (inliers > best_inliers) {
            best_inliers = inliers;
            best_R = R;
            best_t = t_hyp;
            // adaptive iteration count for 99% confidence
            const double w = double(inliers) / double(n);
            const double p_good = w * w * w;
            if (p_good > 1e-9 && p_good < 1.0) {
                const int needed = static_cast<int>(
                    std::ceil(std::log(1.0 - params.confidence) / std::log(1.0 - p_good)));
                iterations = std::min(params.max_iterations, std::max(needed, it + 1));
            }
        }
    }
    if (best_inliers < 3 || double(best_inliers) / double(n) < params.min_inlier_ratio)
        return std::nullopt;

    std::vector<int> idx;
    count_inliers(best_R, best_t, &idx);
    std::vector<std::pair<Vec3, Vec3>> inlier_pairs;
    inlier_pairs.reserve(idx.size());
    for (int i : idx) inlier_pairs.emplace_back(matches[i].p0, matches[i].p1);
    RelativeRotation out;
    out.t0 = t0;
    out.t1 = t1;
    out.R = relative_rotation_kabsch(inlier_pairs);
    out.inliers = static_cast<int>(idx.size());
    out.matches = n;
    return out;
}

std::vector<RelativeRotation> estimate_relative_rotations(const TrackSet& tracks,
                                                          const CameraIntrinsics& intr,
                                                          const RansacParams& params) {
    std::mt19937_64 rng(params.seed);
    std::vector<RelativeRotation> out;
    auto it = tracks.frame_times.begin();
    if (it == tracks.frame_times.end()) return out;
    auto prev = it++;
    for (; it != tracks.frame_times.end(); ++it, ++prev) {
        if (it->first != prev->first + 1) continue;
        const auto obs0 = frame_view(tracks, prev->second);
        const auto obs1 = frame_view(tracks, it->second);
        auto rel = ransac_relative_rotation(obs0, obs1, intr, params, rng);
        if (!rel) continue;
        rel->t0 = prev->second;
        rel->t1 = it->second;
        out.push_back(*rel);
    }
    return out;
}

std::map<int, std::vector<FlowFeature>> compute_flow_features(const TrackSet& tracks) {
    std::map<int, std::vector<FlowFeature>> out;
    for (const FeatureTrack& tr : tracks.tracks) {
        if (tr.obs.size() < 3) continue;
        for (size_t i = 1; i + 1 < tr.obs.size(); ++i) {
            const PixelVelocity pv =
                pixel_velocity_lagrange({tr.obs[i - 1], tr.obs[i], tr.obs[i + 1]});
            FlowFeature f;
            f.id = tr.id;
            f.t = tr.obs[i].t;
            f.pixel = tr.obs[i].pixel;
            f.depth = tr.obs[i].depth;
            f.pixel_vel = pv.vel;
            out[tr.frames[i]].push_back(f);
        }
    }
    return out;
}

}  // namespace velocal
