#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "velocal/sensors.hpp"

namespace velocal {

/// One landmark's time-ordered observations. Frame indices are consecutive;
/// loaders split tracks at frame gaps.
struct FeatureTrack {
    std::int64_t id = 0;
    std::vector<int> frames;                  // consecutive frame indices
    std::vector<FeatureObservation> obs;      // strictly increasing timestamps
};

struct TrackSet {
    std::vector<FeatureTrack> tracks;
    // frame index -> camera-clock timestamp, for frames with any observation
    std::map<int, double> frame_times;
};

/// Track file format: header "# velocal-tracks v1", then CSV rows
/// track_id,frame_index,t,u,v,depth.
TrackSet read_tracks(const std::string& path);
void write_tracks(const TrackSet& tracks, const std::string& path);
TrackSet read_tracks_stream(std::istream& in, const std::string& name);

/// Drops tracks shorter than min_frames and observations with depth outside
/// [min_depth, max_depth] (splitting tracks at the removed observations).
TrackSet gate_tracks(const TrackSet& in, int min_frames, double min_depth, double max_depth);

/// All observations at an exact frame time; throws if the time is unknown.
std::vector<std::pair<std::int64_t, FeatureObservation>> frame_view(const TrackSet& tracks,
                                                                    double t);

struct RelativeRotation {
    double t0 = 0.0, t1 = 0.0;   // s, camera clock, t1 > t0
    Rotation3 R;                 // frame at t1 -> frame at t0
    int inliers = 0;
    int matches = 0;
};

/// Orthogonal Procrustes (Kabsch) rotation between matched 3D point sets:
/// minimizes sum |p0 - (R p1 + t)|^2, translation solved and discarded.
Rotation3 relative_rotation_kabsch(const std::vector<std::pair<Vec3, Vec3>>& pairs);

struct RansacParams {
    double confidence = 0.99;
    int max_iterations = 200;
    double min_inlier_ratio = 0.5;
    // inlier if transfer error < inlier_threshold_rel * depth + inlier_threshold_abs
    double inlier_threshold_rel = 0.03;   // 3 * default depth noise sigma
    double inlier_threshold_abs = 1e-3;   // m
    std::uint64_t seed = 1;
};

/// RANSAC-protected relative rotation between two frames' matched 3D points.
/// Returns nullopt when matches are insufficient or consensus stays below
/// the minimum inlier ratio (frame pair skipped).
std::optional<RelativeRotation> ransac_relative_rotation(
    const std::vector<std::pair<std::int64_t, FeatureObservation>>& obs0,
    const std::vector<std::pair<std::int64_t, FeatureObservation>>& obs1,
    const CameraIntrinsics& intr, const RansacParams& params, std::mt19937_64& rng);

/// Relative rotations for all consecutive frame pairs in the track set.
std::vector<RelativeRotation> estimate_relative_rotations(const TrackSet& tracks,
                                                          const CameraIntrinsics& intr,
                                                          const RansacParams& params);

/// A feature observation together with its Lagrange-differentiated pixel
/// velocity. Only interior observations of tracks spanning at least three
/// consecutive frames produce one.
struct FlowFeature {
    std::int64_t id = 0;
    double t = 0.0;          // s, camera clock
    Vec2 pixel = Vec2::Zero();
    double depth = 0.0;
    Vec2 pixel_vel = Vec2::Zero();   // px/s
};

/// Pixel velocities for every eligible observation, grouped by frame index.
std::map<int, std::vector<FlowFeature>> compute_flow_features(const TrackSet& tracks);

}  // namespace velocal
