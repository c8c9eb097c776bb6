/*
 * groundpose - joint multi-object pose, ground plane and focal length estimation.
 *
 * Copyright 2026 The groundpose Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#ifndef GROUNDPOSE_SYNTH_ORACLE_HPP
#define GROUNDPOSE_SYNTH_ORACLE_HPP

#include "groundpose/plane_consensus.hpp"
#include "groundpose/projection.hpp"
#include "groundpose/scene_model.hpp"
#include "groundpose/so3.hpp"

#include "Eigen/Core"
#include "Eigen/Geometry"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace groundpose {

/**
 * A 12-keypoint car (wheels, head/tail lights, roof corners), roughly
 * 4.2 x 1.6 x 1.45 object units, centred on its keypoint centroid. The two
 * deformation components stretch length and height; each is scaled to a 6%
 * standard deviation.
 */
inline ShapeAtlas make_car_atlas()
{
    // x forward, y left, z up; heights measured from the ground.
    const std::vector<std::pair<std::string, Vec3>> points = {
        {"wheel_front_left", {1.30, 0.80, 0.33}},   {"wheel_front_right", {1.30, -0.80, 0.33}},
        {"wheel_rear_left", {-1.30, 0.80, 0.33}},   {"wheel_rear_right", {-1.30, -0.80, 0.33}},
        {"headlight_left", {2.10, 0.65, 0.70}},     {"headlight_right", {2.10, -0.65, 0.70}},
        {"taillight_left", {-2.10, 0.65, 0.80}},    {"taillight_right", {-2.10, -0.65, 0.80}},
        {"roof_front_left", {0.50, 0.65, 1.45}},    {"roof_front_right", {0.50, -0.65, 1.45}},
        {"roof_rear_left", {-0.90, 0.65, 1.45}},    {"roof_rear_right", {-0.90, -0.65, 1.45}},
    };
    ShapeAtlas atlas;
    atlas.mean_shape.resize(3, static_cast<Eigen::Index>(points.size()));
    for (std::size_t i = 0; i < points.size(); ++i) {
        atlas.keypoint_names.push_back(points[i].first);
        atlas.mean_shape.col(static_cast<Eigen::Index>(i)) = points[i].second;
    }
    const Vec3 centroid = atlas.mean_shape.rowwise().mean();
    atlas.mean_shape.colwise() -= centroid;

    constexpr double sigma = 0.06;
    Eigen::Matrix3Xd length = Eigen::Matrix3Xd::Zero(3, atlas.mean_shape.cols());
    Eigen::Matrix3Xd height = Eigen::Matrix3Xd::Zero(3, atlas.mean_shape.cols());
    length.row(0) = sigma * atlas.mean_shape.row(0);
    height.row(2) = sigma * atlas.mean_shape.row(2);
    atlas.basis = {length, height};
    atlas.coeff_bounds = Eigen::VectorXd::Constant(2, kDefaultCoeffBound);
    return finalize_atlas(std::move(atlas));
}

struct SynthConfig
{
    int n_objects = 10;
    Vec2 image_size = Vec2(1280.0, 720.0);
    /// Pixels.
    Vec2 focal_range = Vec2(700.0, 1400.0);
    /// Camera pitch below the horizon, radians.
    Vec2 plane_tilt_range = Vec2(0.25, 0.6);
    double roll_max = 0.05;
    /// Camera height above the plane of object centres, object units.
    Vec2 camera_height_range = Vec2(6.0, 14.0);
    /// Object depth (camera z), object units.
    Vec2 depth_range = Vec2(15.0, 60.0);
    double keypoint_noise_sigma = 0.0;
    /// Fraction of objects turned into pose outliers.
    double outlier_fraction = 0.0;
    /// Fraction of each object's keypoints whose score is set to zero.
    double keypoint_drop_fraction = 0.0;
    double coeff_sigma = 1.0;
    CoeffBoundMode coeff_bound_mode = CoeffBoundMode::symmetric;
    /// Keypoints are kept at least this far inside the image.
    double image_margin = 16.0;
    std::uint64_t seed = 0;
};

enum class OutlierMode { pose, keypoint };

struct OutlierLabels
{
    std::vector<bool> objects;
    std::vector<std::vector<bool>> keypoints;
};

struct SyntheticScene
{
    Scene scene;
    SceneEstimate truth;
    OutlierLabels labels;
};

namespace detail {

inline bool projects_inside(const Eigen::Matrix3Xd& pts, const CameraIntrinsics& cam, const Vec2& image_size,
                            double margin, Eigen::Matrix2Xd& out)
{
    out.resize(2, pts.cols());
    for (Eigen::Index i = 0; i < pts.cols(); ++i) {
        if (!(pts(2, i) > 0.0)) {
            return false;
        }
        const Vec2 p = project_point(pts.col(i), cam);
        if (p.x() < margin || p.y() < margin || p.x() > image_size.x() - margin ||
            p.y() > image_size.y() - margin) {
            return false;
        }
        out.col(i) = p;
    }
    return true;
}

/// Rotation taking the canonical up axis onto `up`, with canonical forward pointing away from the camera.
inline Mat3 plane_frame(const Vec3& up)
{
    Vec3 forward = Vec3::UnitZ() - Vec3::UnitZ().dot(up) * up;
    if (forward.norm() < 1e-9) {
        forward = Vec3::UnitX() - Vec3::UnitX().dot(up) * up;
    }
    forward.normalize();
    Mat3 frame;
    frame.col(0) = forward;
    frame.col(1) = up.cross(forward);
    frame.col(2) = up;
    return frame;
}

inline double uniform(std::mt19937_64& rng, double lo, double hi)
{
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt)
{
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

} // namespace detail

/**
 * Adds N(0, sigma^2) noise to both coordinates of every keypoint with a
 * positive score and replaces that score with clamp(1 - |noise| / (3 sigma)).
 * Zero-score keypoints are left alone.
 */
inline Scene perturb_keypoints(const Scene& scene, double sigma, std::uint64_t seed)
{
    if (sigma < 0.0) {
        throw Error(ErrorKind::invalid_argument, "noise sigma must be non-negative");
    }
    Scene out = scene;
    if (sigma == 0.0) {
        return out;
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, sigma);
    for (Detection& det : out.detections) {
        for (Eigen::Index i = 0; i < det.keypoints.cols(); ++i) {
            if (det.scores[i] <= 0.0) {
                continue;
            }
            const double nx = noise(rng);
            const double ny = noise(rng);
            det.keypoints(0, i) += nx;
            det.keypoints(1, i) += ny;
            det.scores[i] = std::clamp(1.0 - std::hypot(nx, ny) / (3.0 * sigma), 0.0, 1.0);
        }
    }
    return out;
}

/// Zeroes the score of round(fraction * n) keypoints per object, never leaving fewer than 6.
inline Scene drop_keypoints(const Scene& scene, double fraction, std::uint64_t seed)
{
    Scene out = scene;
    std::mt19937_64 rng(seed);
    for (Detection& det : out.detections) {
        const int n = det.num_keypoints();
        const int drop = std::min(static_cast<int>(std::lround(fraction * n)), std::max(0, n - 6));
        std::vector<int> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        for (int q = 0; q < drop; ++q) {
            det.scores[order[q]] = 0.0;
        }
    }
    return out;
}

/**
 * Pose mode lifts each chosen object 0.5 to 1.5 diameters along the plane
 * normal and tilts it 15 to 35 degrees about a random in-plane axis, then
 * re-projects it; the truth records the displaced pose. Keypoint mode moves
 * the chosen keypoints to uniform image positions.
 */
inline SyntheticScene plant_outliers(const SyntheticScene& input, const ShapeAtlas& atlas, double fraction,
                                     OutlierMode mode, std::uint64_t seed, double image_margin = 16.0)
{
    if (fraction < 0.0 || fraction > 0.5) {
        throw Error(ErrorKind::invalid_argument, "outlier fraction must lie in [0, 0.5]");
    }
    SyntheticScene out = input;
    const int n_obj = static_cast<int>(out.scene.detections.size());
    out.labels.objects.assign(n_obj, false);
    out.labels.keypoints.assign(n_obj, {});
    for (int k = 0; k < n_obj; ++k) {
        out.labels.keypoints[k].assign(out.scene.detections[k].num_keypoints(), false);
    }
    if (fraction == 0.0) {
        return out;
    }
    std::mt19937_64 rng(seed);
    const CameraIntrinsics& cam = out.truth.intrinsics;
    const Vec3 up = out.truth.plane.normal().normalized();

    if (mode == OutlierMode::pose) {
        const int count = static_cast<int>(std::lround(fraction * n_obj));
        std::vector<int> order(n_obj);
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        for (int q = 0; q < count; ++q) {
            const int k = order[q];
            bool placed = false;
            for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
                const double lift = detail::uniform(rng, 0.5, 1.5) * atlas.diameter * (attempt % 2 == 0 ? 1.0 : -1.0);
                const double tilt = detail::uniform(rng, 15.0, 35.0) * M_PI / 180.0;
                const double axis_angle = detail::uniform(rng, -M_PI, M_PI);
                const Mat3 frame = detail::plane_frame(up);
                const Vec3 axis = std::cos(axis_angle) * frame.col(0) + std::sin(axis_angle) * frame.col(1);
                ObjectState state = out.truth.objects[k];
                state.translation += lift * up;
                state.rotation = so3::exp(tilt * axis) * state.rotation;
                Eigen::Matrix2Xd projected;
                if (detail::projects_inside(transform_shape(state, atlas), cam, out.scene.image_size, image_margin,
                                            projected)) {
                    out.truth.objects[k] = state;
                    out.scene.detections[k].keypoints = projected;
                    placed = true;
                }
            }
            if (!placed) {
                throw Error(ErrorKind::generation, "could not place pose outlier for object " + std::to_string(k));
            }
            out.labels.objects[k] = true;
            if (static_cast<int>(out.truth.plane_inliers.size()) == n_obj) {
                out.truth.plane_inliers[k] = false;
            }
        }
        return out;
    }

    std::vector<std::pair<int, int>> candidates;
    for (int k = 0; k < n_obj; ++k) {
        const Detection& det = out.scene.detections[k];
        for (int i = 0; i < det.num_keypoints(); ++i) {
            if (det.scores[i] > 0.0) {
                candidates.emplace_back(k, i);
            }
        }
    }
    std::shuffle(candidates.begin(), candidates.end(), rng);
    const int count = static_cast<int>(std::lround(fraction * static_cast<double>(candidates.size())));
    for (int q = 0; q < count; ++q) {
        const auto [k, i] = candidates[q];
        out.scene.detections[k].keypoints(0, i) = detail::uniform(rng, 0.0, out.scene.image_size.x());
        out.scene.detections[k].keypoints(1, i) = detail::uniform(rng, 0.0, out.scene.image_size.y());
        out.labels.keypoints[k][i] = true;
    }
    return out;
}

/**
 * Samples a camera (focal, pitch, small roll, height above the plane of
 * object centres) and places objects on that plane with their up-axes equal
 * to its normal, uniform yaw and clipped Gaussian shape coefficients. Every
 * keypoint of every object projects inside the image. Pose outliers, keypoint
 * dropping and noise are applied in that order when configured.
 */
inline SyntheticScene generate_scene(const ShapeAtlas& atlas, const SynthConfig& config)
{
    if (const auto report = validate_atlas(atlas); !report.empty()) {
        throw Error(ErrorKind::invalid_argument, "invalid atlas: " + report.front());
    }
    if (config.n_objects < 0) {
        throw Error(ErrorKind::invalid_argument, "n_objects must be non-negative");
    }
    std::mt19937_64 rng(config.seed);

    CameraIntrinsics cam;
    cam.focal = detail::uniform(rng, config.focal_range.x(), config.focal_range.y());
    cam.principal_point = config.image_size / 2.0;
    const double pitch = detail::uniform(rng, config.plane_tilt_range.x(), config.plane_tilt_range.y());
    const double roll = detail::uniform(rng, -config.roll_max, config.roll_max);
    const Vec3 up =
        Eigen::AngleAxisd(roll, Vec3::UnitZ()) * Vec3(0.0, -std::cos(pitch), -std::sin(pitch));
    const double height = detail::uniform(rng, config.camera_height_range.x(), config.camera_height_range.y());
    Vec4 plane_coeffs;
    plane_coeffs << up, height;

    SyntheticScene out;
    out.scene.image_size = config.image_size;
    out.truth.intrinsics = cam;
    out.truth.plane = normalize_plane(Plane{plane_coeffs});
    const Mat3 frame = detail::plane_frame(up);
    const auto [lower, upper] = coeff_box(atlas, config.coeff_bound_mode);
    std::normal_distribution<double> coeff_noise(0.0, config.coeff_sigma);

    for (int k = 0; k < config.n_objects; ++k) {
        bool placed = false;
        for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
            const double u = detail::uniform(rng, config.image_margin, config.image_size.x() - config.image_margin);
            const double v = detail::uniform(rng, config.image_margin, config.image_size.y() - config.image_margin);
            const double yaw = detail::uniform(rng, -M_PI, M_PI);
            Eigen::VectorXd coeffs(atlas.num_components());
            for (Eigen::Index j = 0; j < coeffs.size(); ++j) {
                coeffs[j] = config.coeff_sigma > 0.0 ? coeff_noise(rng) : 0.0;
            }
            const Vec3 ray((u - cam.principal_point.x()) / cam.focal, (v - cam.principal_point.y()) / cam.focal, 1.0);
            const double denom = up.dot(ray);
            if (!(denom < 0.0)) {
                continue;
            }
            const Vec3 position = (-height / denom) * ray;
            if (position.z() < config.depth_range.x() || position.z() > config.depth_range.y()) {
                continue;
            }
            ObjectState state;
            state.rotation = frame * Eigen::AngleAxisd(yaw, Vec3::UnitZ()).toRotationMatrix();
            state.translation = position;
            state.coeffs = coeffs.cwiseMax(lower).cwiseMin(upper);
            Eigen::Matrix2Xd projected;
            if (!detail::projects_inside(transform_shape(state, atlas), cam, config.image_size, config.image_margin,
                                         projected)) {
                continue;
            }
            Detection det;
            det.id = "obj" + std::to_string(k);
            det.keypoints = projected;
            det.scores = Eigen::VectorXd::Ones(atlas.num_keypoints());
            out.scene.detections.push_back(det);
            out.truth.objects.push_back(state);
            out.truth.ids.push_back(det.id);
            placed = true;
        }
        if (!placed) {
            throw Error(ErrorKind::generation, "could not place object " + std::to_string(k) + " in 1000 attempts");
        }
    }
    const auto n = out.truth.objects.size();
    out.truth.status.assign(n, ObjectStatus::ok);
    out.truth.failure_reasons.assign(n, "");
    out.truth.per_object_loss.assign(n, 0.0);
    out.truth.plane_inliers.assign(n, true);
    out.truth.converged = true;
    out.labels.objects.assign(n, false);
    out.labels.keypoints.assign(n, std::vector<bool>(atlas.num_keypoints(), false));

    if (config.outlier_fraction > 0.0) {
        out = plant_outliers(out, atlas, config.outlier_fraction, OutlierMode::pose,
                             detail::mix_seed(config.seed, 1), config.image_margin);
    }
    if (config.keypoint_drop_fraction > 0.0) {
        out.scene = drop_keypoints(out.scene, config.keypoint_drop_fraction, detail::mix_seed(config.seed, 2));
    }
    if (config.keypoint_noise_sigma > 0.0) {
        out.scene = perturb_keypoints(out.scene, config.keypoint_noise_sigma, detail::mix_seed(config.seed, 3));
    }
    return out;
}

} // namespace groundpose

#endif // GROUNDPOSE_SYNTH_ORACLE_HPP
