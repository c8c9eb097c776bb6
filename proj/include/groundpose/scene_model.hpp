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

#ifndef GROUNDPOSE_SCENE_MODEL_HPP
#define GROUNDPOSE_SCENE_MODEL_HPP

#include "groundpose/error.hpp"

#include "Eigen/Core"
#include "Eigen/Geometry"

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace groundpose {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;

/// Canonical object frame: +X forward, +Z up, origin at the keypoint centroid.
inline const Vec3 kCanonicalUp = Vec3::UnitZ();

/// Pinhole camera with square pixels and zero skew.
struct CameraIntrinsics
{
    double focal = 1.0;
    Vec2 principal_point = Vec2::Zero();
};

/**
 * Deformable keypoint model. An instance is mean_shape + sum_j coeffs_j * basis[j].
 * Points are stored column-wise (3 x n). Basis components are expected to be
 * scaled by their standard deviation, so coefficients are in units of sigma.
 */
struct ShapeAtlas
{
    Eigen::Matrix3Xd mean_shape;
    std::vector<Eigen::Matrix3Xd> basis;
    Eigen::VectorXd coeff_bounds;
    double diameter = 0.0;
    std::vector<std::string> keypoint_names;

    int num_keypoints() const { return static_cast<int>(mean_shape.cols()); }
    int num_components() const { return static_cast<int>(basis.size()); }
};

struct Detection
{
    Eigen::Matrix2Xd keypoints;
    Eigen::VectorXd scores;
    std::string id;

    int num_keypoints() const { return static_cast<int>(keypoints.cols()); }
    int num_usable(double min_score = 0.0) const
    {
        return static_cast<int>((scores.array() > min_score).count());
    }
};

struct ObjectState
{
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();
    Eigen::VectorXd coeffs;
};

/// Plane v_a x + v_b y + v_c z + v_d = 0 in the camera frame.
struct Plane
{
    Vec4 coeffs = Vec4(0.0, 0.0, 1.0, 0.0);

    Vec3 normal() const { return coeffs.head<3>(); }
    double offset() const { return coeffs[3]; }
};

struct Scene
{
    std::vector<Detection> detections;
    std::optional<CameraIntrinsics> intrinsics_hint;
    Vec2 image_size = Vec2(1280.0, 720.0);
};

enum class ObjectStatus { ok, failed };

struct SceneEstimate
{
    std::vector<ObjectState> objects;
    std::vector<std::string> ids;
    std::vector<ObjectStatus> status;
    std::vector<std::string> failure_reasons;
    Plane plane;
    CameraIntrinsics intrinsics;
    std::vector<double> per_object_loss;
    /// Objects that took part in the last plane consensus (translation and rotation inliers).
    std::vector<bool> plane_inliers;
    bool converged = false;
    int iterations = 0;
    /// Fewer than three solvable objects: focal held fixed, plane from rotations only.
    bool degraded = false;
    bool focal_clamped = false;
    bool focal_unobservable = false;
    /// Angle between the two consensus plane normals at the last iteration (radians).
    double plane_disagreement = 0.0;
};

struct WeightSchedule
{
    double initial = 1.0;
    double growth = 2.0;
    double cap = 1e4;
};

enum class CoeffBoundMode { symmetric, nonnegative };

struct RansacConfig
{
    int iterations = 200;
    /// Object units; unset means 0.15 x the atlas diameter.
    std::optional<double> distance_threshold;
    double angle_threshold = 10.0 * M_PI / 180.0;
    std::uint64_t seed = 0;
};

struct SolverConfig
{
    double mu_shape = 1.0;
    WeightSchedule mu1_schedule{0.01, 2.0, 1e4};
    WeightSchedule mu2_schedule{1.0, 2.0, 1e6};
    int max_iters = 30;
    double convergence_tol = 1e-6;
    /// Per-object alternation: relative loss change threshold and iteration cap.
    double inner_tol = 1e-8;
    int inner_max_iters = 50;
    RansacConfig ransac;
    CoeffBoundMode coeff_bound_mode = CoeffBoundMode::symmetric;
    /// Keypoints below this score are left out of the linear pose initialization.
    double dlt_min_score = 0.05;
    bool use_plane = true;
    bool estimate_focal = true;
    double focal_min_factor = 0.1;
    double focal_max_factor = 10.0;
    double focal_ratio_eps = 1e-3;
    std::uint64_t seed = 0;
};

/// Default per-component bound used when an atlas carries none.
inline constexpr double kDefaultCoeffBound = 3.0;

inline Eigen::Matrix3Xd instantiate_shape(const ShapeAtlas& atlas, const Eigen::VectorXd& coeffs)
{
    if (coeffs.size() != atlas.num_components()) {
        throw Error(ErrorKind::invalid_argument,
                    "expected " + std::to_string(atlas.num_components()) + " shape coefficients, got " +
                        std::to_string(coeffs.size()));
    }
    Eigen::Matrix3Xd shape = atlas.mean_shape;
    for (int j = 0; j < atlas.num_components(); ++j) {
        shape += coeffs[j] * atlas.basis[j];
    }
    return shape;
}

inline double max_pairwise_distance(const Eigen::Matrix3Xd& points)
{
    double best = 0.0;
    for (Eigen::Index a = 0; a < points.cols(); ++a) {
        for (Eigen::Index b = a + 1; b < points.cols(); ++b) {
            best = std::max(best, (points.col(a) - points.col(b)).norm());
        }
    }
    return best;
}

/// Lists every invariant the atlas violates; an empty result means the atlas is usable.
inline std::vector<std::string> validate_atlas(const ShapeAtlas& atlas)
{
    std::vector<std::string> report;
    const int n = atlas.num_keypoints();
    const int m = atlas.num_components();
    if (n < 6) {
        report.push_back("mean_shape: need at least 6 keypoints, got " + std::to_string(n));
    }
    if (m < 1) {
        report.push_back("basis: need at least one deformation component");
    }
    if (!atlas.keypoint_names.empty() && static_cast<int>(atlas.keypoint_names.size()) != n) {
        report.push_back("keypoint_names: expected " + std::to_string(n) + " labels, got " +
                         std::to_string(atlas.keypoint_names.size()));
    }
    if (atlas.coeff_bounds.size() != m) {
        report.push_back("coeff_bounds: expected " + std::to_string(m) + " entries, got " +
                         std::to_string(atlas.coeff_bounds.size()));
    } else if ((atlas.coeff_bounds.array() < 0.0).any() || !atlas.coeff_bounds.allFinite()) {
        report.push_back("coeff_bounds: entries must be finite and non-negative");
    }
    bool shapes_ok = true;
    for (int j = 0; j < m; ++j) {
        if (atlas.basis[j].cols() != n) {
            report.push_back("basis[" + std::to_string(j) + "]: expected " + std::to_string(n) +
                             " displacement vectors, got " + std::to_string(atlas.basis[j].cols()));
            shapes_ok = false;
        }
    }
    if (!atlas.mean_shape.allFinite()) {
        report.push_back("mean_shape: non-finite entries");
    }
    if (shapes_ok) {
        for (int a = 0; a < m; ++a) {
            const double na = atlas.basis[a].norm();
            if (na == 0.0) {
                report.push_back("basis[" + std::to_string(a) + "]: zero component");
                continue;
            }
            for (int b = a + 1; b < m; ++b) {
                const double nb = atlas.basis[b].norm();
                if (nb == 0.0) {
                    continue;
                }
                const double cosine =
                    atlas.basis[a].reshaped().dot(atlas.basis[b].reshaped()) / (na * nb);
                if (std::abs(cosine) > 1e-6) {
                    report.push_back("basis[" + std::to_string(a) + "] and basis[" + std::to_string(b) +
                                     "] are not orthogonal (cosine " + std::to_string(cosine) + ")");
                }
            }
        }
    }
    const double true_diameter = max_pairwise_distance(atlas.mean_shape);
    if (!(atlas.diameter > 0.0) || std::abs(atlas.diameter - true_diameter) > 1e-9 * std::max(1.0, true_diameter)) {
        report.push_back("diameter: stored " + std::to_string(atlas.diameter) +
                         " but max pairwise keypoint distance is " + std::to_string(true_diameter));
    }
    return report;
}

/// Returns an atlas with diameter recomputed and missing bounds set to the default.
inline ShapeAtlas finalize_atlas(ShapeAtlas atlas)
{
    atlas.diameter = max_pairwise_distance(atlas.mean_shape);
    if (atlas.coeff_bounds.size() == 0) {
        atlas.coeff_bounds = Eigen::VectorXd::Constant(atlas.num_components(), kDefaultCoeffBound);
    }
    return atlas;
}

inline Vec3 object_up_axis(const ObjectState& state)
{
    return (state.rotation * kCanonicalUp).normalized();
}

/// Lower and upper coefficient limits for the given bound mode.
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> coeff_box(const ShapeAtlas& atlas, CoeffBoundMode mode)
{
    Eigen::VectorXd upper = atlas.coeff_bounds;
    Eigen::VectorXd lower = mode == CoeffBoundMode::symmetric ? Eigen::VectorXd(-upper)
                                                              : Eigen::VectorXd::Zero(upper.size());
    return {lower, upper};
}

inline CameraIntrinsics default_intrinsics(const Scene& scene, double focal)
{
    return CameraIntrinsics{focal, scene.image_size / 2.0};
}

inline double image_diagonal(const Scene& scene)
{
    return scene.image_size.norm();
}

/// Scene-level checks; keypoints may sit up to `margin` pixels outside the image.
inline std::vector<std::string> validate_scene(const Scene& scene, double margin = 32.0)
{
    std::vector<std::string> report;
    if (!(scene.image_size.array() > 0.0).all()) {
        report.push_back("image_size: must be positive");
    }
    if (scene.intrinsics_hint && !(scene.intrinsics_hint->focal > 0.0)) {
        report.push_back("intrinsics_hint.focal: must be positive");
    }
    if (scene.intrinsics_hint && !scene.intrinsics_hint->principal_point.allFinite()) {
        report.push_back("intrinsics_hint.principal_point: must be finite");
    }
    for (std::size_t k = 0; k < scene.detections.size(); ++k) {
        const Detection& det = scene.detections[k];
        const std::string where = "detections[" + std::to_string(k) + "]";
        if (det.scores.size() != det.keypoints.cols()) {
            report.push_back(where + ".scores: length differs from keypoints");
            continue;
        }
        if ((det.scores.array() < 0.0).any() || (det.scores.array() > 1.0).any() || !det.scores.allFinite()) {
            report.push_back(where + ".scores: values must lie in [0, 1]");
        }
        for (Eigen::Index i = 0; i < det.keypoints.cols(); ++i) {
            if (det.scores[i] <= 0.0) {
                continue;
            }
            const Vec2 p = det.keypoints.col(i);
            if (!p.allFinite() || p.x() < -margin || p.y() < -margin || p.x() > scene.image_size.x() + margin ||
                p.y() > scene.image_size.y() + margin) {
                report.push_back(where + ".keypoints[" + std::to_string(i) + "]: outside the image");
            }
        }
    }
    return report;
}

} // namespace groundpose

#endif // GROUNDPOSE_SCENE_MODEL_HPP
