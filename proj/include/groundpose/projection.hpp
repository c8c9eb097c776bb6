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

#ifndef GROUNDPOSE_PROJECTION_HPP
#define GROUNDPOSE_PROJECTION_HPP

#include "groundpose/scene_model.hpp"
#include "groundpose/so3.hpp"

#include "Eigen/Core"

#include <algorithm>
#include <cmath>
#include <string>

namespace groundpose {

inline Vec2 project_point(const Vec3& p, const CameraIntrinsics& cam)
{
    if (!(p.z() > 0.0)) {
        throw Error(ErrorKind::behind_camera, "point depth " + std::to_string(p.z()) + " is not positive");
    }
    return Vec2(cam.focal * p.x() / p.z() + cam.principal_point.x(),
                cam.focal * p.y() / p.z() + cam.principal_point.y());
}

/**
 * Weak perspective: every point is divided by the same reference depth
 * (normally the depth of the keypoint centroid, i.e. the object translation z).
 */
inline Eigen::Matrix2Xd project_weak(const Eigen::Matrix3Xd& points, double depth_ref, const CameraIntrinsics& cam)
{
    if (!(depth_ref > 0.0)) {
        throw Error(ErrorKind::invalid_argument, "reference depth must be positive");
    }
    Eigen::Matrix2Xd out(2, points.cols());
    const double scale = cam.focal / depth_ref;
    for (Eigen::Index i = 0; i < points.cols(); ++i) {
        out(0, i) = scale * points(0, i) + cam.principal_point.x();
        out(1, i) = scale * points(1, i) + cam.principal_point.y();
    }
    return out;
}

/// Keypoints of an object in the camera frame.
inline Eigen::Matrix3Xd transform_shape(const ObjectState& state, const ShapeAtlas& atlas)
{
    Eigen::Matrix3Xd pts = state.rotation * instantiate_shape(atlas, state.coeffs);
    pts.colwise() += state.translation;
    return pts;
}

/**
 * Stacked weighted residuals sqrt(s_i) * (pi(R X_i + T) - x_i) and their Jacobian.
 * Jacobian columns: [0,3) left rotation increment, [3,6) translation,
 * [6,6+m) shape coefficients, 6+m focal length.
 */
struct ResidualBlock
{
    Eigen::VectorXd residuals;
    Eigen::MatrixXd jacobian;
};

namespace detail {

inline void check_consistent(const ObjectState& state, const Detection& det, const ShapeAtlas& atlas)
{
    if (det.num_keypoints() != atlas.num_keypoints() || det.scores.size() != det.keypoints.cols()) {
        throw Error(ErrorKind::invalid_argument,
                    "detection '" + det.id + "' has " + std::to_string(det.num_keypoints()) +
                        " keypoints, atlas expects " + std::to_string(atlas.num_keypoints()));
    }
    if (state.coeffs.size() != atlas.num_components()) {
        throw Error(ErrorKind::invalid_argument, "object '" + det.id + "' has wrong number of shape coefficients");
    }
}

inline Error behind_camera(const Detection& det, Eigen::Index i, double z)
{
    return Error(ErrorKind::behind_camera, "object '" + det.id + "' keypoint " + std::to_string(i) +
                                                " has depth " + std::to_string(z));
}

} // namespace detail

inline ResidualBlock reprojection_residuals(const ObjectState& state, const Detection& det, const ShapeAtlas& atlas,
                                            const CameraIntrinsics& cam)
{
    detail::check_consistent(state, det, atlas);
    const int n = atlas.num_keypoints();
    const int m = atlas.num_components();
    const Eigen::Matrix3Xd shape = instantiate_shape(atlas, state.coeffs);

    ResidualBlock block;
    block.residuals = Eigen::VectorXd::Zero(2 * n);
    block.jacobian = Eigen::MatrixXd::Zero(2 * n, 7 + m);
    for (int i = 0; i < n; ++i) {
        const double s = det.scores[i];
        if (s <= 0.0) {
            continue;
        }
        const Vec3 rotated = state.rotation * shape.col(i);
        const Vec3 p = rotated + state.translation;
        if (!(p.z() > 0.0)) {
            throw detail::behind_camera(det, i, p.z());
        }
        const double w = std::sqrt(s);
        const double inv_z = 1.0 / p.z();
        const double u = cam.focal * p.x() * inv_z + cam.principal_point.x();
        const double v = cam.focal * p.y() * inv_z + cam.principal_point.y();
        block.residuals[2 * i] = w * (u - det.keypoints(0, i));
        block.residuals[2 * i + 1] = w * (v - det.keypoints(1, i));

        // d(u, v) / dp
        Eigen::Matrix<double, 2, 3> dproj;
        dproj << cam.focal * inv_z, 0.0, -cam.focal * p.x() * inv_z * inv_z, 0.0, cam.focal * inv_z,
            -cam.focal * p.y() * inv_z * inv_z;
        dproj *= w;

        auto rows = block.jacobian.middleRows(2 * i, 2);
        rows.leftCols<3>() = -dproj * so3::skew(rotated);
        rows.middleCols<3>(3) = dproj;
        for (int j = 0; j < m; ++j) {
            rows.col(6 + j) = dproj * (state.rotation * atlas.basis[j].col(i));
        }
        rows(0, 6 + m) = w * p.x() * inv_z;
        rows(1, 6 + m) = w * p.y() * inv_z;
    }
    return block;
}

/// Sum of s_i * ||pi(R X_i + T) - x_i||^2 (no shape regularizer).
inline double reprojection_loss(const ObjectState& state, const Detection& det, const ShapeAtlas& atlas,
                                const CameraIntrinsics& cam)
{
    detail::check_consistent(state, det, atlas);
    const Eigen::Matrix3Xd shape = instantiate_shape(atlas, state.coeffs);
    double total = 0.0;
    for (int i = 0; i < atlas.num_keypoints(); ++i) {
        const double s = det.scores[i];
        if (s <= 0.0) {
            continue;
        }
        const Vec3 p = state.rotation * shape.col(i) + state.translation;
        if (!(p.z() > 0.0)) {
            throw detail::behind_camera(det, i, p.z());
        }
        const Vec2 d = project_point(p, cam) - det.keypoints.col(i);
        total += s * d.squaredNorm();
    }
    return total;
}

/// Root-mean-square pixel error over keypoints with positive score (unweighted).
inline double reprojection_rms(const ObjectState& state, const Detection& det, const ShapeAtlas& atlas,
                               const CameraIntrinsics& cam)
{
    const Eigen::Matrix3Xd pts = transform_shape(state, atlas);
    double sum = 0.0;
    int used = 0;
    for (int i = 0; i < atlas.num_keypoints(); ++i) {
        if (det.scores[i] <= 0.0) {
            continue;
        }
        sum += (project_point(pts.col(i), cam) - det.keypoints.col(i)).squaredNorm();
        ++used;
    }
    return used == 0 ? 0.0 : std::sqrt(sum / used);
}

/**
 * Compares the analytic Jacobian with central finite differences. Rotation is
 * perturbed through the same left increment; translation and focal steps are
 * scaled by max(1, |value|). Entries whose magnitude is at most 1e-8 in both
 * are skipped; the others are compared relative to max(|analytic|, |numeric|, 1)
 * since the residuals are in pixels and a sub-pixel floor keeps round-off in
 * near-zero entries from dominating.
 */
inline double check_jacobian(const ObjectState& state, const Detection& det, const ShapeAtlas& atlas,
                             const CameraIntrinsics& cam, double eps = 1e-6)
{
    const ResidualBlock analytic = reprojection_residuals(state, det, atlas, cam);
    const int m = atlas.num_components();
    const int cols = 7 + m;

    auto evaluate = [&](int col, double h) {
        ObjectState s = state;
        CameraIntrinsics c = cam;
        if (col < 3) {
            Vec3 omega = Vec3::Zero();
            omega[col] = h;
            s.rotation = so3::exp(omega) * state.rotation;
        } else if (col < 6) {
            s.translation[col - 3] += h;
        } else if (col < 6 + m) {
            s.coeffs[col - 6] += h;
        } else {
            c.focal += h;
        }
        return reprojection_residuals(s, det, atlas, c).residuals;
    };

    double worst = 0.0;
    for (int col = 0; col < cols; ++col) {
        double h = eps;
        if (col >= 3 && col < 6) {
            h = eps * std::max(1.0, std::abs(state.translation[col - 3]));
        } else if (col == 6 + m) {
            h = eps * std::max(1.0, std::abs(cam.focal));
        }
        const Eigen::VectorXd numeric = (evaluate(col, h) - evaluate(col, -h)) / (2.0 * h);
        for (Eigen::Index r = 0; r < numeric.size(); ++r) {
            const double a = analytic.jacobian(r, col);
            const double nd = numeric[r];
            const double mag = std::max(std::abs(a), std::abs(nd));
            if (mag <= 1e-8) {
                continue;
            }
            worst = std::max(worst, std::abs(a - nd) / std::max(mag, 1.0));
        }
    }
    return worst;
}

} // namespace groundpose

#endif // GROUNDPOSE_PROJECTION_HPP
