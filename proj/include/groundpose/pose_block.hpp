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

#ifndef GROUNDPOSE_POSE_BLOCK_HPP
#define GROUNDPOSE_POSE_BLOCK_HPP

#include "groundpose/plane_consensus.hpp"
#include "groundpose/projection.hpp"
#include "groundpose/so3.hpp"

#include "Eigen/Core"
#include "Eigen/Cholesky"

#include <cmath>
#include <limits>
#include <optional>

namespace groundpose {

/// Weights of one object's loss: shape regularizer, point-to-plane and axis-to-normal terms.
struct ObjectiveWeights
{
    double mu_shape = 0.0;
    double mu1 = 0.0;
    double mu2 = 0.0;
};

/// mu1 * D_p2p^2 + mu2 * D_v2v^2 for one object.
inline double plane_loss(const ObjectState& state, const Plane& plane, const ObjectiveWeights& weights)
{
    double total = 0.0;
    if (weights.mu1 > 0.0) {
        const double d = point_plane_distance(state.translation, plane);
        total += weights.mu1 * d * d;
    }
    if (weights.mu2 > 0.0) {
        const double a = normal_angle(object_up_axis(state), plane);
        total += weights.mu2 * a * a;
    }
    return total;
}

/**
 * Per-object loss: weighted reprojection error + mu * ||coeffs||^2, plus the
 * plane terms when a plane is supplied.
 */
inline double object_loss(const ObjectState& state, const Detection& det, const ShapeAtlas& atlas,
                          const CameraIntrinsics& cam, const std::optional<Plane>& plane,
                          const ObjectiveWeights& weights)
{
    double total = reprojection_loss(state, det, atlas, cam) + weights.mu_shape * state.coeffs.squaredNorm();
    if (plane) {
        total += plane_loss(state, *plane, weights);
    }
    return total;
}

namespace detail {

inline double loss_or_inf(const ObjectState& state, const Detection& det, const ShapeAtlas& atlas,
                          const CameraIntrinsics& cam, const std::optional<Plane>& plane,
                          const ObjectiveWeights& weights)
{
    try {
        return object_loss(state, det, atlas, cam, plane, weights);
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::behind_camera) {
            return std::numeric_limits<double>::infinity();
        }
        throw;
    }
}

/**
 * Residuals and Jacobian of one object's loss. Columns are the rotation
 * increment and translation, followed by the shape coefficients when
 * with_shape is set (the regularizer then contributes sqrt(mu) * coeffs rows).
 */
inline void object_system(const ObjectState& state, const Detection& det, const ShapeAtlas& atlas,
                          const CameraIntrinsics& cam, const std::optional<Plane>& plane,
                          const ObjectiveWeights& weights, bool with_shape, Eigen::VectorXd& r,
                          Eigen::MatrixXd& jac)
{
    const ResidualBlock block = reprojection_residuals(state, det, atlas, cam);
    const int m = atlas.num_components();
    const Eigen::Index rows = block.residuals.size();
    const Eigen::Index cols = with_shape ? 6 + m : 6;
    const Eigen::Index shape_rows = with_shape ? m : 0;
    const Eigen::Index plane_rows = plane ? 2 : 0;
    r.setZero(rows + shape_rows + plane_rows);
    jac.setZero(r.size(), cols);
    r.head(rows) = block.residuals;
    jac.topLeftCorner(rows, cols) = block.jacobian.leftCols(cols);
    if (with_shape) {
        const double sqrt_mu = std::sqrt(weights.mu_shape);
        r.segment(rows, m) = sqrt_mu * state.coeffs;
        jac.block(rows, 6, m, m).diagonal().setConstant(sqrt_mu);
    }
    if (!plane) {
        return;
    }
    const Eigen::Index pr = rows + shape_rows;
    const Vec3 n = plane->normal().normalized();
    const double sqrt_mu1 = std::sqrt(weights.mu1);
    r[pr] = sqrt_mu1 * point_plane_distance(state.translation, *plane);
    jac.block<1, 3>(pr, 3) = sqrt_mu1 * n.transpose();

    const double sqrt_mu2 = std::sqrt(weights.mu2);
    const Vec3 up = object_up_axis(state);
    const Vec3 c = n.cross(up);
    const double s = std::min(1.0, c.norm());
    r[pr + 1] = sqrt_mu2 * std::asin(s);
    if (s > 1e-15 && s < 1.0 - 1e-12 && sqrt_mu2 > 0.0) {
        // u(omega) = exp(omega) u  =>  du/domega = -[u]x ; dc/domega = [n]x du/domega
        const Eigen::RowVector3d ds = (c / s).transpose() * (-so3::skew(n) * so3::skew(up));
        jac.block<1, 3>(pr + 1, 0) = sqrt_mu2 / std::sqrt(1.0 - s * s) * ds;
    }
}

} // namespace detail

struct BlockResult
{
    ObjectState state;
    double loss = 0.0;
    double initial_loss = 0.0;
    int accepted_steps = 0;
    /// Damping saturated while the gradient was still far from zero.
    bool stalled = false;
};

/**
 * Levenberg-Marquardt over rotation and translation, and over the shape
 * coefficients too when `box` is given (steps are clamped into the box). A
 * step is taken only if it lowers the loss, so the result never has a larger
 * loss than the input. Trial states that put a keypoint behind the camera
 * count as failed steps.
 */
inline BlockResult optimize_object_block(const ObjectState& init, const Detection& det, const ShapeAtlas& atlas,
                                         const CameraIntrinsics& cam, const std::optional<Plane>& plane,
                                         const ObjectiveWeights& weights,
                                         const std::optional<std::pair<Eigen::VectorXd, Eigen::VectorXd>>& box,
                                         int max_iters, double tol)
{
    BlockResult result;
    result.state = init;
    result.loss = object_loss(init, det, atlas, cam, plane, weights);
    result.initial_loss = result.loss;
    const bool with_shape = box.has_value();

    Eigen::VectorXd r;
    Eigen::MatrixXd jac;
    double damping = 1e-4;
    for (int iter = 0; iter < max_iters; ++iter) {
        detail::object_system(result.state, det, atlas, cam, plane, weights, with_shape, r, jac);
        const Eigen::MatrixXd hessian = jac.transpose() * jac;
        const Eigen::VectorXd gradient = jac.transpose() * r;
        if (gradient.cwiseAbs().maxCoeff() == 0.0) {
            break;
        }
        const Eigen::Index dim = hessian.rows();
        const double max_diag = hessian.diagonal().maxCoeff();
        bool accepted = false;
        while (damping < 1e12) {
            Eigen::MatrixXd lhs = hessian;
            for (Eigen::Index d = 0; d < dim; ++d) {
                lhs(d, d) += damping * std::max(hessian(d, d), 1e-12 * max_diag + 1e-300);
            }
            const Eigen::VectorXd step = -lhs.ldlt().solve(gradient);
            if (!step.allFinite()) {
                damping *= 4.0;
                continue;
            }
            ObjectState candidate = result.state;
            candidate.rotation = so3::retract(result.state.rotation, step.head<3>());
            candidate.translation += step.segment<3>(3);
            if (with_shape) {
                candidate.coeffs =
                    (result.state.coeffs + step.tail(dim - 6)).cwiseMax(box->first).cwiseMin(box->second);
            }
            const double loss = detail::loss_or_inf(candidate, det, atlas, cam, plane, weights);
            if (loss < result.loss) {
                const double previous = result.loss;
                result.state = std::move(candidate);
                result.loss = loss;
                ++result.accepted_steps;
                damping = std::max(damping / 3.0, 1e-9);
                accepted = true;
                if (previous - loss <= tol * previous) {
                    return result;
                }
                break;
            }
            damping *= 4.0;
        }
        if (!accepted) {
            result.stalled = gradient.cwiseAbs().maxCoeff() > 1e-6 * std::max(1.0, result.loss);
            break;
        }
    }
    return result;
}

/// Pose-only block: shape coefficients are held fixed.
inline BlockResult optimize_pose_block(const ObjectState& init, const Detection& det, const ShapeAtlas& atlas,
                                       const CameraIntrinsics& cam, const std::optional<Plane>& plane,
                                       const ObjectiveWeights& weights, int max_iters, double tol)
{
    return optimize_object_block(init, det, atlas, cam, plane, weights, std::nullopt, max_iters, tol);
}

} // namespace groundpose

#endif // GROUNDPOSE_POSE_BLOCK_HPP
