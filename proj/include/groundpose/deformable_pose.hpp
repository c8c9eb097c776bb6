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

#ifndef GROUNDPOSE_DEFORMABLE_POSE_HPP
#define GROUNDPOSE_DEFORMABLE_POSE_HPP

#include "groundpose/pose_block.hpp"
#include "groundpose/projection.hpp"

#include "Eigen/Core"
#include "Eigen/Cholesky"
#include "Eigen/QR"

#include <cmath>
#include <limits>
#include <optional>

namespace groundpose {

/**
 * One shape update at fixed pose: minimize ||r0 + J (c - c0)||^2 + mu ||c||^2
 * for the linearized reprojection residuals, then clamp to the coefficient box.
 */
inline Eigen::VectorXd lambda_step(const ObjectState& state, const Detection& det, const ShapeAtlas& atlas,
                                   const CameraIntrinsics& cam, double mu,
                                   CoeffBoundMode mode = CoeffBoundMode::symmetric)
{
    const int m = atlas.num_components();
    const ResidualBlock block = reprojection_residuals(state, det, atlas, cam);
    const Eigen::MatrixXd jl = block.jacobian.middleCols(6, m);
    const Eigen::MatrixXd lhs = jl.transpose() * jl + mu * Eigen::MatrixXd::Identity(m, m);
    const Eigen::VectorXd rhs = jl.transpose() * (jl * state.coeffs - block.residuals);
    Eigen::VectorXd coeffs = lhs.completeOrthogonalDecomposition().solve(rhs);
    if (!coeffs.allFinite()) {
        coeffs = state.coeffs;
    }
    const auto [lower, upper] = coeff_box(atlas, mode);
    return coeffs.cwiseMax(lower).cwiseMin(upper);
}

struct ObjectSolveResult
{
    ObjectState state;
    double loss = 0.0;
    double initial_loss = 0.0;
    int iterations = 0;
};

/**
 * Shape-only refinement with pose frozen. Each lambda_step proposal is
 * accepted through a halving line search toward the current coefficients,
 * so the loss never increases and coefficients stay inside the box.
 */
inline ObjectSolveResult finetune_shape(const ObjectState& init, const Detection& det, const ShapeAtlas& atlas,
                                        const CameraIntrinsics& cam, const std::optional<Plane>& plane,
                                        const ObjectiveWeights& weights, CoeffBoundMode mode, int max_iters,
                                        double tol)
{
    ObjectSolveResult result{init, object_loss(init, det, atlas, cam, plane, weights), 0.0, 0};
    result.initial_loss = result.loss;
    for (int iter = 0; iter < max_iters; ++iter) {
        const Eigen::VectorXd proposal = lambda_step(result.state, det, atlas, cam, weights.mu_shape, mode);
        const Eigen::VectorXd direction = proposal - result.state.coeffs;
        if (direction.cwiseAbs().maxCoeff() == 0.0) {
            break;
        }
        bool improved = false;
        double previous = result.loss;
        for (double alpha = 1.0; alpha > 1.0 / 64.0; alpha *= 0.5) {
            ObjectState candidate = result.state;
            candidate.coeffs = result.state.coeffs + alpha * direction;
            const double loss = detail::loss_or_inf(candidate, det, atlas, cam, plane, weights);
            if (loss < result.loss) {
                result.state = std::move(candidate);
                result.loss = loss;
                improved = true;
                break;
            }
        }
        ++result.iterations;
        if (!improved || previous - result.loss <= tol * previous) {
            break;
        }
    }
    return result;
}

/**
 * Minimizes the per-object loss (weighted reprojection + mu ||coeffs||^2,
 * plus mu1 D_p2p^2 + mu2 D_v2v^2 when a plane is given) by alternating a
 * damped pose block and a shape block until the relative loss change drops
 * below inner_tol or inner_max_iters alternations have run, then polishes
 * pose and shape together with a box-clamped damped step.
 */
inline ObjectSolveResult solve_object(const ObjectState& init, const Detection& det, const ShapeAtlas& atlas,
                                      const CameraIntrinsics& cam, const std::optional<Plane>& plane,
                                      const ObjectiveWeights& weights, const SolverConfig& config)
{
    if (weights.mu_shape < 0.0 || weights.mu1 < 0.0 || weights.mu2 < 0.0) {
        throw Error(ErrorKind::invalid_argument, "objective weights must be non-negative");
    }
    ObjectSolveResult result;
    result.state = init;
    result.state.rotation = so3::nearest_rotation(init.rotation);
    {
        const auto [lower, upper] = coeff_box(atlas, config.coeff_bound_mode);
        result.state.coeffs = init.coeffs.cwiseMax(lower).cwiseMin(upper);
    }
    try {
        result.loss = object_loss(result.state, det, atlas, cam, plane, weights);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::behind_camera) {
            throw;
        }
        throw NoProgressError<ObjectState>("object '" + det.id + "' starts behind the camera", init,
                                           std::numeric_limits<double>::infinity());
    }
    result.initial_loss = result.loss;

    for (int iter = 0; iter < config.inner_max_iters; ++iter) {
        const double previous = result.loss;
        const BlockResult pose =
            optimize_pose_block(result.state, det, atlas, cam, plane, weights, 10, config.inner_tol);
        result.state = pose.state;
        result.loss = pose.loss;
        const ObjectSolveResult shape = finetune_shape(result.state, det, atlas, cam, plane, weights,
                                                       config.coeff_bound_mode, 1, config.inner_tol);
        result.state = shape.state;
        result.loss = shape.loss;
        ++result.iterations;
        if (previous - result.loss <= config.inner_tol * previous) {
            break;
        }
    }
    // Length deformations and depth are strongly coupled, which makes the
    // alternation crawl along that valley; a coupled pass finishes the job.
    const BlockResult joint = optimize_object_block(result.state, det, atlas, cam, plane, weights,
                                                    coeff_box(atlas, config.coeff_bound_mode),
                                                    config.inner_max_iters, config.inner_tol);
    result.state = joint.state;
    result.loss = joint.loss;
    return result;
}

} // namespace groundpose

#endif // GROUNDPOSE_DEFORMABLE_POSE_HPP
