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

#ifndef GROUNDPOSE_PNP_INIT_HPP
#define GROUNDPOSE_PNP_INIT_HPP

#include "groundpose/pose_block.hpp"
#include "groundpose/projection.hpp"
#include "groundpose/so3.hpp"

#include "Eigen/Core"
#include "Eigen/SVD"

#include <cmath>
#include <vector>

namespace groundpose {

/**
 * Rigid pose of the mean shape from a 3x4 projective DLT on normalized image
 * coordinates. Both point sets are Hartley-normalized before the SVD; the
 * left 3x3 block is projected onto SO(3) and its mean singular value fixes
 * the scale of the translation. Returns coeffs = 0.
 */
inline ObjectState dlt_pose(const Detection& det, const ShapeAtlas& atlas, const CameraIntrinsics& cam,
                            double min_score = 0.05)
{
    if (det.num_keypoints() != atlas.num_keypoints() || det.scores.size() != det.keypoints.cols()) {
        throw Error(ErrorKind::invalid_argument, "detection '" + det.id + "' does not match the atlas");
    }
    std::vector<int> used;
    for (int i = 0; i < det.num_keypoints(); ++i) {
        if (det.scores[i] > 0.0 && det.scores[i] >= min_score) {
            used.push_back(i);
        }
    }
    const int k = static_cast<int>(used.size());
    if (k < 6) {
        throw Error(ErrorKind::underdetermined, "object '" + det.id + "' has " + std::to_string(k) +
                                                    " usable keypoints, pose initialization needs 6");
    }

    Eigen::Matrix3Xd world(3, k);
    Eigen::Matrix2Xd image(2, k);
    for (int c = 0; c < k; ++c) {
        world.col(c) = atlas.mean_shape.col(used[c]);
        image.col(c) = (det.keypoints.col(used[c]) - cam.principal_point) / cam.focal;
    }

    const Vec3 world_centroid = world.rowwise().mean();
    const double world_scale =
        std::sqrt(3.0) / std::max(1e-300, (world.colwise() - world_centroid).colwise().norm().mean());
    const Vec2 image_centroid = image.rowwise().mean();
    const double image_scale =
        std::sqrt(2.0) / std::max(1e-300, (image.colwise() - image_centroid).colwise().norm().mean());

    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2 * k, 12);
    for (int c = 0; c < k; ++c) {
        Eigen::Vector4d xw;
        xw << (world.col(c) - world_centroid) * world_scale, 1.0;
        const Vec2 xi = (image.col(c) - image_centroid) * image_scale;
        a.block<1, 4>(2 * c, 0) = xw.transpose();
        a.block<1, 4>(2 * c, 8) = -xi.x() * xw.transpose();
        a.block<1, 4>(2 * c + 1, 4) = xw.transpose();
        a.block<1, 4>(2 * c + 1, 8) = -xi.y() * xw.transpose();
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
    const Eigen::VectorXd sv = svd.singularValues();
    if (!(sv[10] > 1e-9 * sv[0])) {
        throw Error(ErrorKind::degenerate, "object '" + det.id + "': pose system is rank deficient");
    }
    const Eigen::VectorXd p = svd.matrixV().col(11);
    Eigen::Matrix<double, 3, 4> normalized;
    normalized << p.segment<4>(0).transpose(), p.segment<4>(4).transpose(), p.segment<4>(8).transpose();

    // Undo both normalizations: x = Ti^-1 P Tw [X; 1].
    Mat3 image_denorm = Mat3::Identity();
    image_denorm.topLeftCorner<2, 2>() /= image_scale;
    image_denorm.topRightCorner<2, 1>() = image_centroid;
    Eigen::Matrix4d world_norm = Eigen::Matrix4d::Identity();
    world_norm.topLeftCorner<3, 3>() *= world_scale;
    world_norm.topRightCorner<3, 1>() = -world_scale * world_centroid;
    Eigen::Matrix<double, 3, 4> projection = image_denorm * normalized * world_norm;

    double depth_sum = 0.0;
    for (int c = 0; c < k; ++c) {
        depth_sum += projection.row(2).head<3>().dot(world.col(c)) + projection(2, 3);
    }
    if (depth_sum < 0.0) {
        projection = -projection;
    }

    const Mat3 m = projection.leftCols<3>();
    Eigen::JacobiSVD<Mat3> msvd(m);
    const double scale = msvd.singularValues().mean();
    if (!(scale > 0.0)) {
        throw Error(ErrorKind::degenerate, "object '" + det.id + "': degenerate projection block");
    }
    ObjectState state;
    state.rotation = so3::nearest_rotation(m);
    state.translation = projection.col(3) / scale;
    state.coeffs = Eigen::VectorXd::Zero(atlas.num_components());
    if (!(state.translation.z() > 0.0)) {
        throw Error(ErrorKind::degenerate, "object '" + det.id + "': recovered translation is behind the camera");
    }
    return state;
}

/**
 * Damped Gauss-Newton polish of a rigid pose; shape coefficients stay fixed.
 * The reprojection loss never increases across iterations.
 */
inline ObjectState refine_rigid(const ObjectState& init, const Detection& det, const ShapeAtlas& atlas,
                                const CameraIntrinsics& cam, int iters = 50, double tol = 1e-12)
{
    double initial_loss = 0.0;
    try {
        initial_loss = reprojection_loss(init, det, atlas, cam);
    } catch (const Error& e) {
        throw NoProgressError<ObjectState>(std::string("rigid refinement cannot start: ") + e.what(), init,
                                           std::numeric_limits<double>::infinity());
    }
    (void)initial_loss;
    const BlockResult result = optimize_pose_block(init, det, atlas, cam, std::nullopt, {}, iters, tol);
    if (result.stalled && result.accepted_steps == 0) {
        throw NoProgressError<ObjectState>("object '" + det.id + "': no damped step reduced the loss",
                                           result.state, result.loss);
    }
    return result.state;
}

} // namespace groundpose

#endif // GROUNDPOSE_PNP_INIT_HPP
