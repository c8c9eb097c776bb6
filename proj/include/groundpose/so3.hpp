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

#ifndef GROUNDPOSE_SO3_HPP
#define GROUNDPOSE_SO3_HPP

#include "Eigen/Core"
#include "Eigen/Geometry"
#include "Eigen/SVD"

#include <algorithm>
#include <cmath>

namespace groundpose::so3 {

inline Eigen::Matrix3d skew(const Eigen::Vector3d& v)
{
    Eigen::Matrix3d s;
    s << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
    return s;
}

inline Eigen::Matrix3d exp(const Eigen::Vector3d& omega)
{
    const double angle = omega.norm();
    if (angle < 1e-300) {
        return Eigen::Matrix3d::Identity();
    }
    return Eigen::AngleAxisd(angle, omega / angle).toRotationMatrix();
}

inline Eigen::Vector3d log(const Eigen::Matrix3d& rotation)
{
    const Eigen::AngleAxisd aa(rotation);
    return aa.angle() * aa.axis();
}

/// Nearest rotation in the Frobenius sense (orthogonal polar factor with det fixed to +1).
inline Eigen::Matrix3d nearest_rotation(const Eigen::Matrix3d& m)
{
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
    if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) {
        d(2, 2) = -1.0;
    }
    return svd.matrixU() * d * svd.matrixV().transpose();
}

/// Left increment R <- exp(omega) R, re-orthonormalized.
inline Eigen::Matrix3d retract(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& omega)
{
    return nearest_rotation(exp(omega) * rotation);
}

/// Geodesic distance arccos((trace(A^T B) - 1) / 2), in [0, pi].
inline double geodesic_distance(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b)
{
    // Same value as arccos((trace - 1) / 2), via the quaternion route which keeps
    // precision for small angles.
    return Eigen::AngleAxisd(a.transpose() * b).angle();
}

inline bool is_rotation(const Eigen::Matrix3d& r, double tol = 1e-9)
{
    return (r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() <= tol &&
           std::abs(r.determinant() - 1.0) <= tol;
}

} // namespace groundpose::so3

#endif // GROUNDPOSE_SO3_HPP
