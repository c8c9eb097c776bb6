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

#ifndef GROUNDPOSE_SELF_CALIBRATION_HPP
#define GROUNDPOSE_SELF_CALIBRATION_HPP

#include "groundpose/plane_consensus.hpp"
#include "groundpose/scene_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace groundpose {

struct FocalLimits
{
    double min = 0.0;
    double max = std::numeric_limits<double>::infinity();
    /// |v_c| of the first plane at or below this makes the ratio meaningless.
    double eps = 1e-3;
};

inline FocalLimits focal_limits_for(const Scene& scene, const SolverConfig& config)
{
    const double diag = image_diagonal(scene);
    return FocalLimits{config.focal_min_factor * diag, config.focal_max_factor * diag, config.focal_ratio_eps};
}

/**
 * f <- (v_c of plane_2 / v_c of plane_1) * f, clamped to the limits. Both
 * planes must already be normalized. Identical planes leave f unchanged.
 */
inline double focal_update(const Plane& plane_1, const Plane& plane_2, double focal, const FocalLimits& limits = {})
{
    const double c1 = plane_1.coeffs[2];
    const double c2 = plane_2.coeffs[2];
    if (!(std::abs(c1) > limits.eps)) {
        throw Error(ErrorKind::unobservable_focal,
                    "plane normal has |v_c| = " + std::to_string(std::abs(c1)) +
                        "; the plane is nearly parallel to the optical axis");
    }
    return std::clamp(c2 / c1 * focal, limits.min, limits.max);
}

/// Multiplies the translation depth by scale; rotation, shape and x, y are untouched.
inline ObjectState depth_rescale(const ObjectState& state, double scale)
{
    if (!(scale > 0.0)) {
        throw Error(ErrorKind::invalid_argument, "depth scale must be positive");
    }
    ObjectState out = state;
    out.translation.z() *= scale;
    return out;
}

/// The plane that contains every point of `plane` after its z coordinate is multiplied by scale.
inline Plane depth_rescale(const Plane& plane, double scale)
{
    if (!(scale > 0.0)) {
        throw Error(ErrorKind::invalid_argument, "depth scale must be positive");
    }
    Vec4 c = plane.coeffs;
    c[2] /= scale;
    return normalize_plane(Plane{c});
}

} // namespace groundpose

#endif // GROUNDPOSE_SELF_CALIBRATION_HPP
