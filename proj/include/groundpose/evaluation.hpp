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

#ifndef GROUNDPOSE_EVALUATION_HPP
#define GROUNDPOSE_EVALUATION_HPP

#include "groundpose/projection.hpp"
#include "groundpose/so3.hpp"

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

namespace groundpose {

/// ADD thresholds in object diameters.
inline const std::vector<double> kAddThresholds = {0.4, 0.8, 1.2, 1.6, 2.0};
/// Viewpoint thresholds in radians.
inline const std::vector<double> kViewpointThresholds = {0.14, 0.21, 0.28, 0.35, 0.42};

struct PosePair
{
    ObjectState estimate;
    ObjectState truth;
};

/// Mean keypoint distance between the two posed instances, divided by the atlas diameter.
inline double add_distance(const ObjectState& est, const ObjectState& gt, const ShapeAtlas& atlas)
{
    const Eigen::Matrix3Xd a = transform_shape(est, atlas);
    const Eigen::Matrix3Xd b = transform_shape(gt, atlas);
    return (a - b).colwise().norm().mean() / atlas.diameter;
}

namespace detail {

inline void check_thresholds(const std::vector<double>& thresholds)
{
    if (!std::is_sorted(thresholds.begin(), thresholds.end())) {
        throw Error(ErrorKind::invalid_argument, "thresholds must be sorted ascending");
    }
}

} // namespace detail

/// Percentage of values <= each threshold (comparison is inclusive).
inline std::vector<double> accuracy_curve(const std::vector<double>& values, const std::vector<double>& thresholds)
{
    if (values.empty()) {
        throw Error(ErrorKind::insufficient_data, "accuracy needs at least one pair");
    }
    detail::check_thresholds(thresholds);
    std::vector<double> out;
    out.reserve(thresholds.size());
    for (double t : thresholds) {
        const auto hits = std::count_if(values.begin(), values.end(), [t](double v) { return v <= t; });
        out.push_back(100.0 * static_cast<double>(hits) / static_cast<double>(values.size()));
    }
    return out;
}

inline std::vector<double> add_accuracy(const std::vector<PosePair>& pairs, const ShapeAtlas& atlas,
                                        const std::vector<double>& thresholds = kAddThresholds)
{
    std::vector<double> distances;
    distances.reserve(pairs.size());
    for (const PosePair& p : pairs) {
        distances.push_back(add_distance(p.estimate, p.truth, atlas));
    }
    return accuracy_curve(distances, thresholds);
}

inline std::vector<double> viewpoint_precision(const std::vector<PosePair>& pairs,
                                               const std::vector<double>& thresholds = kViewpointThresholds)
{
    std::vector<double> angles;
    angles.reserve(pairs.size());
    for (const PosePair& p : pairs) {
        angles.push_back(so3::geodesic_distance(p.estimate.rotation, p.truth.rotation));
    }
    return accuracy_curve(angles, thresholds);
}

} // namespace groundpose

#endif // GROUNDPOSE_EVALUATION_HPP
