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

#ifndef GROUNDPOSE_PLANE_CONSENSUS_HPP
#define GROUNDPOSE_PLANE_CONSENSUS_HPP

#include "groundpose/scene_model.hpp"

#include "Eigen/Core"
#include "Eigen/Eigenvalues"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

namespace groundpose {

namespace detail {

inline double checked_normal_norm(const Plane& plane)
{
    const double norm = plane.normal().norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) {
        throw Error(ErrorKind::invalid_plane, "plane normal is zero or not finite");
    }
    return norm;
}

} // namespace detail

/// Signed distance from t to the plane; positive on the side the normal points to.
inline double point_plane_distance(const Vec3& t, const Plane& plane)
{
    const double norm = detail::checked_normal_norm(plane);
    return (plane.normal().dot(t) + plane.offset()) / norm;
}

/// arcsin(|n x u|) for unit plane normal n and unit up-axis u; lies in [0, pi/2].
inline double normal_angle(const Vec3& up, const Plane& plane)
{
    const double up_norm = up.norm();
    const double n_norm = plane.normal().norm();
    if (!(up_norm > 0.0) || !(n_norm > 0.0)) {
        throw Error(ErrorKind::invalid_argument, "normal_angle needs nonzero vectors");
    }
    const double s = (plane.normal() / n_norm).cross(up / up_norm).norm();
    return std::asin(std::min(1.0, s));
}

/// Unit normal, v_d >= 0; when v_d == 0 the first nonzero of (v_c, v_b, v_a) is made positive.
inline Plane normalize_plane(const Plane& plane)
{
    const double norm = detail::checked_normal_norm(plane);
    Vec4 c = plane.coeffs / norm;
    bool flip = c[3] < 0.0;
    if (c[3] == 0.0) {
        for (int i : {2, 1, 0}) {
            if (c[i] != 0.0) {
                flip = c[i] < 0.0;
                break;
            }
        }
    }
    if (flip) {
        c = -c;
    }
    c[3] += 0.0; // no negative zero in the output
    return Plane{c};
}

/// Total-least-squares plane through the points (smallest principal direction).
inline Plane fit_plane_tls(const std::vector<Vec3>& points)
{
    if (points.size() < 3) {
        throw Error(ErrorKind::insufficient_data, "plane fit needs at least 3 points");
    }
    Vec3 centroid = Vec3::Zero();
    for (const Vec3& p : points) {
        centroid += p;
    }
    centroid /= static_cast<double>(points.size());
    Mat3 scatter = Mat3::Zero();
    for (const Vec3& p : points) {
        scatter += (p - centroid) * (p - centroid).transpose();
    }
    Eigen::SelfAdjointEigenSolver<Mat3> eig(scatter);
    const Vec3 normal = eig.eigenvectors().col(0).normalized();
    const double spread = eig.eigenvalues()[2];
    if (!(eig.eigenvalues()[1] > 1e-12 * spread) || !(spread > 0.0)) {
        throw Error(ErrorKind::degenerate, "points are collinear; plane is undetermined");
    }
    Vec4 coeffs;
    coeffs << normal, -normal.dot(centroid);
    return normalize_plane(Plane{coeffs});
}

struct PlaneFit
{
    Plane plane;
    std::vector<bool> inliers;

    int num_inliers() const { return static_cast<int>(std::count(inliers.begin(), inliers.end(), true)); }
};

namespace detail {

/// Index sets to try: all k-subsets when there are at most `budget` of them, otherwise random draws.
inline std::vector<std::vector<int>> ransac_samples(int n, int k, int budget, std::uint64_t seed)
{
    std::vector<std::vector<int>> samples;
    double combos = 1.0;
    for (int i = 0; i < k; ++i) {
        combos = combos * (n - i) / (i + 1);
    }
    if (combos <= budget) {
        std::vector<int> idx(k);
        std::iota(idx.begin(), idx.end(), 0);
        while (true) {
            samples.push_back(idx);
            int pos = k - 1;
            while (pos >= 0 && idx[pos] == n - k + pos) {
                --pos;
            }
            if (pos < 0) {
                break;
            }
            ++idx[pos];
            for (int q = pos + 1; q < k; ++q) {
                idx[q] = idx[q - 1] + 1;
            }
        }
        return samples;
    }
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> pick(0, n - 1);
    samples.reserve(budget);
    for (int it = 0; it < budget; ++it) {
        std::vector<int> idx;
        while (static_cast<int>(idx.size()) < k) {
            const int c = pick(rng);
            if (std::find(idx.begin(), idx.end(), c) == idx.end()) {
                idx.push_back(c);
            }
        }
        samples.push_back(std::move(idx));
    }
    return samples;
}

} // namespace detail

/**
 * Robust plane through object positions. Candidate planes come from 3-point
 * samples; the one with most inliers (|distance| < threshold, ties broken by
 * smaller squared-distance sum) wins and is refit by total least squares on
 * its inliers. Deterministic for a given seed.
 */
inline PlaneFit ransac_plane_from_translations(const std::vector<Vec3>& translations, const RansacConfig& config)
{
    const int n = static_cast<int>(translations.size());
    if (n < 3) {
        throw Error(ErrorKind::insufficient_data, "plane consensus needs at least 3 object positions, got " +
                                                      std::to_string(n));
    }
    if (!config.distance_threshold || !(*config.distance_threshold > 0.0)) {
        throw Error(ErrorKind::invalid_argument, "RANSAC distance threshold must be set and positive");
    }
    const double threshold = *config.distance_threshold;
    // Throws if every point is on one line.
    const Plane all_points = fit_plane_tls(translations);
    (void)all_points;

    double scale = 0.0;
    for (const Vec3& t : translations) {
        scale = std::max(scale, t.norm());
    }

    bool found = false;
    int best_count = -1;
    double best_cost = 0.0;
    std::vector<bool> best_mask;
    for (const auto& sample : detail::ransac_samples(n, 3, config.iterations, config.seed)) {
        const Vec3& a = translations[sample[0]];
        const Vec3& b = translations[sample[1]];
        const Vec3& c = translations[sample[2]];
        const Vec3 normal = (b - a).cross(c - a);
        if (!(normal.norm() > 1e-12 * std::max(1.0, scale * scale))) {
            continue;
        }
        Vec4 coeffs;
        coeffs << normal.normalized(), -normal.normalized().dot(a);
        const Plane candidate{coeffs};
        std::vector<bool> mask(n, false);
        int count = 0;
        double cost = 0.0;
        for (int k = 0; k < n; ++k) {
            const double d = std::abs(point_plane_distance(translations[k], candidate));
            if (d < threshold) {
                mask[k] = true;
                ++count;
                cost += d * d;
            }
        }
        if (!found || count > best_count || (count == best_count && cost < best_cost)) {
            found = true;
            best_count = count;
            best_cost = cost;
            best_mask = std::move(mask);
        }
    }
    if (!found || best_count < 3) {
        throw Error(ErrorKind::degenerate, "no non-collinear sample produced a plane with 3 inliers");
    }
    std::vector<Vec3> inlier_points;
    for (int k = 0; k < n; ++k) {
        if (best_mask[k]) {
            inlier_points.push_back(translations[k]);
        }
    }
    return PlaneFit{fit_plane_tls(inlier_points), best_mask};
}

/**
 * Plane whose normal is the consensus of the objects' up-axes. One axis is
 * sampled per trial, axes within the angle threshold are inliers, and the
 * normal is refit as the normalized mean of the inliers. The offset puts the
 * plane through the centroid of the inlier translations.
 */
inline PlaneFit ransac_plane_from_rotations(const std::vector<ObjectState>& states, const RansacConfig& config)
{
    const int n = static_cast<int>(states.size());
    if (n == 0) {
        throw Error(ErrorKind::insufficient_data, "plane consensus from rotations needs at least one object");
    }
    std::vector<Vec3> ups(n);
    for (int k = 0; k < n; ++k) {
        ups[k] = object_up_axis(states[k]);
    }
    auto angle_between = [](const Vec3& a, const Vec3& b) {
        return std::atan2(a.cross(b).norm(), a.dot(b));
    };

    int best_count = -1;
    double best_cost = 0.0;
    std::vector<bool> best_mask;
    for (const auto& sample : detail::ransac_samples(n, 1, config.iterations, config.seed)) {
        const Vec3& axis = ups[sample[0]];
        std::vector<bool> mask(n, false);
        int count = 0;
        double cost = 0.0;
        for (int k = 0; k < n; ++k) {
            const double angle = angle_between(ups[k], axis);
            if (angle <= config.angle_threshold) {
                mask[k] = true;
                ++count;
                cost += angle * angle;
            }
        }
        if (count > best_count || (count == best_count && cost < best_cost)) {
            best_count = count;
            best_cost = cost;
            best_mask = std::move(mask);
        }
    }

    Vec3 normal = Vec3::Zero();
    Vec3 centroid = Vec3::Zero();
    for (int k = 0; k < n; ++k) {
        if (best_mask[k]) {
            normal += ups[k];
            centroid += states[k].translation;
        }
    }
    if (!(normal.norm() > 0.0)) {
        throw Error(ErrorKind::degenerate, "inlier up-axes cancel out");
    }
    normal.normalize();
    centroid /= static_cast<double>(best_count);
    Vec4 coeffs;
    coeffs << normal, -normal.dot(centroid);
    return PlaneFit{normalize_plane(Plane{coeffs}), best_mask};
}

/// Angle between two plane normals, ignoring orientation.
inline double plane_normal_angle(const Plane& a, const Plane& b)
{
    const Vec3 na = a.normal().normalized();
    const Vec3 nb = b.normal().normalized();
    return std::atan2(na.cross(nb).norm(), std::abs(na.dot(nb)));
}

} // namespace groundpose

#endif // GROUNDPOSE_PLANE_CONSENSUS_HPP
