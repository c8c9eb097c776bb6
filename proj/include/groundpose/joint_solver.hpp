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

#ifndef GROUNDPOSE_JOINT_SOLVER_HPP
#define GROUNDPOSE_JOINT_SOLVER_HPP

#include "groundpose/deformable_pose.hpp"
#include "groundpose/plane_consensus.hpp"
#include "groundpose/pnp_init.hpp"
#include "groundpose/self_calibration.hpp"
#include "groundpose/synth_oracle.hpp"

#include <cmath>
#include <optional>
#include <random>
#include <utility>
#include <vector>

namespace groundpose {

struct IterationDiagnostics
{
    int iteration = 0;
    /// Scene loss after this iteration's object updates.
    double total_loss = 0.0;
    /// Scene loss at this iteration's weights, plane and focal, before the object updates.
    double loss_before_solve = 0.0;
    double focal = 0.0;
    Plane plane;
    double mu1 = 0.0;
    double mu2 = 0.0;
    int translation_inliers = 0;
    int rotation_inliers = 0;
    /// Largest |point-to-plane distance| among plane inliers.
    double max_plane_residual = 0.0;
    /// Angle between the translation and rotation consensus normals before the focal update.
    double plane_disagreement = 0.0;
    bool focal_clamped = false;
    bool focal_unobservable = false;
};

struct SceneSolution
{
    SceneEstimate estimate;
    std::vector<IterationDiagnostics> diagnostics;
};

/// (mu1, mu2) for an outer iteration: zero at iteration 0, then geometric growth up to the caps.
inline std::pair<double, double> weight_schedule(int iteration, const SolverConfig& config)
{
    if (iteration < 0) {
        throw Error(ErrorKind::invalid_argument, "iteration must be non-negative");
    }
    if (iteration == 0) {
        return {0.0, 0.0};
    }
    auto grow = [iteration](const WeightSchedule& s) {
        return std::min(s.cap, s.initial * std::pow(s.growth, iteration - 1));
    };
    return {grow(config.mu1_schedule), grow(config.mu2_schedule)};
}

/**
 * Scene loss: for every solved object, weighted reprojection error plus the
 * shape regularizer, and for objects that are plane inliers (all solved
 * objects when the estimate has no mask) mu1 D_p2p^2 + mu2 D_v2v^2.
 */
inline double total_loss(const SceneEstimate& estimate, const Scene& scene, const ShapeAtlas& atlas,
                         const ObjectiveWeights& weights)
{
    if (estimate.objects.size() != scene.detections.size()) {
        throw Error(ErrorKind::invalid_argument, "estimate and scene disagree on the number of objects");
    }
    double total = 0.0;
    for (std::size_t k = 0; k < estimate.objects.size(); ++k) {
        if (!estimate.status.empty() && estimate.status[k] != ObjectStatus::ok) {
            continue;
        }
        const ObjectState& state = estimate.objects[k];
        total += reprojection_loss(state, scene.detections[k], atlas, estimate.intrinsics) +
                 weights.mu_shape * state.coeffs.squaredNorm();
        const bool inlier = estimate.plane_inliers.empty() || estimate.plane_inliers[k];
        if (inlier) {
            total += plane_loss(state, estimate.plane, weights);
        }
    }
    return total;
}

namespace detail {

inline std::vector<std::size_t> solved_indices(const SceneEstimate& estimate)
{
    std::vector<std::size_t> idx;
    for (std::size_t k = 0; k < estimate.status.size(); ++k) {
        if (estimate.status[k] == ObjectStatus::ok) {
            idx.push_back(k);
        }
    }
    return idx;
}

/// Runs one object solve, keeping the best iterate when the solver gives up.
inline ObjectSolveResult solve_or_best(const ObjectState& init, const Detection& det, const ShapeAtlas& atlas,
                                       const CameraIntrinsics& cam, const std::optional<Plane>& plane,
                                       const ObjectiveWeights& weights, const SolverConfig& config)
{
    try {
        return solve_object(init, det, atlas, cam, plane, weights, config);
    } catch (const NoProgressError<ObjectState>& e) {
        ObjectSolveResult r;
        r.state = e.best();
        r.loss = e.best_loss();
        r.initial_loss = e.best_loss();
        return r;
    }
}

} // namespace detail

/**
 * Joint estimation of object poses and shapes, the ground plane and the focal
 * length from one image's keypoints:
 *
 *  1. focal from the hint or uniform in [0.5, 2] x image diagonal; random plane;
 *  2. per object: DLT on the mean shape, rigid polish, plane-free deformable solve;
 *  3. repeat up to max_iters: RANSAC plane from translations and from up-axes,
 *     focal <- focal * (v_c of the translation plane / v_c of the rotation plane)
 *     with every object depth rescaled by the same ratio, per-object re-solve with
 *     plane terms for consensus inliers, shape finetune, weight increase.
 *
 * Stops when the relative loss change is below convergence_tol and the focal
 * moved less than 0.1%. With fewer than three solved objects the focal stays
 * fixed, the plane comes from up-axes only and the estimate is flagged degraded.
 */
inline SceneSolution solve_scene(const Scene& scene, const ShapeAtlas& atlas, const SolverConfig& config)
{
    if (scene.detections.empty()) {
        throw Error(ErrorKind::empty_scene, "scene has no detections");
    }
    std::mt19937_64 rng(config.seed);
    const double diag = image_diagonal(scene);
    CameraIntrinsics cam = default_intrinsics(scene, 0.0);
    const double random_focal = detail::uniform(rng, 0.5, 2.0) * diag;
    cam.focal = random_focal;
    if (scene.intrinsics_hint) {
        cam = *scene.intrinsics_hint;
    }
    Vec4 random_plane(detail::uniform(rng, -1.0, 1.0), detail::uniform(rng, -1.0, 1.0),
                      detail::uniform(rng, -1.0, 1.0), detail::uniform(rng, 0.0, 1.0));
    if (random_plane.head<3>().norm() < 1e-6) {
        random_plane.head<3>() = Vec3::UnitY();
    }

    const FocalLimits limits = focal_limits_for(scene, config);
    RansacConfig ransac = config.ransac;
    if (!ransac.distance_threshold) {
        ransac.distance_threshold = 0.15 * atlas.diameter;
    }

    const std::size_t n = scene.detections.size();
    SceneSolution solution;
    SceneEstimate& est = solution.estimate;
    est.objects.resize(n);
    est.status.assign(n, ObjectStatus::failed);
    est.failure_reasons.assign(n, "");
    est.per_object_loss.assign(n, 0.0);
    est.plane_inliers.assign(n, true);
    est.plane = normalize_plane(Plane{random_plane});
    est.intrinsics = cam;
    for (const Detection& det : scene.detections) {
        est.ids.push_back(det.id);
    }

    const ObjectiveWeights plane_free{config.mu_shape, 0.0, 0.0};
    for (std::size_t k = 0; k < n; ++k) {
        const Detection& det = scene.detections[k];
        try {
            ObjectState init = dlt_pose(det, atlas, cam, config.dlt_min_score);
            try {
                init = refine_rigid(init, det, atlas, cam);
            } catch (const NoProgressError<ObjectState>& e) {
                init = e.best();
            }
            const ObjectSolveResult r = detail::solve_or_best(init, det, atlas, cam, std::nullopt, plane_free, config);
            if (!std::isfinite(r.loss)) {
                throw Error(ErrorKind::no_progress, "object '" + det.id + "' could not be placed in front of the camera");
            }
            est.objects[k] = r.state;
            est.per_object_loss[k] = r.loss;
            est.status[k] = ObjectStatus::ok;
        } catch (const Error& e) {
            est.objects[k].coeffs = Eigen::VectorXd::Zero(atlas.num_components());
            est.failure_reasons[k] = e.what();
            est.plane_inliers[k] = false;
        }
    }
    if (detail::solved_indices(est).empty()) {
        throw Error(ErrorKind::empty_scene, "no detection could be solved: " + est.failure_reasons.front());
    }

    IterationDiagnostics first;
    first.iteration = 0;
    first.focal = cam.focal;
    first.plane = est.plane;
    first.total_loss = total_loss(est, scene, atlas, plane_free);
    first.loss_before_solve = first.total_loss;
    solution.diagnostics.push_back(first);

    const auto report_plane = [&]() {
        // Plane reported for plane-free runs: best available consensus, not used by the solve.
        std::vector<ObjectState> states;
        std::vector<Vec3> positions;
        for (std::size_t k : detail::solved_indices(est)) {
            states.push_back(est.objects[k]);
            positions.push_back(est.objects[k].translation);
        }
        try {
            if (positions.size() >= 3) {
                return ransac_plane_from_translations(positions, ransac).plane;
            }
            return ransac_plane_from_rotations(states, ransac).plane;
        } catch (const Error&) {
            return est.plane;
        }
    };

    if (!config.use_plane) {
        est.plane = report_plane();
        est.degraded = detail::solved_indices(est).size() < 3;
        est.converged = true;
        est.iterations = 0;
        return solution;
    }

    double previous_loss = first.total_loss;
    for (int t = 1; t <= config.max_iters; ++t) {
        IterationDiagnostics diag_t;
        diag_t.iteration = t;
        const std::vector<std::size_t> solved = detail::solved_indices(est);
        std::vector<ObjectState> states;
        std::vector<Vec3> positions;
        for (std::size_t k : solved) {
            states.push_back(est.objects[k]);
            positions.push_back(est.objects[k].translation);
        }
        RansacConfig iter_ransac = ransac;
        iter_ransac.seed = detail::mix_seed(ransac.seed, static_cast<std::uint64_t>(t));

        const bool degraded = solved.size() < 3;
        est.degraded = degraded;
        std::optional<PlaneFit> from_translations;
        if (!degraded) {
            try {
                from_translations = ransac_plane_from_translations(positions, iter_ransac);
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::degenerate) {
                    throw;
                }
            }
        }
        const PlaneFit from_rotations = ransac_plane_from_rotations(states, iter_ransac);
        diag_t.rotation_inliers = from_rotations.num_inliers();

        const double focal_before = cam.focal;
        Plane plane = from_rotations.plane;
        std::vector<bool> inlier_mask = from_rotations.inliers;
        if (from_translations) {
            diag_t.translation_inliers = from_translations->num_inliers();
            Plane translation_plane = from_translations->plane;
            for (std::size_t q = 0; q < solved.size(); ++q) {
                inlier_mask[q] = inlier_mask[q] && from_translations->inliers[q];
            }
            // A lifted outlier can fit a slightly tilted translation plane; refit on the
            // objects both consensus sets accept so it cannot pull the normal.
            std::vector<Vec3> agreed;
            for (std::size_t q = 0; q < solved.size(); ++q) {
                if (inlier_mask[q]) {
                    agreed.push_back(positions[q]);
                }
            }
            if (agreed.size() >= 3 && static_cast<int>(agreed.size()) < from_translations->num_inliers()) {
                try {
                    translation_plane = fit_plane_tls(agreed);
                } catch (const Error& e) {
                    if (e.kind() != ErrorKind::degenerate) {
                        throw;
                    }
                }
            }
            diag_t.plane_disagreement = plane_normal_angle(translation_plane, from_rotations.plane);
            if (config.estimate_focal) {
                try {
                    // The translation plane's normal is the one distorted by a wrong focal:
                    // its v_c shrinks by the same factor the depths grow.
                    const double updated = focal_update(from_rotations.plane, translation_plane, cam.focal, limits);
                    diag_t.focal_clamped = updated <= limits.min || updated >= limits.max;
                    const double ratio = updated / cam.focal;
                    for (std::size_t k : solved) {
                        est.objects[k] = depth_rescale(est.objects[k], ratio);
                    }
                    translation_plane = depth_rescale(translation_plane, ratio);
                    cam.focal = updated;
                } catch (const Error& e) {
                    if (e.kind() != ErrorKind::unobservable_focal) {
                        throw;
                    }
                    diag_t.focal_unobservable = true;
                }
            }
            Vec3 normal = translation_plane.normal().normalized();
            Vec3 other = from_rotations.plane.normal().normalized();
            if (normal.dot(other) < 0.0) {
                other = -other;
            }
            normal = (normal + other).normalized();
            double offset = 0.0;
            int count = 0;
            for (std::size_t q = 0; q < solved.size(); ++q) {
                if (inlier_mask[q]) {
                    offset -= normal.dot(est.objects[solved[q]].translation);
                    ++count;
                }
            }
            if (count == 0) {
                inlier_mask = from_translations->inliers;
                for (std::size_t q = 0; q < solved.size(); ++q) {
                    if (inlier_mask[q]) {
                        offset -= normal.dot(est.objects[solved[q]].translation);
                        ++count;
                    }
                }
            }
            Vec4 coeffs;
            coeffs << normal, offset / std::max(count, 1);
            plane = normalize_plane(Plane{coeffs});
        }
        est.intrinsics = cam;
        est.plane = plane;
        est.focal_clamped = diag_t.focal_clamped;
        est.focal_unobservable = diag_t.focal_unobservable;
        est.plane_disagreement = diag_t.plane_disagreement;
        std::fill(est.plane_inliers.begin(), est.plane_inliers.end(), false);
        for (std::size_t q = 0; q < solved.size(); ++q) {
            est.plane_inliers[solved[q]] = inlier_mask[q];
        }

        const auto [mu1, mu2] = weight_schedule(t, config);
        const ObjectiveWeights weights{config.mu_shape, mu1, mu2};
        diag_t.mu1 = mu1;
        diag_t.mu2 = mu2;
        diag_t.loss_before_solve = total_loss(est, scene, atlas, weights);

        for (std::size_t k : solved) {
            const std::optional<Plane> object_plane =
                est.plane_inliers[k] ? std::optional<Plane>(plane) : std::nullopt;
            ObjectSolveResult r =
                detail::solve_or_best(est.objects[k], scene.detections[k], atlas, cam, object_plane, weights, config);
            if (std::isfinite(r.loss)) {
                r = finetune_shape(r.state, scene.detections[k], atlas, cam, object_plane, weights,
                                   config.coeff_bound_mode, config.inner_max_iters, config.inner_tol);
                est.objects[k] = r.state;
                est.per_object_loss[k] = r.loss;
            }
        }
        diag_t.total_loss = total_loss(est, scene, atlas, weights);
        diag_t.focal = cam.focal;
        diag_t.plane = plane;
        for (std::size_t k : solved) {
            if (est.plane_inliers[k]) {
                diag_t.max_plane_residual =
                    std::max(diag_t.max_plane_residual, std::abs(point_plane_distance(est.objects[k].translation, plane)));
            }
        }
        solution.diagnostics.push_back(diag_t);
        est.iterations = t;

        const double loss_change = std::abs(previous_loss - diag_t.total_loss);
        const double focal_change = std::abs(cam.focal - focal_before) / focal_before;
        const double loss_scale = std::max(previous_loss, diag_t.total_loss);
        previous_loss = diag_t.total_loss;
        if (loss_change <= config.convergence_tol * loss_scale + 1e-12 &&
            focal_change < 1e-3) {
            est.converged = true;
            break;
        }
    }
    return solution;
}

} // namespace groundpose

#endif // GROUNDPOSE_JOINT_SOLVER_HPP
