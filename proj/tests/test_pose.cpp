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
#include "test_support.hpp"

#include <gtest/gtest.h>

namespace groundpose {
namespace {

using testing::camera;
using testing::render;
using testing::uniform;

ObjectState rigid_truth(std::mt19937_64& rng, const ShapeAtlas& atlas, double depth)
{
    ObjectState s = testing::random_state(rng, atlas, depth);
    s.coeffs.setZero();
    return s;
}

ObjectState perturb(const ObjectState& s, std::mt19937_64& rng, double angle, double depth_frac)
{
    ObjectState out = s;
    out.rotation = Eigen::AngleAxisd(angle, testing::random_unit(rng)).toRotationMatrix() * s.rotation;
    out.translation.z() *= 1.0 + depth_frac;
    return out;
}

// ---- linear initialization ----

TEST(DltPose, RecoversNoiselessRigidPose)
{
    const ShapeAtlas atlas = make_car_atlas();
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 50; ++trial) {
        const ObjectState truth = rigid_truth(rng, atlas, uniform(rng, 8.0, 60.0));
        const ObjectState est = dlt_pose(render(truth, atlas, camera()), atlas, camera());
        EXPECT_LT(so3::geodesic_distance(est.rotation, truth.rotation), 1e-3);
        EXPECT_LT((est.translation - truth.translation).norm(), 1e-3 * truth.translation.norm());
        EXPECT_TRUE(so3::is_rotation(est.rotation));
        EXPECT_TRUE(est.coeffs.isZero(0.0));
    }
}

TEST(DltPose, InvariantToImageScalingAboutPrincipalPoint)
{
    const ShapeAtlas atlas = make_car_atlas();
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        const CameraIntrinsics cam = camera(900.0);
        const ObjectState truth = rigid_truth(rng, atlas, 25.0);
        Detection det = render(truth, atlas, cam);
        det.keypoints += Eigen::Matrix2Xd::Random(2, det.keypoints.cols());
        Detection scaled = det;
        scaled.keypoints = ((det.keypoints.colwise() - cam.principal_point) * 2.0).colwise() + cam.principal_point;
        CameraIntrinsics cam2 = cam;
        cam2.focal *= 2.0;
        const ObjectState a = dlt_pose(det, atlas, cam);
        const ObjectState b = dlt_pose(scaled, atlas, cam2);
        EXPECT_LT((a.rotation - b.rotation).cwiseAbs().maxCoeff(), 1e-9);
        EXPECT_LT((a.translation - b.translation).norm(), 1e-9 * a.translation.norm());
    }
}

TEST(DltPose, FiveKeypointsAreUnderdetermined)
{
    const ShapeAtlas atlas = make_car_atlas();
    std::mt19937_64 rng(3);
    Detection det = render(rigid_truth(rng, atlas, 20.0), atlas, camera());
    det.scores.tail(7).setZero();
    try {
        dlt_pose(det, atlas, camera());
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::underdetermined);
    }
}

TEST(DltPose, LowScoresAreLeftOutOfTheLinearSystem)
{
    const ShapeAtlas atlas = make_car_atlas();
    std::mt19937_64 rng(4);
    const ObjectState truth = rigid_truth(rng, atlas, 20.0);
    Detection det = render(truth, atlas, camera());
    det.keypoints.col(0) += Vec2(300.0, -200.0);
    det.scores[0] = 0.01;
    const ObjectState est = dlt_pose(det, atlas, camera());
    EXPECT_LT(so3::geodesic_distance(est.rotation, truth.rotation), 1e-6);
}

TEST(DltPose, IsDeterministic)
{
    const ShapeAtlas atlas = make_car_atlas();
    std::mt19937_64 rng(5);
    Detection det = render(rigid_truth(rng, atlas, 30.0), atlas, camera());
    det.keypoints += Eigen::Matrix2Xd::Random(2, det.keypoints.cols()) * 2.0;
    const ObjectState a = dlt_pose(det, atlas, camera());
    const ObjectState b = dlt_pose(det, atlas, camera());
    EXPECT_EQ(a.rotation, b.rotation);
    EXPECT_EQ(a.translation, b.translation);
}

// ---- rigid refinement ----

TEST(RefineRigid, GroundTruthIsStationary)
{
    const ShapeAtlas atlas = make_car_atlas();
    std::mt19937_64 rng(6);
    const ObjectState truth = rigid_truth(rng, atlas, 20.0);
    const ObjectState out = refine_rigid(truth, render(truth, atlas, camera()), atlas, camera());
    EXPECT_LT((out.rotation - truth.rotation).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT((out.translation - truth.translation).norm(), 1e-9);
}

TEST(RefineRigid, ReturnsFromPerturbedStart)
{
    const ShapeAtlas atlas = make_car_atlas();
    std::mt19937_64 rng(7);
    constexpr double five_degrees = 5.0 * 3.14159265358979323846 / 180.0;
    for (int trial = 0; trial < 30; ++trial) {
        const ObjectState truth = rigid_truth(rng, atlas, uniform(rng, 10.0, 50.0));
        const Detection det = render(truth, atlas, camera());
        const ObjectState out = refine_rigid(perturb(truth, rng, five_degrees, 0.05), det, atlas, camera());
        EXPECT_LT(so3::geodesic_distance(out.rotation, truth.rotation), 1e-4);
        EXPECT_LT((out.translation - truth.translation).norm(), 1e-4 * truth.translation.norm());
    }
}

TEST(RefineRigid, NeverIncreasesLossOnNoisyData)
{
    const ShapeAtlas atlas = make_car_atlas();
    std::mt19937_64 rng(8);
    std::normal_distribution<double> noise(0.0, 2.0);
    for (int trial = 0; trial < 30; ++trial) {
        const ObjectState truth = rigid_truth(rng, atlas, uniform(rng, 10.0, 50.0));
        Detection det = render(truth, atlas, camera());
        for (Eigen::Index i = 0; i < det.keypoints.size(); ++i) {
            det.keypoints.data()[i] += noise(rng);
        }
        const ObjectState init = perturb(truth, rng, 0.1, 0.05);
        const ObjectState out = refine_rigid(init, det, atlas, camera());
        EXPECT_LE(reprojection_loss(out, det, atlas, camera()), reprojection_loss(init, det, atlas, camera()));
        EXPECT_EQ(out.coeffs, init.coeffs);
    }
}

TEST(RefineRigid, DltThenRefineReachesSubMicropixelResidual)
{
    const ShapeAtlas atlas = make_car_atlas();
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 30; ++trial) {
        const ObjectState truth = rigid_truth(rng, atlas, uniform(rng, 8.0, 60.0));
        const Detection det = render(truth, atlas, camera());
        const ObjectState out = refine_rigid(dlt_pose(det, atlas, camera()), det, atlas, camera());
        EXPECT_LT(reprojection_rms(out, det, atlas, camera()), 1e-6);
    }
}

TEST(RefineRigid, BehindCameraStartIsNoProgress)
{
    const ShapeAtlas atlas = make_car_atlas();
    std::mt19937_64 rng(10);
    const ObjectState truth = rigid_truth(rng, atlas, 20.0);
    ObjectState bad = truth;
    bad.translation.z() = -5.0;
    try {
        refine_rigid(bad, render(truth, atlas, camera()), atlas, camera());
        FAIL() << "expected an error";
    } catch (const NoProgressError<ObjectState>& e) {
        EXPECT_EQ(e.kind(), ErrorKind::no_progress);
        EXPECT_EQ(e.best().translation, bad.translation);
    }
}

// ---- shape block ----

TEST(LambdaStep, MeanShapeDataGivesZeroCoefficients)
{
    const ShapeAtlas atlas = make_car_atlas();
    std::mt19937_64 rng(11);
    const ObjectState truth = rigid_truth(rng, atlas, 20.0);
    const Detection det = render(truth, atlas, camera());
    for (double mu : {1e-6, 1.0, 100.0}) {
        EXPECT_LT(lambda_step(truth, det, atlas, camera(), mu).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(LambdaStep, LargeRegularizerShrinksToZero)
{
    const ShapeAtlas atlas = make_car_atlas();
    std::mt19937_64 rng(12);
    ObjectState truth = testing::random_state(rng, atlas, 15.0, 2.5);
    const Detection det = render(truth, atlas, camera());
    ObjectState start = truth;
    start.coeffs.setZero();
    const Eigen::VectorXd weak = lambda_step(start, det, atlas, camera(), 1e-6);
    const Eigen::VectorXd strong = lambda_step(start, det, atlas, camera(), 1e12);
    EXPECT_GT(weak.norm(), 1.0);
    EXPECT_LT(strong.norm(), 1e-6);
}

TEST(LambdaStep, NonnegativeModeClampsToUpperBound)
{
    const ShapeAtlas atlas = make_car_atlas();
    std::mt19937_64 rng(13);
    ObjectState truth = rigid_truth(rng, atlas, 12.0);
    truth.coeffs = Eigen::Vector2d(1.5 * atlas.coeff_bounds[0], 0.0);
    const Detection det = render(truth, atlas, camera());
    ObjectState start = truth;
    start.coeffs.setZero();
    const Eigen::VectorXd out = lambda_step(start, det, atlas, camera(), 1e-8, CoeffBoundMode::nonnegative);
    EXPECT_DOUBLE_EQ(out[0], atlas.coeff_bounds[0]);
    // Negative optimum is cut at zero in the literal box.
    truth.coeffs = Eigen::Vector2d(-1.0, 0.0);
    const Eigen::VectorXd neg =
        lambda_step(start, render(truth, atlas, camera()), atlas, camera(), 1e-8, CoeffBoundMode::nonnegative);
    EXPECT_DOUBLE_EQ(neg[0], 0.0);
    const Eigen::VectorXd sym =
        lambda_step(start, render(truth, atlas, camera()), atlas, camera(), 1e-8, CoeffBoundMode::symmetric);
    EXPECT_LT(sym[0], -0.5);
}

// ---- per-object solve ----

TEST(SolveObject, GroundTruthIsOptimal)
{
    const ShapeAtlas atlas = make_car_atlas();
    std::mt19937_64 rng(14);
    SolverConfig config;
    const ObjectState rigid = rigid_truth(rng, atlas, 20.0);
    const ObjectSolveResult a =
        solve_object(rigid, render(rigid, atlas, camera()), atlas, camera(), std::nullopt, {1.0, 0.0, 0.0}, config);
    EXPECT_LT(a.loss, 1e-20);
    EXPECT_LT((a.state.translation - rigid.translation).norm(), 1e-8);
    EXPECT_LT((a.state.rotation - rigid.rotation).cwiseAbs().maxCoeff(), 1e-8);

    const ObjectState deformed = testing::random_state(rng, atlas, 20.0);
    const ObjectSolveResult b = solve_object(deformed, render(deformed, atlas, camera()), atlas, camera(),
                                             std::nullopt, {0.0, 0.0, 0.0}, config);
    EXPECT_LT(b.loss, 1e-20);
    EXPECT_LT((b.state.coeffs - deformed.coeffs).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(SolveObject, RecoversCoefficientsFromWrongStart)
{
    const ShapeAtlas atlas = make_car_atlas();
    std::mt19937_64 rng(15);
    SolverConfig config;
    for (int trial = 0; trial < 20; ++trial) {
        const ObjectState truth = testing::random_state(rng, atlas, uniform(rng, 10.0, 40.0), 2.5);
        const Detection det = render(truth, atlas, camera());
        ObjectState init = truth;
        init.coeffs = -truth.coeffs;
        const ObjectSolveResult out = solve_object(init, det, atlas, camera(), std::nullopt, {1e-4, 0.0, 0.0}, config);
        for (Eigen::Index j = 0; j < truth.coeffs.size(); ++j) {
            EXPECT_LE(std::abs(out.state.coeffs[j] - truth.coeffs[j]), 0.02 * atlas.coeff_bounds[j]);
        }
    }
}

TEST(SolveObject, LargePlaneWeightPullsTowardPlane)
{
    const ShapeAtlas atlas = make_car_atlas();
    std::mt19937_64 rng(16);
    SolverConfig config;
    const ObjectState truth = rigid_truth(rng, atlas, 20.0);
    const Detection det = render(truth, atlas, camera());
    Vec3 n = truth.rotation.col(2);
    // A plane 0.5 units below the object along its own up-axis.
    const Plane plane = normalize_plane(Plane{Vec4(n.x(), n.y(), n.z(), -n.dot(truth.translation) + 0.5)});
    ASSERT_NEAR(std::abs(point_plane_distance(truth.translation, plane)), 0.5, 1e-12);
    const ObjectSolveResult out = solve_object(truth, det, atlas, camera(), plane, {1.0, 1e4, 0.0}, config);
    EXPECT_LT(std::abs(point_plane_distance(out.state.translation, plane)), 0.5);
    EXPECT_LE(out.loss, out.initial_loss);
}

TEST(SolveObject, MonotoneAndInsideBox)
{
    const ShapeAtlas atlas = make_car_atlas();
    std::mt19937_64 rng(17);
    std::normal_distribution<double> noise(0.0, 3.0);
    for (CoeffBoundMode mode : {CoeffBoundMode::symmetric, CoeffBoundMode::nonnegative}) {
        SolverConfig config;
        config.coeff_bound_mode = mode;
        const auto [lower, upper] = coeff_box(atlas, mode);
        for (int trial = 0; trial < 15; ++trial) {
            const ObjectState truth = testing::random_state(rng, atlas, uniform(rng, 10.0, 40.0), 3.0);
            Detection det = render(truth, atlas, camera());
            for (Eigen::Index i = 0; i < det.keypoints.size(); ++i) {
                det.keypoints.data()[i] += noise(rng);
            }
            const Plane plane = normalize_plane(Plane{Vec4(0.1, -1.0, 0.2, 3.0)});
            const ObjectiveWeights w{1.0, 0.5, 10.0};
            ObjectState init = perturb(truth, rng, 0.1, 0.05);
            const ObjectSolveResult out = solve_object(init, det, atlas, camera(), plane, w, config);
            EXPECT_LE(out.loss, out.initial_loss + 1e-12);
            EXPECT_TRUE((out.state.coeffs.array() >= lower.array()).all());
            EXPECT_TRUE((out.state.coeffs.array() <= upper.array()).all());
            EXPECT_TRUE(so3::is_rotation(out.state.rotation));
            EXPECT_NEAR(out.loss, object_loss(out.state, det, atlas, camera(), plane, w), 1e-9 * out.loss);
        }
    }
}

TEST(SolveObject, ZeroPlaneWeightsEqualPlaneFreeSolve)
{
    const ShapeAtlas atlas = make_car_atlas();
    std::mt19937_64 rng(18);
    SolverConfig config;
    const ObjectState truth = testing::random_state(rng, atlas, 25.0);
    Detection det = render(truth, atlas, camera());
    det.keypoints += Eigen::Matrix2Xd::Random(2, det.keypoints.cols()) * 2.0;
    const ObjectState init = perturb(truth, rng, 0.05, 0.03);
    const Plane plane = normalize_plane(Plane{Vec4(0.0, -1.0, 0.3, 2.0)});
    const ObjectSolveResult a = solve_object(init, det, atlas, camera(), plane, {1.0, 0.0, 0.0}, config);
    const ObjectSolveResult b = solve_object(init, det, atlas, camera(), std::nullopt, {1.0, 0.0, 0.0}, config);
    EXPECT_EQ(a.state.rotation, b.state.rotation);
    EXPECT_EQ(a.state.translation, b.state.translation);
    EXPECT_EQ(a.state.coeffs, b.state.coeffs);
}

TEST(SolveObject, NegativeWeightIsRejected)
{
    const ShapeAtlas atlas = make_car_atlas();
    std::mt19937_64 rng(19);
    const ObjectState truth = rigid_truth(rng, atlas, 20.0);
    try {
        solve_object(truth, render(truth, atlas, camera()), atlas, camera(), std::nullopt, {-1.0, 0.0, 0.0}, {});
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::invalid_argument);
    }
}

TEST(SolveObject, BehindCameraStartIsNoProgress)
{
    const ShapeAtlas atlas = make_car_atlas();
    std::mt19937_64 rng(20);
    const ObjectState truth = rigid_truth(rng, atlas, 20.0);
    ObjectState bad = truth;
    bad.translation.z() = 0.1;
    EXPECT_THROW(solve_object(bad, render(truth, atlas, camera()), atlas, camera(), std::nullopt, {1.0, 0.0, 0.0}, {}),
                 NoProgressError<ObjectState>);
}

// ---- plane terms and their Jacobian ----

TEST(PlaneLoss, LiftedObject)
{
    ObjectState s;
    s.translation = Vec3(1.0, 4.0, 20.0);
    const Plane plane{Vec4(0.0, 1.0, 0.0, -1.5)};
    EXPECT_DOUBLE_EQ(plane_loss(s, plane, {0.0, 3.0, 0.0}), 3.0 * 2.5 * 2.5);
    // Up-axis +Z against a +Y normal: 90 degrees.
    const double half_pi = 1.57079632679489661923;
    EXPECT_NEAR(plane_loss(s, plane, {0.0, 0.0, 2.0}), 2.0 * half_pi * half_pi, 1e-12);
}

TEST(ObjectSystem, PlaneRowsMatchFiniteDifferences)
{
    const ShapeAtlas atlas = make_car_atlas();
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 30; ++trial) {
        const ObjectState s = testing::random_state(rng, atlas, 20.0);
        const Detection det = render(testing::random_state(rng, atlas, 20.0), atlas, camera());
        const Vec3 n = testing::random_unit(rng);
        const Plane plane{Vec4(n.x(), n.y(), n.z(), uniform(rng, -5, 5))};
        const ObjectiveWeights w{0.7, 2.0, 5.0};
        Eigen::VectorXd r;
        Eigen::MatrixXd jac;
        detail::object_system(s, det, atlas, camera(), plane, w, true, r, jac);
        const Eigen::Index rows = r.size();
        constexpr double eps = 1e-6;
        for (int c = 0; c < 6; ++c) {
            Eigen::VectorXd step = Eigen::VectorXd::Zero(6);
            step[c] = eps;
            auto shifted = [&](double sign) {
                ObjectState t = s;
                t.rotation = so3::exp(sign * step.head<3>()) * s.rotation;
                t.translation += sign * step.tail<3>();
                Eigen::VectorXd rr;
                Eigen::MatrixXd jj;
                detail::object_system(t, det, atlas, camera(), plane, w, true, rr, jj);
                return rr;
            };
            const Eigen::VectorXd numeric = (shifted(1.0) - shifted(-1.0)) / (2.0 * eps);
            for (Eigen::Index row = rows - 2; row < rows; ++row) {
                EXPECT_NEAR(jac(row, c), numeric[row], 1e-6 * std::max(1.0, std::abs(numeric[row])));
            }
        }
    }
}

} // namespace
} // namespace groundpose
