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

#include <cmath>

namespace groundpose {
namespace {

using testing::camera;
using testing::random_rotation;
using testing::render;
using testing::uniform;

constexpr double kPi = 3.14159265358979323846;

ShapeAtlas two_component_atlas()
{
    ShapeAtlas atlas;
    atlas.mean_shape.resize(3, 6);
    atlas.mean_shape << 1, -1, 0, 0, 0.5, -0.5,  //
        0, 0, 1, -1, 0.5, 0.5,                  //
        0, 0, 0, 0, 0.5, -0.5;
    Eigen::Matrix3Xd b1 = Eigen::Matrix3Xd::Zero(3, 6);
    Eigen::Matrix3Xd b2 = Eigen::Matrix3Xd::Zero(3, 6);
    b1.row(0) = atlas.mean_shape.row(0);
    b2.row(2) = atlas.mean_shape.row(2);
    atlas.basis = {b1, b2};
    atlas.coeff_bounds = Eigen::Vector2d(3.0, 3.0);
    return finalize_atlas(atlas);
}

// ---- scene model ----

TEST(InstantiateShape, ZeroCoefficientsGiveMeanShape)
{
    const ShapeAtlas atlas = make_car_atlas();
    EXPECT_EQ(instantiate_shape(atlas, Eigen::VectorXd::Zero(2)), atlas.mean_shape);
}

TEST(InstantiateShape, UnitCoefficientAddsFirstComponent)
{
    const ShapeAtlas atlas = make_car_atlas();
    const Eigen::Matrix3Xd expected = atlas.mean_shape + atlas.basis[0];
    EXPECT_TRUE(instantiate_shape(atlas, Eigen::Vector2d(1.0, 0.0)).isApprox(expected, 1e-15));
}

TEST(InstantiateShape, MatchesElementwiseSum)
{
    const ShapeAtlas atlas = two_component_atlas();
    const Eigen::Matrix3Xd x = instantiate_shape(atlas, Eigen::Vector2d(0.5, -0.3));
    for (int i = 0; i < 6; ++i) {
        for (int r = 0; r < 3; ++r) {
            const double expected =
                atlas.mean_shape(r, i) + 0.5 * atlas.basis[0](r, i) + (-0.3) * atlas.basis[1](r, i);
            EXPECT_DOUBLE_EQ(x(r, i), expected);
        }
    }
}

TEST(InstantiateShape, LengthMismatchThrows)
{
    const ShapeAtlas atlas = make_car_atlas();
    try {
        instantiate_shape(atlas, Eigen::VectorXd::Zero(3));
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::invalid_argument);
    }
}

TEST(InstantiateShape, IsAffineInCoefficients)
{
    const ShapeAtlas atlas = make_car_atlas();
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        const double a = uniform(rng, -2, 2);
        const double b = uniform(rng, -2, 2);
        const Eigen::Vector2d l1(uniform(rng, -3, 3), uniform(rng, -3, 3));
        const Eigen::Vector2d l2(uniform(rng, -3, 3), uniform(rng, -3, 3));
        const Eigen::Matrix3Xd lhs = instantiate_shape(atlas, a * l1 + b * l2);
        const Eigen::Matrix3Xd rhs = a * instantiate_shape(atlas, l1) + b * instantiate_shape(atlas, l2) -
                                     (a + b - 1.0) * atlas.mean_shape;
        EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(ValidateAtlas, AcceptsWellFormedAtlas)
{
    EXPECT_TRUE(validate_atlas(make_car_atlas()).empty());
    EXPECT_TRUE(validate_atlas(two_component_atlas()).empty());
}

TEST(ValidateAtlas, FlagsWrongDiameter)
{
    ShapeAtlas atlas = two_component_atlas();
    ASSERT_DOUBLE_EQ(atlas.diameter, 2.0);
    atlas.diameter = 1.0;
    const auto report = validate_atlas(atlas);
    ASSERT_EQ(report.size(), 1u);
    EXPECT_NE(report[0].find("diameter"), std::string::npos);
}

TEST(ValidateAtlas, FlagsRepeatedComponent)
{
    ShapeAtlas atlas = two_component_atlas();
    atlas.basis[1] = atlas.basis[0];
    const auto report = validate_atlas(atlas);
    ASSERT_EQ(report.size(), 1u);
    EXPECT_NE(report[0].find("not orthogonal"), std::string::npos);
}

TEST(ValidateAtlas, FlagsTooFewKeypointsAndMissingBasis)
{
    ShapeAtlas atlas;
    atlas.mean_shape = Eigen::Matrix3Xd::Random(3, 4);
    atlas.diameter = max_pairwise_distance(atlas.mean_shape);
    const auto report = validate_atlas(atlas);
    EXPECT_GE(report.size(), 2u);
}

TEST(ObjectUpAxis, IdentityGivesCanonicalUp)
{
    EXPECT_EQ(object_up_axis(ObjectState{}), Vec3(0, 0, 1));
}

TEST(ObjectUpAxis, QuarterTurnAboutX)
{
    ObjectState s;
    s.rotation = Eigen::AngleAxisd(kPi / 2, Vec3::UnitX()).toRotationMatrix();
    EXPECT_LT((object_up_axis(s) - Vec3(0, -1, 0)).norm(), 1e-15);
}

TEST(ObjectUpAxis, MatchesMatrixProductAndIsUnit)
{
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        ObjectState s;
        s.rotation = random_rotation(rng);
        const Vec3 up = object_up_axis(s);
        EXPECT_LT((up - s.rotation.col(2)).norm(), 1e-12);
        EXPECT_NEAR(up.norm(), 1.0, 1e-12);
    }
}

TEST(ValidateScene, FlagsKeypointsFarOutsideImage)
{
    Scene scene;
    Detection det;
    det.id = "a";
    det.keypoints = Eigen::Matrix2Xd::Constant(2, 6, 100.0);
    det.keypoints(0, 3) = 5000.0;
    det.scores = Eigen::VectorXd::Ones(6);
    scene.detections.push_back(det);
    EXPECT_FALSE(validate_scene(scene).empty());
    scene.detections[0].keypoints(0, 3) = 100.0;
    EXPECT_TRUE(validate_scene(scene).empty());
    scene.detections[0].scores[0] = 1.5;
    EXPECT_FALSE(validate_scene(scene).empty());
}

// ---- rotations ----

TEST(So3, ExpLogRoundTrip)
{
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        const Vec3 w = testing::random_unit(rng) * uniform(rng, 0.0, 3.0);
        EXPECT_LT((so3::log(so3::exp(w)) - w).norm(), 1e-10);
    }
}

TEST(So3, NearestRotationIsProperRotation)
{
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        const Mat3 r = so3::nearest_rotation(Mat3::Random());
        EXPECT_TRUE(so3::is_rotation(r, 1e-12));
    }
}

TEST(So3, GeodesicDistanceOfSingleAxisRotation)
{
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 100; ++trial) {
        const Mat3 a = random_rotation(rng);
        const double angle = uniform(rng, 0.0, kPi);
        const Mat3 b = Eigen::AngleAxisd(angle, testing::random_unit(rng)).toRotationMatrix() * a;
        EXPECT_NEAR(so3::geodesic_distance(a, b), angle, 1e-9);
    }
}

// ---- projection ----

TEST(ProjectPoint, OpticalAxisHitsPrincipalPoint)
{
    const Vec2 p = project_point(Vec3(0, 0, 5), CameraIntrinsics{1000.0, Vec2(320, 240)});
    EXPECT_EQ(p, Vec2(320, 240));
}

TEST(ProjectPoint, LateralOffset)
{
    const Vec2 p = project_point(Vec3(1, 0, 5), CameraIntrinsics{500.0, Vec2(320, 240)});
    EXPECT_DOUBLE_EQ(p.x(), 420.0);
    EXPECT_DOUBLE_EQ(p.y(), 240.0);
}

TEST(ProjectPoint, MatchesScalarArithmetic)
{
    const Vec2 p = project_point(Vec3(0.3, -0.2, 4.1), CameraIntrinsics{721.0, Vec2(609.6, 172.9)});
    const double u = 721.0 * 0.3 / 4.1 + 609.6;
    const double v = 721.0 * -0.2 / 4.1 + 172.9;
    EXPECT_DOUBLE_EQ(p.x(), u);
    EXPECT_DOUBLE_EQ(p.y(), v);
}

TEST(ProjectPoint, BehindCameraThrows)
{
    for (double z : {0.0, -1.0}) {
        try {
            project_point(Vec3(0, 0, z), camera());
            FAIL() << "expected an error";
        } catch (const Error& e) {
            EXPECT_EQ(e.kind(), ErrorKind::behind_camera);
        }
    }
}

TEST(ProjectWeak, OnAxisPointHitsPrincipalPoint)
{
    const CameraIntrinsics cam = camera();
    for (double ref : {1.0, 7.5, 100.0}) {
        const Eigen::Matrix2Xd p = project_weak(Eigen::Matrix3Xd(Vec3(0, 0, 20)), ref, cam);
        EXPECT_EQ(Vec2(p.col(0)), cam.principal_point);
    }
}

TEST(ProjectWeak, EqualsFullPerspectiveAtConstantDepth)
{
    const CameraIntrinsics cam = camera(812.0);
    Eigen::Matrix3Xd pts = Eigen::Matrix3Xd::Random(3, 10);
    pts.row(2).setConstant(12.0);
    const Eigen::Matrix2Xd weak = project_weak(pts, 12.0, cam);
    for (Eigen::Index i = 0; i < pts.cols(); ++i) {
        EXPECT_LT((weak.col(i) - project_point(pts.col(i), cam)).norm(), 1e-12);
    }
}

TEST(ProjectWeak, FarClusterCloseToFullPerspective)
{
    const ShapeAtlas atlas = make_car_atlas();
    const CameraIntrinsics cam = camera();
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 50; ++trial) {
        ObjectState s;
        s.rotation = random_rotation(rng);
        s.coeffs = Eigen::VectorXd::Zero(2);
        // On the optical axis: off-axis bearings add a tan(bearing) x relief error.
        s.translation = Vec3(0.0, 0.0, 30.0 * atlas.diameter);
        const Eigen::Matrix3Xd pts = transform_shape(s, atlas);
        const Eigen::Matrix2Xd weak = project_weak(pts, pts.row(2).mean(), cam);
        Eigen::Matrix2Xd full(2, pts.cols());
        for (Eigen::Index i = 0; i < pts.cols(); ++i) {
            full.col(i) = project_point(pts.col(i), cam);
        }
        const double extent = (full.rowwise().maxCoeff() - full.rowwise().minCoeff()).maxCoeff();
        EXPECT_LT((weak - full).colwise().norm().maxCoeff(), 0.02 * extent);
    }
}

TEST(ProjectWeak, NonPositiveReferenceDepthThrows)
{
    try {
        project_weak(Eigen::Matrix3Xd::Ones(3, 2), 0.0, camera());
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::invalid_argument);
    }
}

TEST(ProjectWeak, FocalDepthAmbiguityIsExact)
{
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 100; ++trial) {
        const Eigen::Matrix3Xd pts = Eigen::Matrix3Xd::Random(3, 12) * 2.0;
        const double ref = uniform(rng, 5.0, 80.0);
        const double scale = uniform(rng, 0.2, 5.0);
        const CameraIntrinsics cam = camera(uniform(rng, 500.0, 2000.0));
        CameraIntrinsics scaled = cam;
        scaled.focal *= scale;
        const Eigen::Matrix2Xd a = project_weak(pts, ref, cam);
        const Eigen::Matrix2Xd b = project_weak(pts, scale * ref, scaled);
        EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-10);
    }
}

TEST(ReprojectionResiduals, ZeroAtGroundTruth)
{
    const ShapeAtlas atlas = make_car_atlas();
    const SyntheticScene synth = testing::clean_scene(atlas, 1);
    for (std::size_t k = 0; k < synth.truth.objects.size(); ++k) {
        const ResidualBlock block =
            reprojection_residuals(synth.truth.objects[k], synth.scene.detections[k], atlas, synth.truth.intrinsics);
        EXPECT_LT(block.residuals.cwiseAbs().maxCoeff(), 1e-9);
    }
}

TEST(ReprojectionResiduals, TranslationShiftMovesOnlyX)
{
    const ShapeAtlas atlas = make_car_atlas();
    const CameraIntrinsics cam = camera();
    ObjectState s;
    s.coeffs = Eigen::VectorXd::Zero(2);
    s.translation = Vec3(0.5, 0.2, 400.0);
    const Detection det = render(s, atlas, cam);
    ObjectState shifted = s;
    const double z = 400.0;
    shifted.translation.x() += z / cam.focal; // one pixel at depth z
    const ResidualBlock block = reprojection_residuals(shifted, det, atlas, cam);
    const Eigen::Matrix3Xd pts = transform_shape(s, atlas);
    for (Eigen::Index i = 0; i < pts.cols(); ++i) {
        // Exactly f * dx / z_i for each keypoint; within 1% of one pixel at this depth.
        EXPECT_NEAR(block.residuals[2 * i], cam.focal * (z / cam.focal) / pts(2, i), 1e-9);
        EXPECT_NEAR(block.residuals[2 * i], 1.0, 0.01);
        EXPECT_NEAR(block.residuals[2 * i + 1], 0.0, 1e-9);
    }
}

TEST(ReprojectionResiduals, SquaredNormEqualsWeightedSum)
{
    const ShapeAtlas atlas = make_car_atlas();
    std::mt19937_64 rng(33);
    for (int trial = 0; trial < 50; ++trial) {
        const ObjectState truth = testing::random_state(rng, atlas, uniform(rng, 8.0, 50.0));
        const CameraIntrinsics cam = camera(uniform(rng, 600.0, 1600.0));
        Detection det = render(truth, atlas, cam);
        det.keypoints += Eigen::Matrix2Xd::Random(2, det.keypoints.cols()) * 5.0;
        for (Eigen::Index i = 0; i < det.scores.size(); ++i) {
            det.scores[i] = uniform(rng, 0.0, 1.0);
        }
        const ObjectState s = testing::random_state(rng, atlas, truth.translation.z());
        const Eigen::Matrix3Xd x = instantiate_shape(atlas, s.coeffs);
        double expected = 0.0;
        for (Eigen::Index i = 0; i < x.cols(); ++i) {
            const Vec3 p = s.rotation * Vec3(x.col(i)) + s.translation;
            const double du = cam.focal * p.x() / p.z() + cam.principal_point.x() - det.keypoints(0, i);
            const double dv = cam.focal * p.y() / p.z() + cam.principal_point.y() - det.keypoints(1, i);
            expected += det.scores[i] * (du * du + dv * dv);
        }
        const ResidualBlock block = reprojection_residuals(s, det, atlas, cam);
        EXPECT_NEAR(block.residuals.squaredNorm(), expected, 1e-9 * std::max(1.0, expected));
        EXPECT_NEAR(reprojection_loss(s, det, atlas, cam), expected, 1e-9 * std::max(1.0, expected));
    }
}

TEST(ReprojectionResiduals, DoublingScoresDoublesLoss)
{
    const ShapeAtlas atlas = make_car_atlas();
    std::mt19937_64 rng(8);
    const ObjectState s = testing::random_state(rng, atlas, 20.0);
    Detection det = render(testing::random_state(rng, atlas, 20.0), atlas, camera());
    det.scores.setConstant(0.3);
    const double base = reprojection_residuals(s, det, atlas, camera()).residuals.squaredNorm();
    det.scores *= 2.0;
    EXPECT_NEAR(reprojection_residuals(s, det, atlas, camera()).residuals.squaredNorm(), 2.0 * base, 1e-9 * base);
}

TEST(ReprojectionResiduals, ZeroScoreRowsAreZero)
{
    const ShapeAtlas atlas = make_car_atlas();
    std::mt19937_64 rng(12);
    const ObjectState s = testing::random_state(rng, atlas, 20.0);
    Detection det = render(testing::random_state(rng, atlas, 20.0), atlas, camera());
    det.scores[3] = 0.0;
    const ResidualBlock block = reprojection_residuals(s, det, atlas, camera());
    EXPECT_EQ(block.residuals.segment<2>(6), Vec2::Zero());
    EXPECT_TRUE(block.jacobian.middleRows(6, 2).isZero(0.0));
    EXPECT_EQ(block.jacobian.cols(), 6 + 2 + 1);
}

TEST(ReprojectionResiduals, BehindCameraNamesObject)
{
    const ShapeAtlas atlas = make_car_atlas();
    ObjectState s;
    s.coeffs = Eigen::VectorXd::Zero(2);
    s.translation = Vec3(0, 0, 0.5);
    Detection det = render(ObjectState{Mat3::Identity(), Vec3(0, 0, 10), Eigen::VectorXd::Zero(2)}, atlas, camera(),
                           "truck-7");
    try {
        reprojection_residuals(s, det, atlas, camera());
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::behind_camera);
        EXPECT_NE(std::string(e.what()).find("truck-7"), std::string::npos);
    }
}

TEST(CheckJacobian, SmoothConfigurations)
{
    const ShapeAtlas atlas = make_car_atlas();
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 100; ++trial) {
        const ObjectState s = testing::random_state(rng, atlas, uniform(rng, 5.0, 60.0), 2.0);
        Detection det = render(testing::random_state(rng, atlas, s.translation.z()), atlas, camera());
        for (Eigen::Index i = 0; i < det.scores.size(); ++i) {
            det.scores[i] = uniform(rng, 0.1, 1.0);
        }
        EXPECT_LT(check_jacobian(s, det, atlas, camera(uniform(rng, 500, 2000)), 1e-6), 1e-5);
    }
}

TEST(CheckJacobian, AllZeroScoresGiveZeroError)
{
    const ShapeAtlas atlas = make_car_atlas();
    std::mt19937_64 rng(2);
    const ObjectState s = testing::random_state(rng, atlas, 20.0);
    Detection det = render(s, atlas, camera());
    det.scores.setZero();
    EXPECT_TRUE(reprojection_residuals(s, det, atlas, camera()).jacobian.isZero(0.0));
    EXPECT_EQ(check_jacobian(s, det, atlas, camera(), 1e-6), 0.0);
}

TEST(CheckJacobian, NearCameraStaysBounded)
{
    const ShapeAtlas atlas = make_car_atlas();
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        ObjectState s = testing::random_state(rng, atlas, 1.0);
        s.translation = Vec3(0.0, 0.0, atlas.diameter); // nearest keypoints sit just beyond z = 1
        const Eigen::Matrix3Xd pts = transform_shape(s, atlas);
        if (pts.row(2).minCoeff() <= 1.0) {
            continue;
        }
        const Detection det = render(testing::random_state(rng, atlas, 20.0), atlas, camera());
        const double err = check_jacobian(s, det, atlas, camera(), 1e-6);
        EXPECT_TRUE(std::isfinite(err));
        EXPECT_LT(err, 1e-4);
    }
}

} // namespace
} // namespace groundpose
