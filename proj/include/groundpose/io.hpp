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

#ifndef GROUNDPOSE_IO_HPP
#define GROUNDPOSE_IO_HPP

#include "groundpose/joint_solver.hpp"
#include "groundpose/synth_oracle.hpp"

#include "json.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace groundpose::io {

using nlohmann::json;

inline constexpr int kSchemaVersion = 1;

namespace detail {

[[noreturn]] inline void parse_fail(const std::string& where, const std::string& what)
{
    throw Error(ErrorKind::parse, (where.empty() ? std::string("document") : where) + ": " + what);
}

inline std::string join(const std::string& where, const std::string& key)
{
    return where.empty() ? key : where + "." + key;
}

inline const json& require(const json& j, const std::string& key, const std::string& where)
{
    if (!j.is_object()) {
        parse_fail(where, "expected an object");
    }
    const auto it = j.find(key);
    if (it == j.end()) {
        parse_fail(where, "missing field \"" + key + "\"");
    }
    return *it;
}

inline double number(const json& j, const std::string& where)
{
    if (!j.is_number()) {
        parse_fail(where, "expected a number");
    }
    return j.get<double>();
}

inline Eigen::VectorXd vector(const json& j, const std::string& where, Eigen::Index expected = -1)
{
    if (!j.is_array()) {
        parse_fail(where, "expected an array of numbers");
    }
    if (expected >= 0 && static_cast<Eigen::Index>(j.size()) != expected) {
        parse_fail(where, "expected " + std::to_string(expected) + " entries, got " + std::to_string(j.size()));
    }
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        v[static_cast<Eigen::Index>(i)] = number(j[i], where + "[" + std::to_string(i) + "]");
    }
    return v;
}

/// Array of `rows`-vectors stored as columns of the result.
inline Eigen::MatrixXd points(const json& j, Eigen::Index rows, const std::string& where)
{
    if (!j.is_array()) {
        parse_fail(where, "expected an array of points");
    }
    Eigen::MatrixXd out(rows, static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        out.col(static_cast<Eigen::Index>(i)) = vector(j[i], where + "[" + std::to_string(i) + "]", rows);
    }
    return out;
}

template <typename Derived>
json to_array(const Eigen::DenseBase<Derived>& v)
{
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        out.push_back(v(i));
    }
    return out;
}

template <typename Derived>
json columns_to_array(const Eigen::DenseBase<Derived>& m)
{
    json out = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
        out.push_back(to_array(m.col(c)));
    }
    return out;
}

inline void check_version(const json& j, const std::string& where)
{
    const json& v = require(j, "schema_version", where);
    if (!v.is_number_integer() || v.get<int>() != kSchemaVersion) {
        parse_fail(join(where, "schema_version"), "unsupported schema version");
    }
}

inline bool boolean(const json& j, const std::string& key, const std::string& where, bool fallback)
{
    const auto it = j.find(key);
    if (it == j.end()) {
        return fallback;
    }
    if (!it->is_boolean()) {
        parse_fail(join(where, key), "expected true or false");
    }
    return it->get<bool>();
}

inline json read_json(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorKind::parse, "cannot open " + path.string());
    }
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::parse, path.string() + ": " + e.what());
    }
}

inline void write_text(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(ErrorKind::validation, "cannot write " + path.string());
    }
    out << text;
}

} // namespace detail

// ---- atlas ----

inline json atlas_to_json(const ShapeAtlas& atlas)
{
    json basis = json::array();
    for (const auto& component : atlas.basis) {
        basis.push_back(detail::columns_to_array(component));
    }
    return json{{"schema_version", kSchemaVersion},
                {"keypoint_names", atlas.keypoint_names},
                {"mean_shape", detail::columns_to_array(atlas.mean_shape)},
                {"basis", basis},
                {"coeff_bounds", detail::to_array(atlas.coeff_bounds)},
                {"diameter", atlas.diameter}};
}

inline ShapeAtlas atlas_from_json(const json& j)
{
    detail::check_version(j, "");
    ShapeAtlas atlas;
    atlas.mean_shape = detail::points(detail::require(j, "mean_shape", ""), 3, "mean_shape");
    const json& basis = detail::require(j, "basis", "");
    if (!basis.is_array()) {
        detail::parse_fail("basis", "expected an array of components");
    }
    for (std::size_t c = 0; c < basis.size(); ++c) {
        atlas.basis.push_back(detail::points(basis[c], 3, "basis[" + std::to_string(c) + "]"));
    }
    if (j.contains("coeff_bounds")) {
        atlas.coeff_bounds = detail::vector(j["coeff_bounds"], "coeff_bounds");
    } else {
        atlas.coeff_bounds = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(atlas.basis.size()), kDefaultCoeffBound);
    }
    atlas.diameter = j.contains("diameter") ? detail::number(j["diameter"], "diameter")
                                            : max_pairwise_distance(atlas.mean_shape);
    if (j.contains("keypoint_names")) {
        const json& names = j["keypoint_names"];
        if (!names.is_array()) {
            detail::parse_fail("keypoint_names", "expected an array of strings");
        }
        for (std::size_t i = 0; i < names.size(); ++i) {
            if (!names[i].is_string()) {
                detail::parse_fail("keypoint_names[" + std::to_string(i) + "]", "expected a string");
            }
            atlas.keypoint_names.push_back(names[i].get<std::string>());
        }
    }
    return atlas;
}

inline ShapeAtlas load_atlas(const std::filesystem::path& path)
{
    ShapeAtlas atlas = atlas_from_json(detail::read_json(path));
    if (const auto report = validate_atlas(atlas); !report.empty()) {
        throw Error(ErrorKind::validation, path.string() + ": " + report.front());
    }
    return atlas;
}

inline void save_atlas(const ShapeAtlas& atlas, const std::filesystem::path& path)
{
    detail::write_text(path, atlas_to_json(atlas).dump(2) + "\n");
}

// ---- scene ----

inline json intrinsics_to_json(const CameraIntrinsics& cam)
{
    return json{{"focal", cam.focal}, {"principal_point", detail::to_array(cam.principal_point)}};
}

inline CameraIntrinsics intrinsics_from_json(const json& j, const std::string& where)
{
    CameraIntrinsics cam;
    cam.focal = detail::number(detail::require(j, "focal", where), detail::join(where, "focal"));
    cam.principal_point =
        detail::vector(detail::require(j, "principal_point", where), detail::join(where, "principal_point"), 2);
    return cam;
}

inline json scene_to_json(const Scene& scene)
{
    json detections = json::array();
    for (const Detection& det : scene.detections) {
        detections.push_back(json{{"id", det.id},
                                  {"keypoints", detail::columns_to_array(det.keypoints)},
                                  {"scores", detail::to_array(det.scores)}});
    }
    return json{{"schema_version", kSchemaVersion},
                {"image_size", detail::to_array(scene.image_size)},
                {"intrinsics_hint", scene.intrinsics_hint ? intrinsics_to_json(*scene.intrinsics_hint) : json(nullptr)},
                {"detections", detections}};
}

inline Scene scene_from_json(const json& j)
{
    detail::check_version(j, "");
    Scene scene;
    scene.image_size = detail::vector(detail::require(j, "image_size", ""), "image_size", 2);
    if (j.contains("intrinsics_hint") && !j["intrinsics_hint"].is_null()) {
        scene.intrinsics_hint = intrinsics_from_json(j["intrinsics_hint"], "intrinsics_hint");
    }
    const json& dets = detail::require(j, "detections", "");
    if (!dets.is_array()) {
        detail::parse_fail("detections", "expected an array");
    }
    for (std::size_t k = 0; k < dets.size(); ++k) {
        const std::string where = "detections[" + std::to_string(k) + "]";
        Detection det;
        det.keypoints = detail::points(detail::require(dets[k], "keypoints", where), 2, where + ".keypoints");
        if (dets[k].contains("scores")) {
            det.scores = detail::vector(dets[k]["scores"], where + ".scores", det.keypoints.cols());
        } else {
            det.scores = Eigen::VectorXd::Ones(det.keypoints.cols());
        }
        if (dets[k].contains("id")) {
            if (!dets[k]["id"].is_string()) {
                detail::parse_fail(where + ".id", "expected a string");
            }
            det.id = dets[k]["id"].get<std::string>();
        } else {
            det.id = "obj" + std::to_string(k);
        }
        scene.detections.push_back(std::move(det));
    }
    return scene;
}

inline Scene load_scene(const std::filesystem::path& path, double margin = 32.0)
{
    Scene scene = scene_from_json(detail::read_json(path));
    if (const auto report = validate_scene(scene, margin); !report.empty()) {
        throw Error(ErrorKind::validation, path.string() + ": " + report.front());
    }
    return scene;
}

inline void save_scene(const Scene& scene, const std::filesystem::path& path)
{
    detail::write_text(path, scene_to_json(scene).dump(2) + "\n");
}

// ---- estimate ----

inline json estimate_to_json(const SceneEstimate& est)
{
    json objects = json::array();
    for (std::size_t k = 0; k < est.objects.size(); ++k) {
        const ObjectState& s = est.objects[k];
        json rotation = json::array();
        for (int r = 0; r < 3; ++r) {
            rotation.push_back(detail::to_array(s.rotation.row(r)));
        }
        const bool ok = est.status.empty() || est.status[k] == ObjectStatus::ok;
        objects.push_back(json{
            {"id", k < est.ids.size() ? est.ids[k] : "obj" + std::to_string(k)},
            {"status", ok ? "ok" : "failed"},
            {"failure_reason", k < est.failure_reasons.size() ? est.failure_reasons[k] : ""},
            {"rotation", rotation},
            {"translation", detail::to_array(s.translation)},
            {"coeffs", detail::to_array(s.coeffs)},
            {"loss", k < est.per_object_loss.size() ? est.per_object_loss[k] : 0.0},
            {"plane_inlier", k < est.plane_inliers.size() ? static_cast<bool>(est.plane_inliers[k]) : true},
        });
    }
    return json{{"schema_version", kSchemaVersion},
                {"intrinsics", intrinsics_to_json(est.intrinsics)},
                {"plane", detail::to_array(est.plane.coeffs)},
                {"objects", objects},
                {"converged", est.converged},
                {"iterations", est.iterations},
                {"degraded", est.degraded},
                {"focal_clamped", est.focal_clamped},
                {"focal_unobservable", est.focal_unobservable},
                {"plane_disagreement", est.plane_disagreement}};
}

inline SceneEstimate estimate_from_json(const json& j)
{
    detail::check_version(j, "");
    SceneEstimate est;
    est.intrinsics = intrinsics_from_json(detail::require(j, "intrinsics", ""), "intrinsics");
    est.plane.coeffs = detail::vector(detail::require(j, "plane", ""), "plane", 4);
    const json& objects = detail::require(j, "objects", "");
    if (!objects.is_array()) {
        detail::parse_fail("objects", "expected an array");
    }
    for (std::size_t k = 0; k < objects.size(); ++k) {
        const std::string where = "objects[" + std::to_string(k) + "]";
        const json& o = objects[k];
        ObjectState s;
        const Eigen::MatrixXd rows = detail::points(detail::require(o, "rotation", where), 3, where + ".rotation");
        if (rows.cols() != 3) {
            detail::parse_fail(where + ".rotation", "expected 3 rows");
        }
        s.rotation = rows.transpose();
        s.translation = detail::vector(detail::require(o, "translation", where), where + ".translation", 3);
        s.coeffs = detail::vector(detail::require(o, "coeffs", where), where + ".coeffs");
        est.objects.push_back(s);
        est.ids.push_back(o.contains("id") && o["id"].is_string() ? o["id"].get<std::string>() : "obj" + std::to_string(k));
        const std::string status = o.contains("status") && o["status"].is_string() ? o["status"].get<std::string>() : "ok";
        if (status != "ok" && status != "failed") {
            detail::parse_fail(where + ".status", "expected \"ok\" or \"failed\"");
        }
        est.status.push_back(status == "ok" ? ObjectStatus::ok : ObjectStatus::failed);
        est.failure_reasons.push_back(o.contains("failure_reason") && o["failure_reason"].is_string()
                                          ? o["failure_reason"].get<std::string>()
                                          : "");
        est.per_object_loss.push_back(o.contains("loss") ? detail::number(o["loss"], where + ".loss") : 0.0);
        est.plane_inliers.push_back(detail::boolean(o, "plane_inlier", where, true));
    }
    est.converged = detail::boolean(j, "converged", "", false);
    est.iterations = j.contains("iterations") ? static_cast<int>(detail::number(j["iterations"], "iterations")) : 0;
    est.degraded = detail::boolean(j, "degraded", "", false);
    est.focal_clamped = detail::boolean(j, "focal_clamped", "", false);
    est.focal_unobservable = detail::boolean(j, "focal_unobservable", "", false);
    est.plane_disagreement =
        j.contains("plane_disagreement") ? detail::number(j["plane_disagreement"], "plane_disagreement") : 0.0;
    return est;
}

inline SceneEstimate load_estimate(const std::filesystem::path& path)
{
    SceneEstimate est = estimate_from_json(detail::read_json(path));
    for (std::size_t k = 0; k < est.objects.size(); ++k) {
        if (!so3::is_rotation(est.objects[k].rotation, 1e-6)) {
            throw Error(ErrorKind::validation,
                        path.string() + ": objects[" + std::to_string(k) + "].rotation is not a rotation matrix");
        }
    }
    if (!(est.intrinsics.focal > 0.0)) {
        throw Error(ErrorKind::validation, path.string() + ": intrinsics.focal must be positive");
    }
    return est;
}

inline void save_estimate(const SceneEstimate& est, const std::filesystem::path& path)
{
    detail::write_text(path, estimate_to_json(est).dump(2) + "\n");
}

// ---- diagnostics ----

inline json diagnostics_to_json(const IterationDiagnostics& d)
{
    return json{{"iteration", d.iteration},
                {"total_loss", d.total_loss},
                {"loss_before_solve", d.loss_before_solve},
                {"focal", d.focal},
                {"plane", detail::to_array(d.plane.coeffs)},
                {"mu1", d.mu1},
                {"mu2", d.mu2},
                {"translation_inliers", d.translation_inliers},
                {"rotation_inliers", d.rotation_inliers},
                {"max_plane_residual", d.max_plane_residual},
                {"plane_disagreement", d.plane_disagreement},
                {"focal_clamped", d.focal_clamped},
                {"focal_unobservable", d.focal_unobservable}};
}

/// One JSON record per line, one line per outer iteration.
inline void save_diagnostics(const std::vector<IterationDiagnostics>& diagnostics, const std::filesystem::path& path)
{
    std::string text;
    for (const auto& d : diagnostics) {
        text += diagnostics_to_json(d).dump() + "\n";
    }
    detail::write_text(path, text);
}

inline std::vector<json> load_jsonl(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorKind::parse, "cannot open " + path.string());
    }
    std::vector<json> records;
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (line.empty()) {
            continue;
        }
        try {
            records.push_back(json::parse(line));
        } catch (const json::parse_error& e) {
            throw Error(ErrorKind::parse, path.string() + ":" + std::to_string(number) + ": " + e.what());
        }
    }
    return records;
}

// ---- configs ----

namespace detail {

inline void read_schedule(const json& j, const std::string& key, WeightSchedule& s)
{
    if (!j.contains(key)) {
        return;
    }
    const json& o = j[key];
    if (!o.is_object()) {
        parse_fail(key, "expected an object with initial/growth/cap");
    }
    if (o.contains("initial")) s.initial = number(o["initial"], key + ".initial");
    if (o.contains("growth")) s.growth = number(o["growth"], key + ".growth");
    if (o.contains("cap")) s.cap = number(o["cap"], key + ".cap");
}

inline Vec2 range(const json& j, const std::string& key, const Vec2& fallback)
{
    return j.contains(key) ? Vec2(vector(j[key], key, 2)) : fallback;
}

inline CoeffBoundMode bound_mode(const json& j, CoeffBoundMode fallback)
{
    if (!j.contains("coeff_bound_mode")) {
        return fallback;
    }
    const json& v = j["coeff_bound_mode"];
    if (v == "symmetric") {
        return CoeffBoundMode::symmetric;
    }
    if (v == "nonnegative") {
        return CoeffBoundMode::nonnegative;
    }
    parse_fail("coeff_bound_mode", "expected \"symmetric\" or \"nonnegative\"");
}

} // namespace detail

/// Every field is optional; missing ones keep their defaults.
inline SolverConfig solver_config_from_json(const json& j)
{
    if (!j.is_object()) {
        detail::parse_fail("", "solver config must be an object");
    }
    SolverConfig c;
    if (j.contains("mu_shape")) c.mu_shape = detail::number(j["mu_shape"], "mu_shape");
    detail::read_schedule(j, "mu1_schedule", c.mu1_schedule);
    detail::read_schedule(j, "mu2_schedule", c.mu2_schedule);
    if (j.contains("max_iters")) c.max_iters = static_cast<int>(detail::number(j["max_iters"], "max_iters"));
    if (j.contains("convergence_tol")) c.convergence_tol = detail::number(j["convergence_tol"], "convergence_tol");
    if (j.contains("inner_tol")) c.inner_tol = detail::number(j["inner_tol"], "inner_tol");
    if (j.contains("inner_max_iters"))
        c.inner_max_iters = static_cast<int>(detail::number(j["inner_max_iters"], "inner_max_iters"));
    if (j.contains("ransac")) {
        const json& r = j["ransac"];
        if (r.contains("iterations")) c.ransac.iterations = static_cast<int>(detail::number(r["iterations"], "ransac.iterations"));
        if (r.contains("distance_threshold") && !r["distance_threshold"].is_null())
            c.ransac.distance_threshold = detail::number(r["distance_threshold"], "ransac.distance_threshold");
        if (r.contains("angle_threshold")) c.ransac.angle_threshold = detail::number(r["angle_threshold"], "ransac.angle_threshold");
        if (r.contains("seed")) c.ransac.seed = r["seed"].get<std::uint64_t>();
    }
    c.coeff_bound_mode = detail::bound_mode(j, c.coeff_bound_mode);
    if (j.contains("dlt_min_score")) c.dlt_min_score = detail::number(j["dlt_min_score"], "dlt_min_score");
    c.use_plane = detail::boolean(j, "use_plane", "", c.use_plane);
    c.estimate_focal = detail::boolean(j, "estimate_focal", "", c.estimate_focal);
    if (j.contains("focal_min_factor")) c.focal_min_factor = detail::number(j["focal_min_factor"], "focal_min_factor");
    if (j.contains("focal_max_factor")) c.focal_max_factor = detail::number(j["focal_max_factor"], "focal_max_factor");
    if (j.contains("focal_ratio_eps")) c.focal_ratio_eps = detail::number(j["focal_ratio_eps"], "focal_ratio_eps");
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    return c;
}

inline SynthConfig synth_config_from_json(const json& j)
{
    if (!j.is_object()) {
        detail::parse_fail("", "synth config must be an object");
    }
    SynthConfig c;
    if (j.contains("n_objects")) c.n_objects = static_cast<int>(detail::number(j["n_objects"], "n_objects"));
    c.image_size = detail::range(j, "image_size", c.image_size);
    c.focal_range = detail::range(j, "focal_range", c.focal_range);
    c.plane_tilt_range = detail::range(j, "plane_tilt_range", c.plane_tilt_range);
    if (j.contains("roll_max")) c.roll_max = detail::number(j["roll_max"], "roll_max");
    c.camera_height_range = detail::range(j, "camera_height_range", c.camera_height_range);
    c.depth_range = detail::range(j, "depth_range", c.depth_range);
    if (j.contains("keypoint_noise_sigma"))
        c.keypoint_noise_sigma = detail::number(j["keypoint_noise_sigma"], "keypoint_noise_sigma");
    if (j.contains("outlier_fraction")) c.outlier_fraction = detail::number(j["outlier_fraction"], "outlier_fraction");
    if (j.contains("keypoint_drop_fraction"))
        c.keypoint_drop_fraction = detail::number(j["keypoint_drop_fraction"], "keypoint_drop_fraction");
    if (j.contains("coeff_sigma")) c.coeff_sigma = detail::number(j["coeff_sigma"], "coeff_sigma");
    c.coeff_bound_mode = detail::bound_mode(j, c.coeff_bound_mode);
    if (j.contains("image_margin")) c.image_margin = detail::number(j["image_margin"], "image_margin");
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    return c;
}

// ---- trajectory ----

/**
 * Collects every estimate (*.json, sorted by file name) in a directory into
 * one trajectory document: per frame, the camera, the plane and each object's
 * pose and shape.
 */
inline json export_trajectory(const std::filesystem::path& directory)
{
    if (!std::filesystem::is_directory(directory)) {
        throw Error(ErrorKind::validation, directory.string() + " is not a directory");
    }
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(directory)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    json frames = json::array();
    for (std::size_t f = 0; f < files.size(); ++f) {
        const SceneEstimate est = load_estimate(files[f]);
        json objects = json::array();
        for (std::size_t k = 0; k < est.objects.size(); ++k) {
            if (est.status[k] != ObjectStatus::ok) {
                continue;
            }
            const ObjectState& s = est.objects[k];
            json rotation = json::array();
            for (int r = 0; r < 3; ++r) {
                rotation.push_back(detail::to_array(s.rotation.row(r)));
            }
            objects.push_back(json{{"id", est.ids[k]},
                                   {"rotation", rotation},
                                   {"translation", detail::to_array(s.translation)},
                                   {"coeffs", detail::to_array(s.coeffs)}});
        }
        frames.push_back(json{{"frame", f},
                              {"source", files[f].filename().string()},
                              {"camera", intrinsics_to_json(est.intrinsics)},
                              {"plane", detail::to_array(est.plane.coeffs)},
                              {"objects", objects}});
    }
    return json{{"schema_version", kSchemaVersion}, {"frames", frames}};
}

} // namespace groundpose::io

#endif // GROUNDPOSE_IO_HPP
