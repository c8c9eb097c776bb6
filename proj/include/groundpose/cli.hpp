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

#ifndef GROUNDPOSE_CLI_HPP
#define GROUNDPOSE_CLI_HPP

#include "groundpose/evaluation.hpp"
#include "groundpose/io.hpp"

#include "CLI11.hpp"

#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <string>

namespace groundpose {

/// Process exit codes of the command-line tool.
enum ExitCode : int { exit_ok = 0, exit_validation = 1, exit_solver = 2 };

/// Input problems map to exit 1, numerical failures to exit 2.
inline int exit_code_for(ErrorKind kind)
{
    switch (kind) {
    case ErrorKind::parse:
    case ErrorKind::validation:
    case ErrorKind::invalid_argument:
    case ErrorKind::empty_scene:
    case ErrorKind::insufficient_data:
    case ErrorKind::invalid_plane:
        return exit_validation;
    default:
        return exit_solver;
    }
}

namespace detail {

/// Explicit flag first, then GROUNDPOSE_SEED, then the fallback.
inline std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag, std::uint64_t fallback)
{
    if (flag) {
        return *flag;
    }
    if (const char* env = std::getenv("GROUNDPOSE_SEED"); env != nullptr && *env != '\0') {
        try {
            std::size_t used = 0;
            const unsigned long long v = std::stoull(env, &used);
            if (used == std::string(env).size()) {
                return v;
            }
        } catch (const std::exception&) {
        }
        throw Error(ErrorKind::validation, std::string("GROUNDPOSE_SEED is not an unsigned integer: ") + env);
    }
    return fallback;
}

inline void print_table(std::ostream& out, const std::string& title, const std::vector<double>& thresholds,
                        const std::vector<double>& values)
{
    out << title << "\n";
    out << std::left << std::setw(12) << "threshold";
    for (double t : thresholds) {
        out << std::right << std::setw(9) << std::fixed << std::setprecision(2) << t;
    }
    out << "\n" << std::left << std::setw(12) << "accuracy";
    for (double v : values) {
        out << std::right << std::setw(9) << std::fixed << std::setprecision(2) << v;
    }
    out << "\n";
}

struct SolveArgs
{
    std::string scene, atlas, config, out, diagnostics;
    std::optional<double> focal;
    std::optional<std::uint64_t> seed;
    bool no_plane = false;
};

inline int run_solve(const SolveArgs& args)
{
    Scene scene = io::load_scene(args.scene);
    const ShapeAtlas atlas = io::load_atlas(args.atlas);
    SolverConfig config;
    if (!args.config.empty()) {
        config = io::solver_config_from_json(io::detail::read_json(args.config));
    }
    config.seed = resolve_seed(args.seed, config.seed);
    if (args.no_plane) {
        config.use_plane = false;
    }
    if (args.focal) {
        if (!(*args.focal > 0.0)) {
            throw Error(ErrorKind::validation, "--focal must be positive");
        }
        CameraIntrinsics cam = scene.intrinsics_hint ? *scene.intrinsics_hint : default_intrinsics(scene, *args.focal);
        cam.focal = *args.focal;
        scene.intrinsics_hint = cam;
        config.estimate_focal = false;
    }
    if (scene.detections.empty()) {
        throw Error(ErrorKind::empty_scene, args.scene + " has no detections");
    }
    SceneSolution solution;
    try {
        solution = solve_scene(scene, atlas, config);
    } catch (const Error& e) {
        // Detections were present but none could be solved: a solver failure, not bad input.
        if (e.kind() == ErrorKind::empty_scene) {
            throw Error(ErrorKind::no_progress, e.what());
        }
        throw;
    }
    io::save_estimate(solution.estimate, args.out);
    const std::string diag = args.diagnostics.empty()
                                 ? std::filesystem::path(args.out).replace_extension(".diagnostics.jsonl").string()
                                 : args.diagnostics;
    io::save_diagnostics(solution.diagnostics, diag);
    return exit_ok;
}

struct SynthArgs
{
    std::string atlas, config, out_scene, out_truth;
    std::optional<std::uint64_t> seed;
};

inline int run_synth(const SynthArgs& args)
{
    const ShapeAtlas atlas = io::load_atlas(args.atlas);
    SynthConfig config;
    if (!args.config.empty()) {
        config = io::synth_config_from_json(io::detail::read_json(args.config));
    }
    config.seed = resolve_seed(args.seed, config.seed);
    const SyntheticScene synth = generate_scene(atlas, config);
    io::save_scene(synth.scene, args.out_scene);
    io::json truth = io::estimate_to_json(synth.truth);
    for (std::size_t k = 0; k < truth["objects"].size() && k < synth.labels.objects.size(); ++k) {
        truth["objects"][k]["outlier"] = static_cast<bool>(synth.labels.objects[k]);
    }
    io::detail::write_text(args.out_truth, truth.dump(2) + "\n");
    return exit_ok;
}

struct EvalArgs
{
    std::string est, truth, atlas;
    std::vector<double> thresholds = kAddThresholds;
    std::vector<double> view_thresholds = kViewpointThresholds;
};

/**
 * Objects are matched by id. A truth object without an ok estimate counts as
 * a miss at every threshold.
 */
inline int run_eval(const EvalArgs& args, std::ostream& out)
{
    const SceneEstimate est = io::load_estimate(args.est);
    const SceneEstimate truth = io::load_estimate(args.truth);
    const ShapeAtlas atlas = io::load_atlas(args.atlas);
    std::map<std::string, std::size_t> by_id;
    for (std::size_t k = 0; k < est.objects.size(); ++k) {
        by_id.emplace(est.ids[k], k);
    }
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> add, view;
    for (std::size_t k = 0; k < truth.objects.size(); ++k) {
        const auto it = by_id.find(truth.ids[k]);
        if (it == by_id.end() || est.status[it->second] != ObjectStatus::ok) {
            add.push_back(inf);
            view.push_back(inf);
            continue;
        }
        const ObjectState& e = est.objects[it->second];
        if (e.coeffs.size() != static_cast<Eigen::Index>(atlas.basis.size()) ||
            truth.objects[k].coeffs.size() != e.coeffs.size()) {
            throw Error(ErrorKind::validation, "object " + truth.ids[k] + ": coefficient count does not match the atlas");
        }
        add.push_back(add_distance(e, truth.objects[k], atlas));
        view.push_back(so3::geodesic_distance(e.rotation, truth.objects[k].rotation));
    }
    print_table(out, "ADD accuracy (%), threshold in object diameters", args.thresholds,
                accuracy_curve(add, args.thresholds));
    print_table(out, "Viewpoint precision (%), threshold in radians", args.view_thresholds,
                accuracy_curve(view, args.view_thresholds));
    out << std::defaultfloat << std::setprecision(6) << "focal " << est.intrinsics.focal << " (truth "
        << truth.intrinsics.focal << "), plane normal error "
        << plane_normal_angle(est.plane, truth.plane) * 180.0 / 3.14159265358979323846 << " deg\n";
    return exit_ok;
}

} // namespace detail

/**
 * Entry point of the `groundpose` tool. Returns the process exit code; errors
 * are reported on `err`.
 */
inline int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
    CLI::App app{"Joint multi-object pose, ground plane and focal length estimation from 2D keypoints"};
    app.require_subcommand(1);

    detail::SolveArgs solve;
    CLI::App* solve_cmd = app.add_subcommand("solve", "Estimate poses, ground plane and focal length for one scene");
    solve_cmd->add_option("--scene", solve.scene, "Scene JSON")->required();
    solve_cmd->add_option("--atlas", solve.atlas, "Shape atlas JSON")->required();
    solve_cmd->add_option("--focal", solve.focal, "Known focal length in pixels; disables focal estimation");
    solve_cmd->add_flag("--no-plane", solve.no_plane, "Solve every object independently");
    solve_cmd->add_option("--seed", solve.seed, "Random seed (default: GROUNDPOSE_SEED, then the config)");
    solve_cmd->add_option("--config", solve.config, "Solver config JSON");
    solve_cmd->add_option("--out", solve.out, "Estimate JSON to write")->required();
    solve_cmd->add_option("--diagnostics", solve.diagnostics,
                          "Per-iteration JSON-lines trace (default: <out>.diagnostics.jsonl)");

    detail::SynthArgs synth;
    CLI::App* synth_cmd = app.add_subcommand("synth", "Generate a synthetic scene and its ground truth");
    synth_cmd->add_option("--atlas", synth.atlas, "Shape atlas JSON")->required();
    synth_cmd->add_option("--config", synth.config, "Synthesis config JSON");
    synth_cmd->add_option("--seed", synth.seed, "Random seed (default: GROUNDPOSE_SEED, then the config)");
    synth_cmd->add_option("--out-scene", synth.out_scene, "Scene JSON to write")->required();
    synth_cmd->add_option("--out-truth", synth.out_truth, "Ground-truth estimate JSON to write")->required();

    detail::EvalArgs eval;
    CLI::App* eval_cmd = app.add_subcommand("eval", "Score an estimate against ground truth");
    eval_cmd->add_option("--est", eval.est, "Estimate JSON")->required();
    eval_cmd->add_option("--truth", eval.truth, "Ground-truth JSON")->required();
    eval_cmd->add_option("--atlas", eval.atlas, "Shape atlas JSON")->required();
    eval_cmd->add_option("--thresholds", eval.thresholds, "ADD thresholds in object diameters");
    eval_cmd->add_option("--view-thresholds", eval.view_thresholds, "Viewpoint thresholds in radians");

    std::string traj_dir, traj_out;
    CLI::App* traj_cmd = app.add_subcommand("export-traj", "Collect per-frame estimates into a trajectory JSON");
    traj_cmd->add_option("--estimates", traj_dir, "Directory of estimate JSON files")->required();
    traj_cmd->add_option("--out", traj_out, "Trajectory JSON to write")->required();

    std::string atlas_out;
    CLI::App* atlas_cmd = app.add_subcommand("atlas", "Write the built-in car keypoint atlas");
    atlas_cmd->add_option("--out", atlas_out, "Atlas JSON to write")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return exit_ok;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return exit_validation;
    }

    try {
        if (solve_cmd->parsed()) {
            return detail::run_solve(solve);
        }
        if (synth_cmd->parsed()) {
            return detail::run_synth(synth);
        }
        if (eval_cmd->parsed()) {
            return detail::run_eval(eval, out);
        }
        if (traj_cmd->parsed()) {
            io::detail::write_text(traj_out, io::export_trajectory(traj_dir).dump(2) + "\n");
            return exit_ok;
        }
        if (atlas_cmd->parsed()) {
            io::save_atlas(make_car_atlas(), atlas_out);
            return exit_ok;
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return exit_solver;
    }
    return exit_validation;
}

} // namespace groundpose

#endif // GROUNDPOSE_CLI_HPP
