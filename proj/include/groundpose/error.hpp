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

#ifndef GROUNDPOSE_ERROR_HPP
#define GROUNDPOSE_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace groundpose {

enum class ErrorKind {
    invalid_argument,
    behind_camera,
    underdetermined,
    degenerate,
    no_progress,
    insufficient_data,
    invalid_plane,
    unobservable_focal,
    empty_scene,
    generation,
    parse,
    validation,
};

inline std::string_view to_string(ErrorKind kind)
{
    switch (kind) {
    case ErrorKind::invalid_argument: return "invalid-argument";
    case ErrorKind::behind_camera: return "behind-camera";
    case ErrorKind::underdetermined: return "underdetermined";
    case ErrorKind::degenerate: return "degenerate-configuration";
    case ErrorKind::no_progress: return "no-progress";
    case ErrorKind::insufficient_data: return "insufficient-data";
    case ErrorKind::invalid_plane: return "invalid-plane";
    case ErrorKind::unobservable_focal: return "unobservable-focal";
    case ErrorKind::empty_scene: return "empty-scene";
    case ErrorKind::generation: return "generation";
    case ErrorKind::parse: return "parse";
    case ErrorKind::validation: return "validation";
    }
    return "unknown";
}

/**
 * Single exception type for the library. The kind tells callers (and the CLI's
 * exit-code mapping) what went wrong; the message is for humans.
 */
class Error : public std::runtime_error
{
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind)
    {
    }

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Thrown by iterative solvers that could not make progress; carries the best iterate seen.
template <typename Iterate>
class NoProgressError : public Error
{
public:
    NoProgressError(const std::string& message, Iterate best, double best_loss)
        : Error(ErrorKind::no_progress, message), best_(std::move(best)), best_loss_(best_loss)
    {
    }

    const Iterate& best() const noexcept { return best_; }
    double best_loss() const noexcept { return best_loss_; }

private:
    Iterate best_;
    double best_loss_;
};

} // namespace groundpose

#endif // GROUNDPOSE_ERROR_HPP
