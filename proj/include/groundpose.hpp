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

#ifndef GROUNDPOSE_GROUNDPOSE_HPP
#define GROUNDPOSE_GROUNDPOSE_HPP

#include "groundpose/error.hpp"
#include "groundpose/scene_model.hpp"
#include "groundpose/so3.hpp"
#include "groundpose/projection.hpp"
#include "groundpose/pnp_init.hpp"
#include "groundpose/pose_block.hpp"
#include "groundpose/deformable_pose.hpp"
#include "groundpose/plane_consensus.hpp"
#include "groundpose/self_calibration.hpp"
#include "groundpose/joint_solver.hpp"
#include "groundpose/evaluation.hpp"
#include "groundpose/synth_oracle.hpp"
#include "groundpose/io.hpp"

#endif // GROUNDPOSE_GROUNDPOSE_HPP
