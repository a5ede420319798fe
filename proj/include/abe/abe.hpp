// Copyright 2026 The ABE Authors
// SPDX-License-Identifier: Apache-2.0
//
// Umbrella header.

#pragma once

#include "abe/analyze.hpp"
#include "abe/baselines.hpp"
#include "abe/divergence.hpp"
#include "abe/error.hpp"
#include "abe/manifest.hpp"
#include "abe/moments.hpp"
#include "abe/snapshot.hpp"
#include "abe/synth/scenario.hpp"
#include "abe/synth/toy_train.hpp"
#include "abe/trajectory.hpp"
