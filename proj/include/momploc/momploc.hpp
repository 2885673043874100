// SPDX-License-Identifier: Apache-2.0
//
// Copyright (C) 2026 The momploc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#ifndef MOMPLOC_MOMPLOC_HPP
#define MOMPLOC_MOMPLOC_HPP

#include "arrays.hpp"
#include "dictionary.hpp"
#include "error.hpp"
#include "experiment.hpp"
#include "io.hpp"
#include "localization.hpp"
#include "momp.hpp"
#include "scene.hpp"
#include "sounding.hpp"

#endif
