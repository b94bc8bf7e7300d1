/* Copyright 2026 The qlab Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#pragma once

#include "qlab/adversarial.hpp"
#include "qlab/alphabet.hpp"
#include "qlab/bounds.hpp"
#include "qlab/common.hpp"
#include "qlab/io.hpp"
#include "qlab/linops.hpp"
#include "qlab/optq.hpp"
#include "qlab/oracle.hpp"
#include "qlab/parallel.hpp"
#include "qlab/qronos.hpp"
#include "qlab/rng.hpp"
