/*
Copyright 2026 The arir Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS-IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/

#ifndef ARIR_ARIR_HPP_
#define ARIR_ARIR_HPP_

// Convenience header for the whole library.

#include "arir/ambisonics.hpp"
#include "arir/analysis.hpp"
#include "arir/bench.hpp"
#include "arir/convolution.hpp"
#include "arir/dsp.hpp"
#include "arir/errors.hpp"
#include "arir/io.hpp"
#include "arir/preset.hpp"
#include "arir/renderer.hpp"
#include "arir/snapshot.hpp"
#include "arir/sound_events.hpp"
#include "arir/translation.hpp"
#include "arir/upmix.hpp"

#endif  // ARIR_ARIR_HPP_
