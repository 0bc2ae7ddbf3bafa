/*
 * Copyright (c) 2026 the dmfdyn authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <Eigen/Core>

#define DMFDYN_STR_IMPL(x) #x
#define DMFDYN_STR(x) DMFDYN_STR_IMPL(x)

namespace dmf {

inline constexpr const char* kVersion = "0.1.0";

inline constexpr const char* kEigenVersion = DMFDYN_STR(EIGEN_WORLD_VERSION) "." DMFDYN_STR(
    EIGEN_MAJOR_VERSION) "." DMFDYN_STR(EIGEN_MINOR_VERSION);

#if defined(__clang__)
inline constexpr const char* kCompiler = "clang " __clang_version__;
#elif defined(__GNUC__)
inline constexpr const char* kCompiler = "gcc " __VERSION__;
#else
inline constexpr const char* kCompiler = "unknown";
#endif

}  // namespace dmf
