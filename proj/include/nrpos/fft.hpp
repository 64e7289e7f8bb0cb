// SPDX-License-Identifier: Apache-2.0
//
// nrpos: 5G NR positioning signals, measurements and solvers
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

#pragma once

#include "nrpos/common.hpp"

#include <span>

namespace nrpos::fft
{

enum class Direction
{
    forward,  // X[k] = sum x[n] exp(-j 2 pi k n / N)
    inverse,  // x[n] = sum X[k] exp(+j 2 pi k n / N), unnormalized
};

// In-place complex DFT of any length. Plans are cached per (length,
// direction) and shared across threads; execution is thread-safe.
void transform(std::span<cx> data, Direction dir);

} // namespace nrpos::fft
