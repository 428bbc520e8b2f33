// Copyright 2026 The DDAP Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <string>

#include <torch/torch.h>

namespace ddap {

// 8-bit PNG persistence. Values are rounded to the nearest 1/255 and
// clamped to [0,1] on write; reads return float64 tensors.
// Accepts [3,H,W] (RGB) or [H,W] (grayscale).
void write_png(const std::string& path, const torch::Tensor& image);
torch::Tensor read_png(const std::string& path);

// Round to the 8-bit grid used by write_png, in float64.
torch::Tensor quantize_8bit(const torch::Tensor& image);

}  // namespace ddap
