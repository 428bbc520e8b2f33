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

#include <torch/torch.h>

namespace ddap {

// Orthonormal DCT-II basis: M[u][i] = c(u) cos((2i+1) u pi / 2K) with
// c(0) = sqrt(1/K) and c(u) = sqrt(2/K) otherwise.
torch::Tensor dct_matrix(int K, torch::Dtype dtype = torch::kDouble);

// [N,C,H,W] -> [N,C,H/K,W/K,K,K]. H and W must be multiples of K.
torch::Tensor split_blocks(const torch::Tensor& x, int K);
// Inverse of split_blocks.
torch::Tensor merge_blocks(const torch::Tensor& blocks);

// 2-D transform over the last two dims (each of size K).
torch::Tensor dct2(const torch::Tensor& blocks);
torch::Tensor idct2(const torch::Tensor& coeffs);

// Block coefficients of an image batch together with the block size.
struct FrequencyBlockSet {
  torch::Tensor coeffs;  // [N,C,nby,nbx,K,K]
  int block_size = 8;

  static FrequencyBlockSet from_image(const torch::Tensor& x, int K);
  torch::Tensor to_image() const;
};

}  // namespace ddap
