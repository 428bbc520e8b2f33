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

#include "ddap/dct.hpp"

#include <cmath>
#include <string>

#include "ddap/errors.hpp"

namespace ddap {

torch::Tensor dct_matrix(int K, torch::Dtype dtype) {
  if (K < 1) throw ArgumentError("block size must be positive");
  auto m = torch::empty({K, K}, torch::kDouble);
  auto acc = m.accessor<double, 2>();
  for (int u = 0; u < K; ++u) {
    const double c = u == 0 ? std::sqrt(1.0 / K) : std::sqrt(2.0 / K);
    for (int i = 0; i < K; ++i) {
      acc[u][i] = c * std::cos((2 * i + 1) * u * M_PI / (2.0 * K));
    }
  }
  return m.to(dtype);
}

torch::Tensor split_blocks(const torch::Tensor& x, int K) {
  if (x.dim() != 4) {
    throw ArgumentError("split_blocks expects [N,C,H,W], got " +
                        c10::str(x.sizes()));
  }
  const int64_t h = x.size(2), w = x.size(3);
  if (K < 1 || h % K != 0 || w % K != 0) {
    throw ArgumentError("image " + std::to_string(h) + "x" +
                        std::to_string(w) + " does not tile into " +
                        std::to_string(K) + "x" + std::to_string(K) +
                        " blocks");
  }
  return x.reshape({x.size(0), x.size(1), h / K, K, w / K, K})
      .permute({0, 1, 2, 4, 3, 5});
}

torch::Tensor merge_blocks(const torch::Tensor& blocks) {
  if (blocks.dim() != 6 || blocks.size(4) != blocks.size(5)) {
    throw ArgumentError("merge_blocks expects [N,C,nby,nbx,K,K], got " +
                        c10::str(blocks.sizes()));
  }
  const int64_t K = blocks.size(4);
  return blocks.permute({0, 1, 2, 4, 3, 5})
      .reshape({blocks.size(0), blocks.size(1), blocks.size(2) * K,
                blocks.size(3) * K});
}

torch::Tensor dct2(const torch::Tensor& blocks) {
  const int K = int(blocks.size(-1));
  if (blocks.size(-2) != K) throw ArgumentError("dct2 needs square blocks");
  auto m = dct_matrix(K, blocks.scalar_type());
  return torch::matmul(torch::matmul(m, blocks), m.t());
}

torch::Tensor idct2(const torch::Tensor& coeffs) {
  const int K = int(coeffs.size(-1));
  if (coeffs.size(-2) != K) throw ArgumentError("idct2 needs square blocks");
  auto m = dct_matrix(K, coeffs.scalar_type());
  return torch::matmul(torch::matmul(m.t(), coeffs), m);
}

FrequencyBlockSet FrequencyBlockSet::from_image(const torch::Tensor& x,
                                                int K) {
  return {dct2(split_blocks(x, K)), K};
}

torch::Tensor FrequencyBlockSet::to_image() const {
  return merge_blocks(idct2(coeffs));
}

}  // namespace ddap
