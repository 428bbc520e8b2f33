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
#include "ddap/rng.hpp"

#include "ddap/errors.hpp"

namespace ddap {

void check_finite(const torch::Tensor& t, const std::string& what,
                  int64_t step) {
  torch::NoGradGuard no_grad;
  auto bad = torch::logical_not(torch::isfinite(t.detach())).flatten();
  if (!bad.any().item<bool>()) return;
  const int64_t index = bad.nonzero().index({0, 0}).item<int64_t>();
  std::string msg = what + ": non-finite value at flat index " +
                    std::to_string(index);
  if (step >= 0) msg += " (step " + std::to_string(step) + ")";
  throw NumericError(msg, step >= 0 ? step : index);
}

}  // namespace ddap
