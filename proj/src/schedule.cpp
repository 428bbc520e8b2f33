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

#include "ddap/schedule.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "ddap/errors.hpp"

namespace ddap {

NoiseSchedule NoiseSchedule::linear(int steps, double beta_start,
                                    double beta_end) {
  if (steps < 1) throw ArgumentError("schedule needs at least one step");
  std::vector<double> betas(steps);
  for (int i = 0; i < steps; ++i) {
    const double frac = steps == 1 ? 0.0 : double(i) / double(steps - 1);
    betas[i] = beta_start + frac * (beta_end - beta_start);
  }
  return from_betas(std::move(betas));
}

NoiseSchedule NoiseSchedule::from_betas(std::vector<double> betas) {
  if (betas.empty()) throw ArgumentError("empty beta schedule");
  for (size_t i = 0; i < betas.size(); ++i) {
    if (!(betas[i] > 0.0 && betas[i] < 1.0)) {
      throw ArgumentError("beta " + std::to_string(i + 1) + " outside (0,1)");
    }
    if (i > 0 && !(betas[i] > betas[i - 1])) {
      throw ArgumentError("betas must be strictly increasing");
    }
  }
  return NoiseSchedule(std::move(betas));
}

NoiseSchedule::NoiseSchedule(std::vector<double> betas)
    : betas_(std::move(betas)) {
  alpha_bars_.resize(betas_.size() + 1);
  alpha_bars_[0] = 1.0;
  for (size_t i = 0; i < betas_.size(); ++i) {
    alpha_bars_[i + 1] = alpha_bars_[i] * (1.0 - betas_[i]);
  }
}

double NoiseSchedule::beta(int t) const {
  if (t < 1 || t > steps()) {
    throw ArgumentError("timestep " + std::to_string(t) + " outside [1," +
                        std::to_string(steps()) + "]");
  }
  return betas_[t - 1];
}

double NoiseSchedule::alpha_bar(int t) const {
  if (t < 0 || t > steps()) {
    throw ArgumentError("timestep " + std::to_string(t) + " outside [0," +
                        std::to_string(steps()) + "]");
  }
  return alpha_bars_[t];
}

}  // namespace ddap
