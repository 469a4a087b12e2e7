// Copyright 2026 The Feeding Station Authors
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

#include <cmath>
#include <limits>
#include <stdexcept>

#include "feeder/weighing.hpp"

namespace feeder::weighing {

namespace {

struct Level {
  double grams = 0.0;
  bool stable = false;
};

double sample_std(const MeasurementPeriod& p) {
  if (p.samples.empty()) return 0.0;
  double mean = 0.0;
  for (const auto& s : p.samples) mean += s.grams;
  mean /= static_cast<double>(p.samples.size());
  double ss = 0.0;
  for (const auto& s : p.samples) ss += (s.grams - mean) * (s.grams - mean);
  return std::sqrt(ss / static_cast<double>(p.samples.size()));
}

struct Animal {
  Millis entry_ts = 0;
  std::size_t entry_event = 0;
  double entrance_shift = 0.0;
  bool entrance_stable = true;
  double std_grams = 0.0;
  bool present = true;
  Millis exit_ts = 0;
  double exit_shift = 0.0;
  bool exit_stable = true;
  std::uint8_t quality = kQualityOk;
};

}  // namespace

std::vector<AnimalVisit> attribute_weights(std::span<const MeasurementPeriod> periods,
                                           std::span<const ShiftEvent> events,
                                           const AttributionParams& params) {
  if (periods.size() != events.size() + 1) {
    throw std::invalid_argument("attribute_weights: need one more period than events");
  }

  // Level of every period: stable weight, else median, else the previous
  // level. The trailing period falls back to the baseline, since the scale
  // returns to it once the last animal has left.
  std::vector<Level> levels(periods.size());
  for (std::size_t i = 0; i < periods.size(); ++i) {
    const auto& p = periods[i];
    if (p.stable_weight_grams) {
      levels[i] = {*p.stable_weight_grams, true};
    } else if (i + 1 == periods.size() && i > 0) {
      levels[i] = {levels[0].grams, true};
    } else if (auto m = p.median_grams()) {
      levels[i] = {*m, false};
    } else {
      levels[i] = {i > 0 ? levels[i - 1].grams : 0.0, false};
    }
  }

  std::vector<Animal> animals;
  for (std::size_t e = 0; e < events.size(); ++e) {
    const Level& before = levels[e];
    const Level& after = levels[e + 1];
    const double shift = after.grams - before.grams;

    if (events[e].kind == ShiftKind::kEntrance) {
      Animal a;
      a.entry_ts = events[e].ts;
      a.entry_event = e;
      a.entrance_shift = shift;
      a.entrance_stable = before.stable && after.stable;
      const auto& p = periods[e + 1];
      a.std_grams = p.quality_std_grams ? *p.quality_std_grams : sample_std(p);
      animals.push_back(a);
      continue;
    }

    // Closest entrance shift wins; equal agreement goes to the earliest
    // arrival.
    const double drop = -shift;
    Animal* chosen = nullptr;
    double best = std::numeric_limits<double>::infinity();
    for (auto& a : animals) {
      if (!a.present) continue;
      const double diff = std::abs(a.entrance_shift - drop);
      if (diff < best - 1e-9) {
        best = diff;
        chosen = &a;
      }
    }
    if (chosen == nullptr) throw std::invalid_argument("attribute_weights: exit with no animal present");
    if (best > params.pairing_tolerance_grams) chosen->quality |= kQualityUnresolved;
    chosen->present = false;
    chosen->exit_ts = events[e].ts;
    chosen->exit_shift = drop;
    chosen->exit_stable = before.stable && after.stable;
  }

  std::vector<AnimalVisit> visits;
  visits.reserve(animals.size());
  for (const auto& a : animals) {
    if (a.present) throw std::invalid_argument("attribute_weights: animal left on the scale");
    AnimalVisit v;
    v.entry_ts = a.entry_ts;
    v.exit_ts = a.exit_ts;
    v.quality = a.quality;
    v.quality_std_grams = a.std_grams;
    if (a.entrance_stable) {
      v.weight_grams = a.entrance_shift;
    } else if (a.exit_stable) {
      v.weight_grams = a.exit_shift;
    } else {
      v.weight_grams = a.entrance_shift;
    }
    if (!a.entrance_stable || !a.exit_stable) v.quality |= kQualityLowQuality;
    visits.push_back(v);
  }
  return visits;
}

}  // namespace feeder::weighing
