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

#include "feeder/weighing.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace feeder::weighing {

std::vector<StabilityWindow> find_stability_windows(std::span<const WeightSample> samples,
                                                    const StabilityParams& params) {
  std::vector<StabilityWindow> windows;
  const std::size_t min_len = std::max<std::size_t>(params.min_samples, 1);
  auto emit = [&](std::size_t start, std::size_t end) {
    if (end - start + 1 < min_len) return;
    StabilityWindow w{start, end, 0.0, 0.0};
    for (std::size_t i = start; i <= end; ++i) w.mean_grams += samples[i].grams;
    w.mean_grams /= static_cast<double>(w.size());
    for (std::size_t i = start; i <= end; ++i) {
      const double d = samples[i].grams - w.mean_grams;
      w.std_grams += d * d;
    }
    w.std_grams = std::sqrt(w.std_grams / static_cast<double>(w.size()));
    windows.push_back(w);
  };

  if (samples.empty()) return windows;
  std::size_t start = 0;
  for (std::size_t i = 1; i < samples.size(); ++i) {
    if (std::abs(samples[i].grams - samples[i - 1].grams) > params.max_step_grams) {
      emit(start, i - 1);
      start = i;
    }
  }
  emit(start, samples.size() - 1);
  return windows;
}

std::optional<StableWeight> stable_weight(std::span<const WeightSample> samples,
                                          std::span<const StabilityWindow> windows) {
  if (windows.empty()) return std::nullopt;
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& w : windows) {
    for (std::size_t i = w.start_index; i <= w.end_index; ++i) sum += samples[i].grams;
    n += w.size();
  }
  const double mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (const auto& w : windows) {
    for (std::size_t i = w.start_index; i <= w.end_index; ++i) {
      const double d = samples[i].grams - mean;
      ss += d * d;
    }
  }
  return StableWeight{mean, std::sqrt(ss / static_cast<double>(n))};
}

MeasurementPeriod MeasurementPeriod::from_samples(std::vector<WeightSample> samples,
                                                  const StabilityParams& params) {
  MeasurementPeriod period;
  period.samples = std::move(samples);
  const auto windows = find_stability_windows(period.samples, params);
  if (auto sw = stable_weight(period.samples, windows)) {
    period.stable_weight_grams = sw->grams;
    period.quality_std_grams = sw->std_grams;
  }
  return period;
}

std::optional<double> MeasurementPeriod::median_grams() const {
  if (samples.empty()) return std::nullopt;
  std::vector<double> values;
  values.reserve(samples.size());
  for (const auto& s : samples) values.push_back(s.grams);
  const auto mid = values.begin() + static_cast<std::ptrdiff_t>(values.size() / 2);
  std::nth_element(values.begin(), mid, values.end());
  return *mid;
}

std::string_view to_string(ScaleMode mode) {
  switch (mode) {
    case ScaleMode::kIdle: return "Idle";
    case ScaleMode::kEntrance: return "Entrance";
    case ScaleMode::kWeighing: return "Weighing";
    case ScaleMode::kExit: return "Exit";
  }
  return "?";
}

namespace {

double median_of(std::span<const WeightSample> samples) {
  std::vector<double> values;
  values.reserve(samples.size());
  for (const auto& s : samples) values.push_back(s.grams);
  const auto mid = values.begin() + static_cast<std::ptrdiff_t>(values.size() / 2);
  std::nth_element(values.begin(), mid, values.end());
  return *mid;
}

}  // namespace

WeighingEngine::WeighingEngine(EngineConfig config) : config_(std::move(config)) {}

std::vector<EngineEvent> WeighingEngine::ingest(const WeightSample& raw) {
  std::vector<EngineEvent> out;
  if (last_t_ && raw.t <= *last_t_) {
    out.push_back(SampleRejected{raw.t, "non-monotonic timestamp"});
    return out;
  }
  last_t_ = raw.t;
  if (!std::isfinite(raw.grams) || raw.grams < config_.min_grams || raw.grams > config_.max_grams) {
    fault_latched_ = true;
    out.push_back(SensorFault{raw.t, raw.grams});
    return out;
  }

  const WeightSample net{raw.t, raw.grams - tare_};
  last_net_ = net.grams;
  if (mode_ == ScaleMode::kIdle) {
    ingest_idle(net, raw, out);
  } else {
    ingest_weighing(net, out);
  }
  return out;
}

void WeighingEngine::track_runs(const WeightSample& net, std::span<const WeightSample> buffer) {
  const double th = config_.entrance_grams;
  up_run_ = net.grams > ref_ + th ? up_run_ + 1 : 0;
  down_run_ = net.grams < ref_ - th ? down_run_ + 1 : 0;
  const std::size_t n = buffer.size();
  if (n >= 2 && std::abs(buffer[n - 1].grams - buffer[n - 2].grams) <= config_.stability.max_step_grams) {
    ++stable_run_;
  } else {
    stable_run_ = 1;
  }
}

void WeighingEngine::reset_runs() {
  up_run_ = down_run_ = 0;
  stable_run_ = 0;
  std::vector<WeightSample> replay;
  std::span<const WeightSample> buffer;
  if (mode_ == ScaleMode::kIdle) {
    replay.assign(idle_.begin(), idle_.end());
    buffer = replay;
  } else {
    buffer = current_;
  }
  for (std::size_t i = 0; i < buffer.size(); ++i) track_runs(buffer[i], buffer.subspan(0, i + 1));
}

double WeighingEngine::window_mean() const {
  const std::size_t n = std::min(config_.window_samples, current_.size());
  if (n == 0) return ref_;
  double sum = 0.0;
  for (std::size_t i = current_.size() - n; i < current_.size(); ++i) sum += current_[i].grams;
  return sum / static_cast<double>(n);
}

void WeighingEngine::ingest_idle(const WeightSample& net, const WeightSample& raw,
                                 std::vector<EngineEvent>& out) {
  idle_.push_back(net);
  idle_raw_.push_back(raw);
  while (idle_raw_.size() > config_.stability.min_samples) idle_raw_.pop_front();

  const double th = config_.entrance_grams;
  up_run_ = net.grams > ref_ + th ? up_run_ + 1 : 0;
  if (idle_.size() >= 2 &&
      std::abs(idle_[idle_.size() - 1].grams - idle_[idle_.size() - 2].grams) <=
          config_.stability.max_step_grams) {
    ++stable_run_;
  } else {
    stable_run_ = 1;
  }

  while (idle_.size() > up_run_ + 1 && idle_.front().t < net.t - config_.baseline_history_ms) {
    idle_.pop_front();
  }

  if (up_run_ >= config_.window_samples) {
    begin_entrance(idle_.size() - up_run_, net.t, out);
    return;
  }
  if (up_run_ == 0 && stable_run_ >= config_.stability.min_samples &&
      idle_raw_.size() >= config_.stability.min_samples) {
    const double before = tare_;
    std::vector<WeightSample> window(idle_raw_.begin(), idle_raw_.end());
    zero_scale(window);
    const double delta = tare_ - before;
    if (delta != 0.0) {
      for (auto& s : idle_) s.grams -= delta;
    }
  }
}

void WeighingEngine::ingest_weighing(const WeightSample& net, std::vector<EngineEvent>& out) {
  current_.push_back(net);
  if (settle_left_ > 0) {
    // Just after an exit the signal can still be falling. Follow it for one
    // window instead of measuring shifts against a level not yet reached.
    --settle_left_;
    const std::size_t tail = std::min(current_.size(), settle_left_ > 0 ? std::size_t{5} : config_.window_samples);
    ref_ = median_of(std::span<const WeightSample>(current_).last(tail));
    if (settle_left_ == 0) reset_runs();
    return;
  }
  track_runs(net, current_);

  if (up_run_ >= config_.window_samples) {
    begin_entrance(current_.size() - up_run_, net.t, out);
    return;
  }
  if (down_run_ >= 1 && window_mean() < ref_ - config_.entrance_grams) {
    begin_exit(current_.size() - down_run_, net.t, out);
    return;
  }
  const std::size_t k = config_.stability.min_samples;
  if (stable_run_ >= k && current_.size() >= k) {
    double sum = 0.0;
    for (std::size_t i = current_.size() - k; i < current_.size(); ++i) sum += current_[i].grams;
    ref_ = sum / static_cast<double>(k);
  }
}

void WeighingEngine::close_period(std::size_t change_index) {
  std::vector<WeightSample> closed(current_.begin(),
                                   current_.begin() + static_cast<std::ptrdiff_t>(change_index));
  current_.erase(current_.begin(), current_.begin() + static_cast<std::ptrdiff_t>(change_index));
  periods_.push_back(MeasurementPeriod::from_samples(std::move(closed), config_.stability));
}

void WeighingEngine::begin_entrance(std::size_t change_index, Millis confirmed_ts,
                                    std::vector<EngineEvent>& out) {
  if (mode_ == ScaleMode::kIdle) {
    std::vector<WeightSample> baseline(idle_.begin(),
                                       idle_.begin() + static_cast<std::ptrdiff_t>(change_index));
    current_.assign(idle_.begin() + static_cast<std::ptrdiff_t>(change_index), idle_.end());
    idle_.clear();
    idle_raw_.clear();
    periods_.clear();
    events_.clear();
    periods_.push_back(MeasurementPeriod::from_samples(std::move(baseline), config_.stability));
  } else {
    close_period(change_index);
  }
  const Millis ts = current_.front().t;
  events_.push_back({ShiftKind::kEntrance, ts});
  ++count_;
  ++entrances_;
  mode_ = ScaleMode::kWeighing;
  settle_left_ = 0;
  ref_ = median_of(current_);
  reset_runs();
  out.push_back(EntranceEvent{ts, confirmed_ts, count_});
}

void WeighingEngine::begin_exit(std::size_t change_index, Millis confirmed_ts,
                                std::vector<EngineEvent>& out) {
  close_period(change_index);
  const Millis ts = current_.front().t;
  events_.push_back({ShiftKind::kExit, ts});
  --count_;
  ++exits_;
  out.push_back(ExitEvent{ts, confirmed_ts, count_});
  if (count_ == 0) {
    finish_group(out);
    return;
  }
  ref_ = median_of(current_);
  settle_left_ = config_.window_samples;
}

void WeighingEngine::finish_group(std::vector<EngineEvent>& out) {
  periods_.push_back(MeasurementPeriod::from_samples(current_, config_.stability));
  auto visits = attribute_weights(periods_, events_, config_.attribution);
  for (auto& v : visits) {
    v.station_id = config_.station_id;
    out.push_back(VisitCompleted{std::move(v)});
  }

  mode_ = ScaleMode::kIdle;
  ref_ = 0.0;
  rezero_pending_ = true;
  idle_.assign(current_.begin(), current_.end());
  idle_raw_.clear();
  const std::size_t k = config_.stability.min_samples;
  for (std::size_t i = current_.size() > k ? current_.size() - k : 0; i < current_.size(); ++i) {
    idle_raw_.push_back({current_[i].t, current_[i].grams + tare_});
  }
  current_.clear();
  periods_.clear();
  events_.clear();
  reset_runs();
}

double WeighingEngine::zero_scale(std::span<const WeightSample> raw_idle_window) {
  if (mode_ != ScaleMode::kIdle) {
    ++warnings_;
    return tare_;
  }
  if (raw_idle_window.empty()) return tare_;
  double sum = 0.0;
  for (const auto& s : raw_idle_window) sum += s.grams;
  const double mean = sum / static_cast<double>(raw_idle_window.size());
  const double delta = mean - tare_;
  const Millis end_t = raw_idle_window.back().t;

  if (rezero_pending_ && std::abs(delta) < config_.entrance_grams) {
    tare_ = mean;
    rezero_pending_ = false;
    last_zero_t_ = end_t;
    return tare_;
  }
  const Millis dt = last_zero_t_ ? std::max<Millis>(end_t - *last_zero_t_, 0)
                                 : end_t - raw_idle_window.front().t;
  const double limit = config_.tare_rate_grams_per_second * static_cast<double>(dt) / 1000.0;
  tare_ += std::clamp(delta, -limit, limit);
  last_zero_t_ = end_t;
  return tare_;
}

}  // namespace feeder::weighing
