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

#include "feeder/trapctl.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <fmt/format.h>

namespace feeder::trapctl {

bool should_trap(const TrapDatabase& db, const std::optional<RfidDetection>& detection,
                 bool untagged_entrance) {
  if (detection && db.entries.contains(detection->tag)) return true;
  return untagged_entrance && db.master;
}

bool is_stale(const TrapDatabase& db, const codec::TrapUpdate& update) {
  return update.server_time < db.last_updated;
}

TrapDatabase apply_trap_update(const TrapDatabase& db, const codec::TrapUpdate& update) {
  if (is_stale(db, update)) return db;
  TrapDatabase next = db;
  for (const auto& op : update.ops) {
    if (op.kind == codec::TagOpKind::kAdd) {
      next.entries.insert(op.tag);
    } else {
      next.entries.erase(op.tag);
    }
  }
  if (update.master) next.master = *update.master;
  next.last_updated = update.server_time;
  return next;
}

namespace {
constexpr std::string_view kMagic = "# feeder trap database";
}

void save_database(const TrapDatabase& db, const std::filesystem::path& path) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw std::runtime_error(fmt::format("cannot write trap database {}", tmp.string()));
    out << kMagic << "\n";
    out << "version=1\n";
    out << "master=" << (db.master ? 1 : 0) << "\n";
    out << "last_updated=" << db.last_updated << "\n";
    for (const auto& tag : db.entries) out << tag.str() << "\n";
    out.flush();
    if (!out) throw std::runtime_error(fmt::format("cannot write trap database {}", tmp.string()));
  }
  std::filesystem::rename(tmp, path);
}

TrapDatabase load_database(const std::filesystem::path& path) {
  TrapDatabase db;
  std::ifstream in(path);
  if (!in) return db;
  std::string line;
  std::size_t lineno = 0;
  bool have_version = false;
  auto fail = [&](std::string_view why) {
    throw std::runtime_error(fmt::format("{}:{}: {}", path.string(), lineno, why));
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq != std::string::npos) {
      const auto key = line.substr(0, eq);
      const auto value = line.substr(eq + 1);
      try {
        if (key == "version") {
          if (value != "1") fail("unsupported version");
          have_version = true;
        } else if (key == "master") {
          if (value != "0" && value != "1") fail("master must be 0 or 1");
          db.master = value == "1";
        } else if (key == "last_updated") {
          db.last_updated = static_cast<Seconds>(std::stoul(value));
        } else {
          fail("unknown key");
        }
      } catch (const std::logic_error&) {
        fail("bad value");
      }
      continue;
    }
    try {
      db.entries.insert(TagId::parse(line));
    } catch (const std::exception& e) {
      fail(e.what());
    }
  }
  if (!have_version) fail("missing version header");
  return db;
}

// ---------------------------------------------------------------------------

std::string_view to_string(DoorPosition position) {
  switch (position) {
    case DoorPosition::kEntryOpenTrapClosed: return "EntryOpenTrapClosed";
    case DoorPosition::kEntryClosedTrapOpen: return "EntryClosedTrapOpen";
    case DoorPosition::kMoving: return "Moving";
    case DoorPosition::kFault: return "Fault";
  }
  return "?";
}

DoorMechanism::DoorMechanism(int steps_per_rev, int start_step)
    : steps_per_rev_(steps_per_rev), shaft_(((start_step % steps_per_rev) + steps_per_rev) % steps_per_rev) {
  if (steps_per_rev < 2 || steps_per_rev % 2 != 0) {
    throw std::invalid_argument("steps per revolution must be even and positive");
  }
}

bool DoorMechanism::step() {
  if (obstruction_at_ && shaft_ == *obstruction_at_ && obstruction_left_ > 0) {
    --obstruction_left_;
    spring_yielded_ = true;
    if (obstruction_left_ == 0) obstruction_at_.reset();
    return false;
  }
  shaft_ = (shaft_ + 1) % steps_per_rev_;
  return true;
}

bool DoorMechanism::proximity() const {
  if (stuck_off_) return false;
  if (stuck_on_) return true;
  return shaft_ == 0;
}

void DoorMechanism::obstruct(int at_step, int held_steps) {
  obstruction_at_ = ((at_step % steps_per_rev_) + steps_per_rev_) % steps_per_rev_;
  obstruction_left_ = held_steps;
}

DoorController::DoorController(DoorMechanism mechanism) : mech_(std::move(mechanism)) {}

Motion DoorController::actuate(DoorCommand command) {
  Motion motion;
  if (state_.position == DoorPosition::kFault) {
    motion.states.push_back(state_);
    return motion;
  }
  const auto target = command == DoorCommand::kOpenTrap ? DoorPosition::kEntryClosedTrapOpen
                                                        : DoorPosition::kEntryOpenTrapClosed;
  if (state_.position == target) {
    motion.states.push_back(state_);
    return motion;
  }

  const int travel = mech_.steps_per_rev() / 2;
  // Bounded wait for an obstruction to clear before giving up.
  const int max_ticks = travel * 50;
  int moved = 0;
  bool was_on = mech_.proximity();
  while (moved < travel) {
    if (motion.ticks >= max_ticks) {
      state_ = {DoorPosition::kFault, 0.0};
      motion.states.push_back(state_);
      return motion;
    }
    ++motion.ticks;
    if (mech_.step()) {
      ++moved;
      position_ = (position_ + 1) % mech_.steps_per_rev();
    }
    const bool on = mech_.proximity();
    if (on && !was_on) motion.proximity_events.push_back(motion.ticks);
    was_on = on;
    state_ = {DoorPosition::kMoving, static_cast<double>(moved) / travel};
    motion.states.push_back(state_);
  }
  motion.spring_yielded = mech_.spring_yielded();

  // Leaving home the switch must open; arriving home it must close.
  const bool confirmed = target == DoorPosition::kEntryOpenTrapClosed ? mech_.proximity() : !mech_.proximity();
  state_ = {confirmed ? target : DoorPosition::kFault, 0.0};
  motion.states.push_back(state_);
  return motion;
}

Motion DoorController::calibrate() {
  Motion motion;
  if (state_.position == DoorPosition::kFault) {
    motion.states.push_back(state_);
    return motion;
  }
  const int rev = mech_.steps_per_rev();
  int moved = 0;
  while (!mech_.proximity()) {
    if (moved >= rev || motion.ticks >= rev * 50) {
      state_ = {DoorPosition::kFault, 0.0};
      motion.states.push_back(state_);
      return motion;
    }
    ++motion.ticks;
    if (mech_.step()) ++moved;
    state_ = {DoorPosition::kMoving, static_cast<double>(moved) / rev};
    motion.states.push_back(state_);
    if (mech_.proximity()) motion.proximity_events.push_back(motion.ticks);
  }
  position_ = 0;
  state_ = {DoorPosition::kEntryOpenTrapClosed, 0.0};
  motion.states.push_back(state_);
  return motion;
}

// ---------------------------------------------------------------------------

TrapController::TrapController(DoorController door, StationId station_id)
    : door_(std::move(door)), station_id_(station_id) {}

std::optional<CaptureEvent> TrapController::activate(std::optional<TagId> tag, Millis ts) {
  if (!armed()) return std::nullopt;
  activated_ = true;
  const auto motion = door_.actuate(DoorCommand::kOpenTrap);
  if (motion.final_state().position != DoorPosition::kEntryClosedTrapOpen) return std::nullopt;
  ++captures_;
  return CaptureEvent{tag, ts, station_id_};
}

std::optional<CaptureEvent> TrapController::on_detection(const TrapDatabase& db, const RfidDetection& detection) {
  if (!should_trap(db, detection, false)) return std::nullopt;
  return activate(detection.tag, detection.ts);
}

std::optional<CaptureEvent> TrapController::on_untagged_entrance(const TrapDatabase& db, Millis ts) {
  if (!should_trap(db, std::nullopt, true)) return std::nullopt;
  return activate(std::nullopt, ts);
}

Motion TrapController::reset() {
  auto motion = door_.actuate(DoorCommand::kReset);
  if (door_.state().entry_open()) activated_ = false;
  return motion;
}

}  // namespace feeder::trapctl
