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

// Selective trapping: the station-local trap database, the coupled door
// mechanism and the capture decision.

#ifndef FEEDER_TRAPCTL_HPP
#define FEEDER_TRAPCTL_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <vector>

#include "feeder/codec.hpp"
#include "feeder/types.hpp"

namespace feeder::trapctl {

struct TrapDatabase {
  std::set<TagId> entries;
  bool master = false;  // trap animals without a readable chip
  Seconds last_updated = 0;

  friend bool operator==(const TrapDatabase&, const TrapDatabase&) = default;
};

/// True iff the detected tag is listed, or the entrance was untagged and the
/// master entry is set.
bool should_trap(const TrapDatabase& db, const std::optional<RfidDetection>& detection,
                 bool untagged_entrance);

bool is_stale(const TrapDatabase& db, const codec::TrapUpdate& update);

/// Applies adds/removes and the master flag, then stamps last_updated.
/// Idempotent. A stale update returns `db` unchanged.
TrapDatabase apply_trap_update(const TrapDatabase& db, const codec::TrapUpdate& update);

/// Text persistence so the database survives a station restart. The write
/// goes through a temporary file and a rename.
void save_database(const TrapDatabase& db, const std::filesystem::path& path);
/// Missing file yields an empty database; a malformed one throws
/// std::runtime_error.
TrapDatabase load_database(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Doors

enum class DoorPosition { kEntryOpenTrapClosed, kEntryClosedTrapOpen, kMoving, kFault };

std::string_view to_string(DoorPosition position);

struct DoorState {
  DoorPosition position = DoorPosition::kEntryOpenTrapClosed;
  double progress = 0.0;  // 0..1 while moving

  bool entry_open() const { return position == DoorPosition::kEntryOpenTrapClosed; }
  bool trap_open() const { return position == DoorPosition::kEntryClosedTrapOpen; }
  friend bool operator==(const DoorState&, const DoorState&) = default;
};

enum class DoorCommand { kOpenTrap, kReset };

/// Simulated stepper, shaft and inductive proximity switch. The switch sees
/// the cam only at the home step. Both doors hang off the same shaft, so half
/// a revolution swaps which tube is open.
class DoorMechanism {
 public:
  explicit DoorMechanism(int steps_per_rev = 200, int start_step = 0);

  /// One motor step forward. Returns false while an obstruction holds the
  /// door; the spring absorbs the motor instead of the animal.
  bool step();
  bool proximity() const;

  int shaft_step() const { return shaft_; }
  int steps_per_rev() const { return steps_per_rev_; }

  // Fault injection.
  void set_switch_stuck_off(bool v) { stuck_off_ = v; }
  void set_switch_stuck_on(bool v) { stuck_on_ = v; }
  /// Blocks the next `held_steps` step() calls once the shaft reaches `at_step`.
  void obstruct(int at_step, int held_steps);
  bool spring_yielded() const { return spring_yielded_; }
  /// The motor never pushes past the spring.
  bool force_exceeded() const { return false; }

 private:
  int steps_per_rev_;
  int shaft_;
  bool stuck_off_ = false;
  bool stuck_on_ = false;
  std::optional<int> obstruction_at_;
  int obstruction_left_ = 0;
  bool spring_yielded_ = false;
};

struct Motion {
  std::vector<DoorState> states;  // every intermediate state, last is terminal
  std::vector<int> proximity_events;  // tick indices where the switch closed
  int ticks = 0;
  bool spring_yielded = false;

  const DoorState& final_state() const { return states.back(); }
};

class DoorController {
 public:
  explicit DoorController(DoorMechanism mechanism = DoorMechanism{});

  /// Drives the doors to the commanded terminal state. A Fault state stays
  /// Fault; a missing switch confirmation after full travel becomes Fault.
  Motion actuate(DoorCommand command);

  /// Rotates until the proximity switch closes and zeroes the step counter.
  /// Fault when the switch does not close within one revolution.
  Motion calibrate();

  const DoorState& state() const { return state_; }
  int position() const { return position_; }
  DoorMechanism& mechanism() { return mech_; }
  const DoorMechanism& mechanism() const { return mech_; }

 private:
  DoorMechanism mech_;
  DoorState state_{DoorPosition::kEntryOpenTrapClosed, 0.0};
  int position_ = 0;  // steps from home since the last calibration
};

// ---------------------------------------------------------------------------
// Capture logic

struct CaptureEvent {
  std::optional<TagId> tag;
  Millis ts = 0;
  StationId station_id = 0;
};

/// Arms on a listed tag read (or an untagged entrance with the master entry)
/// and closes the entry tube. The trap stays closed until reset(), so one
/// activation yields at most one capture.
class TrapController {
 public:
  explicit TrapController(DoorController door = DoorController{}, StationId station_id = 0);

  std::optional<CaptureEvent> on_detection(const TrapDatabase& db, const RfidDetection& detection);
  std::optional<CaptureEvent> on_untagged_entrance(const TrapDatabase& db, Millis ts);
  /// Operator reset: reopens the entry tube.
  Motion reset();

  bool armed() const { return door_.state().entry_open() && !activated_; }
  bool fault() const { return door_.state().position == DoorPosition::kFault; }
  std::size_t captures() const { return captures_; }
  DoorController& door() { return door_; }

 private:
  std::optional<CaptureEvent> activate(std::optional<TagId> tag, Millis ts);

  DoorController door_;
  StationId station_id_;
  bool activated_ = false;
  std::size_t captures_ = 0;
};

}  // namespace feeder::trapctl

#endif  // FEEDER_TRAPCTL_HPP
