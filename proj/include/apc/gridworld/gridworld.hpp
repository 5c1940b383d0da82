#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <cstdlib>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace apc::grid {

inline constexpr int kPitch = 4;       // interior width plus one shared wall
inline constexpr int kRoomSize = 3;    // interior is 3x3
inline constexpr int kImageSize = 5;   // interior plus bounding walls
inline constexpr int kImageCells = kImageSize * kImageSize;
inline constexpr double kStepReward = -0.1;
inline constexpr double kGoalReward = 10.0;

enum class RoomType : std::uint8_t { kR1 = 0, kR2 = 1 };
enum class Slot : std::uint8_t { kR1 = 0, kR2 = 1, kSolid = 2 };
enum class Cell : std::uint8_t { kWall = 0, kFloor = 1, kDoor = 2 };
enum class Action : std::uint8_t { kN = 0, kE = 1, kS = 2, kW = 3 };
enum class Corner : std::uint8_t { kNW = 0, kNE = 1, kSW = 2, kSE = 3 };

inline constexpr int kNumActions = 4;
inline constexpr std::array<Corner, 4> kCorners = {Corner::kNW, Corner::kNE, Corner::kSW, Corner::kSE};

const char* to_string(RoomType t);
const char* to_string(Corner c);
const char* to_string(Action a);
inline Slot slot_of(RoomType t) { return static_cast<Slot>(t); }

struct Pos {
  int r = 0;
  int c = 0;
  auto operator<=>(const Pos&) const = default;
};

inline Pos operator+(Pos a, Pos b) { return {a.r + b.r, a.c + b.c}; }
inline Pos operator-(Pos a, Pos b) { return {a.r - b.r, a.c - b.c}; }
Pos delta(Action a);
inline int manhattan(Pos a, Pos b) { return std::abs(a.r - b.r) + std::abs(a.c - b.c); }

// Interior-local coordinate (0..2, 0..2) of a corner.
Pos corner_local(Corner c);

/// A room template: its 5x5 traversability image and the four doors, each
/// sitting in the wall next to one interior corner.
struct RoomTemplate {
  RoomType id;
  std::array<std::uint8_t, kImageCells> image;  // 1 = traversable
  std::array<Action, 4> door_side;              // indexed by Corner
};

const RoomTemplate& room_template(RoomType t);

// Wall side through which the template's door next to `corner` opens.
inline Action door_side(RoomType t, Corner corner) { return room_template(t).door_side[static_cast<int>(corner)]; }

struct LocalFrame {
  RoomType room_type;
  Pos room;   // slot index in the room grid
  Pos local;  // 0..2 x 0..2 inside the interior
  bool operator==(const LocalFrame&) const = default;
};

struct StepResult {
  Pos next;
  double reward;
  bool done;
};

using RoomGrid = std::vector<std::vector<Slot>>;

/// Immutable cell-level building composed from a grid of room slots.
class BuildingLayout {
 public:
  BuildingLayout() = default;

  int rooms_h() const { return static_cast<int>(grid_.size()); }
  int rooms_w() const { return grid_.empty() ? 0 : static_cast<int>(grid_[0].size()); }
  const RoomGrid& room_grid() const { return grid_; }
  Slot slot(Pos room) const { return grid_[room.r][room.c]; }
  bool has_room(Pos room) const;  // in range and not solid
  RoomType room_type(Pos room) const;
  std::vector<Pos> rooms() const;  // non-solid slots, row-major

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  bool in_bounds(Pos p) const { return p.r >= 0 && p.c >= 0 && p.r < rows_ && p.c < cols_; }
  Cell cell(Pos p) const { return cells_[index(p)]; }
  bool traversable(Pos p) const { return in_bounds(p) && cell(p) != Cell::kWall; }
  std::size_t index(Pos p) const { return static_cast<std::size_t>(p.r) * cols_ + p.c; }
  std::size_t num_cells() const { return cells_.size(); }

  // Room whose 3x3 interior contains p, if any.
  std::optional<Pos> interior_room(Pos p) const;
  static Pos room_origin(Pos room) { return {kPitch * room.r + 1, kPitch * room.c + 1}; }

  Pos start() const { return start_; }
  Pos goal() const { return goal_; }
  // Throws ConfigError unless p is an interior floor cell.
  void set_start(Pos p);
  void set_goal(Pos p);

  // Two rooms are adjacent when a door joins them.
  bool rooms_connected(Pos a, Pos b) const;

  bool operator==(const BuildingLayout&) const = default;

 private:
  friend BuildingLayout compose_building(const RoomGrid& grid);
  void check_interior(Pos p, const char* what) const;

  RoomGrid grid_;
  int rows_ = 0;
  int cols_ = 0;
  std::vector<Cell> cells_;
  Pos start_;
  Pos goal_;
};

// Tiles the room interiors with shared single-cell walls and carves a door
// wherever both facing templates open the shared cell. The outer boundary is
// solid. Start defaults to the NW corner of the first room, goal to the SE
// corner of the last. Throws ConfigError on an empty/ragged grid, a grid with
// no rooms, or a disconnected floor graph.
BuildingLayout compose_building(const RoomGrid& grid);

// Ground-truth primitive dynamics. Bumping a wall leaves the agent in place.
StepResult step(const BuildingLayout& layout, Pos state, Action action);

// Frame of a floor cell. A door cell belongs to `last_room` when that room is
// one of the two rooms it joins, otherwise to the first adjacent room in
// row-major order; its local cell is the interior cell next to the door.
LocalFrame local_frame(const BuildingLayout& layout, Pos p, std::optional<Pos> last_room = std::nullopt);
Pos global_of(const LocalFrame& frame);

// 25 values in {0,1}, row-major; depends only on the slot's template.
std::array<double, kImageCells> render_room_image(const BuildingLayout& layout, Pos room);
std::array<double, kImageCells> template_image(RoomType t);

Pos subgoal_cell(const BuildingLayout& layout, Pos room, Corner corner);

// Cell across the template door next to `corner`, two steps past the corner,
// when that door is open in this layout.
std::optional<Pos> landing_cell(const BuildingLayout& layout, Pos room, RoomType door_template, Corner corner);

// Breadth-first distances from `from` over traversable cells; -1 = unreachable.
std::vector<int> bfs_distances(const BuildingLayout& layout, Pos from);
int shortest_path(const BuildingLayout& layout, Pos from, Pos to);

// Room-level breadth-first distances over door adjacency, indexed r * W + c.
std::vector<int> room_distances(const BuildingLayout& layout, Pos from_room);

// Layout file: "rooms H W", H rows of W tokens from {1, 2, #}, "start r c",
// "goal r c". Blank lines are skipped. Errors are reported as
// "name:line:col: message".
BuildingLayout parse_layout(std::istream& in, const std::string& name = "<layout>");
BuildingLayout load_layout(const std::string& path);
std::string format_layout(const BuildingLayout& layout);

// Character map: '#' wall, '.' floor, '+' door, 'S' start, 'G' goal.
std::string to_ascii(const BuildingLayout& layout);

}  // namespace apc::grid
