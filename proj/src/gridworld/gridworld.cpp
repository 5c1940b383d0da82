#include "apc/gridworld/gridworld.hpp"

#include <deque>
#include <fstream>
#include <sstream>

#include "apc/common/errors.hpp"

namespace apc::grid {

namespace {

int image_index(int r, int c) { return r * kImageSize + c; }

// Position of a door in 5x5 box coordinates: the wall cell next to the
// corner on the given side.
Pos door_box_cell(Corner corner, Action side) {
  const Pos cl = corner_local(corner) + Pos{1, 1};
  switch (side) {
    case Action::kN: return {0, cl.c};
    case Action::kS: return {kImageSize - 1, cl.c};
    case Action::kW: return {cl.r, 0};
    case Action::kE: return {cl.r, kImageSize - 1};
  }
  return cl;
}

RoomTemplate make_template(RoomType id, std::array<Action, 4> sides) {
  RoomTemplate t{id, {}, sides};
  for (int r = 1; r <= kRoomSize; ++r)
    for (int c = 1; c <= kRoomSize; ++c) t.image[image_index(r, c)] = 1;
  for (Corner k : kCorners) {
    const Pos d = door_box_cell(k, sides[static_cast<int>(k)]);
    t.image[image_index(d.r, d.c)] = 1;
  }
  return t;
}

// Indexed by Corner {NW, NE, SW, SE}. Each template turns the opposite way
// around its interior so that facing doors meet only between unlike rooms.
const RoomTemplate kR1 = make_template(RoomType::kR1, {Action::kW, Action::kN, Action::kS, Action::kE});
const RoomTemplate kR2 = make_template(RoomType::kR2, {Action::kN, Action::kE, Action::kW, Action::kS});

ConfigError parse_error(const std::string& name, int line, int col, const std::string& msg) {
  return ConfigError(name + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " + msg);
}

}  // namespace

const char* to_string(RoomType t) { return t == RoomType::kR1 ? "R1" : "R2"; }

const char* to_string(Corner c) {
  static const char* names[] = {"NW", "NE", "SW", "SE"};
  return names[static_cast<int>(c)];
}

const char* to_string(Action a) {
  static const char* names[] = {"N", "E", "S", "W"};
  return names[static_cast<int>(a)];
}

Pos delta(Action a) {
  switch (a) {
    case Action::kN: return {-1, 0};
    case Action::kE: return {0, 1};
    case Action::kS: return {1, 0};
    case Action::kW: return {0, -1};
  }
  return {0, 0};
}

Pos corner_local(Corner c) {
  const int i = static_cast<int>(c);
  return {(i / 2) * (kRoomSize - 1), (i % 2) * (kRoomSize - 1)};
}

const RoomTemplate& room_template(RoomType t) { return t == RoomType::kR1 ? kR1 : kR2; }

bool BuildingLayout::has_room(Pos room) const {
  return room.r >= 0 && room.c >= 0 && room.r < rooms_h() && room.c < rooms_w() && slot(room) != Slot::kSolid;
}

RoomType BuildingLayout::room_type(Pos room) const {
  if (!has_room(room)) throw ConfigError("room (" + std::to_string(room.r) + "," + std::to_string(room.c) + ") is solid or out of range");
  return static_cast<RoomType>(slot(room));
}

std::vector<Pos> BuildingLayout::rooms() const {
  std::vector<Pos> out;
  for (int r = 0; r < rooms_h(); ++r)
    for (int c = 0; c < rooms_w(); ++c)
      if (grid_[r][c] != Slot::kSolid) out.push_back({r, c});
  return out;
}

std::optional<Pos> BuildingLayout::interior_room(Pos p) const {
  if (!in_bounds(p) || p.r % kPitch == 0 || p.c % kPitch == 0) return std::nullopt;
  const Pos room{p.r / kPitch, p.c / kPitch};
  if (!has_room(room)) return std::nullopt;
  return room;
}

void BuildingLayout::check_interior(Pos p, const char* what) const {
  if (!interior_room(p))
    throw ConfigError(std::string(what) + " (" + std::to_string(p.r) + "," + std::to_string(p.c) +
                      ") is not an interior floor cell");
}

void BuildingLayout::set_start(Pos p) {
  check_interior(p, "start");
  start_ = p;
}

void BuildingLayout::set_goal(Pos p) {
  check_interior(p, "goal");
  goal_ = p;
}

bool BuildingLayout::rooms_connected(Pos a, Pos b) const {
  if (!has_room(a) || !has_room(b) || manhattan(a, b) != 1) return false;
  const Pos oa = room_origin(a);
  if (a.r == b.r) {
    const int wall_c = a.c < b.c ? oa.c + kRoomSize : oa.c - 1;
    for (int r = oa.r; r < oa.r + kRoomSize; ++r)
      if (cell({r, wall_c}) == Cell::kDoor) return true;
  } else {
    const int wall_r = a.r < b.r ? oa.r + kRoomSize : oa.r - 1;
    for (int c = oa.c; c < oa.c + kRoomSize; ++c)
      if (cell({wall_r, c}) == Cell::kDoor) return true;
  }
  return false;
}

BuildingLayout compose_building(const RoomGrid& grid) {
  if (grid.empty() || grid[0].empty()) throw ConfigError("room grid is empty");
  for (const auto& row : grid)
    if (row.size() != grid[0].size()) throw ConfigError("room grid rows have different lengths");

  BuildingLayout L;
  L.grid_ = grid;
  L.rows_ = kPitch * L.rooms_h() + 1;
  L.cols_ = kPitch * L.rooms_w() + 1;
  L.cells_.assign(static_cast<std::size_t>(L.rows_) * L.cols_, Cell::kWall);

  const auto rooms = L.rooms();
  if (rooms.empty()) throw ConfigError("room grid has no rooms");

  for (Pos room : rooms) {
    const Pos o = BuildingLayout::room_origin(room);
    for (int r = 0; r < kRoomSize; ++r)
      for (int c = 0; c < kRoomSize; ++c) L.cells_[L.index(o + Pos{r, c})] = Cell::kFloor;
  }

  // A door exists where both rooms sharing a wall open the same cell.
  for (Pos room : rooms) {
    const auto& t = room_template(L.room_type(room));
    for (Corner k : kCorners) {
      const Action side = t.door_side[static_cast<int>(k)];
      const Pos neighbour = room + delta(side);
      if (!L.has_room(neighbour)) continue;
      const Pos cell = BuildingLayout::room_origin(room) - Pos{1, 1} + door_box_cell(k, side);
      const auto& nt = room_template(L.room_type(neighbour));
      const Pos nbox = cell - (BuildingLayout::room_origin(neighbour) - Pos{1, 1});
      if (nt.image[image_index(nbox.r, nbox.c)]) L.cells_[L.index(cell)] = Cell::kDoor;
    }
  }

  const auto dist = bfs_distances(L, BuildingLayout::room_origin(rooms.front()));
  for (std::size_t i = 0; i < L.cells_.size(); ++i)
    if (L.cells_[i] != Cell::kWall && dist[i] < 0) throw ConfigError("layout floor graph is disconnected");

  L.start_ = BuildingLayout::room_origin(rooms.front());
  L.goal_ = BuildingLayout::room_origin(rooms.back()) + corner_local(Corner::kSE);
  return L;
}

StepResult step(const BuildingLayout& layout, Pos state, Action action) {
  Pos next = state + delta(action);
  if (!layout.traversable(next)) next = state;
  const bool done = next == layout.goal();
  return {next, done ? kGoalReward : kStepReward, done};
}

LocalFrame local_frame(const BuildingLayout& layout, Pos p, std::optional<Pos> last_room) {
  if (auto room = layout.interior_room(p)) return {layout.room_type(*room), *room, p - BuildingLayout::room_origin(*room)};
  if (!layout.in_bounds(p) || layout.cell(p) != Cell::kDoor)
    throw ConfigError("local_frame: (" + std::to_string(p.r) + "," + std::to_string(p.c) + ") is not a floor cell");
  std::optional<Pos> chosen;
  std::optional<Pos> chosen_cell;
  for (Pos d : {Pos{-1, 0}, Pos{0, -1}, Pos{0, 1}, Pos{1, 0}}) {  // row-major neighbour order
    const auto room = layout.interior_room(p + d);
    if (!room) continue;
    if (!chosen || (last_room && *room == *last_room)) {
      chosen = room;
      chosen_cell = p + d;
    }
  }
  return {layout.room_type(*chosen), *chosen, *chosen_cell - BuildingLayout::room_origin(*chosen)};
}

Pos global_of(const LocalFrame& frame) { return BuildingLayout::room_origin(frame.room) + frame.local; }

std::array<double, kImageCells> template_image(RoomType t) {
  std::array<double, kImageCells> out{};
  const auto& img = room_template(t).image;
  for (int i = 0; i < kImageCells; ++i) out[i] = img[i];
  return out;
}

std::array<double, kImageCells> render_room_image(const BuildingLayout& layout, Pos room) {
  return template_image(layout.room_type(room));
}

Pos subgoal_cell(const BuildingLayout& layout, Pos room, Corner corner) {
  if (!layout.has_room(room)) throw ConfigError("subgoal_cell: slot is solid or out of range");
  return BuildingLayout::room_origin(room) + corner_local(corner);
}

std::optional<Pos> landing_cell(const BuildingLayout& layout, Pos room, RoomType door_template, Corner corner) {
  const Pos c = subgoal_cell(layout, room, corner);
  const Pos d = delta(door_side(door_template, corner));
  const Pos door = c + d;
  if (!layout.in_bounds(door) || layout.cell(door) != Cell::kDoor) return std::nullopt;
  return door + d;
}

std::vector<int> bfs_distances(const BuildingLayout& layout, Pos from) {
  std::vector<int> dist(layout.num_cells(), -1);
  if (!layout.traversable(from)) return dist;
  std::deque<Pos> queue{from};
  dist[layout.index(from)] = 0;
  while (!queue.empty()) {
    const Pos p = queue.front();
    queue.pop_front();
    for (int a = 0; a < kNumActions; ++a) {
      const Pos q = p + delta(static_cast<Action>(a));
      if (!layout.traversable(q) || dist[layout.index(q)] >= 0) continue;
      dist[layout.index(q)] = dist[layout.index(p)] + 1;
      queue.push_back(q);
    }
  }
  return dist;
}

int shortest_path(const BuildingLayout& layout, Pos from, Pos to) {
  if (!layout.traversable(to)) return -1;
  return bfs_distances(layout, from)[layout.index(to)];
}

std::vector<int> room_distances(const BuildingLayout& layout, Pos from_room) {
  const int W = layout.rooms_w();
  std::vector<int> dist(static_cast<std::size_t>(layout.rooms_h()) * W, -1);
  if (!layout.has_room(from_room)) return dist;
  std::deque<Pos> queue{from_room};
  dist[from_room.r * W + from_room.c] = 0;
  while (!queue.empty()) {
    const Pos p = queue.front();
    queue.pop_front();
    for (int a = 0; a < kNumActions; ++a) {
      const Pos q = p + delta(static_cast<Action>(a));
      if (!layout.rooms_connected(p, q) || dist[q.r * W + q.c] >= 0) continue;
      dist[q.r * W + q.c] = dist[p.r * W + p.c] + 1;
      queue.push_back(q);
    }
  }
  return dist;
}

BuildingLayout parse_layout(std::istream& in, const std::string& name) {
  struct Token {
    std::string text;
    int col;
  };
  struct Line {
    int number;
    std::vector<Token> tokens;
  };
  std::vector<Line> lines;
  std::string raw;
  for (int number = 1; std::getline(in, raw); ++number) {
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    Line line{number, {}};
    for (std::size_t i = 0; i < raw.size();) {
      if (raw[i] == ' ' || raw[i] == '\t') {
        ++i;
        continue;
      }
      const std::size_t j = raw.find_first_of(" \t", i);
      const std::size_t end = j == std::string::npos ? raw.size() : j;
      line.tokens.push_back({raw.substr(i, end - i), static_cast<int>(i) + 1});
      i = end;
    }
    if (!line.tokens.empty()) lines.push_back(std::move(line));
  }

  std::size_t cursor = 0;
  const int eof_line = lines.empty() ? 1 : lines.back().number + 1;
  auto need = [&](const char* what) -> const Line& {
    if (cursor >= lines.size()) throw parse_error(name, eof_line, 1, std::string("unexpected end of file, expected ") + what);
    return lines[cursor++];
  };
  auto integer = [&](const Line& line, std::size_t k, int lo) {
    const Token& tok = line.tokens[k];
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(tok.text, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != tok.text.size()) throw parse_error(name, line.number, tok.col, "expected an integer, got '" + tok.text + "'");
    if (v < lo) throw parse_error(name, line.number, tok.col, "value " + tok.text + " must be >= " + std::to_string(lo));
    return v;
  };
  auto keyword_line = [&](const char* keyword) -> const Line& {
    const Line& line = need(keyword);
    if (line.tokens[0].text != keyword)
      throw parse_error(name, line.number, line.tokens[0].col,
                        std::string("expected '") + keyword + "', got '" + line.tokens[0].text + "'");
    if (line.tokens.size() != 3) {
      const int col = line.tokens.size() > 3 ? line.tokens[3].col : static_cast<int>(line.tokens.back().col + line.tokens.back().text.size());
      throw parse_error(name, line.number, col, std::string("'") + keyword + "' takes exactly two integers");
    }
    return line;
  };

  const Line& header = keyword_line("rooms");
  const int H = integer(header, 1, 1);
  const int W = integer(header, 2, 1);

  RoomGrid grid(H, std::vector<Slot>(W));
  for (int r = 0; r < H; ++r) {
    const Line& line = need("a room row");
    if (static_cast<int>(line.tokens.size()) != W) {
      const int col = static_cast<int>(line.tokens.size()) > W ? line.tokens[W].col : 1;
      throw parse_error(name, line.number, col,
                        "expected " + std::to_string(W) + " room tokens, got " + std::to_string(line.tokens.size()));
    }
    for (int c = 0; c < W; ++c) {
      const Token& tok = line.tokens[c];
      if (tok.text == "1") grid[r][c] = Slot::kR1;
      else if (tok.text == "2") grid[r][c] = Slot::kR2;
      else if (tok.text == "#") grid[r][c] = Slot::kSolid;
      else throw parse_error(name, line.number, tok.col, "unknown room token '" + tok.text + "' (use 1, 2 or #)");
    }
  }

  const Line& start = keyword_line("start");
  const Line& goal = keyword_line("goal");
  if (cursor < lines.size())
    throw parse_error(name, lines[cursor].number, lines[cursor].tokens[0].col, "unexpected trailing content");

  BuildingLayout layout;
  try {
    layout = compose_building(grid);
  } catch (const ConfigError& e) {
    throw parse_error(name, header.number, 1, e.what());
  }
  const Pos start_cell{integer(start, 1, 0), integer(start, 2, 0)};
  const Pos goal_cell{integer(goal, 1, 0), integer(goal, 2, 0)};
  try {
    layout.set_start(start_cell);
  } catch (const ConfigError& e) {
    throw parse_error(name, start.number, start.tokens[1].col, e.what());
  }
  try {
    layout.set_goal(goal_cell);
  } catch (const ConfigError& e) {
    throw parse_error(name, goal.number, goal.tokens[1].col, e.what());
  }
  return layout;
}

BuildingLayout load_layout(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open layout file '" + path + "'");
  return parse_layout(in, path);
}

std::string format_layout(const BuildingLayout& layout) {
  std::ostringstream out;
  out << "rooms " << layout.rooms_h() << ' ' << layout.rooms_w() << '\n';
  for (const auto& row : layout.room_grid()) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out << ' ';
      out << (row[c] == Slot::kR1 ? '1' : row[c] == Slot::kR2 ? '2' : '#');
    }
    out << '\n';
  }
  out << "start " << layout.start().r << ' ' << layout.start().c << '\n';
  out << "goal " << layout.goal().r << ' ' << layout.goal().c << '\n';
  return out.str();
}

std::string to_ascii(const BuildingLayout& layout) {
  std::string out;
  for (int r = 0; r < layout.rows(); ++r) {
    for (int c = 0; c < layout.cols(); ++c) {
      const Pos p{r, c};
      char ch = layout.cell(p) == Cell::kWall ? '#' : layout.cell(p) == Cell::kDoor ? '+' : '.';
      if (p == layout.start()) ch = 'S';
      if (p == layout.goal()) ch = 'G';
      out += ch;
    }
    out += '\n';
  }
  return out;
}

}  // namespace apc::grid
