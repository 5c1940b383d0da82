#include <set>
#include <sstream>

#include "doctest.h"

#include "apc/common/errors.hpp"
#include "apc/gridworld/gridworld.hpp"

using namespace apc;
using namespace apc::grid;

namespace {

constexpr Slot R1 = Slot::kR1;
constexpr Slot R2 = Slot::kR2;
constexpr Slot XX = Slot::kSolid;

std::string cell_map(const BuildingLayout& L) {
  std::string out;
  for (int r = 0; r < L.rows(); ++r) {
    for (int c = 0; c < L.cols(); ++c) {
      const Cell k = L.cell({r, c});
      out += k == Cell::kWall ? '#' : k == Cell::kDoor ? '+' : '.';
    }
    out += '\n';
  }
  return out;
}

RoomGrid checkerboard(int h, int w) {
  RoomGrid g(h, std::vector<Slot>(w));
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) g[r][c] = (r + c) % 2 ? R2 : R1;
  return g;
}

}  // namespace

TEST_CASE("template images") {
  // R1 doors: W of NW, N of NE, S of SW, E of SE. R2 turns the other way.
  auto to_str = [](RoomType t) {
    std::string s;
    for (double v : template_image(t)) s += v == 1.0 ? '.' : '#';
    return s;
  };
  CHECK(to_str(RoomType::kR1) ==
        "###.#"
        "....#"
        "#...#"
        "#...."
        "#.###");
  CHECK(to_str(RoomType::kR2) ==
        "#.###"
        "#...."
        "#...#"
        "....#"
        "###.#");
  CHECK(to_str(RoomType::kR1) != to_str(RoomType::kR2));
}

TEST_CASE("compose_building: single room") {
  auto L = compose_building({{R1}});
  CHECK(L.rows() == 5);
  CHECK(L.cols() == 5);
  CHECK(cell_map(L) ==
        "#####\n"
        "#...#\n"
        "#...#\n"
        "#...#\n"
        "#####\n");
}

TEST_CASE("compose_building: 1x2 [R1 R2] shares one door in the common wall") {
  auto L = compose_building({{R1, R2}});
  CHECK(L.rows() == 5);
  CHECK(L.cols() == 9);
  // R1's east door sits next to its SE corner (row 3); R2's west door sits
  // next to its SW corner (row 3); both open the same cell.
  CHECK(cell_map(L) ==
        "#########\n"
        "#...#...#\n"
        "#...#...#\n"
        "#...+...#\n"
        "#########\n");
  CHECK(L.rooms_connected({0, 0}, {0, 1}));

  auto M = compose_building({{R2, R1}});
  CHECK(cell_map(M) ==
        "#########\n"
        "#...+...#\n"
        "#...#...#\n"
        "#...#...#\n"
        "#########\n");
}

TEST_CASE("compose_building: vertical pairs") {
  auto L = compose_building({{R1}, {R2}});
  CHECK(cell_map(L) ==
        "#####\n"
        "#...#\n"
        "#...#\n"
        "#...#\n"
        "#+###\n"
        "#...#\n"
        "#...#\n"
        "#...#\n"
        "#####\n");
  auto M = compose_building({{R2}, {R1}});
  CHECK(M.cell({4, 3}) == Cell::kDoor);
  CHECK(M.cell({4, 1}) == Cell::kWall);
}

TEST_CASE("compose_building rejects disconnected and malformed grids") {
  CHECK_THROWS_AS(compose_building({{R1, R1}}), ConfigError);  // like rooms never face each other
  CHECK_THROWS_AS(compose_building({{R1, XX, R2}}), ConfigError);
  CHECK_THROWS_AS(compose_building({{R1, R2}, {XX, XX}, {R1, R2}}), ConfigError);
  CHECK_THROWS_AS(compose_building({}), ConfigError);
  CHECK_THROWS_AS(compose_building({{XX}}), ConfigError);
  CHECK_THROWS_AS(compose_building({{R1, R2}, {R2}}), ConfigError);
}

TEST_CASE("checkerboards are fully connected with every inter-room edge open") {
  for (int h = 1; h <= 4; ++h) {
    for (int w = 1; w <= 4; ++w) {
      auto L = compose_building(checkerboard(h, w));
      for (Pos a : L.rooms()) {
        for (Pos b : L.rooms()) {
          if (manhattan(a, b) == 1) CHECK(L.rooms_connected(a, b));
        }
      }
      const auto rd = room_distances(L, {0, 0});
      for (Pos a : L.rooms()) CHECK(rd[a.r * w + a.c] == a.r + a.c);
    }
  }
}

TEST_CASE("layout determinism and door invariant") {
  const RoomGrid g = {{R1, R2, XX}, {XX, R1, R2}};
  auto a = compose_building(g);
  auto b = compose_building(g);
  CHECK(a == b);
  // every door joins exactly two floor cells on opposite sides
  for (int r = 0; r < a.rows(); ++r) {
    for (int c = 0; c < a.cols(); ++c) {
      if (a.cell({r, c}) != Cell::kDoor) continue;
      const bool ns = a.traversable({r - 1, c}) && a.traversable({r + 1, c});
      const bool ew = a.traversable({r, c - 1}) && a.traversable({r, c + 1});
      CHECK(ns != ew);
    }
  }
}

TEST_CASE("step rewards, wall bumps and goal") {
  auto L = compose_building({{R1, R2}});
  L.set_start({1, 1});
  L.set_goal({3, 5});
  auto s = step(L, {1, 1}, Action::kE);
  CHECK(s.next == Pos{1, 2});
  CHECK(s.reward == -0.1);
  CHECK_FALSE(s.done);

  auto bump = step(L, {1, 1}, Action::kN);
  CHECK(bump.next == Pos{1, 1});
  CHECK(bump.reward == -0.1);

  auto door = step(L, {3, 3}, Action::kE);
  CHECK(door.next == Pos{3, 4});
  auto goal = step(L, {3, 4}, Action::kE);
  CHECK(goal.next == Pos{3, 5});
  CHECK(goal.reward == 10.0);
  CHECK(goal.done);
}

TEST_CASE("step reward closure and done iff at goal over all cells and actions") {
  auto L = compose_building(checkerboard(3, 3));
  L.set_goal({6, 6});
  for (int r = 0; r < L.rows(); ++r) {
    for (int c = 0; c < L.cols(); ++c) {
      if (!L.traversable({r, c})) continue;
      for (int a = 0; a < 4; ++a) {
        auto s = step(L, {r, c}, static_cast<Action>(a));
        CHECK((s.reward == -0.1 || s.reward == 10.0));
        CHECK(s.done == (s.next == L.goal()));
        CHECK(L.traversable(s.next));
      }
    }
  }
}

TEST_CASE("local_frame and global_of") {
  auto one = compose_building({{R1}});
  auto f = local_frame(one, {1, 1});
  CHECK(f.room == Pos{0, 0});
  CHECK(f.local == Pos{0, 0});
  CHECK(f.room_type == RoomType::kR1);

  auto two = compose_building({{R1, R2}});
  auto g = local_frame(two, {2, 6});
  CHECK(g.room == Pos{0, 1});
  CHECK(g.local == Pos{1, 1});
  CHECK(g.room_type == RoomType::kR2);

  // door (3,4): defaults to the first room, follows the last room otherwise
  auto d0 = local_frame(two, {3, 4});
  CHECK(d0.room == Pos{0, 0});
  CHECK(d0.local == Pos{2, 2});
  auto d1 = local_frame(two, {3, 4}, Pos{0, 1});
  CHECK(d1.room == Pos{0, 1});
  CHECK(d1.local == Pos{2, 0});

  CHECK_THROWS_AS(local_frame(two, {0, 0}), ConfigError);

  auto L = compose_building({{R1, R2, R1}, {R2, XX, R2}});
  std::set<std::pair<Pos, Pos>> seen;
  for (int r = 0; r < L.rows(); ++r) {
    for (int c = 0; c < L.cols(); ++c) {
      if (!L.interior_room({r, c})) continue;
      auto fr = local_frame(L, {r, c});
      CHECK(global_of(fr) == Pos{r, c});
      CHECK(seen.insert({fr.room, fr.local}).second);
    }
  }
  CHECK(seen.size() == 5 * 9);
}

TEST_CASE("render_room_image is translation invariant") {
  auto L = compose_building({{R1, R2}, {R2, R1}});
  CHECK(render_room_image(L, {0, 0}) == render_room_image(L, {1, 1}));
  CHECK(render_room_image(L, {0, 1}) == render_room_image(L, {1, 0}));
  CHECK(render_room_image(L, {0, 0}) != render_room_image(L, {0, 1}));
  for (double v : render_room_image(L, {0, 0})) CHECK((v == 0.0 || v == 1.0));
  auto S = compose_building({{R1, R2, XX}, {XX, R1, R2}});
  CHECK_THROWS_AS(render_room_image(S, {0, 2}), ConfigError);
}

TEST_CASE("subgoal_cell and landing_cell") {
  auto one = compose_building({{R1}});
  CHECK(subgoal_cell(one, {0, 0}, Corner::kNW) == Pos{1, 1});
  CHECK(subgoal_cell(one, {0, 0}, Corner::kSE) == Pos{3, 3});
  std::set<Pos> corners;
  for (Corner k : kCorners) corners.insert(subgoal_cell(one, {0, 0}, k));
  CHECK(corners.size() == 4);
  CHECK_FALSE(landing_cell(one, {0, 0}, RoomType::kR1, Corner::kSE));

  auto L = compose_building(checkerboard(2, 2));
  CHECK(landing_cell(L, {0, 0}, RoomType::kR1, Corner::kSE) == Pos{3, 5});
  CHECK(landing_cell(L, {0, 0}, RoomType::kR1, Corner::kSW) == Pos{5, 1});
  CHECK(landing_cell(L, {1, 1}, RoomType::kR1, Corner::kNE) == Pos{3, 7});
  CHECK(landing_cell(L, {1, 1}, RoomType::kR1, Corner::kNW) == Pos{5, 3});
  CHECK(landing_cell(L, {0, 1}, RoomType::kR2, Corner::kSE) == Pos{5, 7});
  // outer wall: no door
  CHECK_FALSE(landing_cell(L, {0, 0}, RoomType::kR1, Corner::kNE));
  // wrong template: R2's SE door opens south, R1's does not
  CHECK_FALSE(landing_cell(L, {0, 0}, RoomType::kR2, Corner::kSE));
}

TEST_CASE("BFS distances") {
  auto L = compose_building({{R1, R2}});
  CHECK(shortest_path(L, {1, 1}, {1, 1}) == 0);
  CHECK(shortest_path(L, {1, 1}, {3, 3}) == 4);
  CHECK(shortest_path(L, {1, 1}, {3, 5}) == 6);
  CHECK(shortest_path(L, {1, 1}, {1, 7}) == 10);
  CHECK(shortest_path(L, {1, 1}, {0, 0}) == -1);
}

TEST_CASE("layout file round trip and diagnostics") {
  const std::string text =
      "rooms 2 3\n"
      "1 2 #\n"
      "# 1 2\n"
      "start 1 3\n"
      "goal 7 9\n";
  std::istringstream in(text);
  auto L = parse_layout(in, "stair");
  CHECK(L.rooms_h() == 2);
  CHECK(L.rooms_w() == 3);
  CHECK(L.start() == Pos{1, 3});
  CHECK(L.goal() == Pos{7, 9});
  CHECK(format_layout(L) == text);
  CHECK(shortest_path(L, L.start(), L.goal()) == 12);

  auto message = [](const std::string& src) {
    std::istringstream s(src);
    try {
      parse_layout(s, "f");
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  CHECK(message("rooms 1 2\n1 x\nstart 1 1\ngoal 1 5\n") == "f:2:3: unknown room token 'x' (use 1, 2 or #)");
  CHECK(message("rooms 1 2\n1\nstart 1 1\ngoal 1 5\n") == "f:2:1: expected 2 room tokens, got 1");
  CHECK(message("room 1 2\n") == "f:1:1: expected 'rooms', got 'room'");
  CHECK(message("rooms 1 z\n") == "f:1:9: expected an integer, got 'z'");
  CHECK(message("rooms 1 2\n1 2\nstart 1 1\n") == "f:4:1: unexpected end of file, expected goal");
  CHECK(message("rooms 1 2\n1 2\nstart 0 0\ngoal 1 5\n").rfind("f:3:7: start (0,0)", 0) == 0);
  CHECK(message("rooms 1 2\n1 1\nstart 1 1\ngoal 1 5\n") == "f:1:1: layout floor graph is disconnected");
  CHECK(message("rooms 1 2\n1 2\nstart 1 1\ngoal 1 5\nextra\n") == "f:5:1: unexpected trailing content");
  CHECK(message("rooms 1 2\n1 2\nstart 1 1 1\ngoal 1 5\n") == "f:3:11: 'start' takes exactly two integers");
}

TEST_CASE("ascii rendering marks start, goal and doors") {
  auto L = compose_building({{R1, R2}});
  L.set_start({1, 1});
  L.set_goal({3, 7});
  CHECK(to_ascii(L) ==
        "#########\n"
        "#S..#...#\n"
        "#...#...#\n"
        "#...+..G#\n"
        "#########\n");
}
