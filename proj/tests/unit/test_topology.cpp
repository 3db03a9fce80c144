#include <doctest.h>

#include <cmath>
#include <sstream>

#include "fedex/topology.hpp"

using namespace fedex;

TEST_CASE("distance matrix from coordinates") {
  const Topology t = build_topology({{0, 0}, {3, 4}});
  CHECK(t.distance(0, 1) == 5.0);
  CHECK(t.distance(1, 0) == 5.0);
  CHECK(t.distance(1, 1) == 0.0);

  const Topology same = build_topology({{7, 7}, {7, 7}});
  CHECK(same.distance(0, 1) == 0.0);
}

TEST_CASE("rejects degenerate coordinate lists") {
  CHECK_THROWS_AS(build_topology({}), InputError);
  CHECK_THROWS_AS(build_topology({{0, 0}, {std::nan(""), 1}}), InputError);
}

TEST_CASE("block layout over a 2 km square") {
  const BlockLayoutSpec spec;
  const Topology t = generate_block_layout(spec, 7);
  REQUIRE(t.num_clients() == 40);
  REQUIRE(t.blocks().size() == 10);
  for (const Block& b : t.blocks()) {
    CHECK(b.x1 - b.x0 == doctest::Approx(400.0));
    CHECK(b.y1 - b.y0 == doctest::Approx(1000.0));
    CHECK(b.members.size() == 4);
  }
  for (int c : t.clients()) {
    const Block& b = t.blocks()[static_cast<std::size_t>(t.block_of(c))];
    CHECK(b.strictly_contains(t.position(c)));
  }
  const double diag = std::hypot(2000.0, 2000.0);
  for (int i = 0; i < t.num_devices(); ++i) {
    for (int j = 0; j < t.num_devices(); ++j) CHECK(t.distance(i, j) <= diag);
  }
  CHECK(t.position(kServer).x == 1000.0);
  CHECK(t.position(kServer).y == 1000.0);
}

TEST_CASE("block layout is deterministic per seed") {
  const BlockLayoutSpec spec;
  const Topology a = generate_block_layout(spec, 11);
  const Topology b = generate_block_layout(spec, 11);
  const Topology c = generate_block_layout(spec, 12);
  bool differs = false;
  for (int i = 0; i < a.num_devices(); ++i) {
    CHECK(a.position(i).x == b.position(i).x);
    CHECK(a.position(i).y == b.position(i).y);
    differs = differs || a.position(i).x != c.position(i).x;
  }
  CHECK(differs);
}

TEST_CASE("block layout rejects grids that do not tile") {
  BlockLayoutSpec spec;
  spec.n_blocks = 7;
  spec.columns = 3;
  CHECK_THROWS_AS(generate_block_layout(spec, 1), InputError);
  spec.n_blocks = 0;
  spec.columns = 0;
  CHECK_THROWS_AS(generate_block_layout(spec, 1), InputError);
}

TEST_CASE("topology csv round trip is exact") {
  const Topology t = generate_block_layout(BlockLayoutSpec{}, 3);
  std::stringstream buf;
  write_topology_csv(buf, t);
  const Topology back = read_topology_csv(buf);
  REQUIRE(back.num_devices() == t.num_devices());
  for (int i = 0; i < t.num_devices(); ++i) {
    CHECK(back.position(i).x == t.position(i).x);
    CHECK(back.position(i).y == t.position(i).y);
    CHECK(back.block_of(i) == t.block_of(i));
  }
}

TEST_CASE("shortest double formatting round trips") {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, 2828.4271247461902, -0.0, 15000.0}) {
    CHECK(parse_double(format_double(v)) == v);
  }
  CHECK_THROWS_AS(parse_double("12abc"), InputError);
}
