#include "fedex/topology.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

namespace fedex {

Topology::Topology(std::vector<Point> positions, std::vector<int> block_of, std::vector<Block> blocks)
    : positions_(std::move(positions)), block_of_(std::move(block_of)), blocks_(std::move(blocks)) {
  if (positions_.size() < 2) {
    throw InputError("topology needs a server and at least one client");
  }
  for (std::size_t i = 0; i < positions_.size(); ++i) {
    if (!std::isfinite(positions_[i].x) || !std::isfinite(positions_[i].y)) {
      throw InputError("non-finite coordinate for device " + std::to_string(i));
    }
  }
  if (block_of_.empty()) {
    block_of_.assign(positions_.size(), -1);
  }
  if (block_of_.size() != positions_.size()) {
    throw InputError("block membership list does not match device count");
  }
  const std::size_t n = positions_.size();
  dist_.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = std::hypot(positions_[i].x - positions_[j].x, positions_[i].y - positions_[j].y);
      dist_[i * n + j] = d;
      dist_[j * n + i] = d;
    }
  }
}

std::vector<int> Topology::clients() const {
  std::vector<int> ids(static_cast<std::size_t>(num_clients()));
  for (int i = 0; i < num_clients(); ++i) ids[static_cast<std::size_t>(i)] = i + 1;
  return ids;
}

Topology build_topology(std::vector<Point> positions) {
  return Topology(std::move(positions), {}, {});
}

std::pair<int, int> default_block_grid(int n_blocks) {
  int rows = 1;
  for (int r = 1; r * r <= n_blocks; ++r) {
    if (n_blocks % r == 0) rows = r;
  }
  return {n_blocks / rows, rows};
}

Topology generate_block_layout(const BlockLayoutSpec& spec, std::uint64_t seed) {
  if (!(spec.area_width > 0.0) || !(spec.area_height > 0.0) || !std::isfinite(spec.area_width) ||
      !std::isfinite(spec.area_height)) {
    throw InputError("block layout area must be positive and finite");
  }
  if (spec.n_blocks <= 0 || spec.clients_per_block <= 0) {
    throw InputError("block layout needs at least one block and one client per block");
  }
  int cols = spec.columns;
  int rows = 0;
  if (cols == 0) {
    std::tie(cols, rows) = default_block_grid(spec.n_blocks);
  } else {
    if (cols < 0 || spec.n_blocks % cols != 0) {
      throw InputError("block columns must divide the block count to tile the area");
    }
    rows = spec.n_blocks / cols;
  }
  const double bw = spec.area_width / cols;
  const double bh = spec.area_height / rows;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto strictly_inside = [&](double lo, double width) {
    for (;;) {
      const double v = lo + width * unit(rng);
      if (v > lo && v < lo + width) return v;
    }
  };

  std::vector<Point> positions;
  std::vector<int> block_of;
  std::vector<Block> blocks;
  positions.push_back(spec.server.value_or(Point{spec.area_width / 2.0, spec.area_height / 2.0}));
  block_of.push_back(-1);
  // Blocks are numbered row-major from the lower-left corner.
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      Block b{c * bw, r * bh, (c + 1) * bw, (r + 1) * bh, {}};
      for (int j = 0; j < spec.clients_per_block; ++j) {
        const double x = strictly_inside(b.x0, bw);
        const double y = strictly_inside(b.y0, bh);
        b.members.push_back(static_cast<int>(positions.size()));
        positions.push_back({x, y});
        block_of.push_back(static_cast<int>(blocks.size()));
      }
      blocks.push_back(std::move(b));
    }
  }
  return Topology(std::move(positions), std::move(block_of), std::move(blocks));
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view text) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) {
    text.remove_suffix(1);
  }
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double v = 0.0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw InputError("not a number: '" + std::string(text) + "'");
  }
  return v;
}

void write_topology_csv(std::ostream& out, const Topology& topo) {
  out << "id,x,y,block\n";
  for (int i = 0; i < topo.num_devices(); ++i) {
    const Point& p = topo.position(i);
    out << i << ',' << format_double(p.x) << ',' << format_double(p.y) << ',' << topo.block_of(i) << '\n';
  }
}

Topology read_topology_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("id,x,y,block", 0) != 0) {
    throw InputError("topology csv: missing 'id,x,y,block' header");
  }
  std::vector<Point> positions;
  std::vector<int> block_of;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 4) {
      throw InputError("topology csv line " + std::to_string(line_no) + ": expected 4 fields");
    }
    try {
      const auto id = static_cast<std::size_t>(parse_double(cells[0]));
      if (id != positions.size()) {
        throw InputError("ids must be consecutive from 0");
      }
      positions.push_back({parse_double(cells[1]), parse_double(cells[2])});
      block_of.push_back(static_cast<int>(parse_double(cells[3])));
    } catch (const InputError& e) {
      throw InputError("topology csv line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  // Block rectangles are not part of the file; rebuild them as member bounding boxes.
  std::vector<Block> blocks;
  for (std::size_t i = 0; i < block_of.size(); ++i) {
    const int b = block_of[i];
    if (b < 0) continue;
    if (static_cast<std::size_t>(b) >= blocks.size()) {
      blocks.resize(static_cast<std::size_t>(b) + 1,
                    Block{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
                          -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(), {}});
    }
    Block& blk = blocks[static_cast<std::size_t>(b)];
    blk.members.push_back(static_cast<int>(i));
    blk.x0 = std::min(blk.x0, positions[i].x);
    blk.y0 = std::min(blk.y0, positions[i].y);
    blk.x1 = std::max(blk.x1, positions[i].x);
    blk.y1 = std::max(blk.y1, positions[i].y);
  }
  return Topology(std::move(positions), std::move(block_of), std::move(blocks));
}

}  // namespace fedex
