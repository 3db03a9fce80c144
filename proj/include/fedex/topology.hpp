#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fedex {

/// Raised when caller-supplied data violates a documented precondition.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Device 0 is the server; clients are 1..N.
inline constexpr int kServer = 0;

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// Axis-aligned rectangle [x0, x1] x [y0, y1] with its member clients.
struct Block {
  double x0 = 0.0;
  double y0 = 0.0;
  double x1 = 0.0;
  double y1 = 0.0;
  std::vector<int> members;

  bool strictly_contains(const Point& p) const {
    return p.x > x0 && p.x < x1 && p.y > y0 && p.y < y1;
  }
};

/// Ground-plane device geometry and the symmetric Euclidean distance matrix.
///
/// Immutable once constructed. The distance matrix is stored dense,
/// (N+1) x (N+1), row-major.
class Topology {
 public:
  /// `block_of[i]` is the block index of device i, or -1 (always -1 for the server).
  Topology(std::vector<Point> positions, std::vector<int> block_of, std::vector<Block> blocks);

  int num_devices() const { return static_cast<int>(positions_.size()); }
  int num_clients() const { return num_devices() - 1; }

  double distance(int i, int j) const {
    return dist_[static_cast<std::size_t>(i) * positions_.size() + static_cast<std::size_t>(j)];
  }
  const Point& position(int i) const { return positions_[static_cast<std::size_t>(i)]; }
  std::span<const Point> positions() const { return positions_; }

  /// Block index of device i, -1 when unassigned.
  int block_of(int i) const { return block_of_[static_cast<std::size_t>(i)]; }
  const std::vector<Block>& blocks() const { return blocks_; }
  bool has_blocks() const { return !blocks_.empty(); }

  std::vector<int> clients() const;

 private:
  std::vector<Point> positions_;
  std::vector<int> block_of_;
  std::vector<Block> blocks_;
  std::vector<double> dist_;
};

Topology build_topology(std::vector<Point> positions);

struct BlockLayoutSpec {
  double area_width = 2000.0;
  double area_height = 2000.0;
  int n_blocks = 10;
  int clients_per_block = 4;
  /// Grid columns; 0 picks the most square factorisation with columns >= rows.
  int columns = 0;
  /// Server position; defaults to the area centre.
  std::optional<Point> server;
};

/// Tiles the area into an equal-size block grid and scatters clients uniformly
/// (strictly inside) each block. Clients are numbered block by block.
Topology generate_block_layout(const BlockLayoutSpec& spec, std::uint64_t seed);

/// Columns x rows used for `n_blocks` when no explicit column count is given.
std::pair<int, int> default_block_grid(int n_blocks);

/// CSV with header `id,x,y,block`; doubles are written in shortest round-trip form.
void write_topology_csv(std::ostream& out, const Topology& topo);
Topology read_topology_csv(std::istream& in);

/// Shortest decimal representation that parses back to the identical double.
std::string format_double(double v);
double parse_double(std::string_view text);

}  // namespace fedex
