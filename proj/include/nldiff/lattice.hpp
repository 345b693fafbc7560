#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace nldiff {

inline constexpr int kMaxDim = 4;
using Index = std::array<int, kMaxDim>;
using Point = std::array<double, kMaxDim>;

/// Uniform lattice on [-L, L]^N with an odd number of points per axis, so the
/// origin is always a node. Flattening is axis-major with the last axis fastest.
class Grid {
 public:
  Grid() = default;
  Grid(int dimension, int points_per_axis, double extent);

  int dimension() const { return dimension_; }
  int points() const { return points_; }
  double extent() const { return extent_; }
  double spacing() const { return spacing_; }
  std::size_t size() const { return size_; }
  double cell_volume() const { return cell_volume_; }

  /// Number of rows along the last axis.
  std::size_t rows() const { return size_ / static_cast<std::size_t>(points_); }

  double coordinate(int i) const { return -extent_ + i * spacing_; }
  int center_index() const { return (points_ - 1) / 2; }

  Index unflatten(std::size_t flat) const;
  std::size_t flatten(const Index& idx) const;
  Point position(std::size_t flat) const;
  double radius_squared(std::size_t flat) const;
  double radius(std::size_t flat) const;

  std::size_t memory_bytes_per_field() const { return size_ * sizeof(double); }

  bool operator==(const Grid&) const = default;

 private:
  int dimension_ = 0;
  int points_ = 0;
  double extent_ = 0.0;
  double spacing_ = 0.0;
  std::size_t size_ = 0;
  double cell_volume_ = 0.0;
};

/// Validates and builds a grid. Even point counts are rejected because the
/// origin must be a node.
Grid build_grid(int dimension, int points_per_axis, double extent);

/// Scalar lattice function. Values are stored flat in Grid order.
class Field {
 public:
  Field() = default;
  explicit Field(const Grid& grid, double fill = 0.0)
      : grid_(grid), values_(grid.size(), fill) {}
  Field(const Grid& grid, std::vector<double> values);

  const Grid& grid() const { return grid_; }
  std::size_t size() const { return values_.size(); }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::vector<double>& storage() { return values_; }

  std::optional<double> time_tag() const { return time_; }
  void set_time_tag(std::optional<double> t) { time_ = t; }

  bool all_finite() const;
  double max() const;
  double min() const;
  double max_abs() const;

 private:
  Grid grid_;
  std::vector<double> values_;
  std::optional<double> time_;
};

/// Throws a shape error unless both fields live on the same grid.
void require_same_grid(const Field& a, const Field& b, std::string_view what);

enum class HoleShape { ball, box, shell };

std::string_view to_string(HoleShape shape);
HoleShape parse_hole_shape(std::string_view name);

/// One hole primitive. `size` holds the radius (ball), the half-widths (box)
/// or the inner and outer radii (shell).
struct HolePrimitive {
  HoleShape shape = HoleShape::ball;
  Point center{};
  Point size{};

  bool contains(const Point& x, int dimension) const;
  /// Largest |x - center| over points of the primitive.
  double reach(int dimension) const;
  /// Largest |x| over points of the primitive (distance from the origin).
  double circumradius(int dimension) const;
  /// Per-axis half-extent of the primitive's bounding box.
  double half_extent(int axis, int dimension) const;

  bool operator==(const HolePrimitive&) const = default;
};

struct HoleSet {
  std::vector<HolePrimitive> primitives;

  bool empty() const { return primitives.empty(); }
  double circumradius(int dimension) const;
};

enum class NodeClass : std::uint8_t { hole = 0, exterior = 1, outer_pad = 2 };

/// How nodes of the outer pad take part in the evolution. `evolve` applies the
/// full generator with zero extension beyond the box. `sink` lets pad nodes
/// receive mass from the interior without emitting any, so mass reaching the
/// pad is retained and counted rather than scattered back or lost.
enum class PadPolicy { evolve, sink };

std::string_view to_string(PadPolicy policy);
PadPolicy parse_pad_policy(std::string_view name);

/// Per-node classification plus connected-component labels of the exterior.
class DomainMask {
 public:
  DomainMask() = default;
  DomainMask(const Grid& grid, std::vector<NodeClass> classes, double pad_width);

  const Grid& grid() const { return grid_; }
  NodeClass at(std::size_t i) const { return classes_[i]; }
  std::span<const NodeClass> classes() const { return classes_; }
  double pad_width() const { return pad_width_; }

  bool is_hole(std::size_t i) const { return classes_[i] == NodeClass::hole; }
  bool is_exterior(std::size_t i) const { return classes_[i] == NodeClass::exterior; }
  bool is_pad(std::size_t i) const { return classes_[i] == NodeClass::outer_pad; }

  std::size_t count(NodeClass c) const;

  bool has_components() const { return !component_.empty(); }
  /// Component id of an exterior or pad node, -1 for holes.
  int component(std::size_t i) const { return component_.empty() ? -1 : component_[i]; }
  int component_count() const { return component_count_; }
  int unbounded_component() const { return unbounded_component_; }
  bool is_bounded_component(int id) const {
    return id >= 0 && id != unbounded_component_;
  }
  /// True for exterior nodes that are not connected to infinity.
  bool in_bounded_component(std::size_t i) const {
    return classes_[i] == NodeClass::exterior && has_components() &&
           is_bounded_component(component_[i]);
  }
  std::vector<std::size_t> component_nodes(int id) const;

  void set_components(std::vector<int> labels, int count, int unbounded);

 private:
  Grid grid_;
  std::vector<NodeClass> classes_;
  std::vector<int> component_;
  int component_count_ = 0;
  int unbounded_component_ = -1;
  double pad_width_ = 0.0;
};

struct RasterizeOptions {
  /// Reject primitives closer than 2 * support_radius to the box faces.
  bool enforce_margin = true;
};

/// Classifies every node by a node-center test. Nodes within one support
/// radius of a box face form the outer pad.
DomainMask rasterize(const HoleSet& holes, const Grid& grid, double support_radius,
                     RasterizeOptions options = {});

/// Labels exterior components. Nodes are linked when closer than
/// `interaction_radius`; the component containing the outer pad is the
/// unbounded one (id 0), the rest are numbered by first node in grid order.
DomainMask components(DomainMask mask, double interaction_radius);

/// Discrete integral h^N * sum f, compensated, index order.
double integrate(const Field& f);

/// Discrete integral h^N * sum u*w, compensated, index order.
double weighted_mass(const Field& u, const Field& w);

struct RadialBin {
  double r_mid = 0.0;
  double r_mean = 0.0;  // mean |x| of the nodes in the bin
  double mean = 0.0;
  double max = 0.0;
  std::size_t count = 0;
};

/// Bins nodes by |x| into [k w, (k+1) w). Empty bins are omitted.
std::vector<RadialBin> radial_profile(const Field& f, double bin_width);
/// Same, restricted to exterior nodes of `mask` connected to infinity.
std::vector<RadialBin> radial_profile(const Field& f, double bin_width,
                                      const DomainMask& mask);

}  // namespace nldiff
