#include "nldiff/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <sstream>

#include "nldiff/error.hpp"
#include "nldiff/numerics.hpp"

namespace nldiff {

Grid::Grid(int dimension, int points_per_axis, double extent)
    : dimension_(dimension),
      points_(points_per_axis),
      extent_(extent),
      spacing_(2.0 * extent / (points_per_axis - 1)) {
  size_ = 1;
  cell_volume_ = 1.0;
  for (int d = 0; d < dimension_; ++d) {
    size_ *= static_cast<std::size_t>(points_);
    cell_volume_ *= spacing_;
  }
}

Index Grid::unflatten(std::size_t flat) const {
  Index idx{};
  for (int d = dimension_ - 1; d >= 0; --d) {
    idx[d] = static_cast<int>(flat % static_cast<std::size_t>(points_));
    flat /= static_cast<std::size_t>(points_);
  }
  return idx;
}

std::size_t Grid::flatten(const Index& idx) const {
  std::size_t flat = 0;
  for (int d = 0; d < dimension_; ++d) {
    flat = flat * static_cast<std::size_t>(points_) + static_cast<std::size_t>(idx[d]);
  }
  return flat;
}

Point Grid::position(std::size_t flat) const {
  const Index idx = unflatten(flat);
  Point x{};
  for (int d = 0; d < dimension_; ++d) x[d] = coordinate(idx[d]);
  return x;
}

double Grid::radius_squared(std::size_t flat) const {
  const Index idx = unflatten(flat);
  const int c = center_index();
  // Integer offsets keep |x|^2 exactly symmetric across the lattice.
  long long s = 0;
  for (int d = 0; d < dimension_; ++d) {
    const long long o = idx[d] - c;
    s += o * o;
  }
  return static_cast<double>(s) * spacing_ * spacing_;
}

double Grid::radius(std::size_t flat) const { return std::sqrt(radius_squared(flat)); }

Grid build_grid(int dimension, int points_per_axis, double extent) {
  if (dimension < 1 || dimension > kMaxDim) {
    throw Error(ErrorKind::unsupported_dimension,
                "grid dimension " + std::to_string(dimension) + " outside [1, " +
                    std::to_string(kMaxDim) + "]");
  }
  if (points_per_axis % 2 == 0) {
    throw Error(ErrorKind::configuration,
                "points must be odd so the origin is a node (got " +
                    std::to_string(points_per_axis) + ")");
  }
  if (points_per_axis < 3) {
    throw Error(ErrorKind::configuration, "points must be at least 3");
  }
  if (!(extent > 0.0)) {
    throw Error(ErrorKind::configuration, "grid extent must be positive");
  }
  return Grid(dimension, points_per_axis, extent);
}

Field::Field(const Grid& grid, std::vector<double> values)
    : grid_(grid), values_(std::move(values)) {
  if (values_.size() != grid_.size()) {
    throw Error(ErrorKind::shape, "field value count does not match grid size");
  }
}

bool Field::all_finite() const {
  return std::all_of(values_.begin(), values_.end(),
                     [](double v) { return std::isfinite(v); });
}

double Field::max() const {
  return values_.empty() ? 0.0 : *std::max_element(values_.begin(), values_.end());
}

double Field::min() const {
  return values_.empty() ? 0.0 : *std::min_element(values_.begin(), values_.end());
}

double Field::max_abs() const {
  double m = 0.0;
  for (double v : values_) m = std::max(m, std::abs(v));
  return m;
}

void require_same_grid(const Field& a, const Field& b, std::string_view what) {
  if (!(a.grid() == b.grid())) {
    throw Error(ErrorKind::shape, std::string(what) + ": fields live on different grids");
  }
}

std::string_view to_string(HoleShape shape) {
  switch (shape) {
    case HoleShape::ball: return "ball";
    case HoleShape::box: return "box";
    case HoleShape::shell: return "shell";
  }
  return "ball";
}

HoleShape parse_hole_shape(std::string_view name) {
  if (name == "ball") return HoleShape::ball;
  if (name == "box") return HoleShape::box;
  if (name == "shell") return HoleShape::shell;
  throw Error(ErrorKind::configuration,
              "unknown hole shape '" + std::string(name) + "' (ball, box, shell)");
}

std::string_view to_string(PadPolicy policy) {
  return policy == PadPolicy::evolve ? "evolve" : "sink";
}

PadPolicy parse_pad_policy(std::string_view name) {
  if (name == "evolve") return PadPolicy::evolve;
  if (name == "sink") return PadPolicy::sink;
  throw Error(ErrorKind::configuration,
              "unknown pad policy '" + std::string(name) + "' (evolve, sink)");
}

bool HolePrimitive::contains(const Point& x, int dimension) const {
  switch (shape) {
    case HoleShape::ball: {
      double s = 0.0;
      for (int d = 0; d < dimension; ++d) s += (x[d] - center[d]) * (x[d] - center[d]);
      return s < size[0] * size[0];
    }
    case HoleShape::box: {
      for (int d = 0; d < dimension; ++d) {
        if (std::abs(x[d] - center[d]) >= size[d]) return false;
      }
      return true;
    }
    case HoleShape::shell: {
      double s = 0.0;
      for (int d = 0; d < dimension; ++d) s += (x[d] - center[d]) * (x[d] - center[d]);
      return s > size[0] * size[0] && s < size[1] * size[1];
    }
  }
  return false;
}

double HolePrimitive::reach(int dimension) const {
  switch (shape) {
    case HoleShape::ball: return size[0];
    case HoleShape::shell: return size[1];
    case HoleShape::box: {
      double s = 0.0;
      for (int d = 0; d < dimension; ++d) s += size[d] * size[d];
      return std::sqrt(s);
    }
  }
  return 0.0;
}

double HolePrimitive::circumradius(int dimension) const {
  double c = 0.0;
  for (int d = 0; d < dimension; ++d) c += center[d] * center[d];
  return std::sqrt(c) + reach(dimension);
}

double HolePrimitive::half_extent(int axis, int /*dimension*/) const {
  switch (shape) {
    case HoleShape::ball: return size[0];
    case HoleShape::shell: return size[1];
    case HoleShape::box: return size[axis];
  }
  return 0.0;
}

double HoleSet::circumradius(int dimension) const {
  double r = 0.0;
  for (const auto& p : primitives) r = std::max(r, p.circumradius(dimension));
  return r;
}

DomainMask::DomainMask(const Grid& grid, std::vector<NodeClass> classes, double pad_width)
    : grid_(grid), classes_(std::move(classes)), pad_width_(pad_width) {
  if (classes_.size() != grid_.size()) {
    throw Error(ErrorKind::shape, "mask class count does not match grid size");
  }
}

std::size_t DomainMask::count(NodeClass c) const {
  return static_cast<std::size_t>(std::count(classes_.begin(), classes_.end(), c));
}

std::vector<std::size_t> DomainMask::component_nodes(int id) const {
  std::vector<std::size_t> nodes;
  for (std::size_t i = 0; i < component_.size(); ++i) {
    if (component_[i] == id && classes_[i] == NodeClass::exterior) nodes.push_back(i);
  }
  return nodes;
}

void DomainMask::set_components(std::vector<int> labels, int count, int unbounded) {
  if (labels.size() != classes_.size()) {
    throw Error(ErrorKind::shape, "component label count does not match grid size");
  }
  component_ = std::move(labels);
  component_count_ = count;
  unbounded_component_ = unbounded;
}

DomainMask rasterize(const HoleSet& holes, const Grid& grid, double support_radius,
                     RasterizeOptions options) {
  const int dim = grid.dimension();
  if (options.enforce_margin) {
    const double margin = 2.0 * support_radius;
    for (std::size_t k = 0; k < holes.primitives.size(); ++k) {
      const auto& p = holes.primitives[k];
      for (int d = 0; d < dim; ++d) {
        const double lo = p.center[d] - p.half_extent(d, dim);
        const double hi = p.center[d] + p.half_extent(d, dim);
        if (lo < -grid.extent() + margin || hi > grid.extent() - margin) {
          std::ostringstream msg;
          msg << "hole " << k << " comes within " << margin
              << " (2 x kernel radius) of the box face on axis " << d;
          throw Error(ErrorKind::geometry, msg.str());
        }
      }
    }
  }
  std::vector<NodeClass> classes(grid.size(), NodeClass::exterior);
  const double L = grid.extent();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Point x = grid.position(i);
    bool pad = false;
    for (int d = 0; d < dim; ++d) {
      if (L - std::abs(x[d]) < support_radius) {
        pad = true;
        break;
      }
    }
    if (pad) {
      classes[i] = NodeClass::outer_pad;
      continue;
    }
    for (const auto& p : holes.primitives) {
      if (p.contains(x, dim)) {
        classes[i] = NodeClass::hole;
        break;
      }
    }
  }
  return DomainMask(grid, std::move(classes), support_radius);
}

DomainMask components(DomainMask mask, double interaction_radius) {
  const Grid& grid = mask.grid();
  const int dim = grid.dimension();
  const int n = grid.points();
  const double h = grid.spacing();
  const int reach = static_cast<int>(std::ceil(interaction_radius / h));

  std::vector<Index> links;
  Index o{};
  // Enumerate offsets with |o| h < interaction_radius in lexicographic order.
  const auto enumerate = [&](auto&& self, int axis) -> void {
    if (axis == dim) {
      double s = 0.0;
      bool zero = true;
      for (int d = 0; d < dim; ++d) {
        s += static_cast<double>(o[d]) * o[d];
        zero = zero && o[d] == 0;
      }
      if (!zero && std::sqrt(s) * h < interaction_radius) links.push_back(o);
      return;
    }
    for (int k = -reach; k <= reach; ++k) {
      o[axis] = k;
      self(self, axis + 1);
    }
  };
  enumerate(enumerate, 0);

  std::vector<int> label(grid.size(), -1);
  const auto linkable = [&](std::size_t i) { return !mask.is_hole(i); };

  std::deque<std::size_t> queue;
  const auto flood = [&](int id) {
    while (!queue.empty()) {
      const std::size_t cur = queue.front();
      queue.pop_front();
      const Index ci = grid.unflatten(cur);
      for (const Index& l : links) {
        Index ni{};
        bool inside = true;
        for (int d = 0; d < dim; ++d) {
          ni[d] = ci[d] + l[d];
          if (ni[d] < 0 || ni[d] >= n) {
            inside = false;
            break;
          }
        }
        if (!inside) continue;
        const std::size_t nb = grid.flatten(ni);
        if (label[nb] == -1 && linkable(nb)) {
          label[nb] = id;
          queue.push_back(nb);
        }
      }
    }
  };

  int count = 0;
  int unbounded = -1;
  // Seed the unbounded component from every pad node at once.
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (mask.is_pad(i)) {
      label[i] = 0;
      queue.push_back(i);
    }
  }
  if (!queue.empty()) {
    unbounded = 0;
    count = 1;
    flood(0);
  }
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (label[i] == -1 && mask.is_exterior(i)) {
      label[i] = count;
      queue.push_back(i);
      flood(count);
      ++count;
    }
  }
  mask.set_components(std::move(label), count, unbounded);
  return mask;
}

double integrate(const Field& f) {
  CompensatedSum s;
  for (double v : f.values()) s.add(v);
  return s.value() * f.grid().cell_volume();
}

double weighted_mass(const Field& u, const Field& w) {
  require_same_grid(u, w, "weighted_mass");
  CompensatedSum s;
  const auto uv = u.values();
  const auto wv = w.values();
  for (std::size_t i = 0; i < uv.size(); ++i) s.add(uv[i] * wv[i]);
  return s.value() * u.grid().cell_volume();
}

namespace {

std::vector<RadialBin> bin_radially(const Field& f, double bin_width,
                                    const DomainMask* mask) {
  const Grid& grid = f.grid();
  if (!(bin_width >= grid.spacing() * (1.0 - 1e-12))) {
    throw Error(ErrorKind::range, "radial bin width must be at least the grid spacing");
  }
  struct Acc {
    CompensatedSum sum;
    CompensatedSum rsum;
    double max = -std::numeric_limits<double>::infinity();
    std::size_t count = 0;
  };
  std::vector<Acc> acc;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (mask != nullptr && (!mask->is_exterior(i) || mask->in_bounded_component(i))) continue;
    const double r = grid.radius(i);
    const auto k = static_cast<std::size_t>(std::floor(r / bin_width));
    if (k >= acc.size()) acc.resize(k + 1);
    auto& a = acc[k];
    a.sum.add(f[i]);
    a.rsum.add(r);
    a.max = std::max(a.max, f[i]);
    ++a.count;
  }
  std::vector<RadialBin> bins;
  for (std::size_t k = 0; k < acc.size(); ++k) {
    if (acc[k].count == 0) continue;
    RadialBin b;
    b.r_mid = (static_cast<double>(k) + 0.5) * bin_width;
    b.count = acc[k].count;
    b.mean = acc[k].sum.value() / static_cast<double>(b.count);
    b.r_mean = acc[k].rsum.value() / static_cast<double>(b.count);
    b.max = acc[k].max;
    bins.push_back(b);
  }
  return bins;
}

}  // namespace

std::vector<RadialBin> radial_profile(const Field& f, double bin_width) {
  return bin_radially(f, bin_width, nullptr);
}

std::vector<RadialBin> radial_profile(const Field& f, double bin_width,
                                      const DomainMask& mask) {
  if (!(f.grid() == mask.grid())) {
    throw Error(ErrorKind::shape, "radial_profile: mask and field grids differ");
  }
  return bin_radially(f, bin_width, &mask);
}

}  // namespace nldiff
