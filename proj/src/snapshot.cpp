#include "nldiff/snapshot.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

#include "nldiff/error.hpp"

namespace nldiff {

static_assert(std::endian::native == std::endian::little,
              "snapshot I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'N', 'L', 'D', 'F'};

template <typename T>
void put(std::vector<char>& buf, T value) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  buf.insert(buf.end(), bytes, bytes + sizeof(T));
}

class Reader {
 public:
  Reader(const std::vector<char>& data, std::string path) : data_(data), path_(std::move(path)) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T value;
    std::memcpy(&value, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }
  std::string get_string(std::size_t n) {
    need(n);
    std::string s(data_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return data_.size() - pos_; }
  const char* cursor() const { return data_.data() + pos_; }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) {
      throw Error(ErrorKind::format, path_ + ": truncated snapshot header");
    }
  }
  const std::vector<char>& data_;
  std::string path_;
  std::size_t pos_ = 0;
};

}  // namespace

SnapshotHeader make_header(const Field& field, std::string field_name) {
  const Grid& g = field.grid();
  SnapshotHeader h;
  h.dimension = g.dimension();
  h.points = static_cast<std::uint64_t>(g.points());
  h.spacing = g.spacing();
  h.extent = g.extent();
  h.time = field.time_tag().value_or(0.0);
  h.field_name = std::move(field_name);
  return h;
}

void write_snapshot(const Field& field, const SnapshotHeader& header,
                    const std::filesystem::path& path) {
  const Grid& g = field.grid();
  if (header.dimension != g.dimension() ||
      header.points != static_cast<std::uint64_t>(g.points()) || header.extent != g.extent()) {
    throw Error(ErrorKind::format, "snapshot header does not describe the field");
  }
  if (header.field_name.size() > 65535) {
    throw Error(ErrorKind::format, "snapshot field name too long");
  }
  std::vector<char> buf(kMagic, kMagic + 4);
  put<std::uint16_t>(buf, header.version);
  put<std::uint8_t>(buf, static_cast<std::uint8_t>(header.dimension));
  for (int d = 0; d < header.dimension; ++d) put<std::uint64_t>(buf, header.points);
  put<double>(buf, header.spacing);
  put<double>(buf, header.extent);
  put<double>(buf, header.time);
  put<std::uint16_t>(buf, static_cast<std::uint16_t>(header.field_name.size()));
  buf.insert(buf.end(), header.field_name.begin(), header.field_name.end());
  const auto values = field.values();
  const auto* raw = reinterpret_cast<const char*>(values.data());
  buf.insert(buf.end(), raw, raw + values.size() * sizeof(double));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::format, "cannot open " + path.string() + " for writing");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw Error(ErrorKind::format, "write failed for " + path.string());
}

Snapshot read_snapshot(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::format, "cannot open snapshot " + path.string());
  const std::vector<char> data((std::istreambuf_iterator<char>(in)),
                               std::istreambuf_iterator<char>());
  Reader r(data, path.string());
  if (r.get_string(4) != std::string(kMagic, 4)) {
    throw Error(ErrorKind::format, path.string() + ": bad magic, not an NLDF snapshot");
  }
  Snapshot s;
  s.header.version = r.get<std::uint16_t>();
  if (s.header.version != kSnapshotVersion) {
    throw Error(ErrorKind::format, path.string() + ": snapshot version " +
                                       std::to_string(s.header.version) + ", expected " +
                                       std::to_string(kSnapshotVersion));
  }
  s.header.dimension = r.get<std::uint8_t>();
  if (s.header.dimension < 1 || s.header.dimension > kMaxDim) {
    throw Error(ErrorKind::format, path.string() + ": unsupported dimension");
  }
  for (int d = 0; d < s.header.dimension; ++d) {
    const auto n = r.get<std::uint64_t>();
    if (d > 0 && n != s.header.points) {
      throw Error(ErrorKind::format, path.string() + ": non-cubic grids are not supported");
    }
    s.header.points = n;
  }
  s.header.spacing = r.get<double>();
  s.header.extent = r.get<double>();
  s.header.time = r.get<double>();
  const auto len = r.get<std::uint16_t>();
  s.header.field_name = r.get_string(len);

  if (s.header.points > 1u << 20) throw Error(ErrorKind::format, path.string() + ": bad size");
  Grid grid;
  try {
    grid = build_grid(s.header.dimension, static_cast<int>(s.header.points), s.header.extent);
  } catch (const Error& e) {
    throw Error(ErrorKind::format, path.string() + ": invalid grid (" + e.what() + ")");
  }
  if (grid.spacing() != s.header.spacing) {
    throw Error(ErrorKind::format, path.string() + ": spacing inconsistent with extent");
  }
  const std::size_t expected = grid.size() * sizeof(double);
  if (r.remaining() != expected) {
    throw Error(ErrorKind::format, path.string() + ": payload has " +
                                       std::to_string(r.remaining()) + " bytes, expected " +
                                       std::to_string(expected));
  }
  std::vector<double> values(grid.size());
  std::memcpy(values.data(), r.cursor(), expected);
  s.field = Field(grid, std::move(values));
  s.field.set_time_tag(s.header.time);
  return s;
}

}  // namespace nldiff
