#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "nldiff/lattice.hpp"

namespace nldiff {

inline constexpr std::uint16_t kSnapshotVersion = 1;

struct SnapshotHeader {
  std::uint16_t version = kSnapshotVersion;
  int dimension = 0;
  std::uint64_t points = 0;  // per axis; the grid is cubic
  double spacing = 0.0;
  double extent = 0.0;
  double time = 0.0;
  std::string field_name;
};

SnapshotHeader make_header(const Field& field, std::string field_name);

/// "NLDF", version u16, ndim u8, ndim x u64 sizes, spacing, extent and time
/// as f64, u16-prefixed ASCII name, then little-endian f64 values.
void write_snapshot(const Field& field, const SnapshotHeader& header,
                    const std::filesystem::path& path);

struct Snapshot {
  SnapshotHeader header;
  Field field;
};

Snapshot read_snapshot(const std::filesystem::path& path);

}  // namespace nldiff
