#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "metaforge/voxel.hpp"

namespace metaforge {

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

/// Minimal CSV table. Fields containing commas/quotes/newlines are quoted on
/// write; lines starting with '#' are treated as comments on read.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> comments;  // leading '#' lines, kept verbatim

  int column(const std::string& name) const;  // -1 when absent
};

CsvTable read_csv(const std::filesystem::path& path);
void write_csv(const std::filesystem::path& path, const CsvTable& table);

std::string csv_quote(const std::string& field);

// ---------------------------------------------------------------------------
// Voxel files: one JSON header line {edge_voxels, binary_flag, encoding, ...}
// followed by a binary payload. Binary grids use run-length pairs
// (uint32 LE count, uint8 value); continuous grids use float32 LE in storage
// order (z slowest, x fastest).
// ---------------------------------------------------------------------------

void save_voxel(const std::filesystem::path& path, const VoxelGrid& grid,
                const std::string& run_id = "");
VoxelGrid load_voxel(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Hashing (FNV-1a, 64-bit) for deterministic run ids and output checks.
// ---------------------------------------------------------------------------

std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a(const std::string& s, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t hash_file(const std::filesystem::path& path);
std::string hex64(std::uint64_t h);

/// Format a double with enough digits to round-trip exactly.
std::string format_double(double v);

}  // namespace metaforge
