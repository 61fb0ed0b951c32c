#include "metaforge/io.hpp"

#include <algorithm>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace metaforge {

int CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  return -1;
}

std::string csv_quote(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

namespace {

std::vector<std::string> parse_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

}  // namespace

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  CsvTable table;
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    // a line with an odd number of quotes continues on the next one
    while (std::count(line.begin(), line.end(), '"') % 2 != 0) {
      std::string more;
      if (!std::getline(in, more)) break;
      line += "\n" + more;
    }
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      table.comments.push_back(line);
      continue;
    }
    if (!have_header) {
      table.header = parse_csv_line(line);
      have_header = true;
    } else {
      table.rows.push_back(parse_csv_line(line));
    }
  }
  return table;
}

void write_csv(const std::filesystem::path& path, const CsvTable& table) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& c : table.comments) out << c << "\n";
  for (std::size_t i = 0; i < table.header.size(); ++i)
    out << (i ? "," : "") << csv_quote(table.header[i]);
  out << "\n";
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i)
      out << (i ? "," : "") << csv_quote(row[i]);
    out << "\n";
  }
}

// ---------------------------------------------------------------------------
// Voxel files
// ---------------------------------------------------------------------------

namespace {

void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf += static_cast<char>((v >> (8 * i)) & 0xff);
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

void save_voxel(const std::filesystem::path& path, const VoxelGrid& grid,
                const std::string& run_id) {
  nlohmann::json header;
  header["edge_voxels"] = grid.edge_voxels;
  header["binary_flag"] = grid.binary_flag;
  header["encoding"] = grid.binary_flag ? "rle" : "raw";
  if (!run_id.empty()) header["run"] = run_id;

  std::string payload;
  if (grid.binary_flag) {
    std::size_t i = 0;
    const std::size_t n = grid.size();
    while (i < n) {
      const double v = grid.occupancy[i];
      std::size_t j = i;
      while (j < n && grid.occupancy[j] == v && j - i < 0xffffffffULL) ++j;
      put_u32(payload, static_cast<std::uint32_t>(j - i));
      payload += static_cast<char>(v != 0.0 ? 1 : 0);
      i = j;
    }
  } else {
    payload.reserve(grid.size() * 4);
    for (double v : grid.occupancy) {
      float f = static_cast<float>(v);
      std::uint32_t bits;
      std::memcpy(&bits, &f, 4);
      put_u32(payload, bits);
    }
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << header.dump() << "\n";
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
}

VoxelGrid load_voxel(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string header_line;
  if (!std::getline(in, header_line)) throw IoError("missing voxel header");
  nlohmann::json header = nlohmann::json::parse(header_line);

  VoxelGrid grid;
  grid.edge_voxels = header.at("edge_voxels").get<int>();
  grid.binary_flag = header.at("binary_flag").get<bool>();
  const std::string encoding = header.at("encoding").get<std::string>();
  const std::size_t n = static_cast<std::size_t>(grid.edge_voxels) * grid.edge_voxels *
                        grid.edge_voxels;
  grid.occupancy.resize(n);

  std::string payload((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto* p = reinterpret_cast<const unsigned char*>(payload.data());
  const std::size_t len = payload.size();

  if (encoding == "rle") {
    std::size_t off = 0, i = 0;
    while (i < n) {
      if (off + 5 > len) throw IoError("truncated rle payload in " + path.string());
      const std::uint32_t count = get_u32(p + off);
      const double value = p[off + 4] ? 1.0 : 0.0;
      off += 5;
      if (i + count > n) throw IoError("rle overflow in " + path.string());
      for (std::uint32_t k = 0; k < count; ++k) grid.occupancy[i++] = value;
    }
  } else if (encoding == "raw") {
    if (len < 4 * n) throw IoError("truncated raw payload in " + path.string());
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint32_t bits = get_u32(p + 4 * i);
      float f;
      std::memcpy(&f, &bits, 4);
      grid.occupancy[i] = static_cast<double>(f);
    }
  } else {
    throw IoError("unknown voxel encoding '" + encoding + "'");
  }
  return grid;
}

// ---------------------------------------------------------------------------
// Hashing
// ---------------------------------------------------------------------------

std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t fnv1a(const std::string& s, std::uint64_t seed) {
  return fnv1a(s.data(), s.size(), seed);
}

std::uint64_t hash_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0)
    h = fnv1a(buf, static_cast<std::size_t>(in.gcount()), h);
  return h;
}

std::string hex64(std::uint64_t h) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = digits[h & 0xf];
    h >>= 4;
  }
  return out;
}

std::string format_double(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

}  // namespace metaforge
