#include "pcup/io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <optional>
#include <sstream>

namespace pcup {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

namespace fs = std::filesystem;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file_atomic(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw IoError("short write to '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

namespace {

std::string fmt_float(float v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(v));
  return buf;
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

std::optional<float> parse_float(std::string_view tok) {
  float v = 0.0f;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) return std::nullopt;
  return v;
}

// Splits text into lines, tracking 1-based numbers.
class LineReader {
 public:
  explicit LineReader(std::string_view text) : text_(text) {}
  bool next(std::string_view& line) {
    if (pos_ >= text_.size()) return false;
    std::size_t end = text_.find('\n', pos_);
    if (end == std::string_view::npos) end = text_.size();
    line = text_.substr(pos_, end - pos_);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos_ = end + 1;
    ++number_;
    return true;
  }
  std::size_t number() const { return number_; }
  std::size_t offset() const { return std::min(pos_, text_.size()); }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t number_ = 0;
};

enum class ScalarType { kInt8, kUint8, kInt16, kUint16, kInt32, kUint32, kFloat32, kFloat64 };

std::optional<ScalarType> scalar_type(std::string_view name) {
  if (name == "char" || name == "int8") return ScalarType::kInt8;
  if (name == "uchar" || name == "uint8") return ScalarType::kUint8;
  if (name == "short" || name == "int16") return ScalarType::kInt16;
  if (name == "ushort" || name == "uint16") return ScalarType::kUint16;
  if (name == "int" || name == "int32") return ScalarType::kInt32;
  if (name == "uint" || name == "uint32") return ScalarType::kUint32;
  if (name == "float" || name == "float32") return ScalarType::kFloat32;
  if (name == "double" || name == "float64") return ScalarType::kFloat64;
  return std::nullopt;
}

std::size_t scalar_size(ScalarType t) {
  switch (t) {
    case ScalarType::kInt8:
    case ScalarType::kUint8: return 1;
    case ScalarType::kInt16:
    case ScalarType::kUint16: return 2;
    case ScalarType::kInt32:
    case ScalarType::kUint32:
    case ScalarType::kFloat32: return 4;
    case ScalarType::kFloat64: return 8;
  }
  return 0;
}

template <class T>
T load_le(const char* p) {
  T v;
  std::memcpy(&v, p, sizeof v);
  return v;
}

double load_scalar(ScalarType t, const char* p) {
  switch (t) {
    case ScalarType::kInt8: return load_le<std::int8_t>(p);
    case ScalarType::kUint8: return load_le<std::uint8_t>(p);
    case ScalarType::kInt16: return load_le<std::int16_t>(p);
    case ScalarType::kUint16: return load_le<std::uint16_t>(p);
    case ScalarType::kInt32: return load_le<std::int32_t>(p);
    case ScalarType::kUint32: return load_le<std::uint32_t>(p);
    case ScalarType::kFloat32: return load_le<float>(p);
    case ScalarType::kFloat64: return load_le<double>(p);
  }
  return 0.0;
}

struct PlyProperty {
  std::string name;
  ScalarType type;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> properties;
  bool has_list = false;
};

// Float properties are read exactly; others are converted through double.
float to_float(ScalarType t, const char* p) {
  if (t == ScalarType::kFloat32) return load_le<float>(p);
  return static_cast<float>(load_scalar(t, p));
}

}  // namespace

CloudFormat format_for_path(const fs::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".xyz" || ext == ".txt") return CloudFormat::kXyz;
  return CloudFormat::kPlyBinary;
}

std::string format_ply(const PointCloud& cloud, bool binary) {
  const bool attr = cloud.has_attribute();
  std::string out = "ply\n";
  out += binary ? "format binary_little_endian 1.0\n" : "format ascii 1.0\n";
  out += "element vertex " + std::to_string(cloud.size()) + "\n";
  out += "property float x\nproperty float y\nproperty float z\n";
  if (attr) out += "property float error\n";
  out += "end_header\n";
  const auto xyz = cloud.coords();
  const auto err = cloud.attribute();
  if (binary) {
    const std::size_t stride = attr ? 4 : 3;
    std::string body(cloud.size() * stride * sizeof(float), '\0');
    char* p = body.data();
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      std::memcpy(p, &xyz[3 * i], 3 * sizeof(float));
      p += 3 * sizeof(float);
      if (attr) {
        std::memcpy(p, &err[i], sizeof(float));
        p += sizeof(float);
      }
    }
    out += body;
  } else {
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      out += fmt_float(xyz[3 * i]) + " " + fmt_float(xyz[3 * i + 1]) + " " + fmt_float(xyz[3 * i + 2]);
      if (attr) out += " " + fmt_float(err[i]);
      out += "\n";
    }
  }
  return out;
}

std::string format_xyz(const PointCloud& cloud) {
  std::string out;
  const auto xyz = cloud.coords();
  const auto err = cloud.attribute();
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    out += fmt_float(xyz[3 * i]) + " " + fmt_float(xyz[3 * i + 1]) + " " + fmt_float(xyz[3 * i + 2]);
    if (cloud.has_attribute()) out += " " + fmt_float(err[i]);
    out += "\n";
  }
  return out;
}

PointCloud parse_ply(const std::string& bytes, const std::string& origin) {
  LineReader reader(bytes);
  std::string_view line;
  auto fail = [&](const std::string& what) -> ParseError {
    return ParseError(origin + ":" + std::to_string(reader.number()) + ": " + what);
  };
  if (!reader.next(line) || line != "ply") throw fail("missing 'ply' magic");

  std::optional<bool> binary;
  std::vector<PlyElement> elements;
  bool header_done = false;
  while (reader.next(line)) {
    const auto tok = split_ws(line);
    if (tok.empty()) continue;
    if (tok[0] == "comment" || tok[0] == "obj_info") continue;
    if (tok[0] == "end_header") {
      header_done = true;
      break;
    }
    if (tok[0] == "format") {
      if (tok.size() != 3) throw fail("malformed format line");
      if (tok[1] == "ascii") {
        binary = false;
      } else if (tok[1] == "binary_little_endian") {
        binary = true;
      } else if (tok[1] == "binary_big_endian") {
        throw UnsupportedFormat(origin + ": binary_big_endian PLY is not supported");
      } else {
        throw fail("unknown format '" + std::string(tok[1]) + "'");
      }
    } else if (tok[0] == "element") {
      if (tok.size() != 3) throw fail("malformed element line");
      PlyElement e;
      e.name = std::string(tok[1]);
      std::size_t count = 0;
      const auto [ptr, ec] = std::from_chars(tok[2].data(), tok[2].data() + tok[2].size(), count);
      if (ec != std::errc() || ptr != tok[2].data() + tok[2].size()) throw fail("bad element count");
      e.count = count;
      elements.push_back(std::move(e));
    } else if (tok[0] == "property") {
      if (elements.empty()) throw fail("property before any element");
      if (tok.size() >= 2 && tok[1] == "list") {
        elements.back().has_list = true;
        continue;
      }
      if (tok.size() != 3) throw fail("malformed property line");
      const auto type = scalar_type(tok[1]);
      if (!type) throw fail("unknown property type '" + std::string(tok[1]) + "'");
      elements.back().properties.push_back({std::string(tok[2]), *type});
    } else {
      throw fail("unexpected header keyword '" + std::string(tok[0]) + "'");
    }
  }
  if (!header_done) throw fail("header has no end_header");
  if (!binary) throw fail("header has no format line");

  // Only vertices are read; other non-empty elements must come after them
  // and are ignored.
  const PlyElement* vertex = nullptr;
  for (const auto& e : elements) {
    if (e.name == "vertex") {
      vertex = &e;
      break;
    }
    if (e.count > 0) throw UnsupportedFormat(origin + ": element '" + e.name + "' precedes vertex data");
  }
  if (!vertex) throw UnsupportedFormat(origin + ": no vertex element");
  if (vertex->has_list) throw UnsupportedFormat(origin + ": list properties on vertices are not supported");
  int ix = -1, iy = -1, iz = -1, ie = -1;
  for (std::size_t k = 0; k < vertex->properties.size(); ++k) {
    const auto& name = vertex->properties[k].name;
    const int idx = static_cast<int>(k);
    if (name == "x") ix = idx;
    if (name == "y") iy = idx;
    if (name == "z") iz = idx;
    if (name == "error") ie = idx;
  }
  if (ix < 0 || iy < 0 || iz < 0) throw UnsupportedFormat(origin + ": vertex element lacks x, y or z");

  const std::size_t n = vertex->count;
  const auto& props = vertex->properties;
  std::vector<float> xyz(3 * n);
  std::vector<float> err(ie >= 0 ? n : 0);
  if (*binary) {
    std::vector<std::size_t> offsets(props.size());
    std::size_t stride = 0;
    for (std::size_t k = 0; k < props.size(); ++k) {
      offsets[k] = stride;
      stride += scalar_size(props[k].type);
    }
    const std::size_t start = reader.offset();
    if (bytes.size() < start + n * stride) {
      throw ParseError(origin + ": byte " + std::to_string(bytes.size()) + ": truncated vertex data (need " +
                       std::to_string(n * stride) + " bytes after offset " + std::to_string(start) + ")");
    }
    const char* base = bytes.data() + start;
    for (std::size_t i = 0; i < n; ++i) {
      const char* row = base + i * stride;
      xyz[3 * i] = to_float(props[ix].type, row + offsets[ix]);
      xyz[3 * i + 1] = to_float(props[iy].type, row + offsets[iy]);
      xyz[3 * i + 2] = to_float(props[iz].type, row + offsets[iz]);
      if (ie >= 0) err[i] = to_float(props[ie].type, row + offsets[ie]);
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      if (!reader.next(line)) throw fail("expected " + std::to_string(n) + " vertex rows, got " + std::to_string(i));
      const auto tok = split_ws(line);
      if (tok.size() != props.size()) {
        throw fail("vertex row has " + std::to_string(tok.size()) + " values, expected " +
                   std::to_string(props.size()));
      }
      std::vector<float> vals(tok.size());
      for (std::size_t k = 0; k < tok.size(); ++k) {
        const auto v = parse_float(tok[k]);
        if (!v) throw fail("bad number '" + std::string(tok[k]) + "'");
        vals[k] = *v;
      }
      xyz[3 * i] = vals[ix];
      xyz[3 * i + 1] = vals[iy];
      xyz[3 * i + 2] = vals[iz];
      if (ie >= 0) err[i] = vals[ie];
    }
  }
  for (const float v : xyz) {
    if (!std::isfinite(v)) throw ParseError(origin + ": non-finite vertex coordinate");
  }
  PointCloud cloud(std::move(xyz));
  if (ie >= 0) cloud.set_attribute(std::move(err));
  return cloud;
}

PointCloud parse_xyz(const std::string& text, const std::string& origin) {
  LineReader reader(text);
  std::string_view line;
  std::vector<float> xyz, err;
  std::optional<std::size_t> columns;
  while (reader.next(line)) {
    const auto hash = line.find('#');
    if (hash != std::string_view::npos) line = line.substr(0, hash);
    const auto tok = split_ws(line);
    if (tok.empty()) continue;
    const auto where = origin + ":" + std::to_string(reader.number()) + ": ";
    if (tok.size() != 3 && tok.size() != 4) {
      throw ParseError(where + "expected 3 or 4 values, got " + std::to_string(tok.size()));
    }
    if (columns && *columns != tok.size()) throw ParseError(where + "inconsistent column count");
    columns = tok.size();
    for (std::size_t k = 0; k < tok.size(); ++k) {
      const auto v = parse_float(tok[k]);
      if (!v || !std::isfinite(*v)) throw ParseError(where + "bad number '" + std::string(tok[k]) + "'");
      (k < 3 ? xyz : err).push_back(*v);
    }
  }
  PointCloud cloud(std::move(xyz));
  if (columns == 4u) cloud.set_attribute(std::move(err));
  return cloud;
}

void write_cloud(const fs::path& path, const PointCloud& cloud, CloudFormat format) {
  switch (format) {
    case CloudFormat::kPlyAscii: write_file_atomic(path, format_ply(cloud, false)); break;
    case CloudFormat::kPlyBinary: write_file_atomic(path, format_ply(cloud, true)); break;
    case CloudFormat::kXyz: write_file_atomic(path, format_xyz(cloud)); break;
  }
}

void write_cloud(const fs::path& path, const PointCloud& cloud) {
  write_cloud(path, cloud, format_for_path(path));
}

PointCloud read_cloud(const fs::path& path) {
  const std::string bytes = read_file(path);
  if (bytes.rfind("ply", 0) == 0 && (bytes.size() == 3 || bytes[3] == '\n' || bytes[3] == '\r')) {
    return parse_ply(bytes, path.string());
  }
  if (path.extension() == ".ply") throw ParseError(path.string() + ":1: missing 'ply' magic");
  return parse_xyz(bytes, path.string());
}

void write_pgm(const fs::path& path, const GrayImage& image) {
  if (image.pixels.size() != image.width * image.height) {
    throw ContractViolation("image pixel count does not match its dimensions");
  }
  std::string out = "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  for (const float v : image.pixels) {
    const float c = std::clamp(v, 0.0f, 1.0f);
    out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(c * 255.0f))));
  }
  write_file_atomic(path, out);
}

GrayImage read_pgm(const fs::path& path) {
  const std::string bytes = read_file(path);
  const std::string origin = path.string();
  std::size_t pos = 0;
  // Header tokens are separated by whitespace; '#' starts a comment.
  auto next_token = [&]() -> std::string {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos])) && bytes[pos] != '#') ++pos;
    if (start == pos) throw ParseError(origin + ": byte " + std::to_string(pos) + ": truncated PGM header");
    return bytes.substr(start, pos - start);
  };
  auto next_number = [&]() -> std::size_t {
    const auto tok = next_token();
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size()) {
      throw ParseError(origin + ": byte " + std::to_string(pos) + ": bad PGM number '" + tok + "'");
    }
    return v;
  };
  const auto magic = next_token();
  if (magic != "P5" && magic != "P2") throw UnsupportedFormat(origin + ": not a P5/P2 PGM file");
  GrayImage img;
  img.width = next_number();
  img.height = next_number();
  const std::size_t maxval = next_number();
  if (img.width == 0 || img.height == 0 || maxval == 0 || maxval > 65535) {
    throw ParseError(origin + ": invalid PGM dimensions or maxval");
  }
  const std::size_t n = img.width * img.height;
  img.pixels.resize(n);
  const auto scale = static_cast<float>(maxval);
  if (magic == "P5") {
    ++pos;  // single whitespace byte after maxval
    const std::size_t width = maxval > 255 ? 2 : 1;
    if (bytes.size() < pos + n * width) {
      throw ParseError(origin + ": byte " + std::to_string(bytes.size()) + ": truncated PGM raster");
    }
    for (std::size_t i = 0; i < n; ++i) {
      const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + pos + i * width);
      const unsigned v = width == 2 ? (static_cast<unsigned>(p[0]) << 8) | p[1] : p[0];
      img.pixels[i] = static_cast<float>(v) / scale;
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) img.pixels[i] = static_cast<float>(next_number()) / scale;
  }
  for (auto& v : img.pixels) v = std::min(v, 1.0f);
  return img;
}

}  // namespace pcup
