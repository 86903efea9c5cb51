#include "pcup/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>

#include "pcup/io.hpp"

namespace pcup {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[4] = {'S', 'G', 'P', 'C'};

std::uint32_t checksum(const char* data, std::size_t n) {
  return static_cast<std::uint32_t>(crc32(0L, reinterpret_cast<const Bytef*>(data), static_cast<uInt>(n)));
}

template <class T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

void put_string(std::string& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out += s;
}

class Reader {
 public:
  Reader(const std::string& bytes, std::size_t end) : bytes_(bytes), end_(end) {}

  template <class T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::string get_string() {
    const auto n = get<std::uint32_t>();
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  void get_floats(std::vector<float>& out, std::size_t n) {
    if (n > (end_ - pos_) / sizeof(float)) fail(n * sizeof(float));
    out.resize(n);
    std::memcpy(out.data(), bytes_.data() + pos_, n * sizeof(float));
    pos_ += n * sizeof(float);
  }

  std::size_t position() const { return pos_; }

 private:
  void need(std::size_t n) {
    if (n > end_ - pos_) fail(n);
  }
  [[noreturn]] void fail(std::size_t n) const {
    throw CheckpointError("checkpoint truncated: need " + std::to_string(n) + " bytes at offset " +
                          std::to_string(pos_));
  }

  const std::string& bytes_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

}  // namespace

void Checkpoint::set_meta(const std::string& key, const std::string& value) {
  for (auto& [k, v] : meta) {
    if (k == key) {
      v = value;
      return;
    }
  }
  meta.emplace_back(key, value);
}

bool Checkpoint::has_meta(const std::string& key) const {
  for (const auto& kv : meta) {
    if (kv.first == key) return true;
  }
  return false;
}

const std::string& Checkpoint::meta_value(const std::string& key) const {
  for (const auto& kv : meta) {
    if (kv.first == key) return kv.second;
  }
  throw CheckpointError("checkpoint has no entry '" + key + "'");
}

void Checkpoint::add_tensor(const std::string& name, const Tensor& t) {
  add_tensor(name, t.shape(), t.to_vector());
}

void Checkpoint::add_tensor(const std::string& name, Shape shape, std::vector<float> values) {
  if (shape_numel(shape) != values.size()) throw ContractViolation("checkpoint tensor '" + name + "' size mismatch");
  tensors.push_back({name, std::move(shape), std::move(values)});
}

const NamedTensor* Checkpoint::find(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  std::string out(kMagic, 4);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.meta.size()));
  for (const auto& [k, v] : ckpt.meta) {
    put_string(out, k);
    put_string(out, v);
  }
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& t : ckpt.tensors) {
    put_string(out, t.name);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.shape.size()));
    for (const auto d : t.shape) put<std::uint64_t>(out, d);
    out.append(reinterpret_cast<const char*>(t.values.data()), t.values.size() * sizeof(float));
  }
  put<std::uint32_t>(out, checksum(out.data(), out.size()));
  return out;
}

Checkpoint parse_checkpoint(const std::string& bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw CheckpointError("not a checkpoint file (missing SGPC magic)");
  }
  const std::size_t body = bytes.size() - 4;
  std::uint32_t stored;
  std::memcpy(&stored, bytes.data() + body, 4);
  if (stored != checksum(bytes.data(), body)) throw CheckpointError("checkpoint checksum mismatch (file corrupt)");

  Reader in(bytes, body);
  in.get<std::uint32_t>();  // magic, already checked
  const auto version = in.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw CheckpointError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  }
  Checkpoint ckpt;
  const auto n_meta = in.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    std::string k = in.get_string();
    std::string v = in.get_string();
    ckpt.meta.emplace_back(std::move(k), std::move(v));
  }
  const auto n_tensors = in.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    NamedTensor t;
    t.name = in.get_string();
    const auto rank = in.get<std::uint32_t>();
    if (rank > 8) throw CheckpointError("tensor '" + t.name + "' has implausible rank " + std::to_string(rank));
    std::size_t numel = 1;
    for (std::uint32_t a = 0; a < rank; ++a) {
      t.shape.push_back(static_cast<std::size_t>(in.get<std::uint64_t>()));
      numel *= t.shape.back();
    }
    in.get_floats(t.values, numel);
    ckpt.tensors.push_back(std::move(t));
  }
  if (in.position() != body) throw CheckpointError("checkpoint has trailing bytes before the checksum");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  write_file_atomic(path, serialize_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  try {
    return parse_checkpoint(read_file(path));
  } catch (const CheckpointError& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
}

}  // namespace pcup
