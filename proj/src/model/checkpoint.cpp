#include "mat/model/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include <fmt/format.h>

#include "mat/error.hpp"

namespace mat {

namespace {

constexpr const char* kMagic = "MATCKPT";

void put_le32(std::string& out, float v) {
  std::uint32_t bits = std::bit_cast<std::uint32_t>(v);
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xFFu));
}

float get_le32(const char* p) {
  std::uint32_t bits = 0;
  for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[b])) << (8 * b);
  return std::bit_cast<float>(bits);
}

// Splits the header off the payload one line at a time.
class HeaderReader {
 public:
  explicit HeaderReader(const std::string& bytes) : bytes_(bytes) {}

  std::string line() {
    const auto nl = bytes_.find('\n', pos_);
    if (nl == std::string::npos) throw CheckpointTruncationError("checkpoint truncated inside the header");
    std::string out = bytes_.substr(pos_, nl - pos_);
    pos_ = nl + 1;
    return out;
  }

  // "<key> <value>" with the expected key.
  std::string field(const std::string& key) {
    const auto l = line();
    if (l.compare(0, key.size() + 1, key + " ") != 0) {
      throw CheckpointHeaderError(fmt::format("checkpoint header: expected '{}' line, found '{}'", key, l.substr(0, 40)));
    }
    return l.substr(key.size() + 1);
  }

  std::size_t position() const { return pos_; }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

std::uint64_t parse_uint(const std::string& text, const char* what) {
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size() || text.front() == '-') {
    throw CheckpointHeaderError(fmt::format("checkpoint header: bad {} '{}'", what, text));
  }
  return v;
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::string header = fmt::format("{}\nformat_version {}\nkind {}\nseed {}\nconfig {}\ntensors {}\n", kMagic,
                                   kCheckpointFormatVersion, ckpt.kind, ckpt.seed, ckpt.config_json,
                                   ckpt.tensors.size());
  std::size_t offset = 0;
  for (const auto& t : ckpt.tensors) {
    if (shape_size(t.shape) != t.values.size()) {
      throw DimensionError(fmt::format("checkpoint tensor '{}' shape/value mismatch", t.name));
    }
    header += fmt::format("{} {}", t.name, t.shape.size());
    for (auto e : t.shape) header += fmt::format(" {}", e);
    header += fmt::format(" {}\n", offset);
    offset += t.values.size();
  }
  header += fmt::format("payload_bytes {}\nend\n", offset * 4);
  std::string payload;
  payload.reserve(offset * 4);
  for (const auto& t : ckpt.tensors)
    for (float v : t.values) put_le32(payload, v);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(fmt::format("cannot write checkpoint '{}'", path.string()));
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw DataError(fmt::format("failed writing checkpoint '{}'", path.string()));
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(fmt::format("cannot open checkpoint '{}'", path.string()));
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.empty()) throw CheckpointTruncationError("checkpoint is empty");

  HeaderReader reader(bytes);
  if (reader.line() != kMagic) throw CheckpointHeaderError("not a checkpoint file (bad magic)");
  const auto version = parse_uint(reader.field("format_version"), "format version");
  if (version != static_cast<std::uint64_t>(kCheckpointFormatVersion)) {
    throw CheckpointHeaderError(fmt::format("unsupported checkpoint format version {}", version));
  }
  Checkpoint ckpt;
  ckpt.kind = reader.field("kind");
  ckpt.seed = parse_uint(reader.field("seed"), "seed");
  ckpt.config_json = reader.field("config");
  const auto count = parse_uint(reader.field("tensors"), "tensor count");

  std::size_t expected_offset = 0;
  for (std::uint64_t k = 0; k < count; ++k) {
    std::istringstream ls(reader.line());
    CheckpointTensor t;
    std::size_t rank = 0, offset = 0;
    if (!(ls >> t.name >> rank) || rank == 0) throw CheckpointHeaderError("checkpoint header: malformed tensor entry");
    t.shape.resize(rank);
    for (auto& e : t.shape) {
      if (!(ls >> e) || e == 0) throw CheckpointHeaderError(fmt::format("checkpoint header: bad shape for '{}'", t.name));
    }
    if (!(ls >> offset) || offset != expected_offset) {
      throw CheckpointHeaderError(fmt::format("checkpoint header: bad offset for '{}'", t.name));
    }
    expected_offset += shape_size(t.shape);
    ckpt.tensors.push_back(std::move(t));
  }
  const auto payload_bytes = parse_uint(reader.field("payload_bytes"), "payload size");
  if (payload_bytes != expected_offset * 4) {
    throw CheckpointHeaderError("checkpoint header: payload size disagrees with the tensor directory");
  }
  if (reader.line() != "end") throw CheckpointHeaderError("checkpoint header: missing 'end' line");

  const std::size_t start = reader.position();
  if (bytes.size() - start < payload_bytes) {
    throw CheckpointTruncationError(fmt::format("checkpoint truncated: payload has {} of {} bytes",
                                                bytes.size() - start, payload_bytes));
  }
  if (bytes.size() - start > payload_bytes) throw CheckpointHeaderError("checkpoint has trailing bytes");
  const char* p = bytes.data() + start;
  for (auto& t : ckpt.tensors) {
    t.values.resize(shape_size(t.shape));
    for (auto& v : t.values) {
      v = get_le32(p);
      p += 4;
      if (!std::isfinite(v)) throw CheckpointError(fmt::format("checkpoint tensor '{}' holds a non-finite value", t.name));
    }
  }
  return ckpt;
}

void verify_census(const Checkpoint& ckpt, const std::vector<TensorSpec>& expected) {
  const std::size_t n = std::max(ckpt.tensors.size(), expected.size());
  for (std::size_t k = 0; k < n; ++k) {
    if (k >= ckpt.tensors.size()) {
      throw CheckpointCensusError(fmt::format("census mismatch: checkpoint lacks tensor '{}'", expected[k].name));
    }
    const auto& t = ckpt.tensors[k];
    if (k >= expected.size()) {
      throw CheckpointCensusError(fmt::format("census mismatch: unexpected tensor '{}'", t.name));
    }
    if (t.name != expected[k].name || t.shape != expected[k].shape) {
      throw CheckpointCensusError(fmt::format("census mismatch at tensor '{}' {}: expected '{}' {}", t.name,
                                              shape_str(t.shape), expected[k].name, shape_str(expected[k].shape)));
    }
  }
}

void save_checkpoint(MATParams<float>& params, const MATConfig& cfg, const std::filesystem::path& path,
                     std::uint64_t seed) {
  Checkpoint ckpt{"mat", seed, to_json(cfg), checkpoint_tensors(params)};
  verify_census(ckpt, mat_census(cfg));
  write_checkpoint(path, ckpt);
}

namespace {

LoadedMAT load_into(const Checkpoint& ckpt, const MATConfig& cfg) {
  verify_census(ckpt, mat_census(cfg));
  LoadedMAT out{make_mat_params<float>(cfg), cfg, ckpt.seed};
  restore_tensors(ckpt, out.params);
  for (auto& t : out.params.tensors()) t.set_requires_grad(true);
  return out;
}

}  // namespace

LoadedMAT load_checkpoint(const std::filesystem::path& path) {
  const auto ckpt = read_checkpoint(path);
  if (ckpt.kind != "mat") throw CheckpointHeaderError(fmt::format("checkpoint holds a '{}' model, not mat", ckpt.kind));
  MATConfig cfg;
  try {
    cfg = mat_config_from_json(ckpt.config_json);
  } catch (const ConfigError& e) {
    throw CheckpointHeaderError(std::string("checkpoint config: ") + e.what());
  }
  return load_into(ckpt, cfg);
}

LoadedMAT load_checkpoint(const std::filesystem::path& path, const MATConfig& expected) {
  const auto ckpt = read_checkpoint(path);
  if (ckpt.kind != "mat") throw CheckpointHeaderError(fmt::format("checkpoint holds a '{}' model, not mat", ckpt.kind));
  return load_into(ckpt, expected);
}

}  // namespace mat
