#include "coad/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "coad/config.hpp"

namespace coad {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");
static_assert(sizeof(float) == 4);

template <typename U>
void put(std::string& out, U value) {
  char buf[sizeof(U)];
  std::memcpy(buf, &value, sizeof(U));
  out.append(buf, sizeof(U));
}

void put_string(std::string& out, const std::string& s) {
  put<std::uint64_t>(out, s.size());
  out += s;
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename U>
  U get(const std::string& what) {
    need(sizeof(U), what);
    U value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(U));
    pos_ += sizeof(U);
    return value;
  }

  std::string get_string(const std::string& what) {
    const auto n = get<std::uint64_t>(what + " length");
    need(n, what);
    std::string s(bytes_.substr(pos_, n));
    pos_ += n;
    return s;
  }

  void get_floats(float* dst, std::uint64_t count, const std::string& what) {
    if (count > (bytes_.size() - pos_) / sizeof(float)) {
      throw CheckpointError(CheckpointErrorCode::kTruncated,
                            "payload of parameter '" + what + "' ends early (" + std::to_string(count) +
                                " values expected, " + std::to_string((bytes_.size() - pos_) / sizeof(float)) +
                                " present)");
    }
    std::memcpy(dst, bytes_.data() + pos_, count * sizeof(float));
    pos_ += count * sizeof(float);
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::uint64_t n, const std::string& what) {
    if (n > bytes_.size() - pos_) throw CheckpointError(CheckpointErrorCode::kTruncated, "file ends inside " + what);
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

const char* to_string(CheckpointErrorCode code) {
  switch (code) {
    case CheckpointErrorCode::kBadMagic: return "bad magic";
    case CheckpointErrorCode::kVersionMismatch: return "version mismatch";
    case CheckpointErrorCode::kTruncated: return "truncated";
    case CheckpointErrorCode::kBadConfig: return "bad config block";
    case CheckpointErrorCode::kUnknownParameter: return "unknown parameter";
    case CheckpointErrorCode::kMissingParameter: return "missing parameter";
    case CheckpointErrorCode::kShapeMismatch: return "shape mismatch";
  }
  return "checkpoint error";
}

template <typename T>
std::string serialize_checkpoint(const CoADNet<T>& model) {
  std::string out(kCheckpointMagic, sizeof(kCheckpointMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  put_string(out, model_config_text(model.config()));
  const auto& entries = model.parameters().entries();
  put<std::uint64_t>(out, entries.size());
  for (const auto& p : entries) {
    put_string(out, p.name);
    put<std::uint64_t>(out, p.tensor.rank());
    for (auto e : p.tensor.shape()) put<std::uint64_t>(out, static_cast<std::uint64_t>(e));
    for (T v : p.tensor.data()) put<float>(out, static_cast<float>(v));
  }
  return out;
}

CheckpointData parse_checkpoint(std::string_view bytes) {
  if (bytes.size() < sizeof(kCheckpointMagic) || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) {
    throw CheckpointError(CheckpointErrorCode::kBadMagic, "file does not start with COAD");
  }
  Reader in(bytes.substr(4));
  CheckpointData data;
  data.version = in.get<std::uint32_t>("version");
  if (data.version != kCheckpointVersion) {
    throw CheckpointError(CheckpointErrorCode::kVersionMismatch, "file has version " + std::to_string(data.version) +
                                                                     ", expected " +
                                                                     std::to_string(kCheckpointVersion));
  }
  const std::string config_text = in.get_string("config block");
  try {
    data.config = apply_model_config(KeyValueConfig::parse(config_text, "checkpoint config"));
    data.config.validate();
  } catch (const ConfigError& e) {
    throw CheckpointError(CheckpointErrorCode::kBadConfig, e.what());
  }
  const auto count = in.get<std::uint64_t>("entry count");
  for (std::uint64_t i = 0; i < count; ++i) {
    CheckpointEntry e;
    e.name = in.get_string("name of entry " + std::to_string(i));
    const auto rank = in.get<std::uint64_t>("rank of '" + e.name + "'");
    if (rank > 8) throw CheckpointError(CheckpointErrorCode::kShapeMismatch, "implausible rank for '" + e.name + "'");
    std::uint64_t numel = 1;
    for (std::uint64_t r = 0; r < rank; ++r) {
      const auto extent = in.get<std::uint64_t>("shape of '" + e.name + "'");
      e.shape.push_back(static_cast<std::int64_t>(extent));
      numel *= extent;
    }
    if (numel > in.remaining() / sizeof(float)) {
      throw CheckpointError(CheckpointErrorCode::kTruncated,
                            "payload of parameter '" + e.name + "' ends early (" + std::to_string(numel) +
                                " values expected, " + std::to_string(in.remaining() / sizeof(float)) + " present)");
    }
    e.values.resize(numel);
    in.get_floats(e.values.data(), numel, e.name);
    data.entries.push_back(std::move(e));
  }
  return data;
}

template <typename T>
void restore_parameters(CoADNet<T>& model, const CheckpointData& data) {
  auto& params = model.parameters();
  std::vector<bool> seen(params.entries().size(), false);
  for (const auto& e : data.entries) {
    Parameter<T>* p = params.find(e.name);
    if (!p) throw CheckpointError(CheckpointErrorCode::kUnknownParameter, "'" + e.name + "' is not part of the model");
    if (p->tensor.shape() != e.shape) {
      throw CheckpointError(CheckpointErrorCode::kShapeMismatch, "'" + e.name + "' is " + shape_str(e.shape) +
                                                                     " in the file but " +
                                                                     shape_str(p->tensor.shape()) + " in the model");
    }
    auto dst = p->tensor.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<T>(e.values[i]);
    seen[static_cast<std::size_t>(p - params.entries().data())] = true;
  }
  for (std::size_t i = 0; i < seen.size(); ++i) {
    if (!seen[i]) {
      throw CheckpointError(CheckpointErrorCode::kMissingParameter, "'" + params.entries()[i].name + "' not in file");
    }
  }
}

std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

template <typename T>
void save_checkpoint(const CoADNet<T>& model, const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(model);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  // write to a sibling and rename so a crash never leaves a half-written file
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot create " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

CheckpointData read_checkpoint(const std::filesystem::path& path) {
  try {
    return parse_checkpoint(read_file_bytes(path));
  } catch (const CheckpointError& e) {
    throw CheckpointError(e.code(), path.string() + ": " + e.detail());
  }
}

template <typename T>
CoADNet<T> load_checkpoint(const std::filesystem::path& path) {
  const CheckpointData data = read_checkpoint(path);
  CoADNet<T> model(data.config);
  restore_parameters(model, data);
  return model;
}

#define COAD_INSTANTIATE_CHECKPOINT(T)                                           \
  template std::string serialize_checkpoint(const CoADNet<T>&);                  \
  template void restore_parameters(CoADNet<T>&, const CheckpointData&);          \
  template void save_checkpoint(const CoADNet<T>&, const std::filesystem::path&); \
  template CoADNet<T> load_checkpoint<T>(const std::filesystem::path&);

COAD_INSTANTIATE_CHECKPOINT(float)
COAD_INSTANTIATE_CHECKPOINT(double)

}  // namespace coad
