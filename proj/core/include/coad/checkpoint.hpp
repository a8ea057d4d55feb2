#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "coad/error.hpp"
#include "coad/model.hpp"

namespace coad {

inline constexpr char kCheckpointMagic[4] = {'C', 'O', 'A', 'D'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class CheckpointErrorCode {
  kBadMagic,
  kVersionMismatch,
  kTruncated,
  kBadConfig,
  kUnknownParameter,
  kMissingParameter,
  kShapeMismatch,
};
const char* to_string(CheckpointErrorCode code);

class CheckpointError : public Error {
 public:
  CheckpointError(CheckpointErrorCode code, const std::string& message)
      : Error(std::string(to_string(code)) + ": " + message), code_(code), detail_(message) {}
  CheckpointErrorCode code() const { return code_; }
  const std::string& detail() const { return detail_; }

 private:
  CheckpointErrorCode code_;
  std::string detail_;
};

struct CheckpointEntry {
  std::string name;
  Shape shape;
  std::vector<float> values;
};

struct CheckpointData {
  std::uint32_t version = kCheckpointVersion;
  ModelConfig config;
  std::vector<CheckpointEntry> entries;
};

// Layout, all integers little-endian:
//   "COAD" | u32 version | u64 n + n bytes model config text | u64 entry count |
//   per entry: u64 n + name | u64 rank | rank x u64 extent | numel x f32
template <typename T>
std::string serialize_checkpoint(const CoADNet<T>& model);
CheckpointData parse_checkpoint(std::string_view bytes);

// Copies every entry into the model; names and shapes must match exactly.
template <typename T>
void restore_parameters(CoADNet<T>& model, const CheckpointData& data);

template <typename T>
void save_checkpoint(const CoADNet<T>& model, const std::filesystem::path& path);
template <typename T>
CoADNet<T> load_checkpoint(const std::filesystem::path& path);

std::string read_file_bytes(const std::filesystem::path& path);

// parse_checkpoint on a file; errors carry the file name.
CheckpointData read_checkpoint(const std::filesystem::path& path);

}  // namespace coad
