#pragma once

#include <filesystem>
#include <utility>
#include <vector>

#include "stf/meta.hpp"
#include "stf/tensor.hpp"

namespace stf {

// Session archive: a directory holding `meta.json` and `signal.bin`
// (little-endian float32, channel-major). Round-trips are bit-exact.
void save_session(const SessionMeta& meta, const Tensor<float>& signal,
                  const std::filesystem::path& dir);
std::pair<SessionMeta, Tensor<float>> load_session(const std::filesystem::path& dir);

struct LabelRow {
  int64_t segment_index = 0;
  int64_t start_sample = 0;
  int label = 0;
};

void save_labels(const std::filesystem::path& csv_path, const std::vector<LabelRow>& rows);
std::vector<LabelRow> load_labels(const std::filesystem::path& csv_path);

// Lists subdirectories of `root` that contain a meta.json, sorted by name.
std::vector<std::filesystem::path> list_session_dirs(const std::filesystem::path& root);

}  // namespace stf
