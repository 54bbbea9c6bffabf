#include "stf/session_io.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace stf {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

void save_session(const SessionMeta& meta, const Tensor<float>& signal, const fs::path& dir) {
  meta.validate();
  if (signal.rank() != 2 || signal.dim(0) != int64_t(meta.channels.size()))
    throw Error::structural("save_session: signal shape " + shape_str(signal.shape) +
                            " does not match " + std::to_string(meta.channels.size()) + " channels");
  fs::create_directories(dir);

  ordered_json j;
  j["subject_id"] = meta.subject_id;
  j["session_id"] = meta.session_id;
  j["sample_rate_hz"] = meta.sample_rate_hz;
  j["channels"] = ordered_json::array();
  for (const ChannelMeta& c : meta.channels) {
    ordered_json ch;
    ch["channel_id"] = c.channel_id;
    ch["lpi"] = {c.lpi[0], c.lpi[1], c.lpi[2]};
    ch["parcel_id"] = c.parcel_id;
    ch["lobe_id"] = c.lobe_id;
    j["channels"].push_back(ch);
  }
  {
    std::ofstream out(dir / "meta.json");
    if (!out) throw Error::io("save_session: cannot write " + (dir / "meta.json").string());
    out << j.dump(2) << "\n";
  }
  {
    std::ofstream out(dir / "signal.bin", std::ios::binary);
    if (!out) throw Error::io("save_session: cannot write " + (dir / "signal.bin").string());
    out.write(reinterpret_cast<const char*>(signal.data.data()),
              std::streamsize(signal.data.size() * sizeof(float)));
  }
}

std::pair<SessionMeta, Tensor<float>> load_session(const fs::path& dir) {
  const fs::path meta_path = dir / "meta.json";
  std::ifstream in(meta_path);
  if (!in) throw Error::io("load_session: cannot open " + meta_path.string());
  ordered_json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw Error::format("load_session: malformed meta.json in " + dir.string() + ": " + e.what());
  }

  SessionMeta meta;
  try {
    meta.subject_id = j.at("subject_id").get<std::string>();
    meta.session_id = j.at("session_id").get<std::string>();
    meta.sample_rate_hz = j.at("sample_rate_hz").get<double>();
    for (const auto& ch : j.at("channels")) {
      ChannelMeta c;
      c.channel_id = ch.at("channel_id").get<std::string>();
      auto lpi = ch.at("lpi");
      if (!lpi.is_array() || lpi.size() != 3)
        throw Error::format("load_session: lpi must be a 3-element array");
      for (int w = 0; w < 3; ++w) c.lpi[size_t(w)] = lpi[size_t(w)].get<int>();
      c.parcel_id = ch.at("parcel_id").get<std::string>();
      c.lobe_id = ch.at("lobe_id").get<std::string>();
      meta.channels.push_back(std::move(c));
    }
  } catch (const ordered_json::exception& e) {
    throw Error::format("load_session: missing/invalid field in meta.json: " + std::string(e.what()));
  }
  meta.validate();

  const fs::path sig_path = dir / "signal.bin";
  std::ifstream sig(sig_path, std::ios::binary);
  if (!sig) throw Error::io("load_session: cannot open " + sig_path.string());
  sig.seekg(0, std::ios::end);
  int64_t bytes = int64_t(sig.tellg());
  sig.seekg(0);
  int64_t C = int64_t(meta.channels.size());
  int64_t row_bytes = C * int64_t(sizeof(float));
  if (C == 0 || bytes == 0 || bytes % row_bytes != 0)
    throw Error::format("load_session: signal.bin has " + std::to_string(bytes) +
                        " bytes, not a multiple of " + std::to_string(row_bytes) +
                        " (C=" + std::to_string(C) + " float32 channels); corrupt at byte offset " +
                        std::to_string(bytes - bytes % row_bytes));
  int64_t T = bytes / row_bytes;
  Tensor<float> signal = Tensor<float>::zeros({C, T});
  sig.read(reinterpret_cast<char*>(signal.data.data()), std::streamsize(bytes));
  if (!sig) throw Error::format("load_session: short read from " + sig_path.string());
  return {std::move(meta), std::move(signal)};
}

void save_labels(const fs::path& csv_path, const std::vector<LabelRow>& rows) {
  std::ofstream out(csv_path);
  if (!out) throw Error::io("save_labels: cannot write " + csv_path.string());
  out << "segment_index,start_sample,label\n";
  for (const LabelRow& r : rows)
    out << r.segment_index << "," << r.start_sample << "," << r.label << "\n";
}

std::vector<LabelRow> load_labels(const fs::path& csv_path) {
  std::ifstream in(csv_path);
  if (!in) throw Error::io("load_labels: cannot open " + csv_path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error::format("load_labels: empty file " + csv_path.string());
  if (line != "segment_index,start_sample,label")
    throw Error::format("load_labels: unexpected header '" + line + "' in " + csv_path.string());
  std::vector<LabelRow> rows;
  int64_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    LabelRow r;
    char c1 = 0, c2 = 0;
    if (!(ss >> r.segment_index >> c1 >> r.start_sample >> c2 >> r.label) || c1 != ',' || c2 != ',')
      throw Error::format("load_labels: bad row at line " + std::to_string(lineno) + " in " +
                          csv_path.string());
    rows.push_back(r);
  }
  return rows;
}

std::vector<fs::path> list_session_dirs(const fs::path& root) {
  if (!fs::exists(root)) throw Error::io("list_session_dirs: no such directory " + root.string());
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(root))
    if (entry.is_directory() && fs::exists(entry.path() / "meta.json")) dirs.push_back(entry.path());
  std::sort(dirs.begin(), dirs.end());
  return dirs;
}

}  // namespace stf
