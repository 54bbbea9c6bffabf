#pragma once

#include <array>
#include <string>
#include <unordered_set>
#include <vector>

#include "stf/common.hpp"

namespace stf {

// Spatial granularity used independently for token encoding and masking.
enum class Scale { channels, parcels, lobes };

inline std::string to_string(Scale s) {
  switch (s) {
    case Scale::channels: return "channels";
    case Scale::parcels: return "parcels";
    case Scale::lobes: return "lobes";
  }
  return "?";
}

inline Scale scale_from_string(const std::string& s) {
  if (s == "channels") return Scale::channels;
  if (s == "parcels") return Scale::parcels;
  if (s == "lobes") return Scale::lobes;
  throw Error::validation("unknown spatial scale '" + s + "' (expected channels|parcels|lobes)");
}

constexpr int kLpiMax = 200;  // LPI coordinates are integers in [0, 200]

struct ChannelMeta {
  std::string channel_id;
  std::array<int, 3> lpi{0, 0, 0};
  std::string parcel_id;
  std::string lobe_id;

  void validate() const {
    for (int v : lpi)
      if (v < 0 || v > kLpiMax)
        throw Error::validation("channel " + channel_id + ": LPI coordinate " + std::to_string(v) +
                                " outside [0," + std::to_string(kLpiMax) + "]");
    if (parcel_id.empty()) throw Error::validation("channel " + channel_id + ": empty parcel_id");
    if (lobe_id.empty()) throw Error::validation("channel " + channel_id + ": empty lobe_id");
  }
};

struct SessionMeta {
  std::string subject_id;
  std::string session_id;
  double sample_rate_hz = 0.0;
  std::vector<ChannelMeta> channels;  // canonical order for all arrays of this session

  std::string key() const { return subject_id + "/" + session_id; }

  void validate() const {
    if (sample_rate_hz <= 0.0) throw Error::validation("session " + key() + ": non-positive sample rate");
    std::unordered_set<std::string> ids;
    for (const ChannelMeta& c : channels) {
      c.validate();
      if (!ids.insert(c.channel_id).second)
        throw Error::validation("session " + key() + ": duplicate channel_id " + c.channel_id);
    }
  }
};

}  // namespace stf
