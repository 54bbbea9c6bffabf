#pragma once

#include <algorithm>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "stf/meta.hpp"

namespace stf {

// Category vocabulary for one spatial scale. The channels scale has three
// dimensions (the LPI axes, 201 categories each); parcels and lobes have a
// single dimension listing the distinct ids across all registered sessions.
struct SpatialVocab {
  Scale scale = Scale::channels;
  std::vector<std::vector<std::string>> dims;

  int n_dims() const { return int(dims.size()); }
  int64_t table_size(int w) const { return int64_t(dims[size_t(w)].size()); }

  // Per-dimension category indices for a channel. Throws a vocabulary
  // error naming the channel and dimension when a category is unknown.
  std::vector<int64_t> indices_for(const ChannelMeta& ch) const {
    std::vector<int64_t> idx;
    if (scale == Scale::channels) {
      for (int w = 0; w < 3; ++w) {
        int v = ch.lpi[size_t(w)];
        if (v < 0 || v > kLpiMax)
          throw Error::vocabulary("channel " + ch.channel_id + ": coordinate dimension " +
                                  std::to_string(w) + " value " + std::to_string(v) + " out of range");
        idx.push_back(v);
      }
      return idx;
    }
    const std::string& cat = scale == Scale::parcels ? ch.parcel_id : ch.lobe_id;
    auto it = index_.find(cat);
    if (it == index_.end())
      throw Error::vocabulary("channel " + ch.channel_id + ": unknown " + to_string(scale) +
                              " category '" + cat + "' in dimension 0");
    idx.push_back(it->second);
    return idx;
  }

  void rebuild_index() {
    index_.clear();
    if (scale == Scale::channels) return;
    const auto& cats = dims[0];
    for (size_t i = 0; i < cats.size(); ++i) index_[cats[i]] = int64_t(i);
  }

 private:
  std::unordered_map<std::string, int64_t> index_;
};

inline SpatialVocab build_spatial_vocab(const std::vector<SessionMeta>& sessions, Scale scale) {
  if (sessions.empty()) throw Error::validation("build_spatial_vocab: no sessions given");
  SpatialVocab v;
  v.scale = scale;
  if (scale == Scale::channels) {
    std::vector<std::string> axis;
    axis.reserve(kLpiMax + 1);
    for (int i = 0; i <= kLpiMax; ++i) axis.push_back(std::to_string(i));
    v.dims = {axis, axis, axis};
    for (const SessionMeta& s : sessions)
      for (const ChannelMeta& c : s.channels)
        for (int coord : c.lpi)
          if (coord < 0 || coord > kLpiMax)
            throw Error::validation("channel " + c.channel_id + " in session " + s.key() +
                                    ": LPI coordinate " + std::to_string(coord) + " outside [0," +
                                    std::to_string(kLpiMax) + "]");
  } else {
    std::set<std::string> cats;
    for (const SessionMeta& s : sessions)
      for (const ChannelMeta& c : s.channels)
        cats.insert(scale == Scale::parcels ? c.parcel_id : c.lobe_id);
    v.dims = {std::vector<std::string>(cats.begin(), cats.end())};
  }
  v.rebuild_index();
  return v;
}

}  // namespace stf
