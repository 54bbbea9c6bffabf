#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "stf/meta.hpp"
#include "stf/segments.hpp"
#include "stf/tensor.hpp"

namespace stf {

// Hierarchical synthetic session: channel = parcel latent (lobe latent +
// parcel oscillation) * channel gain + channel oscillation + white noise.
// Positive events multiply the event parcels' latent amplitude.
struct GenConfig {
  int n_channels = 64;
  int n_parcels = 8;
  int n_lobes = 4;
  double sample_rate_hz = 2048.0;
  double duration_s = 60.0;
  uint64_t seed = 0;
  double snr_db = 0.0;  // structured-signal power over noise power; +inf = noise-free
  std::vector<int> event_parcels = {0, 1};
  double event_gain = 2.0;
  std::array<double, 2> lobe_band{1.0, 4.0};
  std::array<double, 2> parcel_band{4.0, 12.0};
  std::array<double, 2> channel_band{12.0, 40.0};
  std::string subject_id = "S00";
  std::string session_id = "sess00";

  void validate() const;
};

struct EventInterval {
  int64_t start = 0;  // inclusive sample index
  int64_t end = 0;    // exclusive
};

struct GroundTruth {
  std::vector<int> parcel_of_channel;
  std::vector<int> lobe_of_parcel;
  std::vector<EventInterval> events;
  std::vector<std::vector<float>> lobe_latents;    // per lobe, length T
  std::vector<std::vector<float>> parcel_latents;  // per parcel, length T (without event gain)

  bool event_active(int64_t sample) const {
    for (const EventInterval& e : events)
      if (sample >= e.start && sample < e.end) return true;
    return false;
  }

  // Fraction of [start, start+len) covered by events.
  double event_fraction(int64_t start, int64_t len) const;
};

struct GeneratedSession {
  SessionMeta meta;
  Tensor<float> signal;  // C x T
  GroundTruth truth;
};

GeneratedSession generate_session(const GenConfig& cfg);

// Labels each segment: positive iff events cover more than half of its
// samples. With purity_drop, segments with 20%..80% coverage get no label.
void label_segments(const GroundTruth& truth, std::vector<Segment>& segments,
                    bool purity_drop = false);

}  // namespace stf
