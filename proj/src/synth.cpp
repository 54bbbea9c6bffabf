#include "stf/synth.hpp"

#include <cmath>
#include <limits>

namespace stf {

namespace {

constexpr double kTwoPi = 6.28318530717958647692;

// Sum of 3 random-phase sinusoids within a band, scaled to unit variance.
struct BandOscillator {
  std::array<double, 3> freq{}, phase{};
  double amp = 0.0;

  BandOscillator(const std::array<double, 2>& band, Rng& rng) {
    for (int k = 0; k < 3; ++k) {
      freq[size_t(k)] = rng.uniform(band[0], band[1]);
      phase[size_t(k)] = rng.uniform(0.0, kTwoPi);
    }
    amp = std::sqrt(2.0 / 3.0);
  }

  double at(double t_sec) const {
    double v = 0.0;
    for (int k = 0; k < 3; ++k) v += std::sin(kTwoPi * freq[size_t(k)] * t_sec + phase[size_t(k)]);
    return amp * v;
  }
};

const char* kLobeNames[] = {"frontal", "temporal", "parietal", "occipital",
                            "insula",  "cingulate", "limbic",  "sensorimotor"};

std::string lobe_name(int i) {
  if (i < int(sizeof(kLobeNames) / sizeof(kLobeNames[0]))) return kLobeNames[size_t(i)];
  return "lobe" + std::to_string(i);
}

std::string zero_pad(int v, int width) {
  std::string s = std::to_string(v);
  while (int(s.size()) < width) s.insert(s.begin(), '0');
  return s;
}

}  // namespace

void GenConfig::validate() const {
  if (n_channels < 1 || n_parcels < 1 || n_lobes < 1)
    throw Error::validation("generator: channel/parcel/lobe counts must be positive");
  if (n_lobes > n_parcels || n_parcels > n_channels)
    throw Error::validation("generator: need n_lobes <= n_parcels <= n_channels, got " +
                            std::to_string(n_lobes) + "/" + std::to_string(n_parcels) + "/" +
                            std::to_string(n_channels));
  if (sample_rate_hz <= 0.0 || duration_s <= 0.0)
    throw Error::validation("generator: sample rate and duration must be positive");
  if (std::isnan(snr_db)) throw Error::validation("generator: snr_db must not be NaN");
  if (!(event_gain > 0.0)) throw Error::validation("generator: event_gain must be positive");
  for (int p : event_parcels)
    if (p < 0 || p >= n_parcels)
      throw Error::validation("generator: event parcel index " + std::to_string(p) + " out of range");
  if (channel_band[1] * 2.0 > sample_rate_hz)
    throw Error::validation("generator: channel band exceeds Nyquist limit");
}

double GroundTruth::event_fraction(int64_t start, int64_t len) const {
  int64_t covered = 0;
  for (const EventInterval& e : events) {
    int64_t lo = std::max(start, e.start);
    int64_t hi = std::min(start + len, e.end);
    if (hi > lo) covered += hi - lo;
  }
  return double(covered) / double(len);
}

GeneratedSession generate_session(const GenConfig& cfg) {
  cfg.validate();
  Rng rng(mix_seed({cfg.seed, 0x5e551071}));
  const int C = cfg.n_channels, P = cfg.n_parcels, Lb = cfg.n_lobes;
  const int64_t T = int64_t(cfg.sample_rate_hz * cfg.duration_s);
  const double dt = 1.0 / cfg.sample_rate_hz;

  GeneratedSession out;
  GroundTruth& gt = out.truth;

  // Contiguous block assignments keep group sizes within one of each other.
  gt.parcel_of_channel.resize(size_t(C));
  for (int c = 0; c < C; ++c) gt.parcel_of_channel[size_t(c)] = int(int64_t(c) * P / C);
  gt.lobe_of_parcel.resize(size_t(P));
  for (int p = 0; p < P; ++p) gt.lobe_of_parcel[size_t(p)] = int(int64_t(p) * Lb / P);

  // Alternating off/on event schedule with 2-6 s states, starting off.
  {
    int64_t t = 0;
    bool on = false;
    while (t < T) {
      int64_t len = int64_t(rng.uniform(2.0, 6.0) * cfg.sample_rate_hz);
      len = std::max<int64_t>(len, 1);
      if (on) gt.events.push_back({t, std::min(t + len, T)});
      t += len;
      on = !on;
    }
  }

  std::vector<BandOscillator> lobe_osc, parcel_osc, channel_osc;
  for (int l = 0; l < Lb; ++l) lobe_osc.emplace_back(cfg.lobe_band, rng);
  for (int p = 0; p < P; ++p) parcel_osc.emplace_back(cfg.parcel_band, rng);
  for (int c = 0; c < C; ++c) channel_osc.emplace_back(cfg.channel_band, rng);

  std::vector<double> channel_gain(size_t(C));
  for (int c = 0; c < C; ++c) channel_gain[size_t(c)] = rng.uniform(0.7, 1.3);

  gt.lobe_latents.assign(size_t(Lb), std::vector<float>(size_t(T)));
  gt.parcel_latents.assign(size_t(P), std::vector<float>(size_t(T)));
  for (int64_t t = 0; t < T; ++t) {
    double ts = double(t) * dt;
    for (int l = 0; l < Lb; ++l) gt.lobe_latents[size_t(l)][size_t(t)] = float(lobe_osc[size_t(l)].at(ts));
    for (int p = 0; p < P; ++p)
      gt.parcel_latents[size_t(p)][size_t(t)] =
          float(double(gt.lobe_latents[size_t(gt.lobe_of_parcel[size_t(p)])][size_t(t)]) +
                parcel_osc[size_t(p)].at(ts));
  }

  std::vector<bool> is_event_parcel(size_t(P), false);
  for (int p : cfg.event_parcels) is_event_parcel[size_t(p)] = true;

  // Structured part first, to measure its power for the SNR-matched noise.
  Tensor<float> structured = Tensor<float>::zeros({int64_t(C), T});
  double power = 0.0;
  for (int c = 0; c < C; ++c) {
    int p = gt.parcel_of_channel[size_t(c)];
    for (int64_t t = 0; t < T; ++t) {
      double latent = double(gt.parcel_latents[size_t(p)][size_t(t)]);
      if (is_event_parcel[size_t(p)] && gt.event_active(t)) latent *= cfg.event_gain;
      double v = channel_gain[size_t(c)] * latent + channel_osc[size_t(c)].at(double(t) * dt);
      structured.at(c, t) = float(v);
      power += v * v;
    }
  }
  power /= double(int64_t(C) * T);

  double noise_sd = 0.0;
  if (!std::isinf(cfg.snr_db)) noise_sd = std::sqrt(power / std::pow(10.0, cfg.snr_db / 10.0));

  out.signal = Tensor<float>::zeros({int64_t(C), T});
  for (int c = 0; c < C; ++c)
    for (int64_t t = 0; t < T; ++t)
      out.signal.at(c, t) = structured.at(c, t) + float(noise_sd * rng.normal());

  // Metadata: parcels sit on distinct lattice sites, channels jitter +-3
  // around their parcel's site, clipped to the valid coordinate range.
  SessionMeta& meta = out.meta;
  meta.subject_id = cfg.subject_id;
  meta.session_id = cfg.session_id;
  meta.sample_rate_hz = cfg.sample_rate_hz;
  std::vector<std::array<int, 3>> site(size_t(P));
  for (int p = 0; p < P; ++p)
    site[size_t(p)] = {20 + 22 * (p % 9), 20 + 22 * ((p / 9) % 9), 20 + 22 * ((p / 81) % 9)};
  for (int c = 0; c < C; ++c) {
    int p = gt.parcel_of_channel[size_t(c)];
    ChannelMeta ch;
    ch.channel_id = "ch" + zero_pad(c, 3);
    for (int w = 0; w < 3; ++w) {
      int v = site[size_t(p)][size_t(w)] + int(rng.randint(7)) - 3;
      ch.lpi[size_t(w)] = std::clamp(v, 0, kLpiMax);
    }
    ch.parcel_id = "parcel" + zero_pad(p, 2);
    ch.lobe_id = lobe_name(gt.lobe_of_parcel[size_t(p)]);
    meta.channels.push_back(std::move(ch));
  }
  meta.validate();
  return out;
}

void label_segments(const GroundTruth& truth, std::vector<Segment>& segments, bool purity_drop) {
  for (Segment& seg : segments) {
    double frac = truth.event_fraction(seg.start_sample, seg.values.dim(1));
    if (purity_drop && frac > 0.2 && frac < 0.8) {
      seg.label.reset();
      continue;
    }
    seg.label = frac > 0.5 ? 1 : 0;
  }
}

}  // namespace stf
