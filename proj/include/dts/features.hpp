// Copyright 2026 The diffts Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dts/tensor.hpp"

namespace dts {

inline constexpr int kSampleRate = 24000;
inline constexpr int kMelBands = 40;
inline constexpr int kFrameSize = 960;
inline constexpr int kHop = 240;
inline constexpr int kFftSize = 1024;
inline constexpr double kMelFmin = 0.0;
inline constexpr double kMelFmax = 12000.0;
inline constexpr double kLogFloor = 1e-5;

struct Waveform {
  std::vector<double> samples;  // mono, nominally in [-1, 1]
  int rate = kSampleRate;
};

struct FeatureConfig {
  int sample_rate = kSampleRate;
  int mel_bands = kMelBands;
  int frame_size = kFrameSize;
  int hop = kHop;
  int fft_size = kFftSize;
  double fmin = kMelFmin;
  double fmax = kMelFmax;
  double log_floor = kLogFloor;
};

// Band-wise normalization statistics estimated at corpus-preparation time.
struct MelStats {
  std::vector<double> mean, stdev;  // one entry per band

  Tensor normalize(const Tensor& mel) const;    // (T, bands)
  Tensor denormalize(const Tensor& mel) const;
};

MelStats compute_mel_stats(const std::vector<Tensor>& mels);

// Loads a PCM RIFF/WAVE file (16/24/32-bit integer or 32-bit float), averages
// channels to mono and resamples to 24 kHz (windowed-sinc).
Waveform load_wav(const std::string& path);

// Writes 24 kHz mono 16-bit PCM. Round-trips samples within 1/32768.
void save_wav(const std::string& path, const Waveform& w);

// Resamples mono audio between arbitrary rates (windowed-sinc kernel).
std::vector<double> resample(const std::vector<double>& x, int src_rate, int dst_rate);

// Triangular mel filterbank, (bands, fft_size/2 + 1), HTK mel scale. Rows are
// non-negative and each covers one contiguous frequency band.
Tensor mel_filterbank(const FeatureConfig& cfg);
// Support of one filter row in Hz: {left, center, right}.
struct MelBandSupport {
  double lo, center, hi;
};
MelBandSupport mel_band_support(const FeatureConfig& cfg, int band);

// Log-mel spectrogram, (1 + len/hop, bands): centered frames, reflect
// padding, Hann window, power spectrum, log(max(e, log_floor)).
Tensor wav_to_mel(const Waveform& w, const FeatureConfig& cfg = FeatureConfig{});

// In-place radix-2 complex FFT (interleaved re/im), n a power of two.
void fft_radix2(std::vector<double>& re, std::vector<double>& im);

}  // namespace dts
