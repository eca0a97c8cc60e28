// Copyright 2026 The diffts Authors
// SPDX-License-Identifier: Apache-2.0

#include "dts/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "dts/error.hpp"

namespace dts {

namespace {

constexpr double kPi = 3.14159265358979323846;

uint32_t read_u32(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}
uint16_t read_u16(const unsigned char* p) {
  return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

// Reflect index (librosa 'reflect': mirror about the edge sample).
int64_t reflect_index(int64_t i, int64_t n) {
  if (n == 1) return 0;
  const int64_t period = 2 * (n - 1);
  int64_t j = std::abs(i) % period;
  return j < n ? j : period - j;
}

}  // namespace

// -------------------------------------------------------------------- wav io

Waveform load_wav(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open audio file: " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw IoError("not a RIFF/WAVE file: " + path);

  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  const unsigned char* data = nullptr;
  uint32_t data_len = 0;
  bool saw_data = false;
  size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const char* id = reinterpret_cast<const char*>(bytes.data() + pos);
    const uint32_t sz = read_u32(bytes.data() + pos + 4);
    const size_t body = pos + 8;
    if (body + sz > bytes.size() && std::memcmp(id, "data", 4) != 0)
      throw IoError("truncated WAV chunk in " + path);
    if (std::memcmp(id, "fmt ", 4) == 0) {
      if (sz < 16) throw IoError("malformed fmt chunk in " + path);
      format = read_u16(bytes.data() + body);
      channels = read_u16(bytes.data() + body + 2);
      rate = read_u32(bytes.data() + body + 4);
      bits = read_u16(bytes.data() + body + 14);
      if (format == 0xFFFE && sz >= 40) format = read_u16(bytes.data() + body + 24);
    } else if (std::memcmp(id, "data", 4) == 0) {
      saw_data = true;
      data = bytes.data() + body;
      data_len = std::min<uint32_t>(sz, static_cast<uint32_t>(bytes.size() - body));
    }
    pos = body + sz + (sz & 1);
  }
  if (!saw_data) throw IoError("WAV file has no data chunk: " + path);
  if (channels == 0 || rate == 0) throw IoError("WAV file has no fmt chunk: " + path);
  if (format != 1 && format != 3)
    throw IoError("unsupported WAV format tag " + std::to_string(format) + " in " + path +
                  " (PCM and float supported)");
  if (format == 1 && bits != 16 && bits != 24 && bits != 32)
    throw IoError("unsupported PCM bit depth " + std::to_string(bits) + " in " + path);
  if (format == 3 && bits != 32) throw IoError("unsupported float bit depth in " + path);

  const int64_t bytes_per = bits / 8;
  const int64_t frames = data_len / (bytes_per * channels);
  std::vector<double> mono(static_cast<size_t>(frames), 0.0);
  for (int64_t i = 0; i < frames; ++i) {
    double acc = 0.0;
    for (int64_t c = 0; c < channels; ++c) {
      const unsigned char* p = data + (i * channels + c) * bytes_per;
      double v = 0.0;
      if (format == 3) {
        float fv;
        std::memcpy(&fv, p, 4);
        v = fv;
      } else if (bits == 16) {
        int16_t s;
        std::memcpy(&s, p, 2);
        v = static_cast<double>(s) / 32768.0;
      } else if (bits == 24) {
        int32_t s = (p[0] << 8) | (p[1] << 16) | (static_cast<int32_t>(p[2]) << 24);
        v = static_cast<double>(s >> 8) / 8388608.0;
      } else {  // 32-bit int
        int32_t s;
        std::memcpy(&s, p, 4);
        v = static_cast<double>(s) / 2147483648.0;
      }
      acc += v;
    }
    mono[static_cast<size_t>(i)] = acc / channels;
  }

  Waveform w;
  w.rate = kSampleRate;
  w.samples = (static_cast<int>(rate) == kSampleRate) ? std::move(mono)
                                                      : resample(mono, static_cast<int>(rate), kSampleRate);
  return w;
}

void save_wav(const std::string& path, const Waveform& w) {
  check_contract(w.rate == kSampleRate, "save_wav: waveform must be 24 kHz");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write audio file: " + path);
  const uint32_t n = static_cast<uint32_t>(w.samples.size());
  const uint32_t data_bytes = n * 2;
  auto put_u32 = [&](uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    f.write(reinterpret_cast<char*>(b), 4);
  };
  auto put_u16 = [&](uint16_t v) {
    unsigned char b[2] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
    f.write(reinterpret_cast<char*>(b), 2);
  };
  f.write("RIFF", 4);
  put_u32(36 + data_bytes);
  f.write("WAVE", 4);
  f.write("fmt ", 4);
  put_u32(16);
  put_u16(1);  // PCM
  put_u16(1);  // mono
  put_u32(kSampleRate);
  put_u32(kSampleRate * 2);  // byte rate
  put_u16(2);                // block align
  put_u16(16);               // bits
  f.write("data", 4);
  put_u32(data_bytes);
  for (double v : w.samples) {
    const double c = std::min(1.0, std::max(-1.0, v));
    const int32_t q = std::min<int32_t>(32767, static_cast<int32_t>(std::lround(c * 32768.0)));
    put_u16(static_cast<uint16_t>(static_cast<int16_t>(q)));
  }
  if (!f) throw IoError("write failed: " + path);
}

std::vector<double> resample(const std::vector<double>& x, int src_rate, int dst_rate) {
  check_contract(src_rate > 0 && dst_rate > 0, "resample: rates must be positive");
  if (src_rate == dst_rate || x.empty()) return x;
  const int64_t n = static_cast<int64_t>(x.size());
  const int64_t out_n = (n * dst_rate + src_rate / 2) / src_rate;
  const double ratio = static_cast<double>(src_rate) / dst_rate;
  const double cutoff = std::min(1.0, static_cast<double>(dst_rate) / src_rate);
  const int64_t half_taps = 24;
  const double width = half_taps / cutoff;
  std::vector<double> out(static_cast<size_t>(out_n), 0.0);
  for (int64_t i = 0; i < out_n; ++i) {
    const double center = i * ratio;
    const int64_t lo = static_cast<int64_t>(std::ceil(center - width));
    const int64_t hi = static_cast<int64_t>(std::floor(center + width));
    double acc = 0.0;
    for (int64_t k = std::max<int64_t>(0, lo); k <= std::min(n - 1, hi); ++k) {
      const double d = (k - center) * cutoff;
      const double sinc = d == 0.0 ? 1.0 : std::sin(kPi * d) / (kPi * d);
      const double win = 0.5 * (1.0 + std::cos(kPi * (k - center) / width));  // Hann taper
      acc += x[static_cast<size_t>(k)] * sinc * win;
    }
    out[static_cast<size_t>(i)] = acc * cutoff;
  }
  return out;
}

// ----------------------------------------------------------------------- fft

void fft_radix2(std::vector<double>& re, std::vector<double>& im) {
  const size_t n = re.size();
  check_contract(n == im.size() && n > 0 && (n & (n - 1)) == 0, "fft: size must be a power of two");
  // bit reversal
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) {
      std::swap(re[i], re[j]);
      std::swap(im[i], im[j]);
    }
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * kPi / static_cast<double>(len);
    const double wr = std::cos(ang), wi = std::sin(ang);
    for (size_t i = 0; i < n; i += len) {
      double cr = 1.0, ci = 0.0;
      for (size_t k = 0; k < len / 2; ++k) {
        const size_t a = i + k, b = i + k + len / 2;
        const double tr = re[b] * cr - im[b] * ci;
        const double ti = re[b] * ci + im[b] * cr;
        re[b] = re[a] - tr;
        im[b] = im[a] - ti;
        re[a] += tr;
        im[a] += ti;
        const double ncr = cr * wr - ci * wi;
        ci = cr * wi + ci * wr;
        cr = ncr;
      }
    }
  }
}

// ----------------------------------------------------------------------- mel

Tensor mel_filterbank(const FeatureConfig& cfg) {
  const int bins = cfg.fft_size / 2 + 1;
  Tensor fb({cfg.mel_bands, bins}, 0.0);
  const double mel_lo = hz_to_mel(cfg.fmin), mel_hi = hz_to_mel(cfg.fmax);
  const double step = (mel_hi - mel_lo) / (cfg.mel_bands + 1);
  for (int b = 0; b < cfg.mel_bands; ++b) {
    const double left = mel_to_hz(mel_lo + step * b);
    const double center = mel_to_hz(mel_lo + step * (b + 1));
    const double right = mel_to_hz(mel_lo + step * (b + 2));
    for (int k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * cfg.sample_rate / cfg.fft_size;
      double w = 0.0;
      if (f >= left && f <= center && center > left)
        w = (f - left) / (center - left);
      else if (f > center && f <= right && right > center)
        w = (right - f) / (right - center);
      fb.at(b, k) = w;
    }
  }
  return fb;
}

MelBandSupport mel_band_support(const FeatureConfig& cfg, int band) {
  check_contract(band >= 0 && band < cfg.mel_bands, "mel band out of range");
  const double mel_lo = hz_to_mel(cfg.fmin), mel_hi = hz_to_mel(cfg.fmax);
  const double step = (mel_hi - mel_lo) / (cfg.mel_bands + 1);
  return {mel_to_hz(mel_lo + step * band), mel_to_hz(mel_lo + step * (band + 1)),
          mel_to_hz(mel_lo + step * (band + 2))};
}

Tensor wav_to_mel(const Waveform& w, const FeatureConfig& cfg) {
  check_contract(w.rate == cfg.sample_rate,
                 "wav_to_mel: waveform rate " + std::to_string(w.rate) + " != " + std::to_string(cfg.sample_rate));
  const int64_t n = static_cast<int64_t>(w.samples.size());
  check_contract(n > 0, "wav_to_mel: empty waveform");

  const int64_t frames = 1 + n / cfg.hop;
  const int64_t pad = cfg.frame_size / 2;
  Tensor fb = mel_filterbank(cfg);
  Tensor mel({frames, cfg.mel_bands});

  // periodic Hann window
  std::vector<double> window(static_cast<size_t>(cfg.frame_size));
  for (int i = 0; i < cfg.frame_size; ++i)
    window[static_cast<size_t>(i)] = 0.5 * (1.0 - std::cos(2.0 * kPi * i / cfg.frame_size));

  std::vector<double> re(static_cast<size_t>(cfg.fft_size)), im(static_cast<size_t>(cfg.fft_size));
  const int bins = cfg.fft_size / 2 + 1;
  std::vector<double> power(static_cast<size_t>(bins));
  for (int64_t fr = 0; fr < frames; ++fr) {
    std::fill(re.begin(), re.end(), 0.0);
    std::fill(im.begin(), im.end(), 0.0);
    const int64_t start = fr * cfg.hop - pad;  // centered at fr*hop
    for (int i = 0; i < cfg.frame_size; ++i)
      re[static_cast<size_t>(i)] =
          w.samples[static_cast<size_t>(reflect_index(start + i, n))] * window[static_cast<size_t>(i)];
    fft_radix2(re, im);
    for (int k = 0; k < bins; ++k)
      power[static_cast<size_t>(k)] = re[static_cast<size_t>(k)] * re[static_cast<size_t>(k)] +
                                      im[static_cast<size_t>(k)] * im[static_cast<size_t>(k)];
    for (int b = 0; b < cfg.mel_bands; ++b) {
      double acc = 0.0;
      for (int k = 0; k < bins; ++k) acc += fb.at(b, k) * power[static_cast<size_t>(k)];
      mel.at(fr, b) = std::log(std::max(acc, cfg.log_floor));
    }
  }
  return mel;
}

// --------------------------------------------------------------------- stats

Tensor MelStats::normalize(const Tensor& mel) const {
  check_contract(mel.rank() == 2 && mel.dim(1) == static_cast<int64_t>(mean.size()),
                 "normalize: band count mismatch");
  Tensor out = mel;
  for (int64_t t = 0; t < mel.dim(0); ++t)
    for (int64_t b = 0; b < mel.dim(1); ++b)
      out.at(t, b) = (mel.at(t, b) - mean[static_cast<size_t>(b)]) / stdev[static_cast<size_t>(b)];
  return out;
}

Tensor MelStats::denormalize(const Tensor& mel) const {
  check_contract(mel.rank() == 2 && mel.dim(1) == static_cast<int64_t>(mean.size()),
                 "denormalize: band count mismatch");
  Tensor out = mel;
  for (int64_t t = 0; t < mel.dim(0); ++t)
    for (int64_t b = 0; b < mel.dim(1); ++b)
      out.at(t, b) = mel.at(t, b) * stdev[static_cast<size_t>(b)] + mean[static_cast<size_t>(b)];
  return out;
}

MelStats compute_mel_stats(const std::vector<Tensor>& mels) {
  check_contract(!mels.empty(), "compute_mel_stats: no spectrograms");
  const int64_t bands = mels.front().dim(1);
  MelStats s;
  s.mean.assign(static_cast<size_t>(bands), 0.0);
  s.stdev.assign(static_cast<size_t>(bands), 0.0);
  int64_t total = 0;
  for (const Tensor& m : mels) {
    check_contract(m.dim(1) == bands, "compute_mel_stats: inconsistent band counts");
    total += m.dim(0);
    for (int64_t t = 0; t < m.dim(0); ++t)
      for (int64_t b = 0; b < bands; ++b) s.mean[static_cast<size_t>(b)] += m.at(t, b);
  }
  for (int64_t b = 0; b < bands; ++b) s.mean[static_cast<size_t>(b)] /= static_cast<double>(total);
  for (const Tensor& m : mels)
    for (int64_t t = 0; t < m.dim(0); ++t)
      for (int64_t b = 0; b < bands; ++b) {
        const double d = m.at(t, b) - s.mean[static_cast<size_t>(b)];
        s.stdev[static_cast<size_t>(b)] += d * d;
      }
  for (int64_t b = 0; b < bands; ++b)
    s.stdev[static_cast<size_t>(b)] = std::max(1e-6, std::sqrt(s.stdev[static_cast<size_t>(b)] / total));
  return s;
}

}  // namespace dts
