#pragma once

// Seeded synthetic workloads. Everything here is bit-reproducible across
// platforms: mt19937_64 is fully specified, and the mapping to ranges avoids
// std::*_distribution, whose algorithms are implementation-defined.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "sparq/conv.hpp"
#include "sparq/delta_gru.hpp"
#include "sparq/fxp.hpp"

namespace sparq {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [lo, hi], unbiased by rejection.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  bool bernoulli(double p) { return uniform() < p; }
  // Independent child stream.
  Rng fork() { return Rng(engine_() ^ 0x9e3779b97f4a7c15ULL); }

 private:
  std::mt19937_64 engine_;
};

// Each pixel is zero with probability `zero_prob`; non-zero pixels take a
// uniform non-zero raw value in [1, max_raw] (or +-, when signed_values).
QTensor random_feature_map(Rng& rng, std::uint32_t c, std::uint32_t h, std::uint32_t w, double zero_prob,
                           QFormat fmt = kActivationFormat, std::int16_t max_raw = 1024, bool signed_values = false);

// Exactly round(zero_fraction * pixels) zero pixels at shuffled positions.
QTensor exact_sparsity_map(Rng& rng, std::uint32_t c, std::uint32_t h, std::uint32_t w, double zero_fraction,
                           QFormat fmt = kActivationFormat, std::int16_t max_raw = 1024);

// Uniform weights in [-scale, scale], quantized to fmt.
QTensor random_tensor(Rng& rng, std::vector<std::uint32_t> dims, QFormat fmt, double scale);

ConvLayerSpec random_conv_spec(Rng& rng, std::uint32_t in_c, std::uint32_t out_c, std::uint32_t k,
                               std::uint32_t stride, std::uint32_t pad, bool relu, Pool pool,
                               double weight_scale = 0.25, QFormat w_fmt = kWeightFormat);

// Weights uniform in +-scale / sqrt(fan_in) style bound given by weight_scale.
GruLayerSpec random_gru_spec(Rng& rng, std::uint32_t input_size, std::uint32_t hidden_size, double theta,
                             double weight_scale = 1.0, QFormat act_fmt = kActivationFormat,
                             QFormat w_fmt = kWeightFormat);

enum class SequenceKind { Uniform, PiecewiseConstant, BandLimited };

SequenceKind parse_sequence_kind(const std::string& s);
const char* to_string(SequenceKind k) noexcept;

struct SequenceParams {
  SequenceKind kind = SequenceKind::PiecewiseConstant;
  std::uint32_t steps = 100;
  std::uint32_t size = 16;
  double amplitude = 1.0;
  std::uint32_t hold = 10;       // piecewise-constant hold length
  double smoothing = 0.9;        // band-limited: pole of the 2-stage low-pass
};

// Returns `steps` vectors of length `size` in fmt.
std::vector<QTensor> synthetic_sequence(Rng& rng, const SequenceParams& params, QFormat fmt = kActivationFormat);

// Rank-2 (T, N) tensor <-> list of length-N vectors.
QTensor stack_sequence(const std::vector<QTensor>& seq);
std::vector<QTensor> unstack_sequence(const QTensor& t);

}  // namespace sparq
