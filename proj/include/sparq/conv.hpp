#pragma once

// Zero-skipping convolution over SM/NZVL-compressed feature maps.
//
// The engine is input-stationary: it walks the non-zero input pixels and
// scatters each one into every output accumulator it touches. For any single
// accumulator the contributions still arrive in (in_c, ky, kx) order, which is
// the dense oracle's order, so the two paths agree bit for bit even when the
// 32-bit accumulators saturate.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sparq/codec.hpp"
#include "sparq/fxp.hpp"
#include "sparq/mem_model.hpp"

namespace sparq {

enum class Pool : std::uint8_t { None, Max2x2 };

Pool parse_pool(const std::string& s);
const char* to_string(Pool p) noexcept;

struct ConvGeometry {
  std::uint32_t in_h = 0, in_w = 0;
  std::uint32_t conv_h = 0, conv_w = 0;  // before pooling
  std::uint32_t out_h = 0, out_w = 0;    // after pooling
};

struct ConvLayerSpec {
  std::uint32_t in_channels = 0;
  std::uint32_t out_channels = 0;
  std::uint32_t kernel_h = 0;
  std::uint32_t kernel_w = 0;
  std::uint32_t stride = 1;
  std::uint32_t pad = 0;
  QTensor weights;                 // (out_c, in_c, kh, kw)
  std::vector<std::int32_t> bias;  // accumulator scale, one per out channel
  bool relu = true;
  Pool pool = Pool::None;
  QFormat in_fmt = kActivationFormat;
  QFormat out_fmt = kActivationFormat;

  int acc_frac_bits() const noexcept { return in_fmt.frac_bits + weights.fmt().frac_bits; }
  std::int16_t weight(std::uint32_t oc, std::uint32_t ic, std::uint32_t ky, std::uint32_t kx) const noexcept {
    return weights.data()[((static_cast<std::size_t>(oc) * in_channels + ic) * kernel_h + ky) * kernel_w + kx];
  }

  // Checks weight/bias shapes; throws ShapeMismatch / InvalidArgument.
  void validate() const;
  // Validates the input against the spec and returns the output geometry.
  ConvGeometry geometry(std::uint32_t in_c, std::uint32_t in_h, std::uint32_t in_w) const;
  std::uint64_t dense_macs(const ConvGeometry& g) const noexcept;
  std::uint64_t weight_words() const noexcept { return weights.size() + 2 * bias.size(); }
};

// Converts a bias vector stored in any Q format to accumulator scale exactly.
std::vector<std::int32_t> bias_to_accumulator(const QTensor& bias, int acc_frac_bits);

// Naive reference: per output, acc = bias then in_c, ky, kx; renormalize,
// then a separate ReLU pass and a separate pooling pass.
QTensor conv_dense_oracle(const ConvLayerSpec& spec, const QTensor& input);

struct ConvOptions {
  // When false, the full-resolution post-ReLU map is written to SRAM and read
  // back before pooling, which is what fusion avoids.
  bool fuse_relu_pool = true;
};

// Modeled address map used in traces.
namespace addr {
inline constexpr std::uint64_t kDramInput = 0;
inline constexpr std::uint64_t kDramOutput = 1ULL << 32;
inline constexpr std::uint64_t kDramWeights = 2ULL << 32;
inline constexpr std::uint64_t kSramWeights = 0;
inline constexpr std::uint64_t kSramAccumulators = 1ULL << 32;
inline constexpr std::uint64_t kSramScratch = 2ULL << 32;
}  // namespace addr

struct LayerRunResult {
  SparseFeatureMap output;
  OpCounter counters;
  AccessTrace accesses;
  SparsityStats output_sparsity;
  std::uint64_t pixels_visited = 0;      // inner-loop iterations over input pixels
  std::uint64_t sm_words_scanned = 0;    // 64-bit bitmap words touched
  std::uint64_t accumulator_bytes = 0;   // size of the on-chip accumulator plane
  ConvGeometry geometry;

  // 100 * dense_equivalent / executed; empty when nothing executed.
  std::optional<double> efficiency_pct() const noexcept;
};

LayerRunResult conv_zeroskip(const ConvLayerSpec& spec, const SparseFeatureMap& input, const ConvOptions& opts = {});

// Dense-mode engine: same arithmetic as the oracle, with dense counters and a
// dense access trace (uncompressed input read, every tap multiplied).
LayerRunResult conv_dense(const ConvLayerSpec& spec, const QTensor& input, const ConvOptions& opts = {});

// Renormalizes a (channels, h, w) accumulator plane, applies ReLU and 2x2
// max pooling in one pass. Only the pooled map is ever materialized.
QTensor fused_relu_pool(std::span<const std::int32_t> acc, std::uint32_t channels, std::uint32_t h, std::uint32_t w,
                        int acc_frac_bits, QFormat out_fmt, bool relu, Pool pool, OpCounter* ops = nullptr);

// The two-pass composition used by the oracle.
QTensor relu_pass(const QTensor& t);
QTensor max_pool_2x2(const QTensor& t);

}  // namespace sparq
