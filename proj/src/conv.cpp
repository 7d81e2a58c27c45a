#include "sparq/conv.hpp"

#include <algorithm>

#include "sparq/error.hpp"

namespace sparq {

namespace {

std::uint64_t sm_words16(std::size_t pixels) { return (pixels + 15) / 16; }

void record_input_and_weights(const ConvLayerSpec& spec, std::uint64_t input_words, AccessTrace& t) {
  t.add(Region::Dram, AccessKind::Read, Tag::Activations, addr::kDramInput, input_words);
  t.add(Region::Dram, AccessKind::Read, Tag::Weights, addr::kDramWeights, spec.weight_words());
}

// Writes the compressed output map (SM words then NZVL) to DRAM.
void record_output(const SparseFeatureMap& out, AccessTrace& t) {
  t.add(Region::Dram, AccessKind::Write, Tag::Activations, addr::kDramOutput, sm_words16(out.pixel_count()) + out.nnz());
}

void record_unfused_scratch(const ConvGeometry& g, std::uint32_t channels, AccessTrace& t) {
  const std::uint64_t words = std::uint64_t{channels} * g.conv_h * g.conv_w;
  t.add(Region::Sram, AccessKind::Write, Tag::Activations, addr::kSramScratch, words);
  t.add(Region::Sram, AccessKind::Read, Tag::Activations, addr::kSramScratch, words);
}

void count_output_ops(const ConvLayerSpec& spec, const ConvGeometry& g, OpCounter& ops) {
  const std::uint64_t conv_outputs = std::uint64_t{spec.out_channels} * g.conv_h * g.conv_w;
  ops.adds += conv_outputs;  // bias preload
  if (spec.relu) ops.comparisons += conv_outputs;
  if (spec.pool == Pool::Max2x2) ops.comparisons += 3ULL * spec.out_channels * g.out_h * g.out_w;
}

// Accumulator plane initialised with bias, layout (oc, y, x).
std::vector<std::int32_t> bias_plane(const ConvLayerSpec& spec, const ConvGeometry& g) {
  const std::size_t plane = std::size_t{g.conv_h} * g.conv_w;
  std::vector<std::int32_t> acc(plane * spec.out_channels);
  for (std::uint32_t oc = 0; oc < spec.out_channels; ++oc) {
    std::fill_n(acc.begin() + static_cast<std::ptrdiff_t>(oc * plane), plane, spec.bias[oc]);
  }
  return acc;
}

}  // namespace

Pool parse_pool(const std::string& s) {
  if (s.empty() || s == "none") return Pool::None;
  if (s == "max2x2" || s == "max2x2-stride2") return Pool::Max2x2;
  throw InvalidArgument("unsupported pooling '" + s + "' (only none and max2x2 are available)");
}

const char* to_string(Pool p) noexcept { return p == Pool::Max2x2 ? "max2x2" : "none"; }

void ConvLayerSpec::validate() const {
  if (in_channels == 0 || out_channels == 0 || kernel_h == 0 || kernel_w == 0) {
    throw ShapeMismatch("conv: channel and kernel sizes must be positive");
  }
  if (stride == 0) throw InvalidArgument("conv: stride must be >= 1");
  if (!in_fmt.valid() || !out_fmt.valid()) throw InvalidArgument("conv: invalid activation format");
  const std::vector<std::uint32_t> expected{out_channels, in_channels, kernel_h, kernel_w};
  if (weights.dims() != expected) {
    throw ShapeMismatch("conv: weight tensor must be (out_c, in_c, kh, kw) = (" + std::to_string(out_channels) + "," +
                        std::to_string(in_channels) + "," + std::to_string(kernel_h) + "," +
                        std::to_string(kernel_w) + ")");
  }
  if (bias.size() != out_channels) throw ShapeMismatch("conv: bias length must equal out_channels");
  if (acc_frac_bits() > 30) throw InvalidArgument("conv: accumulator fraction bits exceed 30");
}

ConvGeometry ConvLayerSpec::geometry(std::uint32_t in_c, std::uint32_t in_h, std::uint32_t in_w) const {
  validate();
  if (in_c != in_channels) {
    throw ShapeMismatch("conv: input has " + std::to_string(in_c) + " channels, layer expects " +
                        std::to_string(in_channels));
  }
  ConvGeometry g;
  g.in_h = in_h;
  g.in_w = in_w;
  const std::uint64_t padded_h = std::uint64_t{in_h} + 2ULL * pad;
  const std::uint64_t padded_w = std::uint64_t{in_w} + 2ULL * pad;
  if (in_h == 0 || in_w == 0 || padded_h < kernel_h || padded_w < kernel_w) {
    throw ShapeMismatch("conv: kernel larger than padded input");
  }
  g.conv_h = static_cast<std::uint32_t>((padded_h - kernel_h) / stride + 1);
  g.conv_w = static_cast<std::uint32_t>((padded_w - kernel_w) / stride + 1);
  if (pool == Pool::Max2x2) {
    if (g.conv_h < 2 || g.conv_w < 2) throw ShapeMismatch("conv: 2x2 pooling needs a conv output of at least 2x2");
    g.out_h = g.conv_h / 2;
    g.out_w = g.conv_w / 2;
  } else {
    g.out_h = g.conv_h;
    g.out_w = g.conv_w;
  }
  return g;
}

std::uint64_t ConvLayerSpec::dense_macs(const ConvGeometry& g) const noexcept {
  return std::uint64_t{g.conv_h} * g.conv_w * out_channels * kernel_h * kernel_w * in_channels;
}

std::vector<std::int32_t> bias_to_accumulator(const QTensor& bias, int acc_frac_bits) {
  if (bias.rank() != 1) throw ShapeMismatch("bias must be a vector");
  const int shift = acc_frac_bits - bias.fmt().frac_bits;
  if (shift < 0) throw InvalidArgument("bias has more fraction bits than the accumulator");
  std::vector<std::int32_t> out;
  out.reserve(bias.size());
  for (auto v : bias.data()) out.push_back(saturate32(static_cast<std::int64_t>(v) << shift));
  return out;
}

std::optional<double> LayerRunResult::efficiency_pct() const noexcept {
  if (counters.macs_executed == 0) return std::nullopt;
  return 100.0 * static_cast<double>(counters.macs_dense_equivalent) / static_cast<double>(counters.macs_executed);
}

QTensor relu_pass(const QTensor& t) {
  QTensor out = t;
  for (auto& v : out.data()) v = std::max<std::int16_t>(v, 0);
  return out;
}

QTensor max_pool_2x2(const QTensor& t) {
  t.require_map();
  const std::uint32_t c = t.channels(), h = t.height() / 2, w = t.width() / 2;
  QTensor out = QTensor::feature_map(c, h, w, t.fmt());
  for (std::uint32_t ch = 0; ch < c; ++ch) {
    for (std::uint32_t y = 0; y < h; ++y) {
      for (std::uint32_t x = 0; x < w; ++x) {
        out.at(ch, y, x) = std::max({t.at(ch, 2 * y, 2 * x), t.at(ch, 2 * y, 2 * x + 1), t.at(ch, 2 * y + 1, 2 * x),
                                     t.at(ch, 2 * y + 1, 2 * x + 1)});
      }
    }
  }
  return out;
}

QTensor fused_relu_pool(std::span<const std::int32_t> acc, std::uint32_t channels, std::uint32_t h, std::uint32_t w,
                        int acc_frac_bits, QFormat out_fmt, bool relu, Pool pool, OpCounter* ops) {
  if (acc.size() != std::size_t{channels} * h * w) throw ShapeMismatch("fused_relu_pool: plane size mismatch");
  auto activate = [&](std::size_t i) -> std::int16_t {
    const std::int16_t v = renormalize_raw(acc[i], acc_frac_bits, out_fmt);
    return relu && v < 0 ? std::int16_t{0} : v;
  };
  const std::size_t plane = std::size_t{h} * w;
  if (pool == Pool::None) {
    QTensor out = QTensor::feature_map(channels, h, w, out_fmt);
    auto data = out.data();
    for (std::size_t i = 0; i < acc.size(); ++i) data[i] = activate(i);
    if (ops != nullptr && relu) ops->comparisons += acc.size();
    return out;
  }
  if (h < 2 || w < 2) throw ShapeMismatch("fused_relu_pool: 2x2 pooling needs at least a 2x2 plane");
  const std::uint32_t oh = h / 2, ow = w / 2;
  QTensor out = QTensor::feature_map(channels, oh, ow, out_fmt);
  for (std::uint32_t c = 0; c < channels; ++c) {
    const std::size_t base = c * plane;
    for (std::uint32_t y = 0; y < oh; ++y) {
      const std::size_t r0 = base + std::size_t{2 * y} * w;
      const std::size_t r1 = r0 + w;
      for (std::uint32_t x = 0; x < ow; ++x) {
        out.at(c, y, x) = std::max({activate(r0 + 2 * x), activate(r0 + 2 * x + 1), activate(r1 + 2 * x),
                                    activate(r1 + 2 * x + 1)});
      }
    }
  }
  if (ops != nullptr) {
    if (relu) ops->comparisons += std::size_t{channels} * h * w;
    ops->comparisons += 3ULL * channels * oh * ow;
  }
  return out;
}

QTensor conv_dense_oracle(const ConvLayerSpec& spec, const QTensor& input) {
  input.require_map();
  const ConvGeometry g = spec.geometry(input.channels(), input.height(), input.width());
  QTensor pre = QTensor::feature_map(spec.out_channels, g.conv_h, g.conv_w, spec.out_fmt);
  const auto s = static_cast<std::int64_t>(spec.stride);
  const auto p = static_cast<std::int64_t>(spec.pad);
  for (std::uint32_t oc = 0; oc < spec.out_channels; ++oc) {
    for (std::uint32_t oy = 0; oy < g.conv_h; ++oy) {
      for (std::uint32_t ox = 0; ox < g.conv_w; ++ox) {
        std::int32_t acc = spec.bias[oc];
        for (std::uint32_t ic = 0; ic < spec.in_channels; ++ic) {
          for (std::uint32_t ky = 0; ky < spec.kernel_h; ++ky) {
            const std::int64_t iy = oy * s + ky - p;
            for (std::uint32_t kx = 0; kx < spec.kernel_w; ++kx) {
              const std::int64_t ix = ox * s + kx - p;
              const bool inside = iy >= 0 && ix >= 0 && iy < g.in_h && ix < g.in_w;
              const std::int16_t v =
                  inside ? input.at(ic, static_cast<std::uint32_t>(iy), static_cast<std::uint32_t>(ix)) : 0;
              acc = sat_mac(acc, spec.weight(oc, ic, ky, kx), v);
            }
          }
        }
        pre.at(oc, oy, ox) = renormalize_raw(acc, spec.acc_frac_bits(), spec.out_fmt);
      }
    }
  }
  QTensor out = spec.relu ? relu_pass(pre) : std::move(pre);
  return spec.pool == Pool::Max2x2 ? max_pool_2x2(out) : out;
}

LayerRunResult conv_zeroskip(const ConvLayerSpec& spec, const SparseFeatureMap& input, const ConvOptions& opts) {
  input.validate();
  if (input.fmt != spec.in_fmt) {
    throw ShapeMismatch("conv: input format " + input.fmt.to_string() + " != layer input format " +
                        spec.in_fmt.to_string());
  }
  LayerRunResult res;
  const ConvGeometry g = spec.geometry(input.channels, input.height, input.width);
  res.geometry = g;
  const std::uint32_t oc_n = spec.out_channels;
  const std::size_t plane = std::size_t{g.conv_h} * g.conv_w;
  res.accumulator_bytes = plane * oc_n * 4;

  // Weights regrouped as (ic, ky, kx, oc) so one tap is one contiguous oc run,
  // matching the modeled on-chip layout.
  std::vector<std::int16_t> taps(spec.weights.size());
  for (std::uint32_t oc = 0; oc < oc_n; ++oc)
    for (std::uint32_t ic = 0; ic < spec.in_channels; ++ic)
      for (std::uint32_t ky = 0; ky < spec.kernel_h; ++ky)
        for (std::uint32_t kx = 0; kx < spec.kernel_w; ++kx)
          taps[((std::size_t{ic} * spec.kernel_h + ky) * spec.kernel_w + kx) * oc_n + oc] = spec.weight(oc, ic, ky, kx);

  std::vector<std::int32_t> acc = bias_plane(spec, g);
  AccessTrace& trace = res.accesses;
  record_input_and_weights(spec, sm_words16(input.pixel_count()) + input.nnz(), trace);

  const auto s = static_cast<std::int64_t>(spec.stride);
  const auto pad = static_cast<std::int64_t>(spec.pad);
  NonzeroView view(input);
  for (const NonzeroPixel& px : view) {
    ++res.pixels_visited;
    for (std::uint32_t ky = 0; ky < spec.kernel_h; ++ky) {
      const std::int64_t ny = static_cast<std::int64_t>(px.y) + pad - ky;
      if (ny < 0 || ny % s != 0 || ny / s >= g.conv_h) continue;
      const auto oy = static_cast<std::size_t>(ny / s);
      for (std::uint32_t kx = 0; kx < spec.kernel_w; ++kx) {
        const std::int64_t nx = static_cast<std::int64_t>(px.x) + pad - kx;
        if (nx < 0 || nx % s != 0 || nx / s >= g.conv_w) continue;
        const auto ox = static_cast<std::size_t>(nx / s);
        const std::size_t tap = (std::size_t{px.c} * spec.kernel_h + ky) * spec.kernel_w + kx;
        const std::int16_t* w = &taps[tap * oc_n];
        const std::size_t pos = oy * g.conv_w + ox;
        for (std::uint32_t oc = 0; oc < oc_n; ++oc) {
          std::int32_t& a = acc[oc * plane + pos];
          a = sat_mac(a, w[oc], px.value);
        }
        res.counters.macs_executed += oc_n;
        trace.add(Region::Sram, AccessKind::Read, Tag::Weights, addr::kSramWeights + tap * oc_n, oc_n);
        trace.add(Region::Sram, AccessKind::Read, Tag::State, addr::kSramAccumulators + pos * oc_n, oc_n);
        trace.add(Region::Sram, AccessKind::Write, Tag::State, addr::kSramAccumulators + pos * oc_n, oc_n);
      }
    }
  }
  res.sm_words_scanned = view.words_scanned();
  res.counters.macs_dense_equivalent = spec.dense_macs(g);
  count_output_ops(spec, g, res.counters);

  QTensor out;
  if (opts.fuse_relu_pool || spec.pool == Pool::None) {
    out = fused_relu_pool(acc, oc_n, g.conv_h, g.conv_w, spec.acc_frac_bits(), spec.out_fmt, spec.relu, spec.pool);
  } else {
    record_unfused_scratch(g, oc_n, trace);
    QTensor full = fused_relu_pool(acc, oc_n, g.conv_h, g.conv_w, spec.acc_frac_bits(), spec.out_fmt, spec.relu,
                                   Pool::None);
    out = max_pool_2x2(full);
  }
  res.output = encode_sm(out);
  res.output_sparsity = measure_sparsity(out);
  record_output(res.output, trace);
  return res;
}

LayerRunResult conv_dense(const ConvLayerSpec& spec, const QTensor& input, const ConvOptions& opts) {
  input.require_map();
  if (input.fmt() != spec.in_fmt) {
    throw ShapeMismatch("conv: input format " + input.fmt().to_string() + " != layer input format " +
                        spec.in_fmt.to_string());
  }
  LayerRunResult res;
  const ConvGeometry g = spec.geometry(input.channels(), input.height(), input.width());
  res.geometry = g;
  const std::uint32_t oc_n = spec.out_channels;
  res.accumulator_bytes = std::size_t{g.conv_h} * g.conv_w * oc_n * 4;
  res.pixels_visited = input.size();

  QTensor out = conv_dense_oracle(spec, input);
  res.counters.macs_dense_equivalent = spec.dense_macs(g);
  res.counters.macs_executed = res.counters.macs_dense_equivalent;
  count_output_ops(spec, g, res.counters);

  AccessTrace& trace = res.accesses;
  record_input_and_weights(spec, input.size(), trace);
  const std::uint64_t group = std::uint64_t{spec.kernel_h} * spec.kernel_w * oc_n;
  for (std::uint32_t oy = 0; oy < g.conv_h; ++oy) {
    for (std::uint32_t ox = 0; ox < g.conv_w; ++ox) {
      const std::uint64_t pos = std::uint64_t{oy} * g.conv_w + ox;
      for (std::uint32_t ic = 0; ic < spec.in_channels; ++ic) {
        trace.add(Region::Sram, AccessKind::Read, Tag::Weights, addr::kSramWeights + ic * group, group);
      }
      trace.add(Region::Sram, AccessKind::Write, Tag::State, addr::kSramAccumulators + pos * oc_n, oc_n);
    }
  }
  if (!opts.fuse_relu_pool && spec.pool == Pool::Max2x2) record_unfused_scratch(g, oc_n, trace);

  res.output = encode_sm(out);
  res.output_sparsity = measure_sparsity(out);
  // Dense engines write the uncompressed map.
  trace.add(Region::Dram, AccessKind::Write, Tag::Activations, addr::kDramOutput, out.size());
  return res;
}

}  // namespace sparq
