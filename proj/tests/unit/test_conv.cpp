#include <gtest/gtest.h>

#include "sparq/conv.hpp"
#include "sparq/error.hpp"
#include "sparq/synth.hpp"

using namespace sparq;

namespace {

constexpr QFormat kQ88{8, 8};

std::int64_t rhe(std::int64_t num, int shift) {
  if (shift <= 0) return num * (std::int64_t{1} << -shift);
  const std::int64_t den = std::int64_t{1} << shift;
  std::int64_t q = num / den, r = num % den;
  if (r < 0) {
    q -= 1;
    r += den;
  }
  if (2 * r > den || (2 * r == den && q % 2 != 0)) ++q;
  return q;
}

// Wide-integer reference written from the layer definition: exact int64 sums,
// then rounding, clamping, ReLU and pooling. Valid when no 32-bit accumulator
// would saturate, which the caller checks.
QTensor wide_conv(const ConvLayerSpec& s, const QTensor& in, bool* would_saturate) {
  const auto H = static_cast<std::int64_t>(in.height()), W = static_cast<std::int64_t>(in.width());
  const std::int64_t ch = (H + 2 * s.pad - s.kernel_h) / s.stride + 1;
  const std::int64_t cw = (W + 2 * s.pad - s.kernel_w) / s.stride + 1;
  std::vector<std::int16_t> pre(static_cast<std::size_t>(s.out_channels * ch * cw));
  for (std::uint32_t oc = 0; oc < s.out_channels; ++oc)
    for (std::int64_t oy = 0; oy < ch; ++oy)
      for (std::int64_t ox = 0; ox < cw; ++ox) {
        std::int64_t acc = s.bias[oc];
        for (std::uint32_t ic = 0; ic < s.in_channels; ++ic)
          for (std::uint32_t ky = 0; ky < s.kernel_h; ++ky)
            for (std::uint32_t kx = 0; kx < s.kernel_w; ++kx) {
              const std::int64_t iy = oy * s.stride + ky - s.pad, ix = ox * s.stride + kx - s.pad;
              if (iy < 0 || ix < 0 || iy >= H || ix >= W) continue;
              acc += std::int64_t{s.weight(oc, ic, ky, kx)} *
                     in.at(ic, static_cast<std::uint32_t>(iy), static_cast<std::uint32_t>(ix));
              if (acc > INT32_MAX || acc < INT32_MIN) *would_saturate = true;
            }
        std::int64_t v = rhe(acc, s.acc_frac_bits() - s.out_fmt.frac_bits);
        v = std::clamp<std::int64_t>(v, -32768, 32767);
        if (s.relu) v = std::max<std::int64_t>(v, 0);
        pre[static_cast<std::size_t>((oc * ch + oy) * cw + ox)] = static_cast<std::int16_t>(v);
      }
  QTensor full({s.out_channels, static_cast<std::uint32_t>(ch), static_cast<std::uint32_t>(cw)}, s.out_fmt, pre);
  if (s.pool == Pool::None) return full;
  QTensor out = QTensor::feature_map(s.out_channels, static_cast<std::uint32_t>(ch / 2),
                                     static_cast<std::uint32_t>(cw / 2), s.out_fmt);
  for (std::uint32_t c = 0; c < out.channels(); ++c)
    for (std::uint32_t y = 0; y < out.height(); ++y)
      for (std::uint32_t x = 0; x < out.width(); ++x) {
        std::int16_t m = full.at(c, 2 * y, 2 * x);
        for (auto [dy, dx] : {std::pair{0u, 1u}, {1u, 0u}, {1u, 1u}}) m = std::max(m, full.at(c, 2 * y + dy, 2 * x + dx));
        out.at(c, y, x) = m;
      }
  return out;
}

ConvLayerSpec random_spec(Rng& rng, std::uint32_t& h, std::uint32_t& w) {
  const std::uint32_t ks[] = {1, 3, 5};
  const std::uint32_t k = ks[rng.uniform_int(0, 2)];
  const auto stride = static_cast<std::uint32_t>(rng.uniform_int(1, 2));
  const auto pad = static_cast<std::uint32_t>(rng.uniform_int(0, 2));
  const Pool pool = rng.bernoulli(0.5) ? Pool::Max2x2 : Pool::None;
  const auto in_c = static_cast<std::uint32_t>(rng.uniform_int(1, 4));
  const auto out_c = static_cast<std::uint32_t>(rng.uniform_int(1, 5));
  const auto reach = std::max<std::int64_t>(std::int64_t{k} - 2 * std::int64_t{pad}, 1);
  const auto min_side = static_cast<std::uint32_t>(reach) + (pool == Pool::Max2x2 ? stride + 1 : 0);
  h = static_cast<std::uint32_t>(rng.uniform_int(min_side, min_side + 10));
  w = static_cast<std::uint32_t>(rng.uniform_int(min_side, min_side + 10));
  return random_conv_spec(rng, in_c, out_c, k, stride, pad, rng.bernoulli(0.8), pool);
}

}  // namespace

TEST(ConvGeometryTest, ShapesAndErrors) {
  Rng rng(1);
  const auto s = random_conv_spec(rng, 2, 3, 3, 2, 1, true, Pool::Max2x2);
  const auto g = s.geometry(2, 9, 8);
  EXPECT_EQ(g.conv_h, 5u);
  EXPECT_EQ(g.conv_w, 4u);
  EXPECT_EQ(g.out_h, 2u);
  EXPECT_EQ(g.out_w, 2u);
  EXPECT_EQ(s.dense_macs(g), 5u * 4 * 3 * 9 * 2);
  EXPECT_THROW(s.geometry(3, 9, 8), ShapeMismatch);
  const auto big = random_conv_spec(rng, 1, 1, 5, 1, 0, true, Pool::None);
  EXPECT_THROW(big.geometry(1, 4, 4), ShapeMismatch);
}

TEST(ConvOracle, MatchesWideIntegerReference) {
  Rng rng(100);
  for (int trial = 0; trial < 300; ++trial) {
    std::uint32_t h = 0, w = 0;
    const auto spec = random_spec(rng, h, w);
    const QTensor in = random_feature_map(rng, spec.in_channels, h, w, rng.uniform(), kQ88, 2048, true);
    bool sat = false;
    const QTensor want = wide_conv(spec, in, &sat);
    ASSERT_FALSE(sat);
    EXPECT_EQ(conv_dense_oracle(spec, in), want) << "trial " << trial;
  }
}

TEST(ConvZeroSkip, BitExactAgainstOracleAcrossConfigs) {
  Rng rng(200);
  for (int trial = 0; trial < 300; ++trial) {
    std::uint32_t h = 0, w = 0;
    const auto spec = random_spec(rng, h, w);
    const double zero_p = std::array{0.0, 0.25, 0.5, 0.8, 1.0}[rng.uniform_int(0, 4)];
    const QTensor in = random_feature_map(rng, spec.in_channels, h, w, zero_p, kQ88, 4096, true);
    const QTensor want = conv_dense_oracle(spec, in);
    const auto sparse = conv_zeroskip(spec, encode_sm(in));
    EXPECT_EQ(decode_sm(sparse.output), want) << "trial " << trial;
    const auto dense = conv_dense(spec, in);
    EXPECT_EQ(decode_sm(dense.output), want);
    EXPECT_LE(sparse.counters.macs_executed, sparse.counters.macs_dense_equivalent);
    EXPECT_EQ(dense.counters.macs_executed, dense.counters.macs_dense_equivalent);
  }
}

TEST(ConvZeroSkip, BitExactUnderAccumulatorSaturation) {
  Rng rng(7);
  int saturating_cases = 0;
  for (int trial = 0; trial < 50; ++trial) {
    auto spec = random_conv_spec(rng, 8, 3, 3, 1, 1, false, Pool::None, 1.9);
    for (auto& b : spec.bias) b = static_cast<std::int32_t>(rng.uniform_int(INT32_MAX / 2, INT32_MAX));
    const QTensor in = random_feature_map(rng, 8, 6, 6, 0.3, kQ88, 32767, true);
    reset_diagnostics();
    const QTensor want = conv_dense_oracle(spec, in);
    if (diagnostics().accumulator_saturations > 0) ++saturating_cases;
    EXPECT_EQ(decode_sm(conv_zeroskip(spec, encode_sm(in)).output), want);
  }
  EXPECT_GT(saturating_cases, 10);
}

TEST(ConvZeroSkip, WorkScalesWithNonZeros) {
  Rng rng(3);
  const auto spec = random_conv_spec(rng, 2, 4, 3, 1, 1, true, Pool::None);
  const QTensor in = exact_sparsity_map(rng, 2, 20, 20, 0.9);
  const auto s = encode_sm(in);
  const auto r = conv_zeroskip(spec, s);
  EXPECT_EQ(r.pixels_visited, s.nnz());
  EXPECT_EQ(r.sm_words_scanned, (s.pixel_count() + 63) / 64);
  // Interior pixels touch all 9 taps; every executed MAC comes from a non-zero.
  EXPECT_LE(r.counters.macs_executed, s.nnz() * 9 * 4);
}

TEST(ConvZeroSkip, AllZeroInputExecutesNoMacs) {
  Rng rng(3);
  const auto spec = random_conv_spec(rng, 2, 4, 3, 1, 1, true, Pool::None);
  const auto r = conv_zeroskip(spec, encode_sm(QTensor::feature_map(2, 8, 8, kQ88)));
  EXPECT_EQ(r.counters.macs_executed, 0u);
  EXPECT_FALSE(r.efficiency_pct().has_value());
}

TEST(ConvZeroSkip, EfficiencyMatchesTapCount) {
  // Dense MACs count every tap including padding; executed MACs count valid taps
  // of non-zero pixels only. For a 3x3, pad 1 layer on an n x n map each
  // interior pixel has 9 valid taps, edges 6 and corners 4.
  Rng rng(12);
  const std::uint32_t n = 32;
  const auto spec = random_conv_spec(rng, 1, 1, 3, 1, 1, true, Pool::None);
  const QTensor in = exact_sparsity_map(rng, 1, n, n, 0.75);
  std::uint64_t valid_taps = 0;
  for (std::uint32_t y = 0; y < n; ++y)
    for (std::uint32_t x = 0; x < n; ++x)
      if (in.at(0, y, x) != 0) {
        const std::uint64_t ty = (y == 0 || y == n - 1) ? 2 : 3, tx = (x == 0 || x == n - 1) ? 2 : 3;
        valid_taps += ty * tx;
      }
  const auto r = conv_zeroskip(spec, encode_sm(in));
  EXPECT_EQ(r.counters.macs_executed, valid_taps);
  EXPECT_EQ(r.counters.macs_dense_equivalent, std::uint64_t{n} * n * 9);
  EXPECT_NEAR(*r.efficiency_pct(), 100.0 * n * n * 9 / static_cast<double>(valid_taps), 1e-9);
}

TEST(FusedPool, EqualsTwoPassOnRandomPlanes) {
  Rng rng(44);
  for (int trial = 0; trial < 200; ++trial) {
    const auto c = static_cast<std::uint32_t>(rng.uniform_int(1, 4));
    const auto h = static_cast<std::uint32_t>(rng.uniform_int(2, 15));
    const auto w = static_cast<std::uint32_t>(rng.uniform_int(2, 15));
    std::vector<std::int32_t> acc(std::size_t{c} * h * w);
    for (auto& a : acc) a = static_cast<std::int32_t>(rng.uniform_int(-(1 << 24), 1 << 24));
    const bool relu = rng.bernoulli(0.7);
    const QTensor fused = fused_relu_pool(acc, c, h, w, 22, kQ88, relu, Pool::Max2x2);
    QTensor full = QTensor::feature_map(c, h, w, kQ88);
    for (std::size_t i = 0; i < acc.size(); ++i) full.data()[i] = renormalize_raw(acc[i], 22, kQ88);
    const QTensor two_pass = max_pool_2x2(relu ? relu_pass(full) : full);
    EXPECT_EQ(fused, two_pass);
  }
}

TEST(FusedPool, TraceHasNoFullResolutionWrites) {
  Rng rng(5);
  const auto spec = random_conv_spec(rng, 3, 4, 3, 1, 1, true, Pool::Max2x2);
  const QTensor in = random_feature_map(rng, 3, 16, 16, 0.5);
  const auto fused = conv_zeroskip(spec, encode_sm(in));
  const auto unfused = conv_zeroskip(spec, encode_sm(in), ConvOptions{false});
  EXPECT_EQ(fused.output, unfused.output);

  const std::uint64_t full_res = 4ULL * 16 * 16;
  auto activation_writes = [](const AccessTrace& t) {
    std::uint64_t n = 0;
    for (const auto& a : t.records())
      if (a.tag == Tag::Activations && a.kind == AccessKind::Write) n += a.words;
    return n;
  };
  // Fused: only the compressed pooled map leaves the engine.
  const std::uint64_t pooled_words = (fused.output.pixel_count() + 15) / 16 + fused.output.nnz();
  EXPECT_EQ(activation_writes(fused.accesses), pooled_words);
  EXPECT_EQ(fused.accesses.words(Region::Sram, Tag::Activations, AccessKind::Write), 0u);
  // Unfused: the full-resolution post-ReLU map goes through scratch.
  EXPECT_EQ(unfused.accesses.words(Region::Sram, Tag::Activations, AccessKind::Write), full_res);
}

TEST(BiasToAccumulator, ShiftsExactly) {
  const QTensor b = QTensor::vector(kQ88, {1, -3});
  EXPECT_EQ(bias_to_accumulator(b, 22), (std::vector<std::int32_t>{1 << 14, -3 << 14}));
  EXPECT_THROW(bias_to_accumulator(QTensor::vector(QFormat{1, 15}, {1}), 10), InvalidArgument);
}

TEST(ConvSpecValidate, RejectsBadShapes) {
  Rng rng(2);
  auto s = random_conv_spec(rng, 2, 3, 3, 1, 0, true, Pool::None);
  s.bias.pop_back();
  EXPECT_THROW(s.validate(), ShapeMismatch);
  auto t = random_conv_spec(rng, 2, 3, 3, 1, 0, true, Pool::None);
  t.in_channels = 5;
  EXPECT_THROW(t.validate(), ShapeMismatch);
}
