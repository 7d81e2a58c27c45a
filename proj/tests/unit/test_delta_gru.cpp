#include <gtest/gtest.h>

#include <cmath>

#include "sparq/delta_gru.hpp"
#include "sparq/error.hpp"
#include "sparq/synth.hpp"

using namespace sparq;

namespace {

constexpr QFormat kQ88{8, 8};

std::int16_t q15_of(double v) {
  const double s = std::nearbyint(v * 32768.0);
  return static_cast<std::int16_t>(std::clamp(s, -32768.0, 32767.0));
}

}  // namespace

TEST(ActivationLut, KnotsMatchClosedForm) {
  const auto sk = sigmoid_knots();
  const auto tk = tanh_knots();
  ASSERT_EQ(sk.size(), 1025u);
  ASSERT_EQ(tk.size(), 1025u);
  for (std::size_t k = 0; k < sk.size(); ++k) {
    const double x = -8.0 + static_cast<double>(k) / 64.0;
    EXPECT_NEAR(sk[k], q15_of(1.0 / (1.0 + std::exp(-x))), 1) << k;
    EXPECT_NEAR(tk[k], q15_of(std::tanh(x)), 1) << k;
  }
}

TEST(ActivationLut, AccuracyAndMonotonicityOverAllInputs) {
  std::int16_t prev_s = INT16_MIN, prev_t = INT16_MIN;
  for (std::int32_t raw = -32768; raw <= 32767; ++raw) {
    const auto x = static_cast<std::int16_t>(raw);
    const double xr = raw / 256.0;
    const std::int16_t s = sigmoid_q15(x), t = tanh_q15(x);
    ASSERT_GE(s, prev_s);
    ASSERT_GE(t, prev_t);
    prev_s = s;
    prev_t = t;
    const double sig = 1.0 / (1.0 + std::exp(-xr));
    // Outside [-8, 8) the tables clamp; error there is bounded by the tail.
    const double tol = std::abs(xr) < 8 ? 1e-4 : 4e-4;
    ASSERT_NEAR(s / 32768.0, sig, tol) << xr;
    ASSERT_NEAR(t / 32768.0, std::tanh(xr), tol) << xr;
  }
  EXPECT_EQ(sigmoid_q15(0), 16384);
  EXPECT_EQ(tanh_q15(0), 0);
}

TEST(ColumnMajor, StackRowsInterleavesGates) {
  const QTensor a({2, 3}, kQ88, {1, 2, 3, 4, 5, 6});
  const QTensor b({1, 3}, kQ88, {7, 8, 9});
  const std::array<const QTensor*, 2> blocks{&a, &b};
  const auto m = ColumnMajorMatrix::stack_rows(blocks);
  EXPECT_EQ(m.rows(), 3u);
  EXPECT_EQ(m.cols(), 3u);
  const auto c1 = m.column(1);
  EXPECT_EQ(std::vector<std::int16_t>(c1.begin(), c1.end()), (std::vector<std::int16_t>{2, 5, 8}));
}

TEST(DeltaMxv, MatchesDenseProductOfDeltas) {
  Rng rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    const auto rows = static_cast<std::uint32_t>(rng.uniform_int(1, 40));
    const auto cols = static_cast<std::uint32_t>(rng.uniform_int(1, 40));
    const QTensor w = random_tensor(rng, {rows, cols}, kWeightFormat, 1.0);
    const std::array<const QTensor*, 1> one{&w};
    const auto m = ColumnMajorMatrix::stack_rows(one);
    DeltaStream d{cols, {}};
    std::vector<std::int64_t> dense_delta(cols, 0);
    for (std::uint32_t i = 0; i < cols; ++i) {
      if (rng.bernoulli(0.3)) {
        const auto v = static_cast<std::int32_t>(rng.uniform_int(-65535, 65535));
        if (v == 0) continue;
        d.events.push_back({i, v});
        dense_delta[i] = v;
      }
    }
    std::vector<std::int32_t> acc(rows, 0);
    OpCounter ops;
    AccessTrace trace;
    delta_mxv_accumulate(m, d, acc, ops, {&trace, 1000});
    // Row-major walk, clamping after every event in stream order.
    for (std::uint32_t r = 0; r < rows; ++r) {
      std::int64_t want = 0;
      for (const auto& e : d.events) {
        want = std::clamp<std::int64_t>(want + std::int64_t{w.data()[r * cols + e.index]} * dense_delta[e.index],
                                        INT32_MIN, INT32_MAX);
      }
      ASSERT_EQ(acc[r], want);
    }
    EXPECT_EQ(ops.macs_executed, d.size() * rows);
    // One contiguous burst per event.
    ASSERT_EQ(trace.records().size() <= d.size(), true);
    EXPECT_EQ(trace.words(Region::Dram), d.size() * rows);
  }
}

TEST(DeltaMxv, EmptyStreamAndBadIndex) {
  const QTensor w({2, 2}, kQ88, {1, 2, 3, 4});
  const std::array<const QTensor*, 1> one{&w};
  const auto m = ColumnMajorMatrix::stack_rows(one);
  std::vector<std::int32_t> acc{5, 6};
  OpCounter ops;
  delta_mxv_accumulate(m, DeltaStream{2, {}}, acc, ops);
  EXPECT_EQ(acc, (std::vector<std::int32_t>{5, 6}));
  EXPECT_EQ(ops.macs_executed, 0u);
  EXPECT_THROW(delta_mxv_accumulate(m, DeltaStream{3, {{2, 1}}}, acc, ops), IndexOutOfRange);
  EXPECT_EQ(acc, (std::vector<std::int32_t>{5, 6}));
}

TEST(DeltaGru, ThetaZeroMatchesDenseOracle) {
  Rng rng(31);
  for (int trial = 0; trial < 30; ++trial) {
    const auto I = static_cast<std::uint32_t>(rng.uniform_int(1, 48));
    const auto H = static_cast<std::uint32_t>(rng.uniform_int(1, 48));
    const auto spec = random_gru_spec(rng, I, H, 0.0, rng.uniform(0.5, 2.0));
    SequenceParams p;
    p.kind = static_cast<SequenceKind>(rng.uniform_int(0, 2));
    p.steps = static_cast<std::uint32_t>(rng.uniform_int(1, 40));
    p.size = I;
    p.amplitude = rng.uniform(0.1, 3.0);
    const auto xs = synthetic_sequence(rng, p);
    reset_diagnostics();
    const auto want = gru_dense_oracle(spec, xs);
    ASSERT_EQ(diagnostics().accumulator_saturations, 0u);
    DeltaGruLayer layer(spec);
    DeltaState st = layer.initial_state();
    for (std::size_t t = 0; t < xs.size(); ++t) {
      const auto r = deltagru_step(layer, st, xs[t]);
      ASSERT_EQ(r.h, want[t]) << "trial " << trial << " step " << t;
      st = r.state;
    }
  }
}

TEST(DeltaGru, QuiescentInputProducesNoEvents) {
  Rng rng(1);
  auto spec = random_gru_spec(rng, 8, 8, 0.0);
  for (auto* b : {&spec.b_r, &spec.b_u, &spec.b_c}) std::fill(b->begin(), b->end(), 0);
  DeltaGruLayer layer(spec);
  const auto r = deltagru_step(layer, layer.initial_state(), QTensor::vector(kQ88, std::vector<std::int16_t>(8, 0)));
  EXPECT_EQ(r.stats.input_events + r.stats.hidden_events, 0u);
  EXPECT_EQ(r.stats.ops.macs_executed, 0u);
  EXPECT_EQ(r.stats.weight_words_fetched, 0u);
  // tanh(0) = 0 and the state stays at rest.
  EXPECT_EQ(r.h, QTensor::vector(kQ88, std::vector<std::int16_t>(8, 0)));
}

TEST(DeltaGru, SingleStepInputSideAudit) {
  // From rest, only the input side can fire, so the input-side bytes follow
  // directly from the event count.
  Rng rng(2);
  const std::uint32_t I = 32, H = 24;
  const auto spec = random_gru_spec(rng, I, H, 0.1);
  DeltaGruLayer layer(spec);
  QTensor x = random_tensor(rng, {I}, kQ88, 1.0);
  for (std::uint32_t i = 0; i < I; i += 3) x.data()[i] = 0;
  const auto r = deltagru_step(layer, layer.initial_state(), x);
  std::uint32_t expected_events = 0;
  for (auto v : x.data()) expected_events += std::abs(v) > spec.theta.raw ? 1 : 0;
  EXPECT_EQ(r.stats.input_events, expected_events);
  EXPECT_EQ(r.stats.hidden_events, 0u);
  EXPECT_EQ(r.stats.weight_words_fetched, std::uint64_t{expected_events} * 3 * H);
  EXPECT_LT(r.stats.weight_words_fetched, 3ULL * H * I);
}

TEST(DeltaGru, TraceHasOneBurstPerEvent) {
  Rng rng(3);
  const auto spec = random_gru_spec(rng, 10, 6, 0.05);
  DeltaGruLayer layer(spec);
  DeltaState st = layer.initial_state();
  std::vector<std::int16_t> h(6);
  SequenceParams p;
  p.size = 10;
  p.steps = 5;
  for (const auto& x : synthetic_sequence(rng, p)) {
    AccessTrace trace;
    const auto s = layer.step(st, x.data(), h, &trace);
    std::uint64_t bursts = 0;
    for (const auto& a : trace.records()) {
      if (a.region == Region::Dram) {
        EXPECT_EQ(a.words % 18, 0u);  // whole 3H columns
        bursts += a.words / 18;
      }
    }
    EXPECT_EQ(bursts, s.input_events + s.hidden_events);
  }
}

TEST(DeltaGru, LargerThetaNeverFetchesMoreInOneStep) {
  Rng rng(4);
  const auto base = random_gru_spec(rng, 16, 16, 0.0);
  SequenceParams p;
  p.size = 16;
  p.steps = 3;
  const auto xs = synthetic_sequence(rng, p);
  // Same state, same input; only theta differs.
  DeltaGruLayer l0(base);
  DeltaState st = l0.initial_state();
  for (std::size_t t = 0; t + 1 < xs.size(); ++t) st = deltagru_step(l0, st, xs[t]).state;
  std::uint64_t last = UINT64_MAX;
  for (double th : {0.0, 0.01, 0.05, 0.1, 0.5, 2.0}) {
    auto spec = base;
    spec.theta = quantize(th, kQ88);
    DeltaGruLayer l(spec);
    const auto r = deltagru_step(l, st, xs.back());
    EXPECT_LE(r.stats.weight_words_fetched, last);
    last = r.stats.weight_words_fetched;
  }
}

TEST(GruSpec, ValidateRejectsBadShapes) {
  Rng rng(5);
  auto s = random_gru_spec(rng, 4, 3, 0.0);
  s.w_hc = random_tensor(rng, {3, 4}, kWeightFormat, 0.1);
  EXPECT_THROW(s.validate(), ShapeMismatch);
  auto t = random_gru_spec(rng, 4, 3, 0.0);
  t.b_u.pop_back();
  EXPECT_THROW(t.validate(), ShapeMismatch);
  auto u = random_gru_spec(rng, 4, 3, 0.0);
  u.theta.raw = -1;
  EXPECT_THROW(u.validate(), InvalidArgument);
}
