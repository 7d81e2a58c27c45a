#include <gtest/gtest.h>

#include <cmath>

#include "sparq/engine.hpp"
#include "sparq/error.hpp"
#include "sparq/synth.hpp"

using namespace sparq;

namespace {

std::vector<ConvLayerSpec> small_cnn(Rng& rng) {
  return {random_conv_spec(rng, 3, 8, 3, 1, 1, true, Pool::Max2x2),
          random_conv_spec(rng, 8, 8, 3, 1, 1, true, Pool::None),
          random_conv_spec(rng, 8, 4, 1, 1, 0, false, Pool::None)};
}

}  // namespace

TEST(RunNetwork, DenseAndSparseAgree) {
  Rng rng(1);
  const auto layers = small_cnn(rng);
  for (double z : {0.0, 0.5, 0.9}) {
    const QTensor in = random_feature_map(rng, 3, 16, 16, z);
    RunOptions d, s;
    d.mode = RunMode::Dense;
    s.mode = RunMode::Sparse;
    const auto rd = run_network(layers, in, d);
    const auto rs = run_network(layers, in, s);
    EXPECT_EQ(rd.output, rs.output);
    EXPECT_EQ(rd.report.output_hash, rs.report.output_hash);
    EXPECT_EQ(rd.report.ops.macs_dense_equivalent, rs.report.ops.macs_dense_equivalent);
    EXPECT_LE(rs.report.ops.macs_executed, rd.report.ops.macs_executed);
    EXPECT_EQ(rd.report.ops.macs_executed, rd.report.ops.macs_dense_equivalent);
  }
}

TEST(RunNetwork, ReportTotalsAreLayerSums) {
  Rng rng(2);
  const auto layers = small_cnn(rng);
  const auto run = run_network(layers, random_feature_map(rng, 3, 12, 12, 0.6));
  const RunReport& r = run.report;
  ASSERT_EQ(r.layers.size(), 3u);
  OpCounter ops;
  double cycles = 0, energy = 0;
  std::uint64_t peak = 0;
  for (const auto& l : r.layers) {
    ops += l.ops;
    cycles += l.cycles;
    energy += l.energy.total_pj;
    peak = std::max(peak, l.live_bytes);
    EXPECT_DOUBLE_EQ(l.energy.total_pj, l.energy.mac_pj + l.energy.dram_pj + l.energy.sram_pj);
    EXPECT_GE(l.cycles, l.mem.cycles);
    EXPECT_GE(l.cycles, std::ceil(static_cast<double>(l.ops.macs_executed) / r.config.mac_units));
  }
  EXPECT_EQ(r.ops, ops);
  EXPECT_DOUBLE_EQ(r.cycles, cycles);
  EXPECT_DOUBLE_EQ(r.energy.total_pj, energy);
  EXPECT_EQ(r.peak_live_bytes, peak);
  EXPECT_EQ(r.sparsity_table.size(), 3u);
  // Each layer consumes what the previous one produced.
  EXPECT_DOUBLE_EQ(r.layers[1].input_sparsity, r.layers[0].output_sparsity);
  EXPECT_DOUBLE_EQ(r.fom.effective_gops,
                   static_cast<double>(r.ops.dense_equivalent_ops()) / (r.cycles / r.config.clock_hz) / 1e9);
}

TEST(RunNetwork, RejectsChannelMismatch) {
  Rng rng(3);
  const auto layers = small_cnn(rng);
  EXPECT_THROW(run_network(layers, random_feature_map(rng, 4, 8, 8, 0.5)), ShapeMismatch);
}

TEST(RunNetwork, Deterministic) {
  Rng a(7), b(7);
  const auto la = small_cnn(a), lb = small_cnn(b);
  const auto ra = run_network(la, random_feature_map(a, 3, 10, 10, 0.4));
  const auto rb = run_network(lb, random_feature_map(b, 3, 10, 10, 0.4));
  EXPECT_EQ(ra.output, rb.output);
  EXPECT_EQ(ra.report.cycles, rb.report.cycles);
  EXPECT_EQ(ra.report.energy.total_pj, rb.report.energy.total_pj);
}

TEST(Aggregate, MeanAndStandardError) {
  Rng rng(4);
  const auto layers = small_cnn(rng);
  std::vector<RunReport> runs;
  for (int i = 0; i < 6; ++i) runs.push_back(run_network(layers, random_feature_map(rng, 3, 12, 12, 0.5)).report);
  const RunReport agg = aggregate_reports(runs);
  EXPECT_EQ(agg.inputs, 6u);
  for (std::size_t l = 0; l < 3; ++l) {
    std::vector<double> v;
    for (const auto& r : runs) v.push_back(r.layers[l].output_sparsity);
    double m = 0;
    for (double x : v) m += x;
    m /= v.size();
    double ss = 0;
    for (double x : v) ss += (x - m) * (x - m);
    const double se = std::sqrt(ss / (v.size() - 1)) / std::sqrt(v.size());
    EXPECT_NEAR(agg.sparsity_table[l].mean, m, 1e-12);
    EXPECT_NEAR(agg.sparsity_table[l].stderr_, se, 1e-12);
    EXPECT_EQ(agg.sparsity_table[l].samples, 6u);
  }
  std::uint64_t macs = 0;
  for (const auto& r : runs) macs += r.ops.macs_executed;
  EXPECT_EQ(agg.ops.macs_executed, macs);
  EXPECT_EQ(aggregate_reports({runs[0]}).output_hash, runs[0].output_hash);
  EXPECT_THROW(aggregate_reports({}), InvalidArgument);
}

TEST(RunSequence, ThetaZeroSparseMatchesDense) {
  Rng rng(5);
  const std::vector<GruLayerSpec> layers{random_gru_spec(rng, 12, 16, 0.0), random_gru_spec(rng, 16, 10, 0.0)};
  SequenceParams p;
  p.size = 12;
  p.steps = 30;
  const auto xs = synthetic_sequence(rng, p);
  RunOptions d, s;
  d.mode = RunMode::Dense;
  const auto rd = run_sequence(layers, xs, d);
  const auto rs = run_sequence(layers, xs, s);
  ASSERT_EQ(rd.outputs.size(), 30u);
  EXPECT_EQ(rd.outputs, rs.outputs);
  EXPECT_EQ(rd.report.output_hash, rs.report.output_hash);
  ASSERT_TRUE(rs.report.recurrent.has_value());
  const auto& t = *rs.report.recurrent;
  EXPECT_EQ(t.steps, 30u);
  const std::uint64_t words = layers[0].weight_words() + layers[1].weight_words();
  EXPECT_EQ(t.weight_bytes_dense, 30 * words * 2);
  EXPECT_EQ(t.weight_bytes_fetched, t.input_side_weight_bytes_fetched + t.hidden_side_weight_bytes_fetched);
  EXPECT_EQ(t.weight_bytes_dense, t.input_side_weight_bytes_dense + t.hidden_side_weight_bytes_dense);
  // Held inputs skip events even at theta 0.
  ASSERT_TRUE(t.weight_reduction().has_value());
  EXPECT_GE(*t.weight_reduction(), 1.0);
  ASSERT_TRUE(t.total_reduction().has_value());
  EXPECT_GE(*t.total_reduction(), 1.0);
  EXPECT_EQ(t.event_rate.size(), 30u);
}

TEST(EnergyAudit, WeightsDominateBatchOneRecurrentStep) {
  Rng rng(8);
  const auto spec = random_gru_spec(rng, 768, 768, 0.0);
  AccessTrace trace;
  append_dense_gru_step_trace(spec, {0, spec.weight_words() / 2}, trace);
  const MemConfig cfg;
  const auto cost = cost_trace(trace, cfg);
  const double share = cost.tag(Tag::Weights).energy_pj / cost.energy_pj;
  EXPECT_GE(share, 0.9);
}
