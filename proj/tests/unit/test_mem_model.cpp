#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "sparq/error.hpp"
#include "sparq/mem_model.hpp"
#include "sparq/synth.hpp"

using namespace sparq;

namespace {

// Word-at-a-time walk of the open-row model, no record merging.
double walk_cycles(const std::vector<std::uint64_t>& addrs, const MemConfig& cfg) {
  double cycles = 0;
  bool open = false;
  std::uint64_t row = 0;
  for (auto a : addrs) {
    const std::uint64_t r = a / cfg.words_per_row;
    if (!open || r != row) cycles += cfg.row_change_factor * cfg.cycles_seq_word;
    open = true;
    row = r;
    cycles += cfg.cycles_seq_word;
  }
  return cycles;
}

AccessTrace trace_of(const std::vector<std::uint64_t>& addrs) {
  AccessTrace t;
  for (auto a : addrs) t.add(Region::Dram, AccessKind::Read, Tag::Weights, a, 1);
  return t;
}

AccessTrace random_trace(Rng& rng, int n) {
  AccessTrace t;
  for (int i = 0; i < n; ++i) {
    const auto region = rng.bernoulli(0.8) ? Region::Dram : Region::Sram;
    t.add(region, rng.bernoulli(0.5) ? AccessKind::Read : AccessKind::Write,
          static_cast<Tag>(rng.uniform_int(0, 2)), static_cast<std::uint64_t>(rng.uniform_int(0, 20000)),
          static_cast<std::uint64_t>(rng.uniform_int(1, 3000)));
  }
  return t;
}

}  // namespace

TEST(CostTrace, SpecExamples) {
  const MemConfig cfg;
  const auto seq = cost_trace(schedule_dense_weight_stream(1, 64, cfg), cfg);
  EXPECT_EQ(seq.cycles, 114.0);
  EXPECT_EQ(seq.row_activations, 1u);
  EXPECT_EQ(seq.dram_words, 64u);
  EXPECT_EQ(seq.dram_bursts, 8u);

  const auto scat = cost_trace(scattered_trace(64, cfg), cfg);
  EXPECT_EQ(scat.cycles, 3264.0);
  EXPECT_EQ(scat.row_activations, 64u);

  const auto empty = cost_trace(AccessTrace{}, cfg);
  EXPECT_EQ(empty.cycles, 0.0);
  EXPECT_EQ(empty.row_activations, 0u);
  EXPECT_EQ(empty.dram_words + empty.sram_words, 0u);
  EXPECT_EQ(empty.energy_pj, 0.0);
}

TEST(CostTrace, SramCostsEnergyOnly) {
  const MemConfig cfg;
  AccessTrace t;
  t.add(Region::Sram, AccessKind::Write, Tag::Activations, 0, 100);
  const auto r = cost_trace(t, cfg);
  EXPECT_EQ(r.cycles, 0.0);
  EXPECT_EQ(r.sram_words, 100u);
  EXPECT_EQ(r.energy_pj, 500.0);
  EXPECT_EQ(r.tag(Tag::Activations).energy_pj, 500.0);
}

TEST(DenseStream, Layouts) {
  const MemConfig cfg;
  const auto small = schedule_dense_weight_stream(4, 4, cfg);
  EXPECT_EQ(small.words(Region::Dram), 16u);
  EXPECT_EQ(cost_trace(small, cfg).row_activations, 1u);

  const auto big = cost_trace(schedule_dense_weight_stream(768, 768, cfg), cfg);
  EXPECT_EQ(big.dram_words, 589824u);
  EXPECT_EQ(big.row_activations, 576u);

  // Straddling a row boundary costs a second activation.
  EXPECT_EQ(cost_trace(schedule_dense_weight_stream(1, 16, cfg, 1020), cfg).row_activations, 2u);

  EXPECT_TRUE(schedule_dense_weight_stream(0, 5, cfg).empty());
  EXPECT_TRUE(schedule_dense_weight_stream(5, 0, cfg).empty());
}

TEST(RandomVsBurst, Examples) {
  MemConfig cfg;
  EXPECT_DOUBLE_EQ(random_vs_burst_ratio(1, cfg), 1.0);
  // Closed form: n (1 + f) / (n + ceil(n / row) f).
  for (std::uint64_t n : {10ULL, 1000ULL, 10000ULL, 100000ULL}) {
    const double want = n * 51.0 / (static_cast<double>(n) + std::ceil(n / 1024.0) * 50.0);
    EXPECT_NEAR(random_vs_burst_ratio(n, cfg), want, 1e-9 * want) << n;
  }
  cfg.row_change_factor = 1.0;
  EXPECT_NEAR(random_vs_burst_ratio(1 << 20, cfg), 2.0, 2e-3);
  EXPECT_THROW(random_vs_burst_ratio(0, cfg), InvalidArgument);
}

TEST(CostProperty, MatchesWordWalk) {
  Rng rng(17);
  MemConfig cfg;
  cfg.words_per_row = 16;
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<std::uint64_t> addrs(static_cast<std::size_t>(rng.uniform_int(1, 60)));
    for (auto& a : addrs) a = static_cast<std::uint64_t>(rng.uniform_int(0, 100));
    ASSERT_EQ(cost_trace(trace_of(addrs), cfg).cycles, walk_cycles(addrs, cfg));
  }
}

TEST(CostProperty, SortedOrderIsMinimalExhaustive) {
  Rng rng(23);
  MemConfig cfg;
  cfg.words_per_row = 8;
  for (int trial = 0; trial < 60; ++trial) {
    const auto n = static_cast<std::size_t>(rng.uniform_int(1, 8));
    std::vector<std::uint64_t> addrs(n);
    for (auto& a : addrs) a = static_cast<std::uint64_t>(rng.uniform_int(0, 40));
    std::sort(addrs.begin(), addrs.end());
    const double sorted_cost = cost_trace(trace_of(addrs), cfg).cycles;
    double best = sorted_cost;
    auto perm = addrs;
    do {
      const double c = cost_trace(trace_of(perm), cfg).cycles;
      ASSERT_EQ(c, walk_cycles(perm, cfg));
      best = std::min(best, c);
    } while (std::next_permutation(perm.begin(), perm.end()));
    ASSERT_EQ(sorted_cost, best);
  }
}

TEST(CostProperty, AdditivityAndRatioBound) {
  Rng rng(29);
  const MemConfig cfg;
  for (int trial = 0; trial < 300; ++trial) {
    const AccessTrace a = random_trace(rng, static_cast<int>(rng.uniform_int(0, 20)));
    const AccessTrace b = random_trace(rng, static_cast<int>(rng.uniform_int(0, 20)));
    AccessTrace ab = a;
    ab.append(b);
    const auto ca = cost_trace(a, cfg), cb = cost_trace(b, cfg), cab = cost_trace(ab, cfg);
    ASSERT_GE(cab.cycles, ca.cycles + cb.cycles - cfg.row_change_factor * cfg.cycles_seq_word);
    ASSERT_LE(cab.cycles, ca.cycles + cb.cycles);
    // Invariant from the definition.
    ASSERT_EQ(cab.cycles, cab.dram_words * cfg.cycles_seq_word +
                              cab.row_activations * cfg.row_change_factor * cfg.cycles_seq_word);
    if (cab.dram_words > 0) {
      const double r = cab.cycles / static_cast<double>(cab.dram_words);
      ASSERT_GE(r, 1.0);
      ASSERT_LE(r, 1.0 + cfg.row_change_factor);
    }
  }
}

TEST(Energy, Examples) {
  const MemConfig cfg;
  const auto none = energy_breakdown(1000, MemCostReport{}, cfg);
  EXPECT_EQ(none.total_pj, 1000.0);
  EXPECT_EQ(none.mac_pj, 1000.0);

  MemCostReport m;
  m.dram_words = 1000;
  const auto e = energy_breakdown(1000, m, cfg);
  EXPECT_EQ(e.dram_pj / e.mac_pj, 100.0);
  EXPECT_EQ(e.total_pj, e.mac_pj + e.dram_pj + e.sram_pj);
}

TEST(Energy, FiguresOfMerit) {
  const MemConfig cfg;
  // 1e9 ops in 5e8 cycles at 500 MHz: one second. 1e12 pJ in that second: 1 W.
  const auto f = figures_of_merit(1'000'000'000, 5e8, 1e12, cfg);
  EXPECT_DOUBLE_EQ(f.seconds, 1.0);
  EXPECT_DOUBLE_EQ(f.effective_gops, 1.0);
  EXPECT_DOUBLE_EQ(f.watts, 1.0);
  EXPECT_DOUBLE_EQ(f.gops_per_watt, 1.0);
  EXPECT_EQ(figures_of_merit(10, 0, 0, cfg).effective_gops, 0.0);
  EXPECT_EQ(layer_cycles(10, 1280, cfg), 10.0);
  EXPECT_EQ(layer_cycles(10, 1281, cfg), 11.0);
}

TEST(BrainBudget, Examples) {
  EXPECT_NEAR(brain_budget(1, 1e4, 1e10, 100e-15), 10.0, 1e-12);
  BrainBudget k;
  k.fanout = 1e4;
  k.neurons = 1e10;
  k.energy_per_syn_j = 100e-15;
  k.power_w = 10;
  EXPECT_NEAR(*solve_for(k).rate_hz, 1.0, 1e-12);
  EXPECT_THROW(brain_budget(0, 1e4, 1e10, 1e-13), InvalidArgument);
  BrainBudget two;
  two.rate_hz = 1;
  two.fanout = 1e4;
  two.neurons = 1e10;
  EXPECT_THROW(solve_for(two), Underdetermined);
  BrainBudget none{1.0, 1e4, 1e10, 1e-13, 10.0};
  EXPECT_THROW(solve_for(none), Underdetermined);
}

TEST(BrainBudget, RoundTripEveryUnknown) {
  Rng rng(41);
  for (int trial = 0; trial < 2000; ++trial) {
    const double f[4] = {std::exp(rng.uniform(-5, 5)), std::exp(rng.uniform(0, 12)), std::exp(rng.uniform(5, 25)),
                         std::exp(rng.uniform(-35, -25))};
    const double p = brain_budget(f[0], f[1], f[2], f[3]);
    for (int missing = 0; missing < 5; ++missing) {
      BrainBudget b{f[0], f[1], f[2], f[3], p};
      std::optional<double>* slots[5] = {&b.rate_hz, &b.fanout, &b.neurons, &b.energy_per_syn_j, &b.power_w};
      const double truth = missing < 4 ? f[missing] : p;
      slots[missing]->reset();
      const BrainBudget s = solve_for(b);
      const std::optional<double>* out[5] = {&s.rate_hz, &s.fanout, &s.neurons, &s.energy_per_syn_j, &s.power_w};
      ASSERT_NEAR(**out[missing] / truth, 1.0, 1e-12);
    }
  }
}

TEST(TraceCsv, RoundTripAndErrors) {
  Rng rng(43);
  const AccessTrace t = random_trace(rng, 50);
  const AccessTrace back = AccessTrace::from_csv(t.to_csv());
  EXPECT_EQ(back.records(), t.records());
  // The words column is optional.
  const auto one = AccessTrace::from_csv("# c\nregion,address,kind,tag\ndram,5,read,weights\n");
  ASSERT_EQ(one.records().size(), 1u);
  EXPECT_EQ(one.records()[0].words, 1u);
  EXPECT_THROW(AccessTrace::from_csv("dram,5,read\n"), MalformedStream);
  EXPECT_THROW(AccessTrace::from_csv("dram,-5,read,weights\n"), MalformedStream);
  EXPECT_THROW(AccessTrace::from_csv("flash,5,read,weights\n"), MalformedStream);
}

TEST(MemConfigTest, Validation) {
  MemConfig c;
  EXPECT_NO_THROW(c.validate());
  c.words_per_row = 0;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = MemConfig{};
  c.row_change_factor = 0.5;
  EXPECT_THROW(c.validate(), InvalidArgument);
}
