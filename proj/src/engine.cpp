#include "sparq/engine.hpp"

#include <cmath>

#include "sparq/codec.hpp"
#include "sparq/error.hpp"

namespace sparq {

namespace {

std::optional<double> ratio_pct(std::uint64_t dense, std::uint64_t executed) {
  if (executed == 0) return std::nullopt;
  return 100.0 * static_cast<double>(dense) / static_cast<double>(executed);
}

std::optional<double> ratio(std::uint64_t dense, std::uint64_t actual) {
  if (actual == 0) return std::nullopt;
  return static_cast<double>(dense) / static_cast<double>(actual);
}

std::uint64_t payload_bytes(const SparseFeatureMap& m) { return (m.payload_bits() + 7) / 8; }

void cost_layer(LayerReport& lr, const AccessTrace& trace, const MemConfig& cfg) {
  lr.mem = cost_trace(trace, cfg);
  lr.cycles = layer_cycles(lr.mem.cycles, lr.ops.macs_executed, cfg);
  lr.energy = energy_breakdown(lr.ops.macs_executed, lr.mem, cfg);
}

void add_energy(EnergyBreakdown& into, const EnergyBreakdown& e) {
  into.mac_pj += e.mac_pj;
  into.dram_pj += e.dram_pj;
  into.sram_pj += e.sram_pj;
  into.total_pj += e.total_pj;
  for (std::size_t i = 0; i < kTagCount; ++i) into.per_tag_pj[i] += e.per_tag_pj[i];
}

}  // namespace

RunMode parse_run_mode(const std::string& s) {
  if (s == "dense") return RunMode::Dense;
  if (s == "sparse") return RunMode::Sparse;
  throw InvalidArgument("unknown mode '" + s + "' (expected dense or sparse)");
}

const char* to_string(RunMode m) noexcept { return m == RunMode::Dense ? "dense" : "sparse"; }

std::optional<double> LayerReport::efficiency_pct() const noexcept {
  return ratio_pct(ops.macs_dense_equivalent, ops.macs_executed);
}

std::optional<double> RecurrentTraffic::weight_reduction() const noexcept {
  return ratio(weight_bytes_dense, weight_bytes_fetched);
}

std::optional<double> RecurrentTraffic::total_reduction() const noexcept {
  return ratio(total_dram_bytes_dense, total_dram_bytes);
}

double RecurrentTraffic::mean_event_rate() const noexcept {
  if (event_rate.empty()) return 0.0;
  double s = 0.0;
  for (double r : event_rate) s += r;
  return s / static_cast<double>(event_rate.size());
}

std::optional<double> RunReport::efficiency_pct() const noexcept {
  return ratio_pct(ops.macs_dense_equivalent, ops.macs_executed);
}

void RunReport::finalize() {
  ops = {};
  mem = {};
  cycles = 0.0;
  energy = {};
  std::uint64_t live_sum = 0, live_max = 0;
  for (const auto& l : layers) {
    ops += l.ops;
    mem += l.mem;
    cycles += l.cycles;
    add_energy(energy, l.energy);
    live_sum += l.live_bytes;
    live_max = std::max(live_max, l.live_bytes);
  }
  // Recurrent state persists across layers; feed-forward maps do not.
  peak_live_bytes = recurrent ? live_sum : live_max;
  fom = figures_of_merit(ops.dense_equivalent_ops(), cycles, energy.total_pj, config);
  if (sparsity_table.empty()) {
    for (const auto& l : layers) sparsity_table.push_back({l.index, l.output_sparsity, 0.0, 1});
  }
}

std::uint64_t combine_hashes(const std::vector<std::uint64_t>& hashes) noexcept {
  if (hashes.size() == 1) return hashes.front();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (auto v : hashes) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

NetworkRun run_network(const std::vector<ConvLayerSpec>& layers, const QTensor& input, const RunOptions& opts) {
  opts.mem.validate();
  input.require_map();
  NetworkRun run;
  RunReport& rep = run.report;
  rep.name = opts.name;
  rep.mode = opts.mode;
  rep.config = opts.mem;

  SparseFeatureMap current = encode_sm(input);
  for (std::uint32_t i = 0; i < layers.size(); ++i) {
    const ConvLayerSpec& spec = layers[i];
    LayerRunResult r = opts.mode == RunMode::Sparse ? conv_zeroskip(spec, current, opts.conv)
                                                    : conv_dense(spec, decode_sm(current), opts.conv);
    LayerReport lr;
    lr.kind = "conv";
    lr.index = i;
    lr.ops = r.counters;
    lr.input_sparsity = current.sparsity();
    lr.output_sparsity = r.output_sparsity.sparsity;
    cost_layer(lr, r.accesses, opts.mem);
    const std::uint64_t weight_bytes = spec.weight_words() * opts.mem.word_bytes;
    if (opts.mode == RunMode::Sparse) {
      lr.live_bytes = payload_bytes(current) + payload_bytes(r.output) + weight_bytes + r.accumulator_bytes;
    } else {
      lr.live_bytes = (current.pixel_count() + r.output.pixel_count()) * opts.mem.word_bytes + weight_bytes +
                      r.accumulator_bytes;
    }
    rep.layers.push_back(std::move(lr));
    if (opts.keep_trace) run.trace.append(r.accesses);
    current = std::move(r.output);
  }
  run.output = decode_sm(current);
  rep.output_hash = content_hash(run.output);
  rep.finalize();
  return run;
}

void append_dense_gru_step_trace(const GruLayerSpec& spec, const GruWeightLayout& layout, AccessTrace& trace) {
  const std::uint64_t I = spec.input_size, H = spec.hidden_size;
  trace.add(Region::Dram, AccessKind::Read, Tag::Weights, layout.wx_base, 3 * H * I);
  trace.add(Region::Dram, AccessKind::Read, Tag::Weights, layout.wh_base, 3 * H * H);
  trace.add(Region::Sram, AccessKind::Write, Tag::State, 1ULL << 32, 4 * H);
  trace.add(Region::Sram, AccessKind::Read, Tag::State, 1ULL << 32, 4 * H);
  trace.add(Region::Sram, AccessKind::Write, Tag::Activations, 2ULL << 32, H);
}

SequenceRun run_sequence(const std::vector<GruLayerSpec>& layers, const std::vector<QTensor>& x_seq,
                         const RunOptions& opts) {
  opts.mem.validate();
  if (layers.empty()) throw ShapeMismatch("run_sequence: no layers");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    layers[l].validate();
    if (l > 0 && layers[l].input_size != layers[l - 1].hidden_size) {
      throw ShapeMismatch("run_sequence: layer " + std::to_string(l) + " input size " +
                          std::to_string(layers[l].input_size) + " != previous hidden size " +
                          std::to_string(layers[l - 1].hidden_size));
    }
    if (l > 0 && layers[l].act_fmt != layers[l - 1].act_fmt) {
      throw ShapeMismatch("run_sequence: stacked layers must share an activation format");
    }
  }
  for (const auto& x : x_seq) {
    if (x.rank() != 1 || x.size() != layers.front().input_size || x.fmt() != layers.front().act_fmt) {
      throw ShapeMismatch("run_sequence: input vectors must be length " + std::to_string(layers.front().input_size) +
                          " in " + layers.front().act_fmt.to_string());
    }
  }

  const std::size_t L = layers.size();
  std::vector<GruWeightLayout> layouts(L);
  std::uint64_t offset = 0;
  for (std::size_t l = 0; l < L; ++l) {
    layouts[l].wx_base = offset;
    layouts[l].wh_base = offset + 3ULL * layers[l].hidden_size * layers[l].input_size;
    offset += layers[l].weight_words();
  }

  SequenceRun run;
  RunReport& rep = run.report;
  rep.name = opts.name;
  rep.mode = opts.mode;
  rep.config = opts.mem;
  RecurrentTraffic traffic;
  traffic.steps = x_seq.size();
  const std::uint64_t wb = opts.mem.word_bytes;

  std::vector<LayerReport> lrs(L);
  std::vector<std::uint64_t> dense_step_words(L);
  std::uint32_t width_sum = 0;
  for (std::size_t l = 0; l < L; ++l) {
    lrs[l].kind = "gru";
    lrs[l].index = static_cast<std::uint32_t>(l);
    const auto& s = layers[l];
    lrs[l].live_bytes = 4ULL * s.hidden_size * 4 + (std::uint64_t{s.input_size} + 2ULL * s.hidden_size) * wb;
    AccessTrace dense;
    append_dense_gru_step_trace(s, layouts[l], dense);
    dense_step_words[l] = dense.words(Region::Dram) + (l == 0 ? s.input_size : 0);
    width_sum += s.input_size + s.hidden_size;
  }

  auto account_step = [&](std::size_t l, const AccessTrace& step_trace, const OpCounter& step_ops) {
    const MemCostReport m = cost_trace(step_trace, opts.mem);
    LayerReport& lr = lrs[l];
    lr.mem += m;
    lr.cycles += layer_cycles(m.cycles, step_ops.macs_executed, opts.mem);
    lr.ops += step_ops;
    traffic.total_dram_bytes += m.dram_words * wb;
    traffic.total_dram_bytes_dense += dense_step_words[l] * wb;
    if (opts.keep_trace) run.trace.append(step_trace);
  };

  if (opts.mode == RunMode::Sparse) {
    std::vector<DeltaGruLayer> engines;
    std::vector<DeltaState> states;
    for (std::size_t l = 0; l < L; ++l) {
      engines.emplace_back(layers[l], layouts[l]);
      states.push_back(engines.back().initial_state());
    }
    std::vector<std::vector<std::int16_t>> h(L);
    for (std::size_t l = 0; l < L; ++l) h[l].assign(layers[l].hidden_size, 0);
    for (const QTensor& x : x_seq) {
      std::uint64_t events = 0;
      std::span<const std::int16_t> in = x.data();
      for (std::size_t l = 0; l < L; ++l) {
        AccessTrace step_trace;
        if (l == 0) step_trace.add(Region::Dram, AccessKind::Read, Tag::Activations, 3ULL << 32, x.size());
        const StepStats st = engines[l].step(states[l], in, h[l], &step_trace);
        account_step(l, step_trace, st.ops);
        const auto& s = layers[l];
        lrs[l].input_events += st.input_events;
        lrs[l].hidden_events += st.hidden_events;
        lrs[l].weight_words_fetched += st.weight_words_fetched;
        lrs[l].weight_words_dense += s.weight_words();
        traffic.input_side_weight_bytes_fetched += std::uint64_t{st.input_events} * 3 * s.hidden_size * wb;
        traffic.hidden_side_weight_bytes_fetched += std::uint64_t{st.hidden_events} * 3 * s.hidden_size * wb;
        events += st.input_events + st.hidden_events;
        in = h[l];
      }
      traffic.event_rate.push_back(static_cast<double>(events) / static_cast<double>(width_sum));
      run.outputs.push_back(QTensor::vector(layers.back().act_fmt, h.back()));
    }
  } else {
    std::vector<QTensor> in = x_seq;
    for (std::size_t l = 0; l < L; ++l) {
      std::vector<QTensor> out = gru_dense_oracle(layers[l], in);
      const auto& s = layers[l];
      OpCounter step_ops;
      step_ops.macs_executed = step_ops.macs_dense_equivalent = 3ULL * s.hidden_size * (s.input_size + s.hidden_size);
      step_ops.adds = 6ULL * s.hidden_size;
      for (std::size_t t = 0; t < in.size(); ++t) {
        AccessTrace step_trace;
        if (l == 0) step_trace.add(Region::Dram, AccessKind::Read, Tag::Activations, 3ULL << 32, in[t].size());
        append_dense_gru_step_trace(s, layouts[l], step_trace);
        account_step(l, step_trace, step_ops);
        lrs[l].weight_words_fetched += s.weight_words();
        lrs[l].weight_words_dense += s.weight_words();
      }
      in = std::move(out);
    }
    run.outputs = std::move(in);
    traffic.event_rate.assign(x_seq.size(), 1.0);
  }

  for (std::size_t l = 0; l < L; ++l) {
    const auto& s = layers[l];
    LayerReport& lr = lrs[l];
    lr.energy = energy_breakdown(lr.ops.macs_executed, lr.mem, opts.mem);
    const double steps = static_cast<double>(std::max<std::uint64_t>(traffic.steps, 1));
    if (opts.mode == RunMode::Sparse) {
      lr.input_sparsity = 1.0 - static_cast<double>(lr.input_events) / (steps * s.input_size);
      lr.output_sparsity = 1.0 - static_cast<double>(lr.hidden_events) / (steps * s.hidden_size);
    } else {
      lr.hidden_events = lr.input_events = 0;
      traffic.input_side_weight_bytes_fetched += traffic.steps * 3ULL * s.hidden_size * s.input_size * wb;
      traffic.hidden_side_weight_bytes_fetched += traffic.steps * 3ULL * s.hidden_size * s.hidden_size * wb;
    }
    traffic.weight_bytes_fetched += lr.weight_words_fetched * wb;
    traffic.weight_bytes_dense += lr.weight_words_dense * wb;
    traffic.input_side_weight_bytes_dense += traffic.steps * 3ULL * s.hidden_size * s.input_size * wb;
    traffic.hidden_side_weight_bytes_dense += traffic.steps * 3ULL * s.hidden_size * s.hidden_size * wb;
  }
  rep.layers = std::move(lrs);
  rep.recurrent = std::move(traffic);
  std::vector<std::uint64_t> hashes;
  for (const auto& o : run.outputs) hashes.push_back(content_hash(o));
  rep.output_hash = hashes.empty() ? 0 : combine_hashes(hashes);
  rep.finalize();
  return run;
}

RunReport aggregate_reports(const std::vector<RunReport>& runs) {
  if (runs.empty()) throw InvalidArgument("aggregate_reports: no runs");
  if (runs.size() == 1) return runs.front();
  RunReport agg = runs.front();
  const std::size_t L = agg.layers.size();
  for (const auto& r : runs) {
    if (r.layers.size() != L) throw ShapeMismatch("aggregate_reports: runs differ in layer count");
  }
  const auto n = static_cast<double>(runs.size());
  agg.inputs = 0;
  std::vector<std::uint64_t> hashes;
  for (std::size_t l = 0; l < L; ++l) {
    LayerReport& a = agg.layers[l];
    a.ops = {};
    a.mem = {};
    a.cycles = 0.0;
    a.energy = {};
    a.input_sparsity = a.output_sparsity = 0.0;
    a.live_bytes = 0;
    a.input_events = a.hidden_events = a.weight_words_fetched = a.weight_words_dense = 0;
  }
  agg.sparsity_table.assign(L, {});
  std::optional<RecurrentTraffic> traffic;
  for (const auto& r : runs) {
    agg.inputs += r.inputs;
    hashes.push_back(r.output_hash);
    for (std::size_t l = 0; l < L; ++l) {
      LayerReport& a = agg.layers[l];
      const LayerReport& b = r.layers[l];
      a.ops += b.ops;
      a.mem += b.mem;
      a.cycles += b.cycles;
      add_energy(a.energy, b.energy);
      a.input_sparsity += b.input_sparsity / n;
      a.output_sparsity += b.output_sparsity / n;
      a.live_bytes = std::max(a.live_bytes, b.live_bytes);
      a.input_events += b.input_events;
      a.hidden_events += b.hidden_events;
      a.weight_words_fetched += b.weight_words_fetched;
      a.weight_words_dense += b.weight_words_dense;
    }
    if (r.recurrent) {
      if (!traffic) traffic.emplace();
      const auto& t = *r.recurrent;
      traffic->steps += t.steps;
      traffic->weight_bytes_fetched += t.weight_bytes_fetched;
      traffic->weight_bytes_dense += t.weight_bytes_dense;
      traffic->input_side_weight_bytes_fetched += t.input_side_weight_bytes_fetched;
      traffic->input_side_weight_bytes_dense += t.input_side_weight_bytes_dense;
      traffic->hidden_side_weight_bytes_fetched += t.hidden_side_weight_bytes_fetched;
      traffic->hidden_side_weight_bytes_dense += t.hidden_side_weight_bytes_dense;
      traffic->total_dram_bytes += t.total_dram_bytes;
      traffic->total_dram_bytes_dense += t.total_dram_bytes_dense;
      traffic->event_rate.insert(traffic->event_rate.end(), t.event_rate.begin(), t.event_rate.end());
    }
  }
  for (std::size_t l = 0; l < L; ++l) {
    double mean = 0.0;
    for (const auto& r : runs) mean += r.layers[l].output_sparsity;
    mean /= n;
    double ss = 0.0;
    for (const auto& r : runs) ss += (r.layers[l].output_sparsity - mean) * (r.layers[l].output_sparsity - mean);
    const double sd = std::sqrt(ss / (n - 1));
    agg.sparsity_table[l] = {static_cast<std::uint32_t>(l), mean, sd / std::sqrt(n), runs.size()};
  }
  agg.recurrent = std::move(traffic);
  agg.output_hash = combine_hashes(hashes);
  agg.finalize();
  return agg;
}

}  // namespace sparq
