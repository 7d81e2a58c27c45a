#pragma once

// Layer-by-layer network runners and the run report they produce.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sparq/conv.hpp"
#include "sparq/delta_gru.hpp"
#include "sparq/fxp.hpp"
#include "sparq/mem_model.hpp"

namespace sparq {

enum class RunMode { Dense, Sparse };

RunMode parse_run_mode(const std::string& s);
const char* to_string(RunMode m) noexcept;

struct LayerReport {
  std::string kind;  // "conv" or "gru"
  std::uint32_t index = 0;
  OpCounter ops;
  double input_sparsity = 0.0;
  double output_sparsity = 0.0;
  MemCostReport mem;
  double cycles = 0.0;
  EnergyBreakdown energy;
  std::uint64_t live_bytes = 0;
  // gru only
  std::uint64_t input_events = 0;
  std::uint64_t hidden_events = 0;
  std::uint64_t weight_words_fetched = 0;
  std::uint64_t weight_words_dense = 0;

  std::optional<double> efficiency_pct() const noexcept;
};

struct SparsityRow {
  std::uint32_t layer = 0;
  double mean = 0.0;
  double stderr_ = 0.0;
  std::uint64_t samples = 0;
};

// Recurrent traffic summary. Reduction factors are dense / actual and are
// empty when the actual count is zero.
struct RecurrentTraffic {
  std::uint64_t steps = 0;
  std::uint64_t weight_bytes_fetched = 0;
  std::uint64_t weight_bytes_dense = 0;
  std::uint64_t input_side_weight_bytes_fetched = 0;
  std::uint64_t input_side_weight_bytes_dense = 0;
  std::uint64_t hidden_side_weight_bytes_fetched = 0;
  std::uint64_t hidden_side_weight_bytes_dense = 0;
  std::uint64_t total_dram_bytes = 0;
  std::uint64_t total_dram_bytes_dense = 0;
  std::vector<double> event_rate;  // per step, events / (I + H) over all layers

  std::optional<double> weight_reduction() const noexcept;
  std::optional<double> total_reduction() const noexcept;
  double mean_event_rate() const noexcept;
};

struct RunReport {
  std::string name;
  RunMode mode = RunMode::Sparse;
  std::uint64_t inputs = 1;
  std::vector<LayerReport> layers;
  std::vector<SparsityRow> sparsity_table;
  OpCounter ops;
  MemCostReport mem;
  double cycles = 0.0;
  EnergyBreakdown energy;
  FiguresOfMerit fom;
  std::uint64_t peak_live_bytes = 0;
  std::optional<RecurrentTraffic> recurrent;
  std::uint64_t output_hash = 0;
  MemConfig config;

  std::optional<double> efficiency_pct() const noexcept;
  // Recomputes totals, energy and figures of merit from the layer list.
  void finalize();
};

struct NetworkRun {
  RunReport report;
  QTensor output;
  AccessTrace trace;  // only filled when requested
};

struct RunOptions {
  RunMode mode = RunMode::Sparse;
  MemConfig mem{};
  ConvOptions conv{};
  bool keep_trace = false;
  std::string name = "network";
};

// Runs conv layers in order. Only the current input map, output map and
// layer weights are live at a time; the report carries the peak.
NetworkRun run_network(const std::vector<ConvLayerSpec>& layers, const QTensor& input, const RunOptions& opts = {});

struct SequenceRun {
  RunReport report;
  std::vector<QTensor> outputs;  // top-layer hidden state per step
  AccessTrace trace;
};

// Stacked recurrent layers. Sparse mode uses delta updates with each layer's
// theta; dense mode uses the dense GRU and reads every weight each step.
SequenceRun run_sequence(const std::vector<GruLayerSpec>& layers, const std::vector<QTensor>& x_seq,
                         const RunOptions& opts = {});

// Trace of one dense GRU step (full weight stream plus state traffic).
void append_dense_gru_step_trace(const GruLayerSpec& spec, const GruWeightLayout& layout, AccessTrace& trace);

// Mean of per-layer output sparsity over several runs with standard error;
// counters, traffic and energy are summed. Runs must share a layer structure.
RunReport aggregate_reports(const std::vector<RunReport>& runs);

std::uint64_t combine_hashes(const std::vector<std::uint64_t>& hashes) noexcept;

}  // namespace sparq
