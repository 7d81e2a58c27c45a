#pragma once

// DeltaGRU: a GRU whose matrix-vector products are driven by delta events.
//
// Inputs and hidden states are compared against the last *transmitted* value;
// only components that moved by more than theta produce an event, and each
// event adds one weight column times the delta into stored pre-activation
// accumulators. With theta == 0 the accumulators telescope to the dense
// pre-activations exactly, so the hidden trajectory matches the dense GRU.
//
// Gate math (r: reset, u: update, c: candidate):
//   r  = sigmoid(W_xr x + W_hr h + b_r)
//   u  = sigmoid(W_xu x + W_hu h + b_u)
//   c  = tanh(W_xc x + b_c + r * (W_hc h))
//   h' = (1 - u) * c + u * h

#include <cstdint>
#include <span>
#include <vector>

#include "sparq/codec.hpp"
#include "sparq/fxp.hpp"
#include "sparq/mem_model.hpp"

namespace sparq {

// Gate outputs are Q1.15.
inline constexpr int kGateFracBits = 15;

// 1024-segment interpolated tables over Q8.8 inputs in [-8, 8); saturating
// outside. Input is a Q8.8 raw value, output Q1.15 raw.
std::int16_t sigmoid_q15(std::int16_t x_q8_8) noexcept;
std::int16_t tanh_q15(std::int16_t x_q8_8) noexcept;
std::span<const std::int16_t> sigmoid_knots() noexcept;
std::span<const std::int16_t> tanh_knots() noexcept;

struct GruLayerSpec {
  std::uint32_t input_size = 0;
  std::uint32_t hidden_size = 0;
  QTensor w_xr, w_xu, w_xc;  // (H, I)
  QTensor w_hr, w_hu, w_hc;  // (H, H)
  std::vector<std::int32_t> b_r, b_u, b_c;  // accumulator scale
  QScalar theta{0, kActivationFormat};
  QFormat act_fmt = kActivationFormat;

  QFormat weight_fmt() const noexcept { return w_xr.fmt(); }
  int acc_frac_bits() const noexcept { return act_fmt.frac_bits + weight_fmt().frac_bits; }
  std::uint64_t weight_words() const noexcept {
    return 3ULL * hidden_size * input_size + 3ULL * hidden_size * hidden_size;
  }
  void validate() const;
};

struct DeltaState {
  std::vector<std::int16_t> x_mem;   // last transmitted input
  std::vector<std::int16_t> h_mem;   // last transmitted hidden
  std::vector<std::int16_t> h_prev;  // actual previous hidden output
  std::vector<std::int32_t> a_r, a_u, a_xc, a_hc;

  friend bool operator==(const DeltaState&, const DeltaState&) = default;
};

// Column-major matrix: one column is `rows` contiguous values.
class ColumnMajorMatrix {
 public:
  ColumnMajorMatrix() = default;
  ColumnMajorMatrix(std::uint32_t rows, std::uint32_t cols, std::vector<std::int16_t> data);
  // From row-major (rows, cols) tensors stacked vertically.
  static ColumnMajorMatrix stack_rows(std::span<const QTensor* const> blocks);

  std::uint32_t rows() const noexcept { return rows_; }
  std::uint32_t cols() const noexcept { return cols_; }
  std::span<const std::int16_t> column(std::uint32_t c) const noexcept {
    return {data_.data() + std::size_t{c} * rows_, rows_};
  }

 private:
  std::uint32_t rows_ = 0;
  std::uint32_t cols_ = 0;
  std::vector<std::int16_t> data_;
};

struct MxvTraceTarget {
  AccessTrace* trace = nullptr;
  std::uint64_t base = 0;  // DRAM word address of column 0
};

// acc[j] += W[j, idx] * value for every event. `segments` partition the
// matrix rows onto (possibly non-adjacent) accumulator spans; their total
// length must equal W.rows(). Each event reads one column as one burst.
void delta_mxv_accumulate(const ColumnMajorMatrix& w, const DeltaStream& deltas,
                          std::span<const std::span<std::int32_t>> segments, OpCounter& ops,
                          MxvTraceTarget trace = {});
void delta_mxv_accumulate(const ColumnMajorMatrix& w, const DeltaStream& deltas, std::span<std::int32_t> acc,
                          OpCounter& ops, MxvTraceTarget trace = {});

// Shared non-linear stage: pre-activation accumulators plus previous hidden
// state to the new hidden state (act_fmt raw).
void gru_gates(const GruLayerSpec& spec, std::span<const std::int32_t> a_r, std::span<const std::int32_t> a_u,
               std::span<const std::int32_t> a_xc, std::span<const std::int32_t> a_hc,
               std::span<const std::int16_t> h_prev, std::span<std::int16_t> h_out);

std::vector<QTensor> gru_dense_oracle(const GruLayerSpec& spec, const std::vector<QTensor>& x_seq);

struct StepStats {
  std::uint32_t input_events = 0;
  std::uint32_t hidden_events = 0;
  OpCounter ops;
  std::uint64_t weight_columns_fetched = 0;
  std::uint64_t weight_words_fetched = 0;
};

// Modeled DRAM layout of a layer's weights: W_x (3H x I, gates interleaved
// per column) followed by W_h (3H x H).
struct GruWeightLayout {
  std::uint64_t wx_base = 0;
  std::uint64_t wh_base = 0;
};

class DeltaGruLayer {
 public:
  explicit DeltaGruLayer(GruLayerSpec spec, GruWeightLayout layout = {});

  const GruLayerSpec& spec() const noexcept { return spec_; }
  const GruWeightLayout& layout() const noexcept { return layout_; }
  DeltaState initial_state() const;

  // One timestep. Both delta streams are computed before any accumulator is
  // touched. Appends weight fetches (DRAM) and state traffic (SRAM) to `trace`.
  StepStats step(DeltaState& state, std::span<const std::int16_t> x, std::span<std::int16_t> h_out,
                 AccessTrace* trace = nullptr) const;

 private:
  GruLayerSpec spec_;
  GruWeightLayout layout_;
  ColumnMajorMatrix wx_;  // rows: [r | u | c]
  ColumnMajorMatrix wh_;  // rows: [r | u | c]
};

struct DeltaStepResult {
  QTensor h;
  DeltaState state;
  StepStats stats;
};

DeltaStepResult deltagru_step(const DeltaGruLayer& layer, const DeltaState& state, const QTensor& x);

}  // namespace sparq
