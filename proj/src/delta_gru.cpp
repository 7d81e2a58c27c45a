#include "sparq/delta_gru.hpp"

#include <array>

#include "sparq/error.hpp"

namespace sparq {

namespace {

#include "activation_tables.inc"

constexpr QFormat kLutInputFormat{8, 8};

std::int16_t interpolate(const std::array<std::int16_t, 1025>& knots, std::int16_t x) noexcept {
  const std::int32_t v = x;
  if (v <= -2048) return knots.front();
  if (v >= 2048) return knots.back();
  const std::int32_t off = v + 2048;
  const std::int32_t k = off >> 2;
  const std::int32_t f = off & 3;
  const std::int64_t mix = static_cast<std::int64_t>(knots[k]) * (4 - f) + static_cast<std::int64_t>(knots[k + 1]) * f;
  return saturate16(round_shift(mix, 2));
}

void require_dims(const QTensor& t, std::uint32_t rows, std::uint32_t cols, const char* name) {
  if (t.rank() != 2 || t.dims()[0] != rows || t.dims()[1] != cols) {
    throw ShapeMismatch(std::string("GRU weight ") + name + " must be (" + std::to_string(rows) + ", " +
                        std::to_string(cols) + ")");
  }
}

// Element-wise ops per hidden unit in the gate stage (products and sums
// outside the matrix-vector products).
constexpr std::uint64_t kGateOpsPerUnit = 6;

}  // namespace

std::int16_t sigmoid_q15(std::int16_t x) noexcept { return interpolate(kSigmoidKnots, x); }
std::int16_t tanh_q15(std::int16_t x) noexcept { return interpolate(kTanhKnots, x); }
std::span<const std::int16_t> sigmoid_knots() noexcept { return kSigmoidKnots; }
std::span<const std::int16_t> tanh_knots() noexcept { return kTanhKnots; }

void GruLayerSpec::validate() const {
  if (input_size == 0 || hidden_size == 0) throw ShapeMismatch("GRU: input and hidden sizes must be positive");
  require_dims(w_xr, hidden_size, input_size, "w_xr");
  require_dims(w_xu, hidden_size, input_size, "w_xu");
  require_dims(w_xc, hidden_size, input_size, "w_xc");
  require_dims(w_hr, hidden_size, hidden_size, "w_hr");
  require_dims(w_hu, hidden_size, hidden_size, "w_hu");
  require_dims(w_hc, hidden_size, hidden_size, "w_hc");
  for (const QTensor* w : {&w_xu, &w_xc, &w_hr, &w_hu, &w_hc}) {
    if (w->fmt() != w_xr.fmt()) throw InvalidArgument("GRU: all weight matrices must share one Q format");
  }
  if (b_r.size() != hidden_size || b_u.size() != hidden_size || b_c.size() != hidden_size) {
    throw ShapeMismatch("GRU: bias vectors must have hidden_size entries");
  }
  if (!act_fmt.valid()) throw InvalidArgument("GRU: invalid activation format");
  if (theta.fmt != act_fmt) throw InvalidArgument("GRU: theta must use the activation format");
  if (theta.raw < 0) throw InvalidArgument("GRU: theta must be >= 0");
  if (acc_frac_bits() > 30) throw InvalidArgument("GRU: accumulator fraction bits exceed 30");
}

ColumnMajorMatrix::ColumnMajorMatrix(std::uint32_t rows, std::uint32_t cols, std::vector<std::int16_t> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != std::size_t{rows} * cols) throw ShapeMismatch("matrix data does not match its dims");
}

ColumnMajorMatrix ColumnMajorMatrix::stack_rows(std::span<const QTensor* const> blocks) {
  if (blocks.empty()) return {};
  const std::uint32_t cols = blocks.front()->dims().at(1);
  std::uint32_t rows = 0;
  for (const QTensor* b : blocks) {
    if (b->rank() != 2 || b->dims()[1] != cols) throw ShapeMismatch("stack_rows: blocks need equal column counts");
    rows += b->dims()[0];
  }
  std::vector<std::int16_t> data(std::size_t{rows} * cols);
  std::uint32_t row0 = 0;
  for (const QTensor* b : blocks) {
    const std::uint32_t br = b->dims()[0];
    const auto src = b->data();
    for (std::uint32_t r = 0; r < br; ++r) {
      for (std::uint32_t c = 0; c < cols; ++c) data[std::size_t{c} * rows + row0 + r] = src[std::size_t{r} * cols + c];
    }
    row0 += br;
  }
  return ColumnMajorMatrix(rows, cols, std::move(data));
}

void delta_mxv_accumulate(const ColumnMajorMatrix& w, const DeltaStream& deltas,
                          std::span<const std::span<std::int32_t>> segments, OpCounter& ops, MxvTraceTarget trace) {
  std::size_t total = 0;
  for (const auto& s : segments) total += s.size();
  if (total != w.rows()) throw ShapeMismatch("delta_mxv_accumulate: accumulator length != matrix rows");
  for (const DeltaEvent& e : deltas.events) {
    if (e.index >= w.cols()) {
      throw IndexOutOfRange("delta event index " + std::to_string(e.index) + " >= matrix columns " +
                            std::to_string(w.cols()));
    }
  }
  for (const DeltaEvent& e : deltas.events) {
    const auto col = w.column(e.index);
    std::size_t row = 0;
    for (const auto& seg : segments) {
      for (auto& a : seg) a = sat_add(a, static_cast<std::int64_t>(col[row++]) * e.value);
    }
    ops.macs_executed += w.rows();
    if (trace.trace != nullptr) {
      trace.trace->add(Region::Dram, AccessKind::Read, Tag::Weights,
                       trace.base + std::uint64_t{e.index} * w.rows(), w.rows());
    }
  }
}

void delta_mxv_accumulate(const ColumnMajorMatrix& w, const DeltaStream& deltas, std::span<std::int32_t> acc,
                          OpCounter& ops, MxvTraceTarget trace) {
  const std::array<std::span<std::int32_t>, 1> one{acc};
  delta_mxv_accumulate(w, deltas, one, ops, trace);
}

void gru_gates(const GruLayerSpec& spec, std::span<const std::int32_t> a_r, std::span<const std::int32_t> a_u,
               std::span<const std::int32_t> a_xc, std::span<const std::int32_t> a_hc,
               std::span<const std::int16_t> h_prev, std::span<std::int16_t> h_out) {
  const int acc_frac = spec.acc_frac_bits();
  const int af = spec.act_fmt.frac_bits;
  for (std::size_t j = 0; j < h_out.size(); ++j) {
    const std::int64_t r = sigmoid_q15(renormalize_raw(a_r[j], acc_frac, kLutInputFormat));
    const std::int64_t u = sigmoid_q15(renormalize_raw(a_u[j], acc_frac, kLutInputFormat));
    const std::int32_t cand = sat_add(a_xc[j], round_shift(r * a_hc[j], kGateFracBits));
    const std::int64_t c = tanh_q15(renormalize_raw(cand, acc_frac, kLutInputFormat));
    // (1 - u) * c at 2^30 plus u * h at 2^(15 + af), aligned to 2^30.
    const std::int64_t keep = (std::int64_t{1} << kGateFracBits) - u;
    const std::int64_t total = keep * c + ((u * h_prev[j]) << (2 * kGateFracBits - kGateFracBits - af));
    h_out[j] = saturate16(round_shift(total, 2 * kGateFracBits - af));
  }
}

std::vector<QTensor> gru_dense_oracle(const GruLayerSpec& spec, const std::vector<QTensor>& x_seq) {
  spec.validate();
  const std::uint32_t I = spec.input_size, H = spec.hidden_size;
  std::vector<QTensor> out;
  out.reserve(x_seq.size());
  std::vector<std::int16_t> h(H, 0);
  std::vector<std::int32_t> a_r(H), a_u(H), a_xc(H), a_hc(H);
  auto matvec = [](const QTensor& w, std::span<const std::int16_t> v, std::size_t row, std::int32_t acc) {
    const auto d = w.data();
    const std::size_t cols = v.size();
    for (std::size_t k = 0; k < cols; ++k) acc = sat_mac(acc, d[row * cols + k], v[k]);
    return acc;
  };
  for (const QTensor& x : x_seq) {
    if (x.rank() != 1 || x.size() != I) throw ShapeMismatch("GRU oracle: input vector has wrong length");
    if (x.fmt() != spec.act_fmt) throw ShapeMismatch("GRU oracle: input format mismatch");
    const auto xv = x.data();
    for (std::uint32_t j = 0; j < H; ++j) {
      a_r[j] = matvec(spec.w_hr, h, j, matvec(spec.w_xr, xv, j, spec.b_r[j]));
      a_u[j] = matvec(spec.w_hu, h, j, matvec(spec.w_xu, xv, j, spec.b_u[j]));
      a_xc[j] = matvec(spec.w_xc, xv, j, spec.b_c[j]);
      a_hc[j] = matvec(spec.w_hc, h, j, 0);
    }
    std::vector<std::int16_t> next(H);
    gru_gates(spec, a_r, a_u, a_xc, a_hc, h, next);
    h = next;
    out.push_back(QTensor::vector(spec.act_fmt, std::move(next)));
  }
  return out;
}

DeltaGruLayer::DeltaGruLayer(GruLayerSpec spec, GruWeightLayout layout) : spec_(std::move(spec)), layout_(layout) {
  spec_.validate();
  const std::array<const QTensor*, 3> xs{&spec_.w_xr, &spec_.w_xu, &spec_.w_xc};
  const std::array<const QTensor*, 3> hs{&spec_.w_hr, &spec_.w_hu, &spec_.w_hc};
  wx_ = ColumnMajorMatrix::stack_rows(xs);
  wh_ = ColumnMajorMatrix::stack_rows(hs);
  if (layout_.wh_base == 0 && layout_.wx_base == 0) {
    layout_.wh_base = std::uint64_t{wx_.rows()} * wx_.cols();
  }
}

DeltaState DeltaGruLayer::initial_state() const {
  const std::uint32_t H = spec_.hidden_size;
  DeltaState s;
  s.x_mem.assign(spec_.input_size, 0);
  s.h_mem.assign(H, 0);
  s.h_prev.assign(H, 0);
  s.a_r = spec_.b_r;
  s.a_u = spec_.b_u;
  s.a_xc = spec_.b_c;
  s.a_hc.assign(H, 0);
  return s;
}

StepStats DeltaGruLayer::step(DeltaState& state, std::span<const std::int16_t> x, std::span<std::int16_t> h_out,
                              AccessTrace* trace) const {
  const std::uint32_t I = spec_.input_size, H = spec_.hidden_size;
  if (x.size() != I || h_out.size() != H || state.x_mem.size() != I || state.h_prev.size() != H) {
    throw ShapeMismatch("DeltaGRU step: vector sizes do not match the layer");
  }
  StepStats st;
  DeltaStream dx, dh;
  encode_delta_into(state.x_mem, x, spec_.theta.raw, dx);
  encode_delta_into(state.h_mem, state.h_prev, spec_.theta.raw, dh);
  st.input_events = static_cast<std::uint32_t>(dx.size());
  st.hidden_events = static_cast<std::uint32_t>(dh.size());
  st.ops.comparisons += I + H;

  const std::array<std::span<std::int32_t>, 3> x_side{state.a_r, state.a_u, state.a_xc};
  const std::array<std::span<std::int32_t>, 3> h_side{state.a_r, state.a_u, state.a_hc};
  delta_mxv_accumulate(wx_, dx, x_side, st.ops, {trace, layout_.wx_base});
  delta_mxv_accumulate(wh_, dh, h_side, st.ops, {trace, layout_.wh_base});
  st.ops.macs_dense_equivalent += 3ULL * H * (I + H);
  st.weight_columns_fetched = dx.size() + dh.size();
  st.weight_words_fetched = st.weight_columns_fetched * 3ULL * H;

  gru_gates(spec_, state.a_r, state.a_u, state.a_xc, state.a_hc, state.h_prev, h_out);
  st.ops.adds += kGateOpsPerUnit * H;
  std::copy(h_out.begin(), h_out.end(), state.h_prev.begin());

  if (trace != nullptr) {
    // Delta memories compared, accumulators read-modify-written per event,
    // then read once by the gate stage; new hidden state written.
    trace->add(Region::Sram, AccessKind::Read, Tag::State, 0, std::uint64_t{I} + H);
    trace->add(Region::Sram, AccessKind::Write, Tag::State, 0, dx.size() + dh.size());
    const std::uint64_t rmw = st.weight_columns_fetched * 3ULL * H;
    trace->add(Region::Sram, AccessKind::Read, Tag::State, 1ULL << 32, rmw + 4ULL * H);
    trace->add(Region::Sram, AccessKind::Write, Tag::State, 1ULL << 32, rmw);
    trace->add(Region::Sram, AccessKind::Write, Tag::Activations, 2ULL << 32, H);
  }
  return st;
}

DeltaStepResult deltagru_step(const DeltaGruLayer& layer, const DeltaState& state, const QTensor& x) {
  if (x.rank() != 1) throw ShapeMismatch("deltagru_step: input must be a vector");
  if (x.fmt() != layer.spec().act_fmt) throw ShapeMismatch("deltagru_step: input format mismatch");
  DeltaStepResult res{QTensor::vector(layer.spec().act_fmt, std::vector<std::int16_t>(layer.spec().hidden_size)),
                      state, {}};
  res.stats = layer.step(res.state, x.data(), res.h.data());
  return res;
}

}  // namespace sparq
