#include "sparq/synth.hpp"

#include <cmath>
#include <numeric>

#include "sparq/error.hpp"

namespace sparq {

std::int64_t Rng::uniform_int(std::int64_t lo, std::int64_t hi) {
  if (hi < lo) throw InvalidArgument("uniform_int: empty range");
  const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
  if (span == 0) return static_cast<std::int64_t>(engine_());
  const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % span);
  std::uint64_t v = 0;
  do {
    v = engine_();
  } while (v >= limit);
  return lo + static_cast<std::int64_t>(v % span);
}

namespace {

std::int16_t nonzero_value(Rng& rng, std::int16_t max_raw, bool signed_values) {
  const auto mag = static_cast<std::int16_t>(rng.uniform_int(1, max_raw));
  if (signed_values && rng.bernoulli(0.5)) return static_cast<std::int16_t>(-mag);
  return mag;
}

}  // namespace

QTensor random_feature_map(Rng& rng, std::uint32_t c, std::uint32_t h, std::uint32_t w, double zero_prob,
                           QFormat fmt, std::int16_t max_raw, bool signed_values) {
  QTensor t = QTensor::feature_map(c, h, w, fmt);
  for (auto& v : t.data()) v = rng.bernoulli(zero_prob) ? std::int16_t{0} : nonzero_value(rng, max_raw, signed_values);
  return t;
}

QTensor exact_sparsity_map(Rng& rng, std::uint32_t c, std::uint32_t h, std::uint32_t w, double zero_fraction,
                           QFormat fmt, std::int16_t max_raw) {
  QTensor t = QTensor::feature_map(c, h, w, fmt);
  const std::size_t n = t.size();
  const auto zeros = static_cast<std::size_t>(std::llround(zero_fraction * static_cast<double>(n)));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  // Fisher-Yates with our own index draw (std::shuffle is implementation-defined).
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i - 1)));
    std::swap(order[i - 1], order[j]);
  }
  auto data = t.data();
  for (std::size_t k = zeros; k < n; ++k) data[order[k]] = nonzero_value(rng, max_raw, false);
  return t;
}

QTensor random_tensor(Rng& rng, std::vector<std::uint32_t> dims, QFormat fmt, double scale) {
  QTensor t(std::move(dims), fmt);
  for (auto& v : t.data()) v = quantize(rng.uniform(-scale, scale), fmt).raw;
  return t;
}

ConvLayerSpec random_conv_spec(Rng& rng, std::uint32_t in_c, std::uint32_t out_c, std::uint32_t k,
                               std::uint32_t stride, std::uint32_t pad, bool relu, Pool pool, double weight_scale,
                               QFormat w_fmt) {
  ConvLayerSpec s;
  s.in_channels = in_c;
  s.out_channels = out_c;
  s.kernel_h = k;
  s.kernel_w = k;
  s.stride = stride;
  s.pad = pad;
  s.relu = relu;
  s.pool = pool;
  s.weights = random_tensor(rng, {out_c, in_c, k, k}, w_fmt, weight_scale);
  const QTensor bias = random_tensor(rng, {out_c}, s.out_fmt, 0.5);
  s.bias = bias_to_accumulator(bias, s.acc_frac_bits());
  return s;
}

GruLayerSpec random_gru_spec(Rng& rng, std::uint32_t input_size, std::uint32_t hidden_size, double theta,
                             double weight_scale, QFormat act_fmt, QFormat w_fmt) {
  GruLayerSpec s;
  s.input_size = input_size;
  s.hidden_size = hidden_size;
  s.act_fmt = act_fmt;
  const double sx = weight_scale / std::sqrt(static_cast<double>(input_size));
  const double sh = weight_scale / std::sqrt(static_cast<double>(hidden_size));
  s.w_xr = random_tensor(rng, {hidden_size, input_size}, w_fmt, sx);
  s.w_xu = random_tensor(rng, {hidden_size, input_size}, w_fmt, sx);
  s.w_xc = random_tensor(rng, {hidden_size, input_size}, w_fmt, sx);
  s.w_hr = random_tensor(rng, {hidden_size, hidden_size}, w_fmt, sh);
  s.w_hu = random_tensor(rng, {hidden_size, hidden_size}, w_fmt, sh);
  s.w_hc = random_tensor(rng, {hidden_size, hidden_size}, w_fmt, sh);
  const int acc_frac = act_fmt.frac_bits + w_fmt.frac_bits;
  s.b_r = bias_to_accumulator(random_tensor(rng, {hidden_size}, act_fmt, 0.5), acc_frac);
  s.b_u = bias_to_accumulator(random_tensor(rng, {hidden_size}, act_fmt, 0.5), acc_frac);
  s.b_c = bias_to_accumulator(random_tensor(rng, {hidden_size}, act_fmt, 0.5), acc_frac);
  s.theta = quantize(theta, act_fmt);
  return s;
}

SequenceKind parse_sequence_kind(const std::string& s) {
  if (s == "uniform") return SequenceKind::Uniform;
  if (s == "piecewise" || s == "piecewise-constant") return SequenceKind::PiecewiseConstant;
  if (s == "bandlimited" || s == "band-limited") return SequenceKind::BandLimited;
  throw InvalidArgument("unknown sequence kind '" + s + "'");
}

const char* to_string(SequenceKind k) noexcept {
  switch (k) {
    case SequenceKind::Uniform: return "uniform";
    case SequenceKind::PiecewiseConstant: return "piecewise-constant";
    case SequenceKind::BandLimited: return "band-limited";
  }
  return "?";
}

std::vector<QTensor> synthetic_sequence(Rng& rng, const SequenceParams& p, QFormat fmt) {
  std::vector<QTensor> seq;
  seq.reserve(p.steps);
  std::vector<double> value(p.size, 0.0);
  switch (p.kind) {
    case SequenceKind::Uniform:
      for (std::uint32_t t = 0; t < p.steps; ++t) {
        for (auto& v : value) v = rng.uniform(-p.amplitude, p.amplitude);
        seq.push_back(QTensor::from_real({p.size}, fmt, value));
      }
      break;
    case SequenceKind::PiecewiseConstant: {
      const std::uint32_t hold = std::max<std::uint32_t>(p.hold, 1);
      for (std::uint32_t t = 0; t < p.steps; ++t) {
        if (t % hold == 0) {
          for (auto& v : value) v = rng.uniform(-p.amplitude, p.amplitude);
        }
        seq.push_back(QTensor::from_real({p.size}, fmt, value));
      }
      break;
    }
    case SequenceKind::BandLimited: {
      // Two cascaded one-pole low-pass filters over white noise. The gain
      // restores roughly unit variance relative to the raw noise.
      const double a = p.smoothing;
      const double gain = std::sqrt((1 + a) * (1 + a) * (1 + a) / ((1 - a) * (1 + a * a)));
      std::vector<double> s1(p.size, 0.0), s2(p.size, 0.0);
      const std::uint32_t warmup = 64;
      for (std::uint32_t t = 0; t < p.steps + warmup; ++t) {
        for (std::uint32_t i = 0; i < p.size; ++i) {
          const double noise = rng.uniform(-1.0, 1.0);
          s1[i] = a * s1[i] + (1 - a) * noise;
          s2[i] = a * s2[i] + (1 - a) * s1[i];
          value[i] = std::clamp(p.amplitude * gain * s2[i], -4.0 * p.amplitude, 4.0 * p.amplitude);
        }
        if (t >= warmup) seq.push_back(QTensor::from_real({p.size}, fmt, value));
      }
      break;
    }
  }
  return seq;
}

QTensor stack_sequence(const std::vector<QTensor>& seq) {
  if (seq.empty()) throw ShapeMismatch("stack_sequence: empty sequence");
  const std::uint32_t n = static_cast<std::uint32_t>(seq.front().size());
  std::vector<std::int16_t> data;
  data.reserve(seq.size() * n);
  for (const auto& v : seq) {
    if (v.size() != n || v.fmt() != seq.front().fmt()) throw ShapeMismatch("stack_sequence: ragged sequence");
    data.insert(data.end(), v.data().begin(), v.data().end());
  }
  return QTensor({static_cast<std::uint32_t>(seq.size()), n}, seq.front().fmt(), std::move(data));
}

std::vector<QTensor> unstack_sequence(const QTensor& t) {
  if (t.rank() == 1) return {t};
  if (t.rank() != 2) throw ShapeMismatch("sequence tensor must be (T, N)");
  const std::uint32_t steps = t.dims()[0], n = t.dims()[1];
  std::vector<QTensor> seq;
  seq.reserve(steps);
  for (std::uint32_t s = 0; s < steps; ++s) {
    const auto* begin = t.data().data() + std::size_t{s} * n;
    seq.push_back(QTensor::vector(t.fmt(), std::vector<std::int16_t>(begin, begin + n)));
  }
  return seq;
}

}  // namespace sparq
