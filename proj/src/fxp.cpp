#include "sparq/fxp.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include "sparq/error.hpp"
#include "sparq/io.hpp"

namespace sparq {

QFormat QFormat::make(int int_bits, int frac_bits) {
  QFormat f{int_bits, frac_bits};
  if (!f.valid()) {
    throw InvalidArgument("invalid Q format Q" + std::to_string(int_bits) + "." + std::to_string(frac_bits) +
                          ": int_bits + frac_bits must be 16 with int_bits >= 1");
  }
  return f;
}

QFormat QFormat::parse(const std::string& text) {
  std::string s = text;
  if (!s.empty() && (s[0] == 'Q' || s[0] == 'q')) s.erase(0, 1);
  const auto dot = s.find('.');
  if (dot == std::string::npos) throw InvalidArgument("cannot parse Q format '" + text + "'");
  try {
    std::size_t used_i = 0, used_f = 0;
    const int i = std::stoi(s.substr(0, dot), &used_i);
    const int f = std::stoi(s.substr(dot + 1), &used_f);
    if (used_i != dot || used_f != s.size() - dot - 1) throw std::invalid_argument(text);
    return make(i, f);
  } catch (const std::logic_error&) {
    throw InvalidArgument("cannot parse Q format '" + text + "'");
  }
}

double QFormat::lsb() const noexcept { return std::ldexp(1.0, -frac_bits); }
double QFormat::max_value() const noexcept { return 32767.0 * lsb(); }
double QFormat::min_value() const noexcept { return -32768.0 * lsb(); }
std::string QFormat::to_string() const { return "Q" + std::to_string(int_bits) + "." + std::to_string(frac_bits); }

double QScalar::real() const noexcept { return dequantize(*this); }

FxpDiagnostics& diagnostics() noexcept {
  thread_local FxpDiagnostics diag;
  return diag;
}

void reset_diagnostics() noexcept { diagnostics() = {}; }

OpCounter& OpCounter::operator+=(const OpCounter& o) noexcept {
  macs_executed += o.macs_executed;
  macs_dense_equivalent += o.macs_dense_equivalent;
  adds += o.adds;
  comparisons += o.comparisons;
  return *this;
}

std::int16_t saturate16(std::int64_t v) noexcept {
  if (v > INT16_MAX) return INT16_MAX;
  if (v < INT16_MIN) return INT16_MIN;
  return static_cast<std::int16_t>(v);
}

std::int32_t saturate32(std::int64_t v) noexcept {
  if (v > INT32_MAX) {
    ++diagnostics().accumulator_saturations;
    return INT32_MAX;
  }
  if (v < INT32_MIN) {
    ++diagnostics().accumulator_saturations;
    return INT32_MIN;
  }
  return static_cast<std::int32_t>(v);
}

std::int64_t round_shift(std::int64_t v, int shift) noexcept {
  if (shift <= 0) {
    // Callers keep |v| << -shift within 64 bits (16/32-bit inputs, shifts < 31).
    return v * (std::int64_t{1} << -shift);
  }
  const std::int64_t q = v >> shift;  // floor
  const std::int64_t rem = v - (q * (std::int64_t{1} << shift));
  const std::int64_t half = std::int64_t{1} << (shift - 1);
  if (rem > half || (rem == half && (q & 1) != 0)) return q + 1;
  return q;
}

QScalar quantize(double value, QFormat fmt) {
  if (!fmt.valid()) throw InvalidArgument("quantize: invalid format " + fmt.to_string());
  if (std::isnan(value)) {
    ++diagnostics().quantize_saturations;
    return {0, fmt};
  }
  // nearbyint honours the default FE_TONEAREST mode: ties go to even.
  const double scaled = std::nearbyint(std::ldexp(value, fmt.frac_bits));
  if (scaled > 32767.0) {
    ++diagnostics().quantize_saturations;
    return {INT16_MAX, fmt};
  }
  if (scaled < -32768.0) {
    ++diagnostics().quantize_saturations;
    return {INT16_MIN, fmt};
  }
  return {static_cast<std::int16_t>(scaled), fmt};
}

double dequantize(QScalar q) noexcept { return std::ldexp(static_cast<double>(q.raw), -q.fmt.frac_bits); }

std::int32_t mac_accumulate(std::int32_t acc, QScalar a, QScalar b, OpCounter& ops) noexcept {
  ++ops.macs_executed;
  ++ops.macs_dense_equivalent;
  return sat_mac(acc, a.raw, b.raw);
}

std::int16_t renormalize_raw(std::int32_t acc, int acc_frac_bits, QFormat out_fmt) noexcept {
  const std::int64_t shifted = round_shift(acc, acc_frac_bits - out_fmt.frac_bits);
  if (shifted > INT16_MAX || shifted < INT16_MIN) ++diagnostics().renormalize_saturations;
  return saturate16(shifted);
}

QScalar renormalize(std::int32_t acc, QFormat in_fmt_a, QFormat in_fmt_b, QFormat out_fmt) noexcept {
  return {renormalize_raw(acc, in_fmt_a.frac_bits + in_fmt_b.frac_bits, out_fmt), out_fmt};
}

std::size_t element_count(std::span<const std::uint32_t> dims) noexcept {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1},
                         [](std::size_t a, std::uint32_t d) { return a * d; });
}

QTensor::QTensor(std::vector<std::uint32_t> dims, QFormat fmt) : dims_(std::move(dims)), fmt_(fmt) {
  if (!fmt_.valid()) throw InvalidArgument("QTensor: invalid format " + fmt_.to_string());
  if (dims_.empty()) throw ShapeMismatch("QTensor: rank must be >= 1");
  data_.assign(element_count(dims_), 0);
}

QTensor::QTensor(std::vector<std::uint32_t> dims, QFormat fmt, std::vector<std::int16_t> data)
    : dims_(std::move(dims)), fmt_(fmt), data_(std::move(data)) {
  if (!fmt_.valid()) throw InvalidArgument("QTensor: invalid format " + fmt_.to_string());
  if (dims_.empty()) throw ShapeMismatch("QTensor: rank must be >= 1");
  if (data_.size() != element_count(dims_)) {
    throw ShapeMismatch("QTensor: data length " + std::to_string(data_.size()) + " != product of dims " +
                        std::to_string(element_count(dims_)));
  }
}

QTensor QTensor::vector(QFormat fmt, std::vector<std::int16_t> data) {
  const auto n = static_cast<std::uint32_t>(data.size());
  return QTensor({n}, fmt, std::move(data));
}

QTensor QTensor::feature_map(std::uint32_t c, std::uint32_t h, std::uint32_t w, QFormat fmt) {
  return QTensor({c, h, w}, fmt);
}

QTensor QTensor::from_real(std::vector<std::uint32_t> dims, QFormat fmt, std::span<const double> values) {
  QTensor t(std::move(dims), fmt);
  if (values.size() != t.size()) throw ShapeMismatch("QTensor::from_real: value count does not match dims");
  for (std::size_t i = 0; i < values.size(); ++i) t.data_[i] = quantize(values[i], fmt).raw;
  return t;
}

void QTensor::require_map() const {
  if (dims_.size() != 3) throw ShapeMismatch("expected a (C,H,W) feature map, got rank " + std::to_string(rank()));
}

std::uint32_t QTensor::channels() const {
  require_map();
  return dims_[0];
}
std::uint32_t QTensor::height() const {
  require_map();
  return dims_[1];
}
std::uint32_t QTensor::width() const {
  require_map();
  return dims_[2];
}

std::int16_t QTensor::at(std::uint32_t c, std::uint32_t y, std::uint32_t x) const {
  return data_[(static_cast<std::size_t>(c) * dims_[1] + y) * dims_[2] + x];
}

std::int16_t& QTensor::at(std::uint32_t c, std::uint32_t y, std::uint32_t x) {
  return data_[(static_cast<std::size_t>(c) * dims_[1] + y) * dims_[2] + x];
}

std::vector<double> QTensor::to_real() const {
  std::vector<double> out(data_.size());
  for (std::size_t i = 0; i < data_.size(); ++i) out[i] = dequantize({data_[i], fmt_});
  return out;
}

std::vector<std::uint8_t> serialize_qt(const QTensor& t) {
  ByteWriter w;
  w.magic("QTSR");
  w.u8(0x01);
  w.u8(static_cast<std::uint8_t>(t.fmt().int_bits));
  w.u8(static_cast<std::uint8_t>(t.fmt().frac_bits));
  w.u8(static_cast<std::uint8_t>(t.rank()));
  for (auto d : t.dims()) w.u32(d);
  for (auto v : t.data()) w.i16(v);
  return std::move(w).take();
}

QTensor deserialize_qt(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.expect_magic("QTSR");
  const std::size_t version_at = r.offset();
  if (const auto version = r.u8(); version != 0x01) {
    throw MalformedStream("unsupported .qt version " + std::to_string(version) + " at byte offset " +
                          std::to_string(version_at));
  }
  const std::size_t fmt_at = r.offset();
  const int int_bits = r.u8();
  const int frac_bits = r.u8();
  const QFormat fmt{int_bits, frac_bits};
  if (!fmt.valid()) {
    throw MalformedStream("invalid Q format " + fmt.to_string() + " at byte offset " + std::to_string(fmt_at));
  }
  const std::size_t rank_at = r.offset();
  const std::uint8_t rank = r.u8();
  if (rank == 0) throw MalformedStream("rank 0 at byte offset " + std::to_string(rank_at));
  std::vector<std::uint32_t> dims(rank);
  for (auto& d : dims) d = r.u32();
  const std::size_t count = element_count(dims);
  if (count > r.remaining() / 2) {
    throw MalformedStream("truncated at byte offset " + std::to_string(r.offset()) + ": dims declare " +
                          std::to_string(count) + " values, " + std::to_string(r.remaining()) + " byte(s) remain");
  }
  std::vector<std::int16_t> data(count);
  for (auto& v : data) v = r.i16();
  r.expect_end();
  return QTensor(std::move(dims), fmt, std::move(data));
}

QTensor read_qt(const std::filesystem::path& path) { return deserialize_qt(read_file(path)); }

void write_qt(const std::filesystem::path& path, const QTensor& t) { write_file_atomic(path, serialize_qt(t)); }

std::uint64_t content_hash(const QTensor& t) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint8_t b) {
    h ^= b;
    h *= 0x100000001b3ULL;
  };
  mix(static_cast<std::uint8_t>(t.fmt().int_bits));
  mix(static_cast<std::uint8_t>(t.fmt().frac_bits));
  for (auto d : t.dims()) {
    for (int i = 0; i < 4; ++i) mix(static_cast<std::uint8_t>(d >> (8 * i)));
  }
  for (auto v : t.data()) {
    const auto u = static_cast<std::uint16_t>(v);
    mix(static_cast<std::uint8_t>(u & 0xff));
    mix(static_cast<std::uint8_t>(u >> 8));
  }
  return h;
}

}  // namespace sparq
