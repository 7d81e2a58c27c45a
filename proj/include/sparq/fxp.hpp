#pragma once

// Fixed-point foundation: 16-bit Q-format storage, 32-bit saturating
// accumulators, round-half-even renormalization and the Op counting
// convention (one MAC == 2 Op).

#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace sparq {

struct QFormat {
  int int_bits = 8;   // including sign
  int frac_bits = 8;

  // Throws InvalidArgument unless int_bits + frac_bits == 16 and int_bits >= 1.
  static QFormat make(int int_bits, int frac_bits);
  // Parses "Q8.8" / "8.8".
  static QFormat parse(const std::string& text);

  bool valid() const noexcept { return int_bits >= 1 && frac_bits >= 0 && int_bits + frac_bits == 16; }
  double lsb() const noexcept;
  double max_value() const noexcept;
  double min_value() const noexcept;
  std::string to_string() const;

  friend bool operator==(const QFormat&, const QFormat&) = default;
};

inline constexpr QFormat kActivationFormat{8, 8};
inline constexpr QFormat kWeightFormat{2, 14};

struct QScalar {
  std::int16_t raw = 0;
  QFormat fmt = kActivationFormat;

  double real() const noexcept;
  friend bool operator==(const QScalar&, const QScalar&) = default;
};

// Per-thread saturation counters. Saturation never traps; tests assert these
// stay at zero where overflow would invalidate an equivalence argument.
struct FxpDiagnostics {
  std::uint64_t quantize_saturations = 0;
  std::uint64_t accumulator_saturations = 0;
  std::uint64_t renormalize_saturations = 0;

  std::uint64_t total() const noexcept {
    return quantize_saturations + accumulator_saturations + renormalize_saturations;
  }
};

FxpDiagnostics& diagnostics() noexcept;
void reset_diagnostics() noexcept;

struct OpCounter {
  std::uint64_t macs_executed = 0;
  std::uint64_t macs_dense_equivalent = 0;
  std::uint64_t adds = 0;
  std::uint64_t comparisons = 0;

  std::uint64_t total_ops() const noexcept { return 2 * macs_executed + adds + comparisons; }
  // What an engine that exploits no sparsity would execute.
  std::uint64_t dense_equivalent_ops() const noexcept { return 2 * macs_dense_equivalent + adds; }

  OpCounter& operator+=(const OpCounter& other) noexcept;
  friend bool operator==(const OpCounter&, const OpCounter&) = default;
};

QScalar quantize(double value, QFormat fmt);
double dequantize(QScalar q) noexcept;

std::int16_t saturate16(std::int64_t v) noexcept;
std::int32_t saturate32(std::int64_t v) noexcept;

// Divides by 2^shift rounding half to even; shift <= 0 multiplies exactly.
std::int64_t round_shift(std::int64_t v, int shift) noexcept;

// acc + a*b with 32-bit saturation. Counts saturations, not MACs.
inline std::int32_t sat_mac(std::int32_t acc, std::int32_t a, std::int32_t b) noexcept {
  const std::int64_t wide = static_cast<std::int64_t>(acc) + static_cast<std::int64_t>(a) * b;
  if (wide > INT32_MAX || wide < INT32_MIN) return saturate32(wide);
  return static_cast<std::int32_t>(wide);
}

inline std::int32_t sat_add(std::int32_t acc, std::int64_t v) noexcept {
  const std::int64_t wide = static_cast<std::int64_t>(acc) + v;
  if (wide > INT32_MAX || wide < INT32_MIN) return saturate32(wide);
  return static_cast<std::int32_t>(wide);
}

std::int32_t mac_accumulate(std::int32_t acc, QScalar a, QScalar b, OpCounter& ops) noexcept;

// acc is at scale 2^(a.frac_bits + b.frac_bits).
QScalar renormalize(std::int32_t acc, QFormat in_fmt_a, QFormat in_fmt_b, QFormat out_fmt) noexcept;
std::int16_t renormalize_raw(std::int32_t acc, int acc_frac_bits, QFormat out_fmt) noexcept;

// Dense fixed-point tensor. Feature maps are (C, H, W) and vectors are (N);
// weights use higher ranks. Data is in canonical order: index = c*(H*W) + y*W + x.
class QTensor {
 public:
  QTensor() = default;
  QTensor(std::vector<std::uint32_t> dims, QFormat fmt);
  QTensor(std::vector<std::uint32_t> dims, QFormat fmt, std::vector<std::int16_t> data);

  static QTensor vector(QFormat fmt, std::vector<std::int16_t> data);
  static QTensor feature_map(std::uint32_t c, std::uint32_t h, std::uint32_t w, QFormat fmt);
  static QTensor from_real(std::vector<std::uint32_t> dims, QFormat fmt, std::span<const double> values);

  const std::vector<std::uint32_t>& dims() const noexcept { return dims_; }
  std::size_t rank() const noexcept { return dims_.size(); }
  QFormat fmt() const noexcept { return fmt_; }
  std::size_t size() const noexcept { return data_.size(); }

  std::span<const std::int16_t> data() const noexcept { return data_; }
  std::span<std::int16_t> data() noexcept { return data_; }
  const std::vector<std::int16_t>& raw() const noexcept { return data_; }

  // (C, H, W) accessors; throw ShapeMismatch for other ranks.
  std::uint32_t channels() const;
  std::uint32_t height() const;
  std::uint32_t width() const;
  std::int16_t at(std::uint32_t c, std::uint32_t y, std::uint32_t x) const;
  std::int16_t& at(std::uint32_t c, std::uint32_t y, std::uint32_t x);

  std::vector<double> to_real() const;
  void require_map() const;

  friend bool operator==(const QTensor&, const QTensor&) = default;

 private:
  std::vector<std::uint32_t> dims_;
  QFormat fmt_{};
  std::vector<std::int16_t> data_;
};

std::size_t element_count(std::span<const std::uint32_t> dims) noexcept;

// ".qt": "QTSR", version 0x01, u8 int_bits, u8 frac_bits, u8 rank,
// rank x u32 LE dims, then i16 LE values in canonical order.
std::vector<std::uint8_t> serialize_qt(const QTensor& t);
QTensor deserialize_qt(std::span<const std::uint8_t> bytes);
QTensor read_qt(const std::filesystem::path& path);
void write_qt(const std::filesystem::path& path, const QTensor& t);

// FNV-1a over format, dims and the little-endian payload; used for dense/sparse
// equality checks.
std::uint64_t content_hash(const QTensor& t) noexcept;

}  // namespace sparq
