#pragma once

// Sparsity-map (SM) + non-zero value list (NZVL) feature-map codec, sparsity
// statistics, and delta-event streams for recurrent layers.

#include <bit>
#include <cstdint>
#include <filesystem>
#include <iterator>
#include <span>
#include <vector>

#include "sparq/fxp.hpp"

namespace sparq {

struct SparseFeatureMap {
  std::uint32_t channels = 0;
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  QFormat fmt{};
  std::vector<std::uint8_t> sm;     // LSB-first, zero padded to a byte boundary
  std::vector<std::int16_t> nzvl;   // values of set SM bits, canonical order

  std::size_t pixel_count() const noexcept { return std::size_t{channels} * height * width; }
  std::size_t nnz() const noexcept { return nzvl.size(); }
  std::size_t sm_bytes() const noexcept { return (pixel_count() + 7) / 8; }

  // pixels + 16 * nnz, header excluded.
  std::uint64_t payload_bits() const noexcept { return pixel_count() + 16ULL * nnz(); }
  std::uint64_t dense_bits() const noexcept { return 16ULL * pixel_count(); }
  double compression_ratio() const noexcept;
  double sparsity() const noexcept;

  bool sm_bit(std::size_t pixel) const noexcept { return (sm[pixel >> 3] >> (pixel & 7)) & 1U; }

  // Throws MalformedStream on popcount mismatch, zero values in the NZVL,
  // non-zero padding bits or a wrongly sized bitmap.
  void validate() const;

  friend bool operator==(const SparseFeatureMap&, const SparseFeatureMap&) = default;
};

SparseFeatureMap encode_sm(const QTensor& t);
QTensor decode_sm(const SparseFeatureMap& s);

struct NonzeroPixel {
  std::uint32_t c = 0;
  std::uint32_t y = 0;
  std::uint32_t x = 0;
  std::int16_t value = 0;
  std::size_t index = 0;  // canonical pixel index

  friend bool operator==(const NonzeroPixel&, const NonzeroPixel&) = default;
};

// Walks set SM bits 64 at a time; work is proportional to nnz plus one step per
// 64-pixel word, never per zero pixel.
class NonzeroView {
 public:
  class iterator {
   public:
    using iterator_category = std::input_iterator_tag;
    using value_type = NonzeroPixel;
    using difference_type = std::ptrdiff_t;
    using reference = const NonzeroPixel&;
    using pointer = const NonzeroPixel*;

    iterator() = default;
    reference operator*() const noexcept { return current_; }
    pointer operator->() const noexcept { return &current_; }
    iterator& operator++();
    void operator++(int) { ++*this; }
    friend bool operator==(const iterator& a, const iterator& b) noexcept { return a.done_ == b.done_ && (a.done_ || a.current_.index == b.current_.index); }

   private:
    friend class NonzeroView;
    iterator(const NonzeroView* view, bool done);
    void advance();

    const NonzeroView* view_ = nullptr;
    std::size_t word_ = 0;
    std::uint64_t bits_ = 0;
    std::size_t value_index_ = 0;
    NonzeroPixel current_{};
    bool done_ = true;
  };

  explicit NonzeroView(const SparseFeatureMap& map) : map_(&map) {}
  iterator begin() const { return iterator(this, false); }
  iterator end() const { return iterator(this, true); }

  // Number of 64-bit bitmap words loaded by all iterators of this view.
  std::uint64_t words_scanned() const noexcept { return words_scanned_; }

 private:
  std::uint64_t load_word(std::size_t w) const noexcept;
  std::size_t word_count() const noexcept { return (map_->pixel_count() + 63) / 64; }

  const SparseFeatureMap* map_;
  mutable std::uint64_t words_scanned_ = 0;
};

inline NonzeroView nonzero_iter(const SparseFeatureMap& s) { return NonzeroView(s); }

struct SparsityStats {
  std::uint64_t total_pixels = 0;
  std::uint64_t zero_pixels = 0;
  double sparsity = 0.0;
  std::vector<double> per_channel_sparsity;
};

SparsityStats measure_sparsity(const QTensor& t);
SparsityStats measure_sparsity(const SparseFeatureMap& s);

struct DeltaEvent {
  std::uint32_t index = 0;
  // Raw difference of two 16-bit values; needs 17 bits, so it is carried wide.
  std::int32_t value = 0;

  friend bool operator==(const DeltaEvent&, const DeltaEvent&) = default;
};

struct DeltaStream {
  std::uint32_t length = 0;
  std::vector<DeltaEvent> events;

  bool empty() const noexcept { return events.empty(); }
  std::size_t size() const noexcept { return events.size(); }
  void validate() const;
};

struct DeltaEncoding {
  DeltaStream stream;
  QTensor updated_prev;
};

// Emits (i, cur[i] - prev[i]) where |cur[i] - prev[i]| > theta.raw; memory
// keeps the last transmitted value so sub-threshold drift accumulates.
DeltaEncoding encode_delta(const QTensor& prev, const QTensor& cur, QScalar theta);

// In-place variant used on hot paths: updates `memory` and appends to `out`.
void encode_delta_into(std::span<std::int16_t> memory, std::span<const std::int16_t> cur, std::int16_t theta_raw,
                       DeltaStream& out);

// ".smfm": "SMFM", version 0x01, u8 int_bits, u8 frac_bits, u32 C, u32 H,
// u32 W, u32 nnz, packed SM bytes, nnz x i16. All little-endian.
std::vector<std::uint8_t> serialize_smfm(const SparseFeatureMap& s);
SparseFeatureMap deserialize_smfm(std::span<const std::uint8_t> bytes);
SparseFeatureMap read_smfm(const std::filesystem::path& path);
void write_smfm(const std::filesystem::path& path, const SparseFeatureMap& s);

}  // namespace sparq
