#include "sparq/codec.hpp"

#include <cstdlib>

#include "sparq/error.hpp"
#include "sparq/io.hpp"

namespace sparq {

double SparseFeatureMap::compression_ratio() const noexcept {
  const auto bits = payload_bits();
  return bits == 0 ? 0.0 : static_cast<double>(dense_bits()) / static_cast<double>(bits);
}

double SparseFeatureMap::sparsity() const noexcept {
  const auto total = pixel_count();
  return total == 0 ? 0.0 : static_cast<double>(total - nnz()) / static_cast<double>(total);
}

void SparseFeatureMap::validate() const {
  if (!fmt.valid()) throw MalformedStream("sparse map has invalid format " + fmt.to_string());
  if (sm.size() != sm_bytes()) {
    throw MalformedStream("sparsity map is " + std::to_string(sm.size()) + " byte(s), expected " +
                          std::to_string(sm_bytes()));
  }
  std::size_t set = 0;
  for (auto b : sm) set += static_cast<std::size_t>(std::popcount(b));
  if (const auto tail = pixel_count() % 8; tail != 0 && (sm.back() >> tail) != 0) {
    throw MalformedStream("sparsity map has non-zero padding bits");
  }
  if (set != nzvl.size()) {
    throw MalformedStream("sparsity map popcount " + std::to_string(set) + " != value list length " +
                          std::to_string(nzvl.size()));
  }
  for (std::size_t i = 0; i < nzvl.size(); ++i) {
    if (nzvl[i] == 0) throw MalformedStream("zero value at position " + std::to_string(i) + " of the value list");
  }
}

SparseFeatureMap encode_sm(const QTensor& t) {
  t.require_map();
  SparseFeatureMap s;
  s.channels = t.dims()[0];
  s.height = t.dims()[1];
  s.width = t.dims()[2];
  s.fmt = t.fmt();
  s.sm.assign(s.sm_bytes(), 0);
  const auto data = t.data();
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data[i] != 0) {
      s.sm[i >> 3] |= static_cast<std::uint8_t>(1U << (i & 7));
      s.nzvl.push_back(data[i]);
    }
  }
  return s;
}

QTensor decode_sm(const SparseFeatureMap& s) {
  s.validate();
  QTensor t = QTensor::feature_map(s.channels, s.height, s.width, s.fmt);
  auto data = t.data();
  std::size_t k = 0;
  for (std::size_t i = 0; i < s.pixel_count(); ++i) {
    if (s.sm_bit(i)) data[i] = s.nzvl[k++];
  }
  return t;
}

std::uint64_t NonzeroView::load_word(std::size_t w) const noexcept {
  ++words_scanned_;
  std::uint64_t v = 0;
  const std::size_t first = w * 8;
  const std::size_t last = std::min(first + 8, map_->sm.size());
  for (std::size_t b = first; b < last; ++b) v |= static_cast<std::uint64_t>(map_->sm[b]) << (8 * (b - first));
  return v;
}

NonzeroView::iterator::iterator(const NonzeroView* view, bool done) : view_(view), done_(done) {
  if (done_) return;
  if (view_->word_count() == 0) {
    done_ = true;
    return;
  }
  bits_ = view_->load_word(0);
  advance();
}

void NonzeroView::iterator::advance() {
  while (bits_ == 0) {
    if (++word_ >= view_->word_count()) {
      done_ = true;
      return;
    }
    bits_ = view_->load_word(word_);
  }
  const auto bit = static_cast<std::size_t>(std::countr_zero(bits_));
  bits_ &= bits_ - 1;
  const auto& m = *view_->map_;
  const std::size_t index = word_ * 64 + bit;
  const std::size_t plane = std::size_t{m.height} * m.width;
  current_.index = index;
  current_.c = static_cast<std::uint32_t>(index / plane);
  const std::size_t rem = index % plane;
  current_.y = static_cast<std::uint32_t>(rem / m.width);
  current_.x = static_cast<std::uint32_t>(rem % m.width);
  current_.value = m.nzvl[value_index_++];
}

NonzeroView::iterator& NonzeroView::iterator::operator++() {
  advance();
  return *this;
}

SparsityStats measure_sparsity(const QTensor& t) {
  SparsityStats st;
  const auto data = t.data();
  st.total_pixels = data.size();
  const std::size_t channels = t.rank() == 3 ? t.dims()[0] : 1;
  const std::size_t per = channels == 0 ? 0 : data.size() / channels;
  st.per_channel_sparsity.resize(channels, 0.0);
  for (std::size_t c = 0; c < channels; ++c) {
    std::uint64_t zeros = 0;
    for (std::size_t i = c * per; i < (c + 1) * per; ++i) zeros += data[i] == 0 ? 1 : 0;
    st.zero_pixels += zeros;
    st.per_channel_sparsity[c] = per == 0 ? 0.0 : static_cast<double>(zeros) / static_cast<double>(per);
  }
  st.sparsity = st.total_pixels == 0 ? 0.0 : static_cast<double>(st.zero_pixels) / static_cast<double>(st.total_pixels);
  return st;
}

SparsityStats measure_sparsity(const SparseFeatureMap& s) {
  SparsityStats st;
  st.total_pixels = s.pixel_count();
  st.zero_pixels = st.total_pixels - s.nnz();
  st.sparsity = s.sparsity();
  const std::size_t plane = std::size_t{s.height} * s.width;
  std::vector<std::uint64_t> nz(s.channels, 0);
  for (const auto& p : nonzero_iter(s)) ++nz[p.c];
  st.per_channel_sparsity.resize(s.channels, 0.0);
  for (std::size_t c = 0; c < s.channels; ++c) {
    st.per_channel_sparsity[c] = plane == 0 ? 0.0 : static_cast<double>(plane - nz[c]) / static_cast<double>(plane);
  }
  return st;
}

void DeltaStream::validate() const {
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (events[i].index >= length) throw IndexOutOfRange("delta event index out of range");
    if (events[i].value == 0) throw MalformedStream("zero-valued delta event");
    if (i > 0 && events[i].index <= events[i - 1].index) throw MalformedStream("delta indices not increasing");
  }
}

void encode_delta_into(std::span<std::int16_t> memory, std::span<const std::int16_t> cur, std::int16_t theta_raw,
                       DeltaStream& out) {
  if (memory.size() != cur.size()) throw ShapeMismatch("encode_delta: memory and input lengths differ");
  out.length = static_cast<std::uint32_t>(cur.size());
  out.events.clear();
  const std::int32_t theta = theta_raw;
  for (std::size_t i = 0; i < cur.size(); ++i) {
    const std::int32_t d = static_cast<std::int32_t>(cur[i]) - memory[i];
    if (std::abs(d) > theta) {
      out.events.push_back({static_cast<std::uint32_t>(i), d});
      memory[i] = cur[i];
    }
  }
}

DeltaEncoding encode_delta(const QTensor& prev, const QTensor& cur, QScalar theta) {
  if (prev.rank() != 1 || cur.rank() != 1) throw ShapeMismatch("encode_delta: expects vectors");
  if (prev.fmt() != cur.fmt() || prev.fmt() != theta.fmt) {
    throw ShapeMismatch("encode_delta: prev, cur and theta must share a Q format");
  }
  if (theta.raw < 0) throw InvalidArgument("encode_delta: theta must be >= 0");
  DeltaEncoding enc{{}, prev};
  encode_delta_into(enc.updated_prev.data(), cur.data(), theta.raw, enc.stream);
  return enc;
}

std::vector<std::uint8_t> serialize_smfm(const SparseFeatureMap& s) {
  ByteWriter w;
  w.magic("SMFM");
  w.u8(0x01);
  w.u8(static_cast<std::uint8_t>(s.fmt.int_bits));
  w.u8(static_cast<std::uint8_t>(s.fmt.frac_bits));
  w.u32(s.channels);
  w.u32(s.height);
  w.u32(s.width);
  w.u32(static_cast<std::uint32_t>(s.nnz()));
  w.bytes(s.sm);
  for (auto v : s.nzvl) w.i16(v);
  return std::move(w).take();
}

SparseFeatureMap deserialize_smfm(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.expect_magic("SMFM");
  const std::size_t version_at = r.offset();
  if (const auto version = r.u8(); version != 0x01) {
    throw MalformedStream("unsupported .smfm version " + std::to_string(version) + " at byte offset " +
                          std::to_string(version_at));
  }
  SparseFeatureMap s;
  const std::size_t fmt_at = r.offset();
  s.fmt.int_bits = r.u8();
  s.fmt.frac_bits = r.u8();
  if (!s.fmt.valid()) {
    throw MalformedStream("invalid Q format " + s.fmt.to_string() + " at byte offset " + std::to_string(fmt_at));
  }
  s.channels = r.u32();
  s.height = r.u32();
  s.width = r.u32();
  const std::uint32_t nnz = r.u32();
  const std::size_t sm_at = r.offset();
  if (s.sm_bytes() > r.remaining()) {
    throw MalformedStream("truncated at byte offset " + std::to_string(sm_at) + ": sparsity map needs " +
                          std::to_string(s.sm_bytes()) + " byte(s), " + std::to_string(r.remaining()) + " remain");
  }
  auto sm = r.take(s.sm_bytes());
  s.sm.assign(sm.begin(), sm.end());
  if (nnz > s.pixel_count()) {
    throw MalformedStream("nnz " + std::to_string(nnz) + " exceeds pixel count at byte offset " +
                          std::to_string(sm_at - 4));
  }
  if (std::size_t{nnz} * 2 > r.remaining()) {
    throw MalformedStream("truncated at byte offset " + std::to_string(r.offset()) + ": value list needs " +
                          std::to_string(std::size_t{nnz} * 2) + " byte(s), " + std::to_string(r.remaining()) +
                          " remain");
  }
  s.nzvl.resize(nnz);
  for (auto& v : s.nzvl) v = r.i16();
  r.expect_end();
  s.validate();
  return s;
}

SparseFeatureMap read_smfm(const std::filesystem::path& path) { return deserialize_smfm(read_file(path)); }

void write_smfm(const std::filesystem::path& path, const SparseFeatureMap& s) {
  write_file_atomic(path, serialize_smfm(s));
}

}  // namespace sparq
