#include "sparq/io.hpp"

#include <fstream>
#include <iterator>
#include <random>

#include "sparq/error.hpp"

namespace sparq {

namespace fs = std::filesystem;

std::vector<std::uint8_t> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifact("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_atomic(const fs::path& path, std::span<const std::uint8_t> bytes) {
  fs::path tmp = path;
  tmp += ".tmp" + std::to_string(std::random_device{}() & 0xffffff);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidArgument("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      fs::remove(tmp);
      throw InvalidArgument("write failed for " + tmp.string());
    }
  }
  fs::rename(tmp, path);
}

void write_file_atomic(const fs::path& path, std::string_view text) {
  write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

void ByteReader::need(std::size_t n) const {
  if (remaining() < n) {
    throw MalformedStream("truncated at byte offset " + std::to_string(pos_) + ": need " + std::to_string(n) +
                          " more byte(s), have " + std::to_string(remaining()));
  }
}

std::uint8_t ByteReader::u8() {
  need(1);
  return bytes_[pos_++];
}

std::uint32_t ByteReader::u32() {
  need(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
  pos_ += 4;
  return v;
}

std::int16_t ByteReader::i16() {
  need(2);
  const auto v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
  pos_ += 2;
  return static_cast<std::int16_t>(v);
}

std::span<const std::uint8_t> ByteReader::take(std::size_t n) {
  need(n);
  auto out = bytes_.subspan(pos_, n);
  pos_ += n;
  return out;
}

void ByteReader::expect_magic(std::string_view magic) {
  const std::size_t at = pos_;
  auto got = take(magic.size());
  if (!std::equal(got.begin(), got.end(), magic.begin())) {
    throw MalformedStream("bad magic at byte offset " + std::to_string(at) + ": expected \"" + std::string(magic) +
                          "\"");
  }
}

void ByteReader::expect_end() const {
  if (remaining() != 0) {
    throw MalformedStream("trailing data at byte offset " + std::to_string(pos_) + ": " +
                          std::to_string(remaining()) + " unexpected byte(s)");
  }
}

void ByteWriter::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::i16(std::int16_t v) {
  const auto u = static_cast<std::uint16_t>(v);
  buf_.push_back(static_cast<std::uint8_t>(u & 0xff));
  buf_.push_back(static_cast<std::uint8_t>(u >> 8));
}

}  // namespace sparq
