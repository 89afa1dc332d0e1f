#pragma once

// File formats.
//
// PTEN tensor record (all integers little-endian):
//   "PTEN" | version u16 (=1) | dtype u8 (0 = f32) | ndim u8 | ndim x u64 dims |
//   row-major f32 payload
// PTEN archive:
//   count u32 | count x (name length u16 | UTF-8 name | tensor record)
//
// PGM (P5) / PPM (P6) binary images with maxval up to 65535; samples wider
// than 8 bits are stored big-endian as the netpbm format requires.

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dcnet/tensor.hpp"

namespace dcnet::io {

inline constexpr char kMagic[4] = {'P', 'T', 'E', 'N'};
inline constexpr std::uint16_t kVersion = 1;
inline constexpr std::uint8_t kDtypeF32 = 0;
inline constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 34;

namespace detail {

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const char*>(p);
    buf_.insert(buf_.end(), c, c + n);
  }
  template <typename U>
  void le(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void f32(float v) { le(std::bit_cast<std::uint32_t>(v)); }
  const std::vector<char>& buffer() const { return buf_; }

 private:
  std::vector<char> buf_;
};

class Reader {
 public:
  explicit Reader(std::vector<char> data) : data_(std::move(data)) {}

  void need(std::size_t n) const {
    if (pos_ + n > data_.size()) throw FormatError("PTEN: truncated payload");
  }
  template <typename U>
  U le() {
    need(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i)
      v |= static_cast<U>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += sizeof(U);
    return v;
  }
  float f32() { return std::bit_cast<float>(le<std::uint32_t>()); }
  std::string str(std::size_t n) {
    need(n);
    std::string s(data_.begin() + static_cast<long>(pos_), data_.begin() + static_cast<long>(pos_ + n));
    pos_ += n;
    return s;
  }
  bool at_end() const { return pos_ == data_.size(); }

 private:
  std::vector<char> data_;
  std::size_t pos_ = 0;
};

inline void write_header(Writer& w, std::uint8_t dtype) {
  w.bytes(kMagic, 4);
  w.le<std::uint16_t>(kVersion);
  w.le<std::uint8_t>(dtype);
}

inline std::uint8_t read_header(Reader& r) {
  const std::string magic = r.str(4);
  if (magic != std::string(kMagic, 4)) throw FormatError("PTEN: bad magic");
  const auto version = r.le<std::uint16_t>();
  if (version != kVersion) throw FormatError("PTEN: unsupported version " + std::to_string(version));
  return r.le<std::uint8_t>();
}

inline void encode_record(Writer& w, const Tensor& t) {
  write_header(w, kDtypeF32);
  if (t.ndim() > 255) throw FormatError("PTEN: too many dimensions");
  w.le<std::uint8_t>(static_cast<std::uint8_t>(t.ndim()));
  for (const auto d : t.shape()) w.le<std::uint64_t>(d);
  for (const float v : t.data()) w.f32(v);
}

inline Tensor decode_record_body(Reader& r, std::uint8_t dtype) {
  if (dtype != kDtypeF32) throw FormatError("PTEN: unsupported dtype code " + std::to_string(dtype));
  const auto ndim = r.le<std::uint8_t>();
  if (ndim == 0) throw FormatError("PTEN: zero-rank record");
  Shape shape(ndim);
  std::uint64_t count = 1;
  for (auto& d : shape) {
    const auto v = r.le<std::uint64_t>();
    if (v == 0) throw FormatError("PTEN: zero extent");
    if (v > kMaxElements || count > kMaxElements / v) throw FormatError("PTEN: dimension overflow");
    count *= v;
    d = static_cast<std::size_t>(v);
  }
  r.need(count * 4);
  std::vector<float> values(count);
  for (auto& v : values) v = r.f32();
  return Tensor(std::move(shape), std::move(values));
}

inline std::vector<char> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return std::vector<char>(std::istreambuf_iterator<char>(in), {});
}

}  // namespace detail

/// Writes `bytes` to a sibling temp file and renames it over `path`.
inline void write_atomic(const std::filesystem::path& path, const std::vector<char>& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline std::vector<char> encode_tensor(const Tensor& t) {
  detail::Writer w;
  detail::encode_record(w, t);
  return w.buffer();
}

inline Tensor decode_tensor(std::vector<char> bytes) {
  detail::Reader r(std::move(bytes));
  const auto dtype = detail::read_header(r);
  auto t = detail::decode_record_body(r, dtype);
  if (!r.at_end()) throw FormatError("PTEN: trailing bytes after tensor");
  return t;
}

inline void write_tensor(const std::filesystem::path& path, const Tensor& t) { write_atomic(path, encode_tensor(t)); }
inline Tensor read_tensor(const std::filesystem::path& path) { return decode_tensor(detail::slurp(path)); }

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

inline std::vector<char> encode_archive(const NamedTensors& entries) {
  detail::Writer w;
  w.le<std::uint32_t>(static_cast<std::uint32_t>(entries.size()));
  for (const auto& [name, t] : entries) {
    if (name.size() > std::numeric_limits<std::uint16_t>::max()) throw FormatError("PTEN: name too long");
    w.le<std::uint16_t>(static_cast<std::uint16_t>(name.size()));
    w.bytes(name.data(), name.size());
    detail::encode_record(w, t);
  }
  return w.buffer();
}

inline NamedTensors decode_archive(std::vector<char> bytes) {
  detail::Reader r(std::move(bytes));
  const auto count = r.le<std::uint32_t>();
  NamedTensors out;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = r.le<std::uint16_t>();
    std::string name = r.str(len);
    const auto dtype = detail::read_header(r);
    out.emplace_back(std::move(name), detail::decode_record_body(r, dtype));
  }
  if (!r.at_end()) throw FormatError("PTEN: trailing bytes after archive");
  return out;
}

inline void write_archive(const std::filesystem::path& path, const NamedTensors& entries) {
  write_atomic(path, encode_archive(entries));
}
inline NamedTensors read_archive(const std::filesystem::path& path) { return decode_archive(detail::slurp(path)); }

// ---------------------------------------------------------------------------
// Netpbm

struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 1;  // 1 = PGM, 3 = PPM
  std::uint16_t maxval = 255;
  std::vector<std::uint16_t> samples;  // row-major, interleaved channels
};

inline std::vector<char> encode_pnm(const Image& img) {
  if (img.channels != 1 && img.channels != 3) throw FormatError("PNM: channels must be 1 or 3");
  if (img.maxval == 0) throw FormatError("PNM: maxval must be positive");
  if (img.samples.size() != img.width * img.height * img.channels) throw FormatError("PNM: sample count mismatch");
  std::ostringstream head;
  head << (img.channels == 1 ? "P5" : "P6") << '\n' << img.width << ' ' << img.height << '\n' << img.maxval << '\n';
  const std::string h = head.str();
  std::vector<char> out(h.begin(), h.end());
  const bool wide = img.maxval > 255;
  for (const auto s : img.samples) {
    if (s > img.maxval) throw FormatError("PNM: sample exceeds maxval");
    if (wide) out.push_back(static_cast<char>(s >> 8));
    out.push_back(static_cast<char>(s & 0xFF));
  }
  return out;
}

inline Image decode_pnm(const std::vector<char>& bytes) {
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto number = [&]() -> std::uint64_t {
    skip_space();
    if (pos >= bytes.size() || !std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      throw FormatError("PNM: malformed header");
    }
    std::uint64_t v = 0;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      v = v * 10 + static_cast<std::uint64_t>(bytes[pos++] - '0');
      if (v > (std::uint64_t{1} << 32)) throw FormatError("PNM: dimension overflow");
    }
    return v;
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    throw FormatError("PNM: bad magic (expected P5 or P6)");
  }
  Image img;
  img.channels = bytes[1] == '5' ? 1 : 3;
  pos = 2;
  const auto w = number(), h = number(), maxval = number();
  if (w == 0 || h == 0) throw FormatError("PNM: zero dimension");
  if (maxval == 0 || maxval > 65535) throw FormatError("PNM: maxval out of range");
  if (w * h > kMaxElements) throw FormatError("PNM: dimension overflow");
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    throw FormatError("PNM: truncated header");
  }
  ++pos;  // single whitespace before the raster
  img.width = static_cast<std::size_t>(w);
  img.height = static_cast<std::size_t>(h);
  img.maxval = static_cast<std::uint16_t>(maxval);
  const std::size_t n = img.width * img.height * img.channels;
  const std::size_t bps = maxval > 255 ? 2 : 1;
  if (bytes.size() - pos < n * bps) throw FormatError("PNM: truncated payload");
  img.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto hi = static_cast<unsigned char>(bytes[pos + i * bps]);
    img.samples[i] = bps == 2 ? static_cast<std::uint16_t>((hi << 8) | static_cast<unsigned char>(bytes[pos + i * 2 + 1]))
                              : static_cast<std::uint16_t>(hi);
  }
  return img;
}

inline void write_pnm(const std::filesystem::path& path, const Image& img) { write_atomic(path, encode_pnm(img)); }
inline Image read_pnm(const std::filesystem::path& path) { return decode_pnm(detail::slurp(path)); }

/// Quantizes bands of a [B,H,W] tensor into an image. One band gives a PGM,
/// three bands a PPM; `lo`/`hi` map to 0/maxval.
inline Image quantize(const Tensor& bands, const std::vector<std::size_t>& pick, double lo, double hi,
                      std::uint16_t maxval = 255) {
  if (bands.ndim() != 3) throw DimensionError("quantize: expected [B,H,W]");
  if (pick.size() != 1 && pick.size() != 3) throw DimensionError("quantize: pick 1 or 3 bands");
  Image img;
  img.height = bands.dim(1);
  img.width = bands.dim(2);
  img.channels = pick.size();
  img.maxval = maxval;
  img.samples.resize(img.width * img.height * img.channels);
  const std::size_t plane = img.width * img.height;
  for (std::size_t i = 0; i < plane; ++i)
    for (std::size_t c = 0; c < pick.size(); ++c) {
      if (pick[c] >= bands.dim(0)) throw DimensionError("quantize: band index out of range");
      const double v = (static_cast<double>(bands[pick[c] * plane + i]) - lo) / (hi - lo);
      const double q = std::round(std::clamp(v, 0.0, 1.0) * maxval);
      img.samples[i * img.channels + c] = static_cast<std::uint16_t>(q);
    }
  return img;
}

}  // namespace dcnet::io
