#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "causalfuse/error.hpp"
#include "causalfuse/tensor.hpp"

namespace causalfuse {

/// Single-channel luminance image, row-major, values nominally in [0, 1].
struct Image {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> pixels;

  Image() = default;
  Image(std::size_t h, std::size_t w, double fill = 0.0) : height(h), width(w), pixels(h * w, fill) {}
  Image(std::size_t h, std::size_t w, std::vector<double> data) : height(h), width(w), pixels(std::move(data)) {
    if (pixels.size() != h * w) throw DimensionError("image buffer does not match " + std::to_string(h) + "x" + std::to_string(w));
  }

  bool empty() const { return pixels.empty(); }
  std::size_t size() const { return pixels.size(); }
  double& at(std::size_t y, std::size_t x) { return pixels[y * width + x]; }
  double at(std::size_t y, std::size_t x) const { return pixels[y * width + x]; }

  bool same_size(const Image& other) const { return height == other.height && width == other.width; }

  friend bool operator==(const Image&, const Image&) = default;
};

/// 1 x H x W tensor view of an image (copied).
inline Tensor to_tensor(const Image& img) {
  if (img.empty()) throw DimensionError("empty image");
  return Tensor({1, img.height, img.width}, img.pixels);
}

inline Image to_image(const Tensor& t) {
  if (t.rank() != 3 || t.dim(0) != 1) throw DimensionError("expected a 1 x H x W tensor, got " + shape_string(t.shape()));
  return Image(t.dim(1), t.dim(2), std::vector<double>(t.values().begin(), t.values().end()));
}

inline Image crop(const Image& img, std::size_t top, std::size_t left, std::size_t h, std::size_t w) {
  if (top + h > img.height || left + w > img.width) throw DimensionError("crop window exceeds image");
  Image out(h, w);
  for (std::size_t y = 0; y < h; ++y)
    std::copy_n(img.pixels.begin() + static_cast<long>((top + y) * img.width + left), w,
                out.pixels.begin() + static_cast<long>(y * w));
  return out;
}

inline Image flip_horizontal(const Image& img) {
  Image out = img;
  for (std::size_t y = 0; y < img.height; ++y)
    std::reverse(out.pixels.begin() + static_cast<long>(y * img.width),
                 out.pixels.begin() + static_cast<long>((y + 1) * img.width));
  return out;
}

inline Image elementwise_max(const Image& a, const Image& b) {
  if (!a.same_size(b)) throw DimensionError("elementwise_max: image sizes differ");
  Image out(a.height, a.width);
  for (std::size_t i = 0; i < a.size(); ++i) out.pixels[i] = std::max(a.pixels[i], b.pixels[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Binary greyscale PGM (P5), 8-bit.

namespace detail {

inline std::string pgm_token(std::istream& in) {
  std::string token;
  char c;
  while (in.get(c)) {
    if (c == '#') {
      std::string comment;
      std::getline(in, comment);
      if (!token.empty()) break;
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!token.empty()) break;
      continue;
    }
    token.push_back(c);
  }
  return token;
}

}  // namespace detail

inline std::uint8_t quantize(double v) {
  const double clamped = std::clamp(v, 0.0, 1.0);
  return static_cast<std::uint8_t>(std::lround(clamped * 255.0));
}

inline std::string encode_pgm(const Image& img) {
  std::string out = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  out.reserve(out.size() + img.size());
  for (double v : img.pixels) out.push_back(static_cast<char>(quantize(v)));
  return out;
}

inline Image decode_pgm(const std::string& bytes) {
  std::istringstream in(bytes);
  if (detail::pgm_token(in) != "P5") throw FormatError("not a binary PGM (P5) file");
  std::size_t width = 0, height = 0;
  int maxval = 0;
  try {
    width = std::stoul(detail::pgm_token(in));
    height = std::stoul(detail::pgm_token(in));
    maxval = std::stoi(detail::pgm_token(in));
  } catch (const std::exception&) {
    throw FormatError("malformed PGM header");
  }
  if (width == 0 || height == 0) throw FormatError("PGM has zero size");
  if (maxval <= 0 || maxval > 255) throw FormatError("only 8-bit PGM is supported");
  const auto offset = static_cast<std::size_t>(in.tellg());
  if (bytes.size() < offset + width * height) throw FormatError("PGM pixel data truncated");
  Image img(height, width);
  for (std::size_t i = 0; i < img.size(); ++i)
    img.pixels[i] = static_cast<double>(static_cast<unsigned char>(bytes[offset + i])) / maxval;
  return img;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Writes to a sibling temporary file and renames it into place.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline Image read_pgm(const std::filesystem::path& path) { return decode_pgm(read_file(path)); }
inline void write_pgm(const std::filesystem::path& path, const Image& img) { write_file_atomic(path, encode_pgm(img)); }

/// FNV-1a over raw bytes; pins referenced files inside checkpoints.
inline std::uint64_t content_hash(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xF];
  return s;
}

}  // namespace causalfuse
