#include "vega/tensor_io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "vega/error.hpp"

namespace vega::io {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

namespace {

void need(std::string_view in, std::size_t n, const std::string& context) {
  if (in.size() < n) throw ValidationError(context + ": truncated data");
}

template <typename T>
T take_le(std::string_view& in, const std::string& context) {
  need(in, sizeof(T), context);
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<T>(static_cast<unsigned char>(in[i])) << (8 * i);
  }
  in.remove_prefix(sizeof(T));
  return v;
}

constexpr std::string_view kMagicF32 = "VEGT";
constexpr std::string_view kMagicF64 = "VEGD";

}  // namespace

std::uint32_t take_u32(std::string_view& in, const std::string& context) {
  return take_le<std::uint32_t>(in, context);
}

std::uint64_t take_u64(std::string_view& in, const std::string& context) {
  return take_le<std::uint64_t>(in, context);
}

std::string encode_tensor(const Tensor& tensor, Precision precision) {
  std::string out;
  const bool wide = precision == Precision::f64;
  out.reserve(8 + 4 * tensor.rank() + tensor.size() * (wide ? 8 : 4));
  out.append(wide ? kMagicF64 : kMagicF32);
  put_u32(out, static_cast<std::uint32_t>(tensor.rank()));
  for (std::size_t e : tensor.shape()) put_u32(out, static_cast<std::uint32_t>(e));
  for (double v : tensor.values()) {
    if (wide) {
      put_u64(out, std::bit_cast<std::uint64_t>(v));
    } else {
      put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
  }
  return out;
}

Tensor decode_tensor_prefix(std::string_view& bytes, const std::string& context) {
  need(bytes, 4, context);
  const std::string_view magic = bytes.substr(0, 4);
  bool wide;
  if (magic == kMagicF32) {
    wide = false;
  } else if (magic == kMagicF64) {
    wide = true;
  } else {
    throw ValidationError(context + ": bad tensor magic");
  }
  bytes.remove_prefix(4);
  const std::uint32_t rank = take_u32(bytes, context);
  if (rank == 0 || rank > 8) throw ValidationError(context + ": unsupported tensor rank " + std::to_string(rank));
  Shape shape(rank);
  std::size_t count = 1;
  for (auto& e : shape) {
    e = take_u32(bytes, context);
    if (e == 0) throw ValidationError(context + ": zero tensor extent");
    count *= e;
  }
  need(bytes, count * (wide ? 8 : 4), context);
  std::vector<double> values(count);
  for (auto& v : values) {
    if (wide) {
      v = std::bit_cast<double>(take_u64(bytes, context));
    } else {
      v = static_cast<double>(std::bit_cast<float>(take_u32(bytes, context)));
    }
  }
  return Tensor(std::move(shape), std::move(values));
}

Tensor decode_tensor(std::string_view bytes, const std::string& context) {
  Tensor t = decode_tensor_prefix(bytes, context);
  if (!bytes.empty()) throw ValidationError(context + ": trailing bytes after tensor payload");
  return t;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("missing file: " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeFailure("cannot open for writing: " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw RuntimeFailure("write failed: " + path.string());
}

void write_tensor(const std::filesystem::path& path, const Tensor& tensor, Precision precision) {
  write_file(path, encode_tensor(tensor, precision));
}

Tensor read_tensor(const std::filesystem::path& path) { return decode_tensor(read_file(path), path.string()); }

namespace {
std::uint8_t to_byte(double v) {
  const double c = std::clamp(v, 0.0, 1.0);
  return static_cast<std::uint8_t>(std::lround(c * 255.0));
}

void check_image(const Tensor& image) {
  if (image.rank() != 3 || image.dim(0) != 3) {
    throw ValidationError("expected a [3 x H x W] image, got " + shape_string(image.shape()));
  }
}
}  // namespace

Tensor quantize_8bit(const Tensor& image) {
  Tensor out(image.shape());
  for (std::size_t i = 0; i < image.size(); ++i) out[i] = to_byte(image[i]) / 255.0;
  return out;
}

std::string encode_ppm(const Tensor& image) {
  check_image(image);
  const std::size_t h = image.dim(1), w = image.dim(2);
  std::string out = "P6\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < 3; ++c) out.push_back(static_cast<char>(to_byte(image[(c * h + y) * w + x])));
  return out;
}

Tensor decode_ppm(std::string_view bytes, const std::string& context) {
  std::size_t pos = 0;
  auto token = [&]() -> std::string {
    while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    return std::string(bytes.substr(start, pos - start));
  };
  if (token() != "P6") throw ValidationError(context + ": not a binary PPM (P6)");
  std::size_t w = 0, h = 0, maxval = 0;
  try {
    w = std::stoul(token());
    h = std::stoul(token());
    maxval = std::stoul(token());
  } catch (const std::exception&) {
    throw ValidationError(context + ": malformed PPM header");
  }
  if (w == 0 || h == 0 || maxval != 255) throw ValidationError(context + ": unsupported PPM header");
  ++pos;  // single whitespace byte before the raster
  if (pos > bytes.size() || bytes.size() - pos < w * h * 3) throw ValidationError(context + ": truncated PPM raster");
  if (bytes.size() - pos > w * h * 3) throw ValidationError(context + ": trailing bytes after PPM raster");
  Tensor image({3, h, w});
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < 3; ++c) {
        image[(c * h + y) * w + x] = static_cast<unsigned char>(bytes[pos++]) / 255.0;
      }
  return image;
}

void write_ppm(const std::filesystem::path& path, const Tensor& image) { write_file(path, encode_ppm(image)); }

Tensor read_ppm(const std::filesystem::path& path) { return decode_ppm(read_file(path), path.string()); }

}  // namespace vega::io
