#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "vega/tensor.hpp"

namespace vega::io {

/// On-disk tensor encoding:
///   magic (4 bytes) | u32 rank | u32 extent x rank | payload, all little-endian.
/// Magic "VEGT" carries an f32 payload (dataset files); "VEGD" is the same
/// layout with an f64 payload (checkpoints, which must resume bit-exactly).
enum class Precision { f32, f64 };

std::string encode_tensor(const Tensor& tensor, Precision precision);
// `context` names the source in diagnostics. Throws ValidationError on malformed input.
Tensor decode_tensor(std::string_view bytes, const std::string& context);
// Decodes one tensor from the front of `bytes` and advances it.
Tensor decode_tensor_prefix(std::string_view& bytes, const std::string& context);

void write_tensor(const std::filesystem::path& path, const Tensor& tensor, Precision precision = Precision::f32);
Tensor read_tensor(const std::filesystem::path& path);

/// Binary PPM (P6, maxval 255). Images are [3 x H x W] with values in [0,1];
/// writing rounds to the nearest 8-bit level.
std::string encode_ppm(const Tensor& image);
Tensor decode_ppm(std::string_view bytes, const std::string& context);
void write_ppm(const std::filesystem::path& path, const Tensor& image);
Tensor read_ppm(const std::filesystem::path& path);
// Rounds every value to the 8-bit grid PPM can represent.
Tensor quantize_8bit(const Tensor& image);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

// Little-endian primitives shared by the checkpoint format.
void put_u32(std::string& out, std::uint32_t v);
void put_u64(std::string& out, std::uint64_t v);
std::uint32_t take_u32(std::string_view& in, const std::string& context);
std::uint64_t take_u64(std::string_view& in, const std::string& context);

}  // namespace vega::io
