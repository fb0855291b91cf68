#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dpd/codec.hpp"
#include "dpd/tensor.hpp"

namespace dpd {

// Binary container: magic "DPDS", version u32, record count u32, reserved
// u32 (16-byte header), then per record: name length u16 + UTF-8 name,
// dtype tag u8 (0=f64, 1=u32), rank u8, dims as u32s, little-endian payload.
inline constexpr std::uint32_t kContainerVersion = 1;

struct Record {
  enum class Dtype : std::uint8_t { f64 = 0, u32 = 1 };
  std::string name;
  Dtype dtype = Dtype::f64;
  std::vector<std::uint32_t> dims;
  std::vector<double> f64_data;
  std::vector<std::uint32_t> u32_data;

  std::size_t element_count() const;
};

void write_records(const std::string& path, const std::vector<Record>& records);
// Throws std::runtime_error naming the byte offset on bad magic, version,
// or truncation.
std::vector<Record> read_records(const std::string& path);

void save_param_tree(const std::string& path, const ParamTree& params);
ParamTree load_param_tree(const std::string& path);

// Labeled image sets; optional hidden mode labels ride along for the toy
// harness's ground truth.
void save_image_set(const std::string& path, const std::vector<ImageSample>& images,
                    std::size_t height, std::size_t width,
                    const std::vector<std::size_t>& modes = {});

struct LoadedImageSet {
  std::vector<ImageSample> images;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::size_t> modes;
};

LoadedImageSet load_image_set(const std::string& path);

// FNV-1a content hash of a memory buffer / file, hex-encoded.
std::string content_hash(const void* data, std::size_t size);
std::string file_hash(const std::string& path);

}  // namespace dpd
