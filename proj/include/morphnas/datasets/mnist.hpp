#pragma once

#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "morphnas/core/error.hpp"
#include "morphnas/datasets/dataset.hpp"
#include "morphnas/core/io.hpp"

namespace morphnas::data {

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

namespace detail {
inline std::uint32_t read_be32(std::span<const std::uint8_t> b, std::size_t at) {
  return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) |
         (std::uint32_t{b[at + 2]} << 8) | std::uint32_t{b[at + 3]};
}
}  // namespace detail

/// IDX3 image file -> n x (rows*cols) matrix with pixels scaled to [0, 1].
template <class T>
Matrix<T> parse_idx_images(std::span<const std::uint8_t> bytes, const std::string& name = "images") {
  if (bytes.size() < 16) throw FormatError(name + ": truncated IDX header");
  const std::uint32_t magic = detail::read_be32(bytes, 0);
  if (magic != kIdxImageMagic) {
    throw FormatError(name + ": bad IDX image magic 0x" + [&] {
      char buf[16];
      std::snprintf(buf, sizeof buf, "%08x", magic);
      return std::string(buf);
    }());
  }
  const std::size_t n = detail::read_be32(bytes, 4);
  const std::size_t rows = detail::read_be32(bytes, 8);
  const std::size_t cols = detail::read_be32(bytes, 12);
  const std::size_t pixels = rows * cols;
  const auto expected = 16 + static_cast<unsigned __int128>(n) * pixels;
  if (expected != bytes.size()) {
    throw FormatError(name + ": header declares " + std::to_string(n) + " images of " + std::to_string(rows) +
                      "x" + std::to_string(cols) + " but file has " + std::to_string(bytes.size()) + " bytes");
  }
  Matrix<T> m(n, pixels);
  const std::uint8_t* p = bytes.data() + 16;
  for (std::size_t i = 0; i < n * pixels; ++i) m.values()[i] = static_cast<T>(p[i]) / static_cast<T>(255);
  return m;
}

inline std::vector<std::uint32_t> parse_idx_labels(std::span<const std::uint8_t> bytes,
                                                   const std::string& name = "labels") {
  if (bytes.size() < 8) throw FormatError(name + ": truncated IDX header");
  if (detail::read_be32(bytes, 0) != kIdxLabelMagic) throw FormatError(name + ": bad IDX label magic");
  const std::size_t n = detail::read_be32(bytes, 4);
  if (bytes.size() != 8 + n) {
    throw FormatError(name + ": expected " + std::to_string(8 + n) + " bytes, found " +
                      std::to_string(bytes.size()));
  }
  return {bytes.begin() + 8, bytes.end()};
}

template <class T>
Dataset<T> load_idx_pair(const std::filesystem::path& images, const std::filesystem::path& labels,
                         std::string split) {
  Dataset<T> d;
  d.task = Task::classification;
  d.num_classes = 10;
  d.split = std::move(split);
  d.inputs = parse_idx_images<T>(read_file_bytes(images), images.filename().string());
  d.labels = parse_idx_labels(read_file_bytes(labels), labels.filename().string());
  if (d.labels.size() != d.inputs.rows()) {
    throw FormatError("MNIST " + d.split + ": " + std::to_string(d.inputs.rows()) + " images but " +
                      std::to_string(d.labels.size()) + " labels");
  }
  for (const auto l : d.labels)
    if (l >= d.num_classes) throw FormatError("MNIST " + d.split + ": label " + std::to_string(l) + " out of range");
  return d;
}

template <class T>
struct MnistData {
  Dataset<T> train;
  Dataset<T> test;
};

/// Reads the four standard IDX files from `dir`.
template <class T>
MnistData<T> load_mnist(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw Error("MNIST directory not found: " + dir.string());
  return {load_idx_pair<T>(dir / "train-images-idx3-ubyte", dir / "train-labels-idx1-ubyte", "train"),
          load_idx_pair<T>(dir / "t10k-images-idx3-ubyte", dir / "t10k-labels-idx1-ubyte", "test")};
}

}  // namespace morphnas::data
