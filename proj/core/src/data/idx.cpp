#include <array>
#include <fstream>

#include <fmt/format.h>

#include "onepass/data/dataset.hpp"

namespace onepass::data {
namespace {

std::uint32_t read_be32(std::istream& in, const std::filesystem::path& path) {
  std::array<unsigned char, 4> b{};
  if (!in.read(reinterpret_cast<char*>(b.data()), 4)) throw DataError(fmt::format("'{}': truncated header", path.string()));
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | b[3];
}

std::vector<unsigned char> read_body(std::istream& in, std::size_t n, const std::filesystem::path& path) {
  std::vector<unsigned char> body(n);
  if (!in.read(reinterpret_cast<char*>(body.data()), static_cast<std::streamsize>(n))) {
    throw DataError(fmt::format("'{}': expected {} payload bytes", path.string(), n));
  }
  return body;
}

}  // namespace

ad::Tensor read_idx_images(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot open '{}'", path.string()));
  if (const auto magic = read_be32(in, path); magic != 0x00000803) {
    throw DataError(fmt::format("'{}': bad image magic {:#010x}", path.string(), magic));
  }
  const std::size_t n = read_be32(in, path);
  const std::size_t rows = read_be32(in, path);
  const std::size_t cols = read_be32(in, path);
  const auto body = read_body(in, n * rows * cols, path);
  ad::Tensor X(ad::Shape{n, rows * cols});
  for (std::size_t k = 0; k < body.size(); ++k) X[k] = body[k] / 255.0;
  return X;
}

std::vector<int> read_idx_labels(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot open '{}'", path.string()));
  if (const auto magic = read_be32(in, path); magic != 0x00000801) {
    throw DataError(fmt::format("'{}': bad label magic {:#010x}", path.string(), magic));
  }
  const std::size_t n = read_be32(in, path);
  const auto body = read_body(in, n, path);
  return {body.begin(), body.end()};
}

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
  Dataset d;
  d.task = Task::classification;
  d.X = read_idx_images(images);
  d.labels = read_idx_labels(labels);
  if (d.labels.size() != d.rows()) {
    throw DataError(fmt::format("{} images but {} labels", d.rows(), d.labels.size()));
  }
  for (std::size_t c = 0; c < d.features(); ++c) d.feature_names.push_back(fmt::format("p{}", c));
  d.target_name = "label";
  return d;
}

}  // namespace onepass::data
