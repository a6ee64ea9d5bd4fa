#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "onepass/data/dataset.hpp"

namespace onepass::data {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> cells(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::optional<double> number(std::string_view s) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path, const std::string& target, Task task) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open '{}'", path.string()));

  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);)
    if (!trim(line).empty()) lines.push_back(std::move(line));
  if (lines.empty()) throw DataError(fmt::format("'{}' is empty", path.string()));

  std::vector<std::string> header;
  std::size_t first = 0;
  {
    const auto row = cells(lines.front());
    bool numeric = true;
    for (auto c : row) numeric = numeric && number(c).has_value();
    if (!numeric) {
      for (auto c : row) header.emplace_back(c);
      first = 1;
    }
  }
  if (first == lines.size()) throw DataError(fmt::format("'{}' has a header but no data rows", path.string()));

  const std::size_t width = cells(lines[first]).size();
  if (width < 2) throw DataError(fmt::format("'{}' needs at least one feature and one target column", path.string()));
  if (!header.empty() && header.size() != width) {
    throw DataError(fmt::format("'{}': header has {} columns, data has {}", path.string(), header.size(), width));
  }
  std::size_t target_col = width - 1;
  if (!target.empty()) {
    const auto it = std::find(header.begin(), header.end(), target);
    if (it == header.end()) throw DataError(fmt::format("'{}': no column named '{}'", path.string(), target));
    target_col = static_cast<std::size_t>(it - header.begin());
  }

  const std::size_t n = lines.size() - first;
  Dataset d;
  d.task = task;
  d.X = ad::Tensor(ad::Shape{n, width - 1});
  for (std::size_t c = 0; c < width; ++c) {
    if (c == target_col) continue;
    d.feature_names.push_back(header.empty() ? fmt::format("x{}", d.feature_names.size()) : header[c]);
  }
  d.target_name = header.empty() ? "y" : header[target_col];

  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t file_row = first + r + 1;
    const auto row = cells(lines[first + r]);
    if (row.size() != width) {
      throw DataError(fmt::format("'{}' row {}: expected {} columns, found {}", path.string(), file_row, width,
                                  row.size()));
    }
    std::size_t f = 0;
    for (std::size_t c = 0; c < width; ++c) {
      const auto v = number(row[c]);
      if (!v || !std::isfinite(*v)) {
        throw DataError(fmt::format("'{}' row {}, column {}: '{}' is not a finite number", path.string(), file_row,
                                    c + 1, row[c]));
      }
      if (c != target_col) {
        d.X.at(r, f++) = *v;
      } else if (task == Task::regression) {
        d.y.push_back(*v);
      } else {
        if (*v != std::floor(*v) || *v < 0) {
          throw DataError(fmt::format("'{}' row {}, column {}: class label '{}' is not a non-negative integer",
                                      path.string(), file_row, c + 1, row[c]));
        }
        d.labels.push_back(static_cast<int>(*v));
      }
    }
  }
  return d;
}

void write_csv(const Dataset& d, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError(fmt::format("cannot write '{}'", path.string()));
  out << fmt::format("{},{}\n", fmt::join(d.feature_names, ","), d.target_name);
  for (std::size_t r = 0; r < d.rows(); ++r) {
    for (std::size_t c = 0; c < d.features(); ++c) out << fmt::format("{},", d.X.at(r, c));
    if (d.task == Task::regression) {
      out << fmt::format("{}\n", d.y[r]);
    } else {
      out << d.labels[r] << '\n';
    }
  }
  if (!out) throw DataError(fmt::format("failed writing '{}'", path.string()));
}

}  // namespace onepass::data
