#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "onepass/model/mlp.hpp"

namespace onepass::data {

enum class Task { regression, classification };

/// Per-column affine statistics captured from the training portion.
struct Normalisation {
  std::vector<double> feature_mean;
  std::vector<double> feature_std;  ///< 1 for (near-)constant columns
  double target_mean = 0.0;
  double target_std = 1.0;
  bool fitted = false;
};

struct Dataset {
  ad::Tensor X;                 ///< (N, d)
  std::vector<double> y;        ///< regression targets
  std::vector<int> labels;      ///< class indices
  std::vector<std::string> feature_names;
  std::string target_name;
  Task task = Task::regression;
  Normalisation stats;

  std::size_t rows() const { return X.rows(); }
  std::size_t features() const { return X.cols(); }
  std::size_t classes() const;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Reads a comma-separated file. The first row is a header when any of its
/// cells is not a number. `target` names the target column; empty means last.
/// Classification targets must be integers.
Dataset load_csv(const std::filesystem::path& path, const std::string& target = {}, Task task = Task::regression);

void write_csv(const Dataset& d, const std::filesystem::path& path);

struct Fractions {
  double train = 0.6;
  double val = 0.2;
  double test = 0.2;
};

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
  std::uint64_t seed = 0;
};

/// Seeded permutation cut into floor(f N) sized val and test portions; the
/// remainder goes to train.
Split split(std::size_t n, const Fractions& fractions, std::uint64_t seed);

/// Standardises every row with statistics from split.train (population std).
/// Regression targets are standardised the same way.
Dataset standardise(const Dataset& d, const Split& s);

/// Undoes target standardisation.
double denormalise_target(const Normalisation& n, double value);
/// Squared-error scale factor between standardised and raw targets.
inline double mse_scale(const Normalisation& n) { return n.target_std * n.target_std; }

/// Index slices covering `portion` in a fresh seeded order for each epoch.
/// The last slice may be short.
std::vector<std::vector<std::size_t>> batches(const std::vector<std::size_t>& portion, std::size_t batch_size,
                                              std::uint64_t seed, std::uint64_t epoch);

/// Rows of a dataset as a model batch.
model::Batch make_batch(const Dataset& d, const std::vector<std::size_t>& rows);

/// IDX image file (magic 0x00000803) as an (N, rows*cols) tensor scaled to [0, 1].
ad::Tensor read_idx_images(const std::filesystem::path& path);
/// IDX label file (magic 0x00000801).
std::vector<int> read_idx_labels(const std::filesystem::path& path);
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels);

/// Building-energy style regression set: the 768-row factorial design of
/// 12 building shapes x 4 orientations x 16 glazing configurations, 8
/// features, with a smooth synthetic heating-load target plus seeded noise.
Dataset energy_like(std::uint64_t seed = 2012);

}  // namespace onepass::data
