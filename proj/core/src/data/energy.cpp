#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include "onepass/data/dataset.hpp"

namespace onepass::data {
namespace {

// The twelve building shapes of the classic building-energy design.
constexpr std::array<double, 12> kCompactness{0.98, 0.90, 0.86, 0.82, 0.79, 0.76, 0.74, 0.71, 0.69, 0.66, 0.64, 0.62};
constexpr std::array<double, 12> kSurface{514.5, 563.5, 588, 612.5, 637, 661.5, 686, 710.5, 735, 759.5, 784, 808.5};
constexpr std::array<double, 12> kWall{294, 318.5, 294, 318.5, 343, 416.5, 245, 269.5, 294, 318.5, 343, 367.5};
constexpr std::array<double, 12> kRoof{110.25, 122.5, 147, 147, 147, 122.5, 220.5, 220.5, 220.5, 220.5, 220.5, 220.5};
constexpr std::array<double, 12> kHeight{7, 7, 7, 7, 7, 7, 3.5, 3.5, 3.5, 3.5, 3.5, 3.5};

double heating_load(double rc, double wall, double height, double orientation, double glazing, double distribution) {
  const double tall = (height - 3.5) / 3.5;
  double y = -4.5 + 3.1 * height;
  y += 0.052 * (wall - 245.0) * (height / 7.0);
  y += 22.0 * glazing * (0.8 + 0.4 * rc);
  y += 4.0 * std::sin(3.0 * rc) * tall;
  y += 0.6 * glazing * std::cos(std::numbers::pi * distribution / 5.0);
  y += 0.15 * std::cos(std::numbers::pi * orientation / 2.0);
  return y;
}

}  // namespace

Dataset energy_like(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 0.4);
  Dataset d;
  d.task = Task::regression;
  d.feature_names = {"relative_compactness", "surface_area", "wall_area", "roof_area",
                     "overall_height",       "orientation",  "glazing_area", "glazing_distribution"};
  d.target_name = "heating_load";
  d.X = ad::Tensor(ad::Shape{768, 8});
  std::size_t r = 0;
  auto emit = [&](std::size_t shape, double orientation, double glazing, double distribution) {
    const double row[8] = {kCompactness[shape], kSurface[shape], kWall[shape], kRoof[shape], kHeight[shape],
                           orientation,         glazing,         distribution};
    for (std::size_t c = 0; c < 8; ++c) d.X.at(r, c) = row[c];
    d.y.push_back(heating_load(kCompactness[shape], kWall[shape], kHeight[shape], orientation, glazing, distribution) +
                  noise(rng));
    ++r;
  };
  // No glazing first, then three glazing areas x five distributions.
  for (std::size_t shape = 0; shape < 12; ++shape)
    for (int orientation = 2; orientation <= 5; ++orientation) emit(shape, orientation, 0.0, 0.0);
  for (double glazing : {0.10, 0.25, 0.40})
    for (int distribution = 1; distribution <= 5; ++distribution)
      for (std::size_t shape = 0; shape < 12; ++shape)
        for (int orientation = 2; orientation <= 5; ++orientation) emit(shape, orientation, glazing, distribution);
  return d;
}

}  // namespace onepass::data
