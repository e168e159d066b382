/*
 Copyright 2026 The oopdmp Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "oopdmp/core.hpp"
#include "oopdmp/grid.hpp"

namespace oopdmp {

using Point2 = std::array<double, 2>;

/// Prefactor applied to a Gaussian term's amplitude.
enum class GaussianNorm {
    none,         // A
    two_pi_sigma, // A / (2 pi sigma)
    two_pi_sqrt_det  // A / (2 pi sqrt(det Sigma))
};

/// A * norm * exp(-|x-c|^2 / (2 sigma^2)) or, with a covariance,
/// A * norm * exp(-(x-c)^T Sigma^{-1} (x-c) / 2).
struct GaussianTerm {
    double amplitude = 1.0;
    Point2 center{0.0, 0.0};
    std::optional<double> sigma;
    std::optional<std::array<double, 3>> covariance;  // xx, xy, yy
    GaussianNorm norm = GaussianNorm::none;

    bool operator==(const GaussianTerm&) const = default;
};

enum class FieldKind { constant, gaussian_sum, raster, breakdown_arrival };

/// Scalar field description, evaluated onto a grid on demand.
struct FieldSpec {
    FieldKind kind = FieldKind::constant;
    double value = 0.0;  // constant value or gaussian_sum base
    std::vector<GaussianTerm> terms;
    std::string path;    // raster file (CSV or 16-bit grayscale PNG)
    double scale = 1.0;  // raster multiplier

    static FieldSpec constant(double c) {
        FieldSpec f;
        f.value = c;
        return f;
    }

    bool operator==(const FieldSpec&) const = default;
};

enum class ShapeKind { rectangle, circle, raster_mask };

struct ShapeSpec {
    ShapeKind kind = ShapeKind::rectangle;
    Point2 lower{0.0, 0.0};  // rectangle corner or circle center
    Point2 upper{0.0, 0.0};  // rectangle opposite corner
    double radius = 0.0;
    std::string path;        // raster mask, points with value >= threshold are inside
    double threshold = 0.5;

    bool operator==(const ShapeSpec&) const = default;
};

/// Row-major raster, row 0 at y = 0.
struct Raster {
    int rows = 0;
    int cols = 0;
    std::vector<double> values;

    double at(int r, int c) const { return values[static_cast<std::size_t>(r) * cols + c]; }
};

/// Reads a CSV or 16-bit grayscale PNG raster (chosen by extension).
Raster load_raster(const std::string& path);
Raster load_csv_raster(const std::string& path);
Raster load_png_raster(const std::string& path);

/// Bilinear resampling with the raster spanning the unit square.
double sample_raster(const Raster& raster, double x, double y);

/// Evaluates a Gaussian term at a point (exact formula, no truncation).
double evaluate_gaussian(const GaussianTerm& term, double x, double y);

/// Evaluates the field at every gridpoint. breakdown_arrival fields cannot be
/// evaluated here (they need the eikonal solver) and are rejected.
Slice rasterize_field(const FieldSpec& spec, const Grid2D& grid);

/// True where the point satisfies the shape predicate (closed sets).
bool shape_contains(const ShapeSpec& shape, const Raster* mask, double x, double y);

/// Union of shapes sampled at gridpoints.
std::vector<std::uint8_t> rasterize_shapes(const std::vector<ShapeSpec>& shapes, int subdivisions);

}  // namespace oopdmp
