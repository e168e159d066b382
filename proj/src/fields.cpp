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

#include "oopdmp/fields.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <numbers>
#include <sstream>

namespace oopdmp {

namespace {

constexpr double kShapeSlack = 1e-12;

bool ends_with(const std::string& s, const std::string& suffix) {
    if (s.size() < suffix.size()) return false;
    return std::equal(suffix.rbegin(), suffix.rend(), s.rbegin(), [](char a, char b) {
        return std::tolower(static_cast<unsigned char>(a)) == b;
    });
}

void check_raster(const Raster& r, const std::string& path) {
    if (r.rows == 0 || r.cols == 0) throw InputError("raster " + path + " has zero size");
    for (double v : r.values) {
        if (!std::isfinite(v)) throw InputError("raster " + path + " contains non-finite values");
    }
}

}  // namespace

Raster load_csv_raster(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open raster " + path);
    Raster r;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::stringstream ss(line);
        std::string cell;
        int cols = 0;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t used = 0;
                const double v = std::stod(cell, &used);
                if (cell.find_first_not_of(" \t\r", used) != std::string::npos) throw 0;
                r.values.push_back(v);
            } catch (...) {
                throw InputError("raster " + path + " line " + std::to_string(line_no) +
                                 ": cannot parse '" + cell + "'");
            }
            ++cols;
        }
        if (r.rows == 0) {
            r.cols = cols;
        } else if (cols != r.cols) {
            throw InputError("raster " + path + " line " + std::to_string(line_no) +
                             ": expected " + std::to_string(r.cols) + " columns");
        }
        ++r.rows;
    }
    check_raster(r, path);
    return r;
}

Raster load_png_raster(const std::string& path) {
    std::unique_ptr<FILE, int (*)(FILE*)> file(std::fopen(path.c_str(), "rb"), &std::fclose);
    if (!file) throw InputError("cannot open raster " + path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw InputError("cannot allocate PNG reader for " + path);
    }
    Raster r;
    std::vector<png_byte> buffer;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw InputError("malformed PNG raster " + path);
    }
    png_init_io(png, file.get());
    png_read_info(png, info);
    const int depth = png_get_bit_depth(png, info);
    const int color = png_get_color_type(png, info);
    if (color != PNG_COLOR_TYPE_GRAY || (depth != 16 && depth != 8)) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw InputError("raster " + path + " must be 8- or 16-bit grayscale");
    }
    r.cols = static_cast<int>(png_get_image_width(png, info));
    r.rows = static_cast<int>(png_get_image_height(png, info));
    const std::size_t stride = png_get_rowbytes(png, info);
    buffer.resize(stride * static_cast<std::size_t>(r.rows));
    std::vector<png_bytep> rows(static_cast<std::size_t>(r.rows));
    for (int y = 0; y < r.rows; ++y) rows[y] = buffer.data() + stride * y;
    png_read_image(png, rows.data());
    png_destroy_read_struct(&png, &info, nullptr);

    // Image rows run top to bottom; raster row 0 is y = 0.
    r.values.resize(static_cast<std::size_t>(r.rows) * r.cols);
    for (int y = 0; y < r.rows; ++y) {
        const png_bytep row = rows[static_cast<std::size_t>(r.rows - 1 - y)];
        for (int x = 0; x < r.cols; ++x) {
            const double v = depth == 16 ? (row[2 * x] << 8 | row[2 * x + 1]) : row[x];
            r.values[static_cast<std::size_t>(y) * r.cols + x] = v;
        }
    }
    check_raster(r, path);
    return r;
}

Raster load_raster(const std::string& path) {
    if (ends_with(path, ".png")) return load_png_raster(path);
    return load_csv_raster(path);
}

double sample_raster(const Raster& raster, double x, double y) {
    const double gx = std::clamp(x, 0.0, 1.0) * (raster.cols - 1);
    const double gy = std::clamp(y, 0.0, 1.0) * (raster.rows - 1);
    const int c0 = std::min(static_cast<int>(gx), std::max(raster.cols - 2, 0));
    const int r0 = std::min(static_cast<int>(gy), std::max(raster.rows - 2, 0));
    const int c1 = std::min(c0 + 1, raster.cols - 1);
    const int r1 = std::min(r0 + 1, raster.rows - 1);
    const double u = gx - c0;
    const double w = gy - r0;
    const double v00 = raster.at(r0, c0);
    const double v10 = raster.at(r0, c1);
    const double v01 = raster.at(r1, c0);
    const double v11 = raster.at(r1, c1);
    // Exact for constant rasters: every weight multiplies the same value.
    if (v00 == v10 && v00 == v01 && v00 == v11) return v00;
    return (1 - u) * (1 - w) * v00 + u * (1 - w) * v10 + (1 - u) * w * v01 + u * w * v11;
}

double evaluate_gaussian(const GaussianTerm& term, double x, double y) {
    const double dx = x - term.center[0];
    const double dy = y - term.center[1];
    double exponent = 0.0;
    double prefactor = term.amplitude;
    if (term.covariance) {
        const auto [sxx, sxy, syy] = *term.covariance;
        const double det = sxx * syy - sxy * sxy;
        exponent = -0.5 * (syy * dx * dx - 2.0 * sxy * dx * dy + sxx * dy * dy) / det;
        if (term.norm == GaussianNorm::two_pi_sqrt_det) {
            prefactor /= 2.0 * std::numbers::pi * std::sqrt(det);
        }
    } else {
        const double s = term.sigma.value_or(1.0);
        exponent = -(dx * dx + dy * dy) / (2.0 * s * s);
        if (term.norm == GaussianNorm::two_pi_sigma) prefactor /= 2.0 * std::numbers::pi * s;
        if (term.norm == GaussianNorm::two_pi_sqrt_det) prefactor /= 2.0 * std::numbers::pi * s * s;
    }
    return prefactor * std::exp(exponent);
}

Slice rasterize_field(const FieldSpec& spec, const Grid2D& grid) {
    const int side = grid.side();
    Slice out(grid.size(), spec.value);
    switch (spec.kind) {
        case FieldKind::constant:
            break;
        case FieldKind::gaussian_sum:
            for (int j = 0; j < side; ++j) {
                for (int i = 0; i < side; ++i) {
                    double v = spec.value;
                    for (const auto& term : spec.terms) {
                        v += evaluate_gaussian(term, grid.coord(i), grid.coord(j));
                    }
                    out[grid.index(i, j)] = v;
                }
            }
            break;
        case FieldKind::raster: {
            const Raster raster = load_raster(spec.path);
            for (int j = 0; j < side; ++j) {
                for (int i = 0; i < side; ++i) {
                    out[grid.index(i, j)] =
                        spec.scale * sample_raster(raster, grid.coord(i), grid.coord(j));
                }
            }
            break;
        }
        case FieldKind::breakdown_arrival:
            throw InputError("breakdown_arrival fields are derived from the broken speed field");
    }
    return out;
}

bool shape_contains(const ShapeSpec& shape, const Raster* mask, double x, double y) {
    switch (shape.kind) {
        case ShapeKind::rectangle:
            return x >= shape.lower[0] - kShapeSlack && x <= shape.upper[0] + kShapeSlack &&
                   y >= shape.lower[1] - kShapeSlack && y <= shape.upper[1] + kShapeSlack;
        case ShapeKind::circle: {
            const double dx = x - shape.lower[0];
            const double dy = y - shape.lower[1];
            return std::sqrt(dx * dx + dy * dy) <= shape.radius + kShapeSlack;
        }
        case ShapeKind::raster_mask:
            if (mask == nullptr) throw InputError("raster mask shape needs its raster");
            return sample_raster(*mask, x, y) >= shape.threshold;
    }
    return false;
}

std::vector<std::uint8_t> rasterize_shapes(const std::vector<ShapeSpec>& shapes,
                                           int subdivisions) {
    const Grid2D grid(subdivisions);
    std::vector<std::uint8_t> mask(grid.size(), 0);
    for (const auto& shape : shapes) {
        std::optional<Raster> raster;
        if (shape.kind == ShapeKind::raster_mask) raster = load_raster(shape.path);
        for (int j = 0; j < grid.side(); ++j) {
            for (int i = 0; i < grid.side(); ++i) {
                if (shape_contains(shape, raster ? &*raster : nullptr, grid.coord(i),
                                   grid.coord(j))) {
                    mask[grid.index(i, j)] = 1;
                }
            }
        }
    }
    return mask;
}

}  // namespace oopdmp
