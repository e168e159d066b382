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

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace oopdmp {

/// Stand-in for +infinity in value slices (cost units).
inline constexpr double kInfinity = 1e12;

inline bool is_sentinel(double v) noexcept { return v >= kInfinity; }

/// Clamp a value to the sentinel ceiling.
inline double clamp_sentinel(double v) noexcept { return v < kInfinity ? v : kInfinity; }

/// One scalar per gridpoint, row-major with row j at y = j*h.
using Slice = std::vector<double>;

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Rejected input: malformed scenario, invalid arguments, broken invariants.
class InputError : public Error {
public:
    explicit InputError(const std::string& what) : Error(what) {}
    InputError(const std::string& what, std::vector<std::string> details)
        : Error(what), details_(std::move(details)) {}

    const std::vector<std::string>& details() const noexcept { return details_; }

private:
    std::vector<std::string> details_;
};

/// Floating-point breakdown (underflow of survival mass, non-finite values).
class NumericalError : public Error {
public:
    using Error::Error;
};

/// An iterative solve hit its iteration cap.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, std::vector<double> history)
        : Error(what), history_(std::move(history)) {}

    const std::vector<double>& residual_history() const noexcept { return history_; }

private:
    std::vector<double> history_;
};

/// A traced trajectory left the solved horizon without reaching the target.
class DivergenceError : public Error {
public:
    using Error::Error;
};

/// Gradient too small to define a direction.
class DegenerateGradient : public Error {
public:
    using Error::Error;
};

}  // namespace oopdmp
