// SPDX-License-Identifier: Apache-2.0
//
// Copyright (C) 2026 The momploc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#ifndef MOMPLOC_ARRAYS_HPP
#define MOMPLOC_ARRAYS_HPP

#include "error.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <string>

namespace momploc {

using cplx = std::complex<double>;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
using RVector = Eigen::VectorXd;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kSpeedOfLight = 299792458.0;

// Unit direction vector given by its direction cosines.
struct DirectionVector {
    double x = 0.0;
    double y = 0.0;
    double z = 1.0;

    static DirectionVector from(const Vec3& v)
    {
        const double n = v.norm();
        require(n > 0.0 && std::isfinite(n), ErrorKind::InconsistentDirection,
                "cannot normalize a zero or non-finite vector");
        return {v.x() / n, v.y() / n, v.z() / n};
    }

    Vec3 vec() const { return {x, y, z}; }
    double norm() const { return std::sqrt(x * x + y * y + z * z); }
    DirectionVector operator-() const { return {-x, -y, -z}; }
};

struct UpaGeometry {
    int n_x = 1;
    int n_y = 1;

    int size() const { return n_x * n_y; }
    bool operator==(const UpaGeometry&) const = default;
};

// Orientation of an array. Columns of `axes` are the local x, y and z axes
// expressed in global coordinates; the array lies in its local xy-plane.
struct ArrayFrame {
    Mat3 axes = Mat3::Identity();

    static ArrayFrame identity() { return {}; }

    // Builds a right-handed frame from the local x and y axes.
    static ArrayFrame from_axes(const Vec3& x_axis, const Vec3& y_axis)
    {
        require(std::abs(x_axis.norm() - 1.0) < 1e-9 && std::abs(y_axis.norm() - 1.0) < 1e-9 &&
                    std::abs(x_axis.dot(y_axis)) < 1e-9,
                ErrorKind::ConfigError, "array axes must be orthonormal");
        ArrayFrame f;
        f.axes.col(0) = x_axis;
        f.axes.col(1) = y_axis;
        f.axes.col(2) = x_axis.cross(y_axis);
        return f;
    }

    Vec3 to_local(const Vec3& global) const { return axes.transpose() * global; }
    Vec3 to_global(const Vec3& local) const { return axes * local; }
    DirectionVector to_local(const DirectionVector& d) const { return DirectionVector::from(to_local(d.vec())); }
    DirectionVector to_global(const DirectionVector& d) const { return DirectionVector::from(to_global(d.vec())); }
};

// Pulse shaping response sampled at the receiver. The default is the ideal
// sinc with unit peak and no truncation window.
struct PulseShape {
    std::function<double(double)> response;
    double sampling_period = 1.0;
    int taps = 1;

    double operator()(double t) const { return response(t); }

    static PulseShape sinc(double sampling_period, int taps)
    {
        require(sampling_period > 0.0, ErrorKind::ConfigError, "sampling period must be positive");
        require(taps >= 1, ErrorKind::ConfigError, "tap count must be positive");
        auto fn = [ts = sampling_period](double t) {
            const double u = t / ts;
            const double k = std::round(u);
            // integer sample offsets are snapped so on-grid delays give exact unit vectors
            if (std::abs(u - k) < 1e-12)
                return k == 0.0 ? 1.0 : 0.0;
            return std::sin(kPi * u) / (kPi * u);
        };
        return {fn, sampling_period, taps};
    }
};

// Response of a half-wavelength uniform linear axis: [a(c)]_n = exp(-j pi n c).
inline CVector axis_response(double cosine, int elements)
{
    CVector a(elements);
    for (int n = 0; n < elements; ++n)
        a[n] = std::polar(1.0, -kPi * n * cosine);
    return a;
}

// a(theta) = a_x(theta_x) kron a_y(theta_y); element (i, k) sits at index i * n_y + k.
inline CVector upa_response(const DirectionVector& direction, const UpaGeometry& geom)
{
    require(geom.n_x >= 1 && geom.n_y >= 1, ErrorKind::ConfigError, "array dimensions must be positive");
    CVector a(geom.size());
    for (int i = 0; i < geom.n_x; ++i)
        for (int k = 0; k < geom.n_y; ++k)
            a[i * geom.n_y + k] = std::polar(1.0, -kPi * (i * direction.x + k * direction.y));
    return a;
}

// Entry d is p(d * Ts - rel_delay), where rel_delay is tau - t0.
inline RVector pulse_delay_vector(double rel_delay, const PulseShape& pulse)
{
    require(pulse.taps >= 1, ErrorKind::ConfigError, "tap count must be positive");
    RVector v(pulse.taps);
    for (int d = 0; d < pulse.taps; ++d)
        v[d] = pulse(d * pulse.sampling_period - rel_delay);
    return v;
}

// Completes a direction from its two in-plane cosines. The z component is
// only known up to sign, so the caller provides it.
inline DirectionVector resolve_direction_z(double cos_x, double cos_y, int sign)
{
    const double planar = cos_x * cos_x + cos_y * cos_y;
    require(planar <= 1.0 + 1e-9, ErrorKind::InconsistentDirection,
            "in-plane cosines exceed unit norm (" + std::to_string(planar) + ")");
    const double z = std::sqrt(std::max(0.0, 1.0 - planar));
    return {cos_x, cos_y, sign < 0 ? -z : z};
}

} // namespace momploc

#endif
