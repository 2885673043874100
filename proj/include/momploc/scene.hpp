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

#ifndef MOMPLOC_SCENE_HPP
#define MOMPLOC_SCENE_HPP

#include "arrays.hpp"

#include <algorithm>
#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace momploc {

enum class PathLabel { LoS, Floor, Ceiling, WallXMin, WallXMax, WallYMin, WallYMax };

inline std::string_view to_string(PathLabel label)
{
    switch (label) {
    case PathLabel::LoS: return "los";
    case PathLabel::Floor: return "floor";
    case PathLabel::Ceiling: return "ceiling";
    case PathLabel::WallXMin: return "wall-xmin";
    case PathLabel::WallXMax: return "wall-xmax";
    case PathLabel::WallYMin: return "wall-ymin";
    case PathLabel::WallYMax: return "wall-ymax";
    }
    return "unknown";
}

inline std::optional<PathLabel> path_label_from_string(std::string_view s)
{
    for (auto l : {PathLabel::LoS, PathLabel::Floor, PathLabel::Ceiling, PathLabel::WallXMin,
                   PathLabel::WallXMax, PathLabel::WallYMin, PathLabel::WallYMax})
        if (to_string(l) == s)
            return l;
    return std::nullopt;
}

struct Room {
    Vec3 min{-30.0, -120.0, 0.0};
    Vec3 max{30.0, 0.0, 10.0};

    bool contains(const Vec3& p, double tol = 1e-9) const
    {
        return (p.array() >= min.array() - tol).all() && (p.array() <= max.array() + tol).all();
    }
};

// Axis-aligned reflector: the plane {p : p[axis] == coordinate}.
struct Surface {
    PathLabel label = PathLabel::Floor;
    int axis = 2;
    double coordinate = 0.0;
    cplx reflection{-0.7, 0.0};
    bool enabled = true;
};

inline std::vector<Surface> box_surfaces(const Room& room, cplx reflection = std::polar(0.7, kPi))
{
    return {
        {PathLabel::Floor, 2, room.min.z(), reflection, true},
        {PathLabel::Ceiling, 2, room.max.z(), reflection, true},
        {PathLabel::WallXMin, 0, room.min.x(), reflection, true},
        {PathLabel::WallXMax, 0, room.max.x(), reflection, true},
        {PathLabel::WallYMin, 1, room.min.y(), reflection, true},
        {PathLabel::WallYMax, 1, room.max.y(), reflection, true},
    };
}

// A transmitting, reflecting or receiving array. `facing` is the sign of the
// local z component of the half-space the array serves (0 when it radiates
// to both sides); it doubles as the z-sign prior for its departure directions.
struct Node {
    Vec3 position = Vec3::Zero();
    UpaGeometry array{1, 1};
    ArrayFrame frame;
    int facing = 0;

    CVector response(const DirectionVector& global_direction) const
    {
        return upa_response(frame.to_local(global_direction), array);
    }

    int z_sign_prior() const { return facing == 0 ? -1 : facing; }
};

struct Blockage {
    bool bs_ms = false;
    bool bs_ris = false;
    bool ris_ms = false;
};

struct Scene {
    Room room;
    Node bs;
    Node ris;
    Node ms;
    std::vector<Surface> surfaces = box_surfaces(Room{});
    Blockage blockage;
    double carrier_hz = 60e9;
    double speed_of_light = kSpeedOfLight;

    double wavelength() const { return speed_of_light / carrier_hz; }

    void validate() const
    {
        require((room.max.array() > room.min.array()).all(), ErrorKind::ConfigError, "room extents are empty");
        require(room.contains(bs.position), ErrorKind::ConfigError, "BS outside room");
        require(room.contains(ris.position), ErrorKind::ConfigError, "RIS outside room");
        require(room.contains(ms.position), ErrorKind::ConfigError, "MS outside room");
        require(carrier_hz > 0.0 && speed_of_light > 0.0, ErrorKind::ConfigError, "carrier and c must be positive");
        for (const auto& s : surfaces)
            require(s.axis >= 0 && s.axis < 3, ErrorKind::ConfigError, "surface axis must be 0, 1 or 2");
    }

    // 60 x 120 x 10 m hall with the origin in the middle of the bottom of the
    // y = 0 wall; ceiling BS facing down, RIS mounted on the y = 0 wall.
    static Scene indoor_factory()
    {
        Scene s;
        s.room = Room{};
        s.surfaces = box_surfaces(s.room);
        s.bs.position = {10.0, -10.0, 9.5};
        s.bs.array = {8, 8};
        s.bs.facing = -1;
        s.ris.position = {0.0, 0.0, 5.5};
        s.ris.array = {16, 16};
        // local z points into the wall, so the room side is local -z
        s.ris.frame = ArrayFrame::from_axes({1.0, 0.0, 0.0}, {0.0, 0.0, -1.0});
        s.ris.facing = -1;
        s.ms.position = {-5.0, -10.0, 1.5};
        s.ms.array = {4, 4};
        s.ms.facing = 0;
        return s;
    }
};

struct PropagationPath {
    cplx gain{0.0, 0.0};
    DirectionVector departure;
    DirectionVector arrival;
    double delay = 0.0;
    PathLabel label = PathLabel::LoS;
};

// LoS plus one first-order image-source reflection per enabled surface.
inline std::vector<PropagationPath> trace_paths(const Scene& scene, const Vec3& tx, const Vec3& rx,
                                                bool los_blocked = false)
{
    require((tx - rx).norm() > 0.0, ErrorKind::DegenerateGeometry, "transmitter and receiver coincide");
    const double lambda = scene.wavelength();
    const double c = scene.speed_of_light;
    auto make = [&](double length, const Vec3& dep, const Vec3& arr, cplx reflection, PathLabel label) {
        const double tau = length / c;
        PropagationPath p;
        p.delay = tau;
        p.gain = reflection * (lambda / (4.0 * kPi * length)) * std::polar(1.0, -2.0 * kPi * scene.carrier_hz * tau);
        p.departure = DirectionVector::from(dep);
        p.arrival = DirectionVector::from(arr);
        p.label = label;
        return p;
    };

    std::vector<PropagationPath> paths;
    if (!los_blocked) {
        const Vec3 d = rx - tx;
        paths.push_back(make(d.norm(), d, d, cplx{1.0, 0.0}, PathLabel::LoS));
    }
    for (const auto& surf : scene.surfaces) {
        if (!surf.enabled)
            continue;
        const double tx_off = tx[surf.axis] - surf.coordinate;
        const double rx_off = rx[surf.axis] - surf.coordinate;
        // endpoints on the reflector, or on opposite sides of it, give no specular path
        if (std::abs(tx_off) < 1e-9 || std::abs(rx_off) < 1e-9 || tx_off * rx_off < 0.0)
            continue;
        Vec3 image = tx;
        image[surf.axis] = 2.0 * surf.coordinate - tx[surf.axis];
        const Vec3 arr = rx - image;
        const double length = arr.norm();
        require(length > 1e-12, ErrorKind::DegenerateGeometry, "image path has zero length");
        Vec3 dep = arr;
        dep[surf.axis] = -dep[surf.axis];
        paths.push_back(make(length, dep, arr, surf.reflection, surf.label));
    }
    return paths;
}

enum class Link { BsMs, BsRis, RisMs };

inline std::string_view to_string(Link link)
{
    switch (link) {
    case Link::BsMs: return "BM";
    case Link::BsRis: return "BR";
    case Link::RisMs: return "RM";
    }
    return "?";
}

// Traces one link of the scene, honoring its LoS blockage flag and the
// half-space served by each end.
inline std::vector<PropagationPath> trace_link(const Scene& scene, Link link)
{
    const Node* tx = nullptr;
    const Node* rx = nullptr;
    bool blocked = false;
    switch (link) {
    case Link::BsMs: tx = &scene.bs; rx = &scene.ms; blocked = scene.blockage.bs_ms; break;
    case Link::BsRis: tx = &scene.bs; rx = &scene.ris; blocked = scene.blockage.bs_ris; break;
    case Link::RisMs: tx = &scene.ris; rx = &scene.ms; blocked = scene.blockage.ris_ms; break;
    }
    auto paths = trace_paths(scene, tx->position, rx->position, blocked);
    std::erase_if(paths, [&](const PropagationPath& p) {
        const double dep_z = tx->frame.to_local(p.departure.vec()).z();
        const double arr_z = rx->frame.to_local(p.arrival.vec()).z();
        const bool leaves_back = tx->facing != 0 && tx->facing * dep_z < -1e-12;
        const bool hits_back = rx->facing != 0 && rx->facing * arr_z > 1e-12;
        return leaves_back || hits_back;
    });
    return paths;
}

// D x N_rx x N_tx frequency-selective channel.
struct ChannelTaps {
    std::vector<CMatrix> taps;
    double t0 = 0.0;
    int dropped = 0;

    int depth() const { return static_cast<int>(taps.size()); }
    Eigen::Index rx() const { return taps.empty() ? 0 : taps.front().rows(); }
    Eigen::Index tx() const { return taps.empty() ? 0 : taps.front().cols(); }

    static ChannelTaps zeros(int depth, Eigen::Index n_rx, Eigen::Index n_tx, double t0)
    {
        ChannelTaps h;
        h.taps.assign(depth, CMatrix::Zero(n_rx, n_tx));
        h.t0 = t0;
        return h;
    }

    double frobenius_norm() const
    {
        double s = 0.0;
        for (const auto& t : taps)
            s += t.squaredNorm();
        return std::sqrt(s);
    }
};

namespace detail {

inline bool beyond_window(double rel_delay, const PulseShape& pulse)
{
    return rel_delay >= pulse.taps * pulse.sampling_period;
}

} // namespace detail

// H_d = sum_l alpha_l a_M(theta_l) a_B(phi_l)^H p(d Ts + t0 - tau_l)
inline ChannelTaps assemble_bm_taps(const std::vector<PropagationPath>& paths, const Node& bs, const Node& ms,
                                    const PulseShape& pulse, double t0)
{
    auto h = ChannelTaps::zeros(pulse.taps, ms.array.size(), bs.array.size(), t0);
    for (const auto& p : paths) {
        if (detail::beyond_window(p.delay - t0, pulse)) {
            ++h.dropped;
            continue;
        }
        const CMatrix outer = p.gain * ms.response(p.arrival) * bs.response(p.departure).adjoint();
        const RVector shape = pulse_delay_vector(p.delay - t0, pulse);
        for (int d = 0; d < pulse.taps; ++d)
            if (shape[d] != 0.0)
                h.taps[d] += shape[d] * outer;
    }
    return h;
}

// Cascaded BS-RIS-MS channel for one RIS phase profile omega.
inline ChannelTaps assemble_brm_taps(const std::vector<PropagationPath>& bs_ris, const std::vector<PropagationPath>& ris_ms,
                                     const CVector& omega, const Node& bs, const Node& ris, const Node& ms,
                                     const PulseShape& pulse, double t0)
{
    require(omega.size() == ris.array.size(), ErrorKind::ShapeMismatch, "RIS phase vector length differs from element count");
    for (Eigen::Index i = 0; i < omega.size(); ++i)
        require(std::abs(std::abs(omega[i]) - 1.0) <= 1e-9, ErrorKind::NonUnitModulus,
                "RIS phase entry " + std::to_string(i) + " is not unit modulus");

    auto h = ChannelTaps::zeros(pulse.taps, ms.array.size(), bs.array.size(), t0);
    for (const auto& br : bs_ris) {
        const CVector incident = omega.cwiseProduct(ris.response(br.arrival));
        const CVector a_bs = bs.response(br.departure);
        for (const auto& rm : ris_ms) {
            const double delay = br.delay + rm.delay;
            if (detail::beyond_window(delay - t0, pulse)) {
                ++h.dropped;
                continue;
            }
            const cplx reflect = ris.response(rm.departure).dot(incident);
            const CMatrix outer = (rm.gain * br.gain * reflect) * ms.response(rm.arrival) * a_bs.adjoint();
            const RVector shape = pulse_delay_vector(delay - t0, pulse);
            for (int d = 0; d < pulse.taps; ++d)
                if (shape[d] != 0.0)
                    h.taps[d] += shape[d] * outer;
        }
    }
    return h;
}

inline ChannelTaps overall_taps(const ChannelTaps& bm, const ChannelTaps& brm)
{
    require(bm.depth() == brm.depth() && bm.rx() == brm.rx() && bm.tx() == brm.tx(), ErrorKind::ShapeMismatch,
            "channel tensors differ in shape");
    require(bm.t0 == brm.t0, ErrorKind::ShapeMismatch, "channel tensors use different clock offsets");
    ChannelTaps h = bm;
    for (int d = 0; d < bm.depth(); ++d)
        h.taps[d] += brm.taps[d];
    h.dropped += brm.dropped;
    return h;
}

} // namespace momploc

#endif
