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

#ifndef MOMPLOC_LOCALIZATION_HPP
#define MOMPLOC_LOCALIZATION_HPP

#include "momp.hpp"

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

namespace momploc {

struct AnchorSet {
    Vec3 bs = Vec3::Zero();
    Vec3 ris = Vec3::Zero();
    double speed_of_light = kSpeedOfLight;
};

enum class PathClass { LoS, FloorCeiling, Wall, Discarded };

inline std::string_view to_string(PathClass c)
{
    switch (c) {
    case PathClass::LoS: return "los";
    case PathClass::FloorCeiling: return "floor-ceiling";
    case PathClass::Wall: return "wall";
    case PathClass::Discarded: return "discarded";
    }
    return "unknown";
}

struct LabeledPath {
    PathEstimate path;
    PathClass label = PathClass::Discarded;
    std::optional<double> t0_candidate;
};

struct LocalizationOptions {
    double az_tol = 1e-2;       // allowed cosine deficit of the azimuth match
    double denom_eps = 1e-6;    // smallest usable direction-component difference
    double wall_tol_s = 5e-9;   // floor for the wall consistency window
    double wall_mad_factor = 3.0;
    bool merge_unresolved = true;
};

enum class FixMethod { OneLosBm, OneLosRm, TwoLos };

inline std::string_view to_string(FixMethod m)
{
    switch (m) {
    case FixMethod::OneLosBm: return "one-los-bm";
    case FixMethod::OneLosRm: return "one-los-rm";
    case FixMethod::TwoLos: return "two-los";
    }
    return "unknown";
}

struct PositionFix {
    Vec3 position = Vec3::Zero();
    double t0 = 0.0;
    FixMethod method = FixMethod::OneLosBm;
    Source anchor = Source::BM; // branch whose LoS produced the position
    double residual = 0.0;      // spread of the t0 candidates, or the two-LoS mismatch in meters
    int candidates = 0;
};

// Drops every estimate lying within one resolution cell (x, y cosine and
// delay) of a stronger estimate from the same source.
inline std::vector<PathEstimate> merge_unresolved(const std::vector<PathEstimate>& paths)
{
    std::vector<std::size_t> order(paths.size());
    for (std::size_t i = 0; i < order.size(); ++i)
        order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return paths[a].gain > paths[b].gain; });
    std::vector<bool> keep(paths.size(), true);
    for (std::size_t oi = 0; oi < order.size(); ++oi) {
        const PathEstimate& weak = paths[order[oi]];
        for (std::size_t si = 0; si < oi && keep[order[oi]]; ++si) {
            if (!keep[order[si]])
                continue;
            const PathEstimate& strong = paths[order[si]];
            if (strong.source != weak.source)
                continue;
            const auto& res = strong.resolution;
            if (std::abs(strong.local.x - weak.local.x) < res[0] && std::abs(strong.local.y - weak.local.y) < res[1] &&
                std::abs(strong.rel_delay - weak.rel_delay) < res[2])
                keep[order[oi]] = false;
        }
    }
    std::vector<PathEstimate> out;
    for (std::size_t i = 0; i < paths.size(); ++i)
        if (keep[i])
            out.push_back(paths[i]);
    return out;
}

// LoS of one source: smallest relative delay, larger gain on ties.
inline PathEstimate pick_los(const std::vector<PathEstimate>& paths, Source source)
{
    const PathEstimate* best = nullptr;
    for (const auto& p : paths) {
        if (p.source != source)
            continue;
        if (!best || p.rel_delay < best->rel_delay || (p.rel_delay == best->rel_delay && p.gain > best->gain))
            best = &p;
    }
    require(best != nullptr, ErrorKind::NoLoSPath, std::string("no estimate from source ") + std::string(to_string(source)));
    return *best;
}

namespace detail {

inline double horizontal(const DirectionVector& d) { return std::hypot(d.x, d.y); }

inline bool same_path(const PathEstimate& a, const PathEstimate& b)
{
    return a.source == b.source && a.index == b.index;
}

// t0 making a (dtau_1 + t0) = a_l (dtau_l + t0), or nothing when ill-posed
// or when it implies a non-positive absolute delay.
inline std::optional<double> offset_candidate(double a_los, double dtau_los, double a_l, double dtau_l, double eps)
{
    if (std::abs(a_l - a_los) < eps)
        return std::nullopt;
    const double t0 = (a_los * dtau_los - a_l * dtau_l) / (a_l - a_los);
    if (!std::isfinite(t0) || dtau_los + t0 <= 0.0 || dtau_l + t0 <= 0.0)
        return std::nullopt;
    return t0;
}

inline double median(std::vector<double> v)
{
    require(!v.empty(), ErrorKind::EmptyInput, "median of an empty set");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

} // namespace detail

// Labels every path of one anchor relative to its LoS. Floor and ceiling
// bounces keep the LoS azimuth; other paths become wall candidates and keep
// the label only if their t0 agrees with the floor-derived ones.
inline std::vector<LabeledPath> classify_nlos_paths(const std::vector<PathEstimate>& paths, const PathEstimate& los,
                                                    const LocalizationOptions& opts = {})
{
    const double h_los = detail::horizontal(los.direction);
    std::vector<LabeledPath> out;
    std::vector<double> floor_t0;
    for (const auto& p : paths) {
        LabeledPath lp;
        lp.path = p;
        if (p.source != los.source) {
            out.push_back(lp);
            continue;
        }
        if (detail::same_path(p, los)) {
            lp.label = PathClass::LoS;
            out.push_back(lp);
            continue;
        }
        const double h = detail::horizontal(p.direction);
        const double az = h > 0.0 && h_los > 0.0
                              ? (p.direction.x * los.direction.x + p.direction.y * los.direction.y) / (h * h_los)
                              : -1.0;
        if (az >= 1.0 - opts.az_tol) {
            lp.t0_candidate = detail::offset_candidate(h_los, los.rel_delay, h, p.rel_delay, opts.denom_eps);
            lp.label = lp.t0_candidate ? PathClass::FloorCeiling : PathClass::Discarded;
            if (lp.t0_candidate)
                floor_t0.push_back(*lp.t0_candidate);
        } else {
            lp.t0_candidate = detail::offset_candidate(los.direction.z, los.rel_delay, p.direction.z, p.rel_delay, opts.denom_eps);
            lp.label = lp.t0_candidate ? PathClass::Wall : PathClass::Discarded;
        }
        out.push_back(lp);
    }

    if (!floor_t0.empty()) {
        const double center = detail::median(floor_t0);
        std::vector<double> dev;
        for (double t : floor_t0)
            dev.push_back(std::abs(t - center));
        const double window = std::max(opts.wall_mad_factor * detail::median(dev), opts.wall_tol_s);
        for (auto& lp : out)
            if (lp.label == PathClass::Wall && std::abs(*lp.t0_candidate - center) > window) {
                lp.label = PathClass::Discarded;
                lp.t0_candidate.reset();
            }
    }
    return out;
}

struct ClockOffset {
    double t0 = 0.0;
    double spread = 0.0; // median absolute deviation of the candidates
    int candidates = 0;
};

inline ClockOffset estimate_clock_offset_single(const std::vector<LabeledPath>& labeled)
{
    std::vector<double> t;
    for (const auto& lp : labeled)
        if ((lp.label == PathClass::FloorCeiling || lp.label == PathClass::Wall) && lp.t0_candidate)
            t.push_back(*lp.t0_candidate);
    require(!t.empty(), ErrorKind::UnderDetermined, "no usable NLoS path for the clock offset");
    ClockOffset c;
    c.t0 = detail::median(t);
    std::vector<double> dev;
    for (double v : t)
        dev.push_back(std::abs(v - c.t0));
    c.spread = detail::median(dev);
    c.candidates = static_cast<int>(t.size());
    return c;
}

// m = anchor + c (dtau + t0) phi.
inline PositionFix locate_single_los(const Vec3& anchor, const PathEstimate& los, double t0,
                                     double speed_of_light = kSpeedOfLight)
{
    const double tau = los.rel_delay + t0;
    require(std::isfinite(t0), ErrorKind::InvalidInput, "clock offset is not finite");
    require(tau > 0.0, ErrorKind::NegativeDelay, "recovered LoS delay is not positive");
    PositionFix fix;
    fix.position = anchor + speed_of_light * tau * los.direction.vec();
    fix.t0 = t0;
    fix.anchor = los.source;
    fix.method = los.source == Source::BM ? FixMethod::OneLosBm : FixMethod::OneLosRm;
    return fix;
}

// Both anchors must see the same point:
// b + c (dtau_BM + t0) phi_BM = r + c (dtau_RM + t0) phi_RM, solved for t0 in
// the least-squares sense; the position comes from the stronger LoS.
inline PositionFix locate_dual_los(const AnchorSet& anchors, const PathEstimate& bm_los, const PathEstimate& rm_los)
{
    const double c = anchors.speed_of_light;
    const Vec3 pb = bm_los.direction.vec();
    const Vec3 pr = rm_los.direction.vec();
    require((pb - pr).norm() >= 1e-9, ErrorKind::ParallelGeometry, "LoS directions from the two anchors coincide");
    const Vec3 d = anchors.ris - anchors.bs + c * (rm_los.rel_delay * pr - bm_los.rel_delay * pb);
    const Vec3 e = c * (pb - pr);
    const double t0 = d.dot(e) / e.dot(e);
    const bool use_bs = bm_los.gain >= rm_los.gain;
    PositionFix fix = use_bs ? locate_single_los(anchors.bs, bm_los, t0, c) : locate_single_los(anchors.ris, rm_los, t0, c);
    fix.method = FixMethod::TwoLos;
    fix.residual = (d - e * t0).norm();
    fix.candidates = 1;
    return fix;
}

// Full one-LoS chain for one source.
inline PositionFix localize_one_los(const Vec3& anchor, const std::vector<PathEstimate>& estimates, Source source,
                                    const LocalizationOptions& opts = {}, double speed_of_light = kSpeedOfLight)
{
    std::vector<PathEstimate> own;
    for (const auto& p : estimates)
        if (p.source == source)
            own.push_back(p);
    if (opts.merge_unresolved)
        own = merge_unresolved(own);
    const PathEstimate los = pick_los(own, source);
    const auto labeled = classify_nlos_paths(own, los, opts);
    const ClockOffset off = estimate_clock_offset_single(labeled);
    PositionFix fix = locate_single_los(anchor, los, off.t0, speed_of_light);
    fix.residual = off.spread;
    fix.candidates = off.candidates;
    return fix;
}

inline PositionFix localize_two_los(const AnchorSet& anchors, const std::vector<PathEstimate>& estimates,
                                    const LocalizationOptions& opts = {})
{
    const auto paths = opts.merge_unresolved ? merge_unresolved(estimates) : estimates;
    return locate_dual_los(anchors, pick_los(paths, Source::BM), pick_los(paths, Source::BRM));
}

} // namespace momploc

#endif
