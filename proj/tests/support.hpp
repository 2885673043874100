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

// Shared fixtures for the test programs: dense reference operators, a
// brute-force OMP over the materialized dictionary, a scene whose LoS paths
// sit exactly on the dictionary grids, and exact path estimates traced from
// a scene.

#ifndef MOMPLOC_TESTS_SUPPORT_HPP
#define MOMPLOC_TESTS_SUPPORT_HPP

#include "momploc/momploc.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace momploc::testing {

inline CMatrix kron(const CMatrix& a, const CMatrix& b)
{
    CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

// Psi_1 kron Psi_2 kron Psi_3: row (i1 N_y + i2) D + i3, column (j1 N^a_2 + j2) N^a_3 + j3.
inline CMatrix full_dictionary(const MultiDictionary& d) { return kron(kron(d.psi[0], d.psi[1]), d.psi[2]); }

// [Phi]_{m N + n, (i1 N_y + i2) D + i3} = [Fbar_m s[n - i3]]_{i1 N_y + i2}, s[k] = 0 for k < 0.
inline CMatrix dense_sensing(const std::vector<CMatrix>& effective_precoders, const CMatrix& pilots, int taps)
{
    const Eigen::Index n = pilots.cols();
    const Eigen::Index nt = effective_precoders.front().rows();
    CMatrix phi = CMatrix::Zero(static_cast<Eigen::Index>(effective_precoders.size()) * n, nt * taps);
    for (std::size_t m = 0; m < effective_precoders.size(); ++m)
        for (Eigen::Index row = 0; row < n; ++row)
            for (int i3 = 0; i3 < taps; ++i3) {
                if (row - i3 < 0)
                    continue;
                const CVector v = effective_precoders[m] * pilots.col(row - i3);
                for (Eigen::Index i = 0; i < nt; ++i)
                    phi(static_cast<Eigen::Index>(m) * n + row, i * taps + i3) = v[i];
            }
    return phi;
}

inline CMatrix dense_bm_sensing(const TrainingSet& ts, int taps) { return dense_sensing(ts.precoders, ts.pilots, taps); }

// Fbar_m = alpha Omega_m a_R(theta_BR) a_B(phi_BR)^H F_m.
inline CMatrix dense_brm_sensing(const TrainingSet& ts, const PropagationPath& br, const Node& bs, const Node& ris, int taps)
{
    const CVector a_r = upa_response(ris.frame.to_local(br.arrival), ris.array);
    const CVector a_b = upa_response(bs.frame.to_local(br.departure), bs.array);
    std::vector<CMatrix> fbar;
    for (int m = 0; m < ts.transmit_configs(); ++m)
        fbar.push_back(br.gain * ts.ris_phases[m].asDiagonal() * a_r * (a_b.adjoint() * ts.precoders[m]));
    return dense_sensing(fbar, ts.pilots, taps);
}

struct OracleStep {
    int column = -1;
    double score = 0.0;
    double gap = 0.0; // (best - runner-up) / best
};

struct OracleRun {
    std::vector<OracleStep> steps;
    CMatrix coefficients;
    CMatrix residual;
};

// Plain matrix OMP: score ||a^H R||^2 / ||a||^2, first column wins exact ties.
inline OracleRun brute_force_omp(const CMatrix& a, const CMatrix& y, int steps)
{
    OracleRun run;
    run.residual = y;
    const Eigen::VectorXd norms = a.colwise().squaredNorm().transpose();
    std::vector<int> chosen;
    for (int s = 0; s < steps; ++s) {
        const Eigen::VectorXd num = (a.adjoint() * run.residual).rowwise().squaredNorm();
        OracleStep step;
        double second = 0.0;
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            const double sc = norms[j] > 0.0 ? num[j] / norms[j] : 0.0;
            if (sc > step.score) {
                second = step.score;
                step.score = sc;
                step.column = static_cast<int>(j);
            } else if (sc > second) {
                second = sc;
            }
        }
        if (step.column < 0)
            break;
        step.gap = (step.score - second) / step.score;
        run.steps.push_back(step);
        chosen.push_back(step.column);
        CMatrix sel(a.rows(), static_cast<Eigen::Index>(chosen.size()));
        for (std::size_t k = 0; k < chosen.size(); ++k)
            sel.col(static_cast<Eigen::Index>(k)) = a.col(chosen[k]);
        run.coefficients = sel.colPivHouseholderQr().solve(y);
        run.residual = y - sel * run.coefficients;
    }
    return run;
}

inline int flat_index(const MultiDictionary& d, const GridIndex& j)
{
    const auto a = d.atoms();
    return (j[0] * a[1] + j[1]) * a[2] + j[2];
}

inline GridIndex unflatten(const MultiDictionary& d, int flat)
{
    const auto a = d.atoms();
    return {flat / (a[1] * a[2]), (flat / a[2]) % a[1], flat % a[2]};
}

inline CVector random_cvector(Eigen::Index n, std::mt19937_64& rng)
{
    std::normal_distribution<double> g(0.0, 1.0);
    CVector v(n);
    for (Eigen::Index i = 0; i < n; ++i)
        v[i] = cplx{g(rng), g(rng)};
    return v;
}

inline CMatrix random_cmatrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng)
{
    CMatrix m(r, c);
    for (Eigen::Index j = 0; j < c; ++j)
        m.col(j) = random_cvector(r, rng);
    return m;
}

inline DirectionVector random_direction(std::mt19937_64& rng, int z_sign)
{
    std::uniform_real_distribution<double> u(-0.7, 0.7);
    return resolve_direction_z(u(rng), u(rng), z_sign);
}

// 2x2 arrays, D = 4, ratio 2, both sources, paths drawn on the grids.
struct TinyInstance {
    Node bs, ris;
    TrainingSet training;
    PropagationPath br;
    PulseShape pulse;
    SensingOperator bm_op, brm_op;
    MultiDictionary bm_dict, brm_dict;
    CMatrix dense; // [Phi_BM Psi_BM, Phi_BRM Psi_BRM]
    CMatrix y;
    std::vector<SupportEntry> truth;

    std::vector<SourceModel> models() const { return {{&bm_op, &bm_dict}, {&brm_op, &brm_dict}}; }

    SupportEntry entry_of(int column) const
    {
        const int per = static_cast<int>(bm_dict.atom_count());
        return column < per ? SupportEntry{Source::BM, unflatten(bm_dict, column)}
                            : SupportEntry{Source::BRM, unflatten(brm_dict, column - per)};
    }
};

inline TinyInstance make_tiny_instance(std::uint64_t seed, int paths = 2, double noise = 0.0)
{
    std::mt19937_64 rng(seed);
    TinyInstance t;
    t.bs.array = {2, 2};
    t.bs.facing = -1;
    t.ris.array = {2, 2};
    t.br.gain = std::polar(0.5, 0.3);
    t.br.departure = random_direction(rng, -1);
    t.br.arrival = t.br.departure;
    t.br.delay = 2.0;
    t.pulse = PulseShape::sinc(1.0, 4);

    TrainingConfig tc;
    tc.transmit_configs = 4;
    tc.combiners = 2;
    tc.frame_length = 8;
    tc.rf_bs = 2;
    tc.rf_ms = 2;
    tc.bs_array = t.bs.array;
    tc.ms_array = {2, 2};
    tc.ris_array = t.ris.array;
    tc.mode = PrecoderMode::Random;
    tc.tx_power = 1.0;
    t.training = generate_training_set(tc, t.bs, t.br, seed * 7919 + 1);

    const DictionaryRatios ratios{2, 2, 2};
    t.bm_dict = build_bm_dictionaries(t.bs.array, t.pulse, ratios);
    t.brm_dict = build_brm_dictionaries(t.ris.array, t.pulse, ratios);
    t.bm_op = build_bm_sensing(t.training, t.bs.array, 4);
    t.brm_op = build_brm_sensing(t.training, t.br, t.bs, t.ris, 4);

    const CMatrix a_bm = dense_bm_sensing(t.training, 4) * full_dictionary(t.bm_dict);
    const CMatrix a_brm = dense_brm_sensing(t.training, t.br, t.bs, t.ris, 4) * full_dictionary(t.brm_dict);
    t.dense.resize(a_bm.rows(), a_bm.cols() + a_brm.cols());
    t.dense << a_bm, a_brm;

    const Eigen::Index cols = static_cast<Eigen::Index>(tc.combiners) * tc.rf_ms;
    t.y = CMatrix::Zero(t.dense.rows(), cols);
    std::uniform_int_distribution<int> pick(0, static_cast<int>(t.dense.cols()) - 1);
    for (int p = 0; p < paths; ++p) {
        const int c = pick(rng);
        t.truth.push_back(t.entry_of(c));
        t.y += t.dense.col(c) * random_cvector(cols, rng).transpose();
    }
    if (noise > 0.0)
        t.y += noise * random_cmatrix(t.y.rows(), t.y.cols(), rng);
    return t;
}

// A desk-scale configuration whose BS-MS and RIS-MS LoS paths fall exactly on
// the dictionary grids, with t0 = 0 and no reflecting surfaces.
struct OnGridCase {
    ExperimentConfig cfg;
    GridIndex bm_index{};
    GridIndex brm_index{};
    Vec3 ms;
};

inline OnGridCase make_on_grid_case()
{
    OnGridCase oc;
    ExperimentConfig& cfg = oc.cfg;
    cfg.scene.surfaces.clear();
    cfg.noise_dbm = -std::numeric_limits<double>::infinity();
    cfg.blockage_prob = 0.0;
    cfg.t0_max_fraction = 0.0;
    cfg.mode = Mode::Both;
    const double ts = cfg.sampling_period();
    const double c = cfg.scene.speed_of_light;
    const auto bm_dict = build_bm_dictionaries(cfg.scene.bs.array, cfg.pulse(), cfg.ratios);
    const auto brm_dict = build_brm_dictionaries(cfg.scene.ris.array, cfg.pulse(), cfg.ratios);

    // BS side: grid cosines (-0.5, -0.25), three samples of flight
    const int jx = bm_dict.grid_x.size() / 4, jy = 3 * bm_dict.grid_y.size() / 8;
    const DirectionVector d1 = cfg.scene.bs.frame.to_global(
        resolve_direction_z(bm_dict.grid_x.values[jx], bm_dict.grid_y.values[jy], cfg.scene.bs.z_sign_prior()));
    const double r1 = 3.0 * c * ts;
    oc.ms = cfg.scene.bs.position + r1 * d1.vec();
    oc.bm_index = {jx, jy, 3 * cfg.ratios.delay};

    // RIS side: grid cosines (0.25, 0.3125) in the wall frame
    const int kx = 5 * brm_dict.grid_x.size() / 8, ky = 21 * brm_dict.grid_y.size() / 32;
    const DirectionVector d2 = cfg.scene.ris.frame.to_global(
        resolve_direction_z(brm_dict.grid_x.values[kx], brm_dict.grid_y.values[ky], cfg.scene.ris.z_sign_prior()));
    // slide the RIS along the ray until BS-RIS-MS spans a whole number of samples
    auto length = [&](double r2) { return (cfg.scene.bs.position - (oc.ms - r2 * d2.vec())).norm() + r2; };
    const double target = std::ceil(length(8.0) / (c * ts)) * c * ts;
    double lo = 8.0, hi = 8.0;
    while (length(hi) < target)
        hi += 1.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (length(mid) < target ? lo : hi) = mid;
    }
    cfg.scene.ris.position = oc.ms - 0.5 * (lo + hi) * d2.vec();
    oc.brm_index = {kx, ky, static_cast<int>(std::lround(target / (c * ts))) * cfg.ratios.delay};

    cfg.region = {oc.ms.x(), oc.ms.x(), oc.ms.y(), oc.ms.y(), oc.ms.z()};
    return oc;
}

// Estimates that carry the true parameters of every traced path.
inline std::vector<PathEstimate> exact_estimates(const Scene& scene, double t0, bool with_bm, bool with_brm)
{
    std::vector<PathEstimate> out;
    int next = 0;
    auto add = [&](Source src, const Node& anchor, const PropagationPath& p, double rel_delay) {
        PathEstimate e;
        e.source = src;
        e.index = {next++, 0, 0}; // distinct tags so the LoS can be told apart
        e.direction = p.departure;
        e.local = anchor.frame.to_local(p.departure);
        e.rel_delay = rel_delay;
        e.gain = std::abs(p.gain);
        e.row_norm = e.gain;
        e.resolution = {1e-12, 1e-12, 1e-18};
        out.push_back(e);
    };
    if (with_bm)
        for (const auto& p : trace_link(scene, Link::BsMs))
            add(Source::BM, scene.bs, p, p.delay - t0);
    if (with_brm)
        for (const auto& p : trace_link(scene, Link::RisMs))
            add(Source::BRM, scene.ris, p, p.delay - t0);
    return out;
}

} // namespace momploc::testing

#endif
