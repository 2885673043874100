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

#ifndef MOMPLOC_DICTIONARY_HPP
#define MOMPLOC_DICTIONARY_HPP

#include "sounding.hpp"

#include <array>
#include <string_view>
#include <vector>

namespace momploc {

// BM: direct BS-MS link. BRM: cascaded BS-RIS-MS link.
enum class Source { BM, BRM };

inline std::string_view to_string(Source s) { return s == Source::BM ? "BM" : "BRM"; }

using GridIndex = std::array<int, 3>;

// Uniform direction-cosine grid on [-1, 1).
struct AngleGrid {
    std::vector<double> values;
    int physical = 1;

    static AngleGrid uniform(int physical, int ratio)
    {
        require(physical >= 1 && ratio >= 1, ErrorKind::ConfigError, "grid sizes must be positive");
        AngleGrid g;
        g.physical = physical;
        const int n = physical * ratio;
        g.values.resize(n);
        for (int j = 0; j < n; ++j)
            g.values[j] = -1.0 + 2.0 * j / n;
        return g;
    }

    int size() const { return static_cast<int>(values.size()); }
    double ratio() const { return static_cast<double>(size()) / physical; }
};

// Relative delays j * D * Ts / N^a on [0, D * Ts).
struct DelayGrid {
    std::vector<double> values;
    double spacing = 0.0;
    double sampling_period = 0.0;

    static DelayGrid uniform(const PulseShape& pulse, int ratio)
    {
        require(ratio >= 1, ErrorKind::ConfigError, "delay ratio must be positive");
        DelayGrid g;
        const int n = pulse.taps * ratio;
        g.spacing = pulse.sampling_period / ratio;
        g.sampling_period = pulse.sampling_period;
        g.values.resize(n);
        for (int j = 0; j < n; ++j)
            g.values[j] = j * g.spacing;
        return g;
    }

    int size() const { return static_cast<int>(values.size()); }
};

struct DictionaryRatios {
    int x = 8;
    int y = 8;
    int delay = 8;
};

// Per-dimension dictionaries: conjugated axis responses for the two
// transmit-side array axes and sampled pulses for the delay.
struct MultiDictionary {
    Source source = Source::BM;
    AngleGrid grid_x;
    AngleGrid grid_y;
    DelayGrid delays;
    std::array<CMatrix, 3> psi;

    GridIndex atoms() const
    {
        return {static_cast<int>(psi[0].cols()), static_cast<int>(psi[1].cols()), static_cast<int>(psi[2].cols())};
    }
    GridIndex physical() const
    {
        return {static_cast<int>(psi[0].rows()), static_cast<int>(psi[1].rows()), static_cast<int>(psi[2].rows())};
    }
    long long atom_count() const
    {
        const auto a = atoms();
        return static_cast<long long>(a[0]) * a[1] * a[2];
    }
};

namespace detail {

inline MultiDictionary build_dictionaries(Source source, const UpaGeometry& array, const PulseShape& pulse,
                                          const DictionaryRatios& ratios)
{
    require(ratios.x >= 1 && ratios.y >= 1 && ratios.delay >= 1, ErrorKind::ConfigError, "dictionary ratios must be >= 1");
    MultiDictionary dict;
    dict.source = source;
    dict.grid_x = AngleGrid::uniform(array.n_x, ratios.x);
    dict.grid_y = AngleGrid::uniform(array.n_y, ratios.y);
    dict.delays = DelayGrid::uniform(pulse, ratios.delay);
    dict.psi[0].resize(array.n_x, dict.grid_x.size());
    for (int j = 0; j < dict.grid_x.size(); ++j)
        dict.psi[0].col(j) = axis_response(dict.grid_x.values[j], array.n_x).conjugate();
    dict.psi[1].resize(array.n_y, dict.grid_y.size());
    for (int j = 0; j < dict.grid_y.size(); ++j)
        dict.psi[1].col(j) = axis_response(dict.grid_y.values[j], array.n_y).conjugate();
    dict.psi[2].resize(pulse.taps, dict.delays.size());
    for (int j = 0; j < dict.delays.size(); ++j)
        dict.psi[2].col(j) = pulse_delay_vector(dict.delays.values[j], pulse).cast<cplx>();
    return dict;
}

} // namespace detail

inline MultiDictionary build_bm_dictionaries(const UpaGeometry& bs, const PulseShape& pulse, const DictionaryRatios& ratios)
{
    return detail::build_dictionaries(Source::BM, bs, pulse, ratios);
}

inline MultiDictionary build_brm_dictionaries(const UpaGeometry& ris, const PulseShape& pulse, const DictionaryRatios& ratios)
{
    return detail::build_dictionaries(Source::BRM, ris, pulse, ratios);
}

// Sensing tensor [Phi]_{m_B N + n, (i1, i2, i3)} = [G_{m_B} s[n - i3]]_{i1 N_y + i2},
// stored per transmit configuration in factored form G_{m_B} s[n] = U_{m_B} w_{m_B}[n]:
// U is N_T x K and w[n] the K streams that reach the sensed array. The i3 shift
// structure is kept by storing the stream history as an N x (D K) matrix whose
// column i3 * K + k holds w_k[n - i3].
struct SensingOperator {
    Source source = Source::BM;
    UpaGeometry array;
    int taps = 0;
    int frame_length = 0;
    int rank = 0;
    std::vector<CMatrix> spatial;
    std::vector<CMatrix> shifted; // one entry when every configuration shares its streams
    std::vector<CMatrix> history_gram; // H^H H for each entry of `shifted`, (D K) x (D K)
    CMatrix spatial_conj;              // N_T x (M_B K), block m holds conj(U_m)
    double bs_ris_delay = 0.0;    // known BS-RIS LoS delay, BRM only

    int transmit_configs() const { return static_cast<int>(spatial.size()); }
    Eigen::Index rows() const { return static_cast<Eigen::Index>(transmit_configs()) * frame_length; }
    int elements() const { return array.size(); }
    bool shared_streams() const { return shifted.size() == 1; }
    const CMatrix& history(int m) const { return shared_streams() ? shifted.front() : shifted[m]; }
    const CMatrix& gram(int m) const { return shared_streams() ? history_gram.front() : history_gram[m]; }

    // Phi v for a coefficient tensor laid out as an N_T x D matrix.
    CVector apply(const CMatrix& v) const
    {
        require(v.rows() == elements() && v.cols() == taps, ErrorKind::ShapeMismatch, "coefficient tensor shape");
        CVector out(rows());
        for (int m = 0; m < transmit_configs(); ++m) {
            const CMatrix q = spatial[m].transpose() * v; // K x D, vec index i3 * K + k
            out.segment(static_cast<Eigen::Index>(m) * frame_length, frame_length).noalias() =
                history(m) * Eigen::Map<const CVector>(q.data(), q.size());
        }
        return out;
    }

    // Phi^H R, returned as N_T x (D * cols) with column i3 * cols + c.
    CMatrix adjoint(const CMatrix& r) const
    {
        require(r.rows() == rows(), ErrorKind::ShapeMismatch, "residual height differs from sensing rows");
        const Eigen::Index cols = r.cols();
        const int mbs = transmit_configs();
        CMatrix z_all(static_cast<Eigen::Index>(mbs) * rank, taps * cols);
        if (shifted.size() == 1) {
            // every configuration shares its streams: one product for all blocks, column m + M_B c
            Eigen::Map<const CMatrix> stacked(r.data(), frame_length, static_cast<Eigen::Index>(mbs) * cols);
            const CMatrix z = shifted.front().adjoint() * stacked;
            for (Eigen::Index c = 0; c < cols; ++c)
                for (int m = 0; m < mbs; ++m)
                    for (int d = 0; d < taps; ++d)
                        for (int k = 0; k < rank; ++k)
                            z_all(static_cast<Eigen::Index>(m) * rank + k, d * cols + c) = z(d * rank + k, m + mbs * c);
        } else {
            for (int m = 0; m < mbs; ++m) {
                const CMatrix z = shifted[m].adjoint() * r.middleRows(static_cast<Eigen::Index>(m) * frame_length, frame_length);
                for (int d = 0; d < taps; ++d)
                    z_all.block(static_cast<Eigen::Index>(m) * rank, d * cols, rank, cols) = z.middleRows(d * rank, rank);
            }
        }
        return spatial_conj * z_all;
    }

    // Streams of configuration m filtered by a delay atom: column k is sum_i3 psi3[i3] w_k[n - i3].
    CMatrix delay_filtered(int m, const CVector& psi3) const
    {
        const CMatrix& h = history(m);
        CMatrix out = CMatrix::Zero(frame_length, rank);
        for (int d = 0; d < taps; ++d)
            if (psi3[d] != cplx{})
                out.noalias() += psi3[d] * h.middleCols(d * rank, rank);
        return out;
    }
};

namespace detail {

// w[n] for n = 0..N-1 (rank x N) expanded into the shifted history matrix.
inline CMatrix shift_history(const CMatrix& streams, int taps)
{
    const Eigen::Index k = streams.rows();
    const Eigen::Index n = streams.cols();
    CMatrix h = CMatrix::Zero(n, taps * k);
    for (int d = 0; d < taps && d < n; ++d)
        h.block(d, d * k, n - d, k) = streams.leftCols(n - d).transpose();
    return h;
}

inline void finalize(SensingOperator& op)
{
    const int mbs = op.transmit_configs();
    op.spatial_conj.resize(op.elements(), static_cast<Eigen::Index>(mbs) * op.rank);
    for (int m = 0; m < mbs; ++m)
        op.spatial_conj.middleCols(static_cast<Eigen::Index>(m) * op.rank, op.rank) = op.spatial[m].conjugate();
    op.history_gram.clear();
    for (const auto& h : op.shifted)
        op.history_gram.push_back(h.adjoint() * h);
}

} // namespace detail

inline SensingOperator build_bm_sensing(const TrainingSet& ts, const UpaGeometry& bs_array, int taps)
{
    require(taps >= 1, ErrorKind::ConfigError, "tap count must be positive");
    SensingOperator op;
    op.source = Source::BM;
    op.array = bs_array;
    op.taps = taps;
    op.frame_length = ts.frame_length();
    op.rank = ts.streams();
    for (const auto& f : ts.precoders) {
        require(f.rows() == bs_array.size(), ErrorKind::ShapeMismatch, "precoder height differs from BS array");
        op.spatial.push_back(f);
    }
    op.shifted.push_back(detail::shift_history(ts.pilots, taps));
    detail::finalize(op);
    return op;
}

// Folds the known single-path BS-RIS channel into the precoder:
// Fbar = alpha_BR Omega a_R(theta_BR) a_B(phi_BR)^H F, which has rank one.
inline SensingOperator build_brm_sensing(const TrainingSet& ts, const PropagationPath& bs_ris_los, const Node& bs,
                                         const Node& ris, int taps)
{
    require(taps >= 1, ErrorKind::ConfigError, "tap count must be positive");
    SensingOperator op;
    op.source = Source::BRM;
    op.array = ris.array;
    op.taps = taps;
    op.frame_length = ts.frame_length();
    op.rank = 1;
    op.bs_ris_delay = bs_ris_los.delay;
    const CVector incident = bs_ris_los.gain * ris.response(bs_ris_los.arrival);
    const CVector a_bs = bs.response(bs_ris_los.departure);
    for (int m = 0; m < ts.transmit_configs(); ++m) {
        const CVector& omega = ts.ris_phases[m];
        require(omega.size() == ris.array.size(), ErrorKind::ShapeMismatch, "RIS phase vector length");
        for (Eigen::Index i = 0; i < omega.size(); ++i)
            require(std::abs(std::abs(omega[i]) - 1.0) <= 1e-9, ErrorKind::NonUnitModulus, "RIS phase not unit modulus");
        op.spatial.push_back(omega.cwiseProduct(incident));
        const CMatrix streams = a_bs.adjoint() * ts.precoders[m] * ts.pilots; // 1 x N
        op.shifted.push_back(detail::shift_history(streams, taps));
    }
    detail::finalize(op);
    return op;
}

// Spatial part of atom j: psi_1[:, j1] kron psi_2[:, j2].
inline CVector spatial_atom(const MultiDictionary& dict, const GridIndex& j)
{
    const CMatrix& px = dict.psi[0];
    const CMatrix& py = dict.psi[1];
    CVector v(px.rows() * py.rows());
    for (Eigen::Index i1 = 0; i1 < px.rows(); ++i1)
        v.segment(i1 * py.rows(), py.rows()) = px(i1, j[0]) * py.col(j[1]);
    return v;
}

// Atom j over the physical indices, laid out N_T x D.
inline CMatrix atom_tensor(const MultiDictionary& dict, const GridIndex& j)
{
    return spatial_atom(dict, j) * dict.psi[2].col(j[2]).transpose();
}

inline void check_index(const MultiDictionary& dict, const GridIndex& j)
{
    const auto a = dict.atoms();
    for (int k = 0; k < 3; ++k)
        require(j[k] >= 0 && j[k] < a[k], ErrorKind::ShapeMismatch, "grid index out of range");
}

inline void check_pair(const SensingOperator& op, const MultiDictionary& dict)
{
    const auto n = dict.physical();
    require(op.source == dict.source, ErrorKind::ShapeMismatch, "sensing operator and dictionary belong to different sources");
    require(n[0] * n[1] == op.elements() && n[2] == op.taps, ErrorKind::ShapeMismatch,
            "dictionary physical sizes differ from the sensing operator");
}

// Observation-space column of atom j: sum_i Phi[:, i] prod_k Psi_k[i_k, j_k].
inline CVector composite_atom(const SensingOperator& op, const MultiDictionary& dict, const GridIndex& j)
{
    check_pair(op, dict);
    check_index(dict, j);
    return op.apply(atom_tensor(dict, j));
}

// Dense coefficients: C is (N^a_1 N^a_2 N^a_3) x cols with row (j1 N^a_2 + j2) N^a_3 + j3.
// The dictionaries are applied one dimension at a time; the Kronecker
// dictionary is never formed.
inline CMatrix apply_sensing(const SensingOperator& op, const MultiDictionary& dict, const CMatrix& coeffs)
{
    check_pair(op, dict);
    const auto a = dict.atoms();
    const auto n = dict.physical();
    require(coeffs.rows() == static_cast<Eigen::Index>(dict.atom_count()), ErrorKind::ShapeMismatch,
            "coefficient rows differ from the atom count");
    using RowMajor = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    CMatrix out(op.rows(), coeffs.cols());
    for (Eigen::Index c = 0; c < coeffs.cols(); ++c) {
        const CVector col = coeffs.col(c);
        Eigen::Map<const RowMajor> by_delay(col.data(), static_cast<Eigen::Index>(a[0]) * a[1], a[2]);
        const CMatrix delay_done = by_delay * dict.psi[2].transpose(); // (j1, j2) x i3
        CMatrix v = CMatrix::Zero(static_cast<Eigen::Index>(n[0]) * n[1], n[2]);
        for (int j1 = 0; j1 < a[0]; ++j1) {
            const CMatrix y_done = dict.psi[1] * delay_done.middleRows(static_cast<Eigen::Index>(j1) * a[1], a[1]);
            for (int i1 = 0; i1 < n[0]; ++i1)
                v.middleRows(static_cast<Eigen::Index>(i1) * n[1], n[1]) += dict.psi[0](i1, j1) * y_done;
        }
        out.col(c) = op.apply(v);
    }
    return out;
}

// Sparse coefficients: one row per support index.
inline CMatrix apply_sensing(const SensingOperator& op, const MultiDictionary& dict, const std::vector<GridIndex>& support,
                             const CMatrix& rows)
{
    require(rows.rows() == static_cast<Eigen::Index>(support.size()), ErrorKind::ShapeMismatch,
            "one coefficient row per support entry is required");
    CMatrix out = CMatrix::Zero(op.rows(), rows.cols());
    for (std::size_t s = 0; s < support.size(); ++s)
        out.noalias() += composite_atom(op, dict, support[s]) * rows.row(static_cast<Eigen::Index>(s));
    return out;
}

} // namespace momploc

#endif
