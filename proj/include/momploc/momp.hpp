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

#ifndef MOMPLOC_MOMP_HPP
#define MOMPLOC_MOMP_HPP

#include "dictionary.hpp"

#include <algorithm>
#include <limits>
#include <span>
#include <vector>

namespace momploc {

// One sensing operator paired with its dictionaries.
struct SourceModel {
    const SensingOperator* op = nullptr;
    const MultiDictionary* dict = nullptr;
};

struct MompOptions {
    int max_paths = 10;
    double residual_tol = 1e-3; // minimum relative residual reduction per accepted atom
    int max_sweeps = 3;
    // When positive, an atom is accepted only if its score exceeds
    // detection_factor * cols * noise_var, the noise-only expectation scaled up.
    double noise_var = 0.0;
    double detection_factor = 2.0;
    // extra sweep starts taken from the strongest cells of a physical-resolution scan
    int coarse_starts = 4;
    // dictionaries with at most this many atoms are scored atom by atom
    long long exhaustive_atoms = 4096;
    int max_paths_per_source = 0; // 0: no per-source cap
};

struct SupportEntry {
    Source source = Source::BM;
    GridIndex index{};
    bool operator==(const SupportEntry&) const = default;
};

struct AtomMatch {
    GridIndex index{};
    double score = -1.0;
    int sweeps = 0;
};

struct MompResult {
    std::vector<SupportEntry> support;
    CMatrix coefficients; // support.size() x cols, row order follows support
    CMatrix atoms;        // observation-space columns of the support
    CMatrix residual;
    std::vector<double> residual_norms; // entry 0 is the observation norm
    std::vector<double> scores;         // normalized correlation of each accepted atom
    int iterations = 0;
};

namespace detail {

// Index of the column maximizing num_j / den_j; the lowest index wins ties.
inline int argmax_ratio(const RVector& num, const RVector& den, double& best)
{
    int arg = 0;
    best = -1.0;
    for (Eigen::Index j = 0; j < num.size(); ++j) {
        const double s = den[j] > 0.0 ? num[j] / den[j] : 0.0;
        if (s > best) {
            best = s;
            arg = static_cast<int>(j);
        }
    }
    return arg;
}

// Re(diag(Psi^H G Psi)).
inline RVector quadratic_diag(const CMatrix& psi, const CMatrix& g)
{
    const CMatrix gp = g * psi;
    return (psi.conjugate().cwiseProduct(gp)).colwise().sum().real().transpose();
}

class AtomSearch {
public:
    // `correlation` is Phi^H R laid out as returned by SensingOperator::adjoint.
    AtomSearch(const SourceModel& model, CMatrix correlation, Eigen::Index cols)
        : op_(*model.op), dict_(*model.dict), n_(model.dict->physical()), cols_(cols), t_(std::move(correlation))
    {
    }

    AtomMatch run(int max_sweeps, int coarse_starts, long long exhaustive_atoms = 0)
    {
        if (dict_.atom_count() <= exhaustive_atoms)
            return scan_all();
        AtomMatch best = refine(initial_index(), max_sweeps);
        for (const GridIndex& start : coarse_peaks(coarse_starts)) {
            const AtomMatch m = refine(start, max_sweeps);
            if (m.score > best.score)
                best = m;
        }
        return best;
    }

private:
    // Every (x, y) pair with its best delay; the first maximum wins.
    AtomMatch scan_all() const
    {
        const auto a = dict_.atoms();
        AtomMatch best;
        for (int j1 = 0; j1 < a[0]; ++j1)
            for (int j2 = 0; j2 < a[1]; ++j2) {
                GridIndex j{j1, j2, 0};
                double score = 0.0;
                j[2] = update(j, 2, score);
                if (score > best.score) {
                    best.index = j;
                    best.score = score;
                }
            }
        best.sweeps = 0;
        return best;
    }

    AtomMatch refine(const GridIndex& start, int max_sweeps) const
    {
        AtomMatch m;
        m.index = start;
        const int sweeps = std::max(1, max_sweeps);
        for (int s = 0; s < sweeps; ++s) {
            bool changed = false;
            for (int k = 0; k < 3; ++k) {
                double score = 0.0;
                const int j = update(m.index, k, score);
                changed = changed || j != m.index[k];
                m.index[k] = j;
                m.score = score;
            }
            m.sweeps = s + 1;
            if (!changed)
                break;
        }
        return m;
    }

    // Strongest (x, y, delay) cells of the correlation on the physical grid,
    // i.e. every ratio-th dictionary column, delays at whole samples.
    std::vector<GridIndex> coarse_peaks(int count) const
    {
        std::vector<GridIndex> out;
        if (count <= 0)
            return out;
        const auto a = dict_.atoms();
        const Eigen::Index n1 = n_[0], n2 = n_[1], d = n_[2];
        const int r1 = static_cast<int>(a[0] / n1), r2 = static_cast<int>(a[1] / n2), r3 = static_cast<int>(a[2] / d);
        if (r1 * n1 != a[0] || r2 * n2 != a[1] || r3 * d != a[2])
            return out;
        CMatrix coarse(n1 * n2, n1 * n2);
        for (Eigen::Index j1 = 0; j1 < n1; ++j1)
            for (Eigen::Index j2 = 0; j2 < n2; ++j2)
                coarse.col(j1 * n2 + j2) = spatial_atom(dict_, {static_cast<int>(j1 * r1), static_cast<int>(j2 * r2), 0});
        const CMatrix z = coarse.adjoint() * t_; // (n1 n2) x (D cols)
        std::vector<std::pair<double, GridIndex>> cells;
        cells.reserve(static_cast<std::size_t>(n1 * n2 * d));
        for (Eigen::Index i3 = 0; i3 < d; ++i3)
            for (Eigen::Index j = 0; j < n1 * n2; ++j) {
                const double e = z.row(j).segment(i3 * cols_, cols_).squaredNorm();
                cells.push_back({e, {static_cast<int>(j / n2) * r1, static_cast<int>(j % n2) * r2, static_cast<int>(i3) * r3}});
            }
        const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(count), cells.size());
        std::partial_sort(cells.begin(), cells.begin() + static_cast<std::ptrdiff_t>(k), cells.end(),
                          [](const auto& x, const auto& y) { return x.first > y.first; });
        for (std::size_t i = 0; i < k; ++i)
            out.push_back(cells[i].second);
        return out;
    }

    // Per-dimension starting point from the Gram matrix of the unfolded correlation.
    GridIndex initial_index() const
    {
        const Eigen::Index n1 = n_[0], n2 = n_[1], d = n_[2];
        const Eigen::Index wide = d * cols_;
        CMatrix g1 = CMatrix::Zero(n1, n1);
        using Strided = Eigen::Map<const CMatrix, 0, Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>>;
        for (Eigen::Index i2 = 0; i2 < n2; ++i2) {
            const Strided rows(t_.data() + i2, n1, wide, Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>(t_.outerStride(), n2));
            g1.noalias() += rows * rows.adjoint();
        }
        CMatrix g2 = CMatrix::Zero(n2, n2);
        for (Eigen::Index i1 = 0; i1 < n1; ++i1) {
            const auto blk = t_.middleRows(i1 * n2, n2);
            g2.noalias() += blk * blk.adjoint();
        }
        const Eigen::Map<const CMatrix> unfold(t_.data(), t_.rows() * cols_, d);
        const CMatrix g3 = (unfold.adjoint() * unfold).conjugate();

        GridIndex j{};
        const std::array<const CMatrix*, 3> grams{&g1, &g2, &g3};
        for (int k = 0; k < 3; ++k) {
            const RVector num = quadratic_diag(dict_.psi[k], *grams[k]);
            const RVector den = dict_.psi[k].colwise().squaredNorm().transpose();
            double best = 0.0;
            j[k] = argmax_ratio(num, den, best);
        }
        return j;
    }

    // Best index along dimension k with the other two held fixed, scored by the
    // exact normalized correlation |a^H R|^2 / |a|^2 of the composite atom.
    int update(const GridIndex& j, int k, double& score) const
    {
        const Eigen::Index n1 = n_[0], n2 = n_[1], d = n_[2];
        const int rank = op_.rank;
        const CVector p1 = dict_.psi[0].col(j[0]);
        const CVector p2 = dict_.psi[1].col(j[1]);
        const CVector p3 = dict_.psi[2].col(j[2]);

        CMatrix g; // n_k x cols, correlation with the dimension-k slice
        if (k < 2) {
            CMatrix x = CMatrix::Zero(t_.rows(), cols_);
            for (Eigen::Index i3 = 0; i3 < d; ++i3)
                x.noalias() += std::conj(p3[i3]) * t_.middleCols(i3 * cols_, cols_);
            if (k == 0) {
                g.resize(n1, cols_);
                for (Eigen::Index i1 = 0; i1 < n1; ++i1)
                    g.row(i1).noalias() = p2.adjoint() * x.middleRows(i1 * n2, n2);
            } else {
                g = CMatrix::Zero(n2, cols_);
                for (Eigen::Index i1 = 0; i1 < n1; ++i1)
                    g.noalias() += std::conj(p1[i1]) * x.middleRows(i1 * n2, n2);
            }
        } else {
            CVector pa(n1 * n2);
            for (Eigen::Index i1 = 0; i1 < n1; ++i1)
                pa.segment(i1 * n2, n2) = p1[i1] * p2;
            const CMatrix h = pa.adjoint() * t_; // 1 x (D cols), entry i3 * cols + c
            g = Eigen::Map<const CMatrix>(h.data(), cols_, d).transpose();
        }

        // Gram matrix of the sensed slice, summed over transmit configurations,
        // built from the stored stream-history Gram matrices.
        const Eigen::Index nk = n_[k];
        CMatrix gram = CMatrix::Zero(nk, nk);
        const bool shared = op_.shared_streams();
        if (k < 2) {
            CMatrix q;
            for (int m = 0; m < op_.transmit_configs(); ++m) {
                if (m == 0 || !shared)
                    q = delay_quadratic(op_.gram(m), p3, rank);
                const CMatrix& u = op_.spatial[m];
                CMatrix proj(rank, nk); // U^T restricted to the slice
                if (k == 0) {
                    for (Eigen::Index i1 = 0; i1 < n1; ++i1)
                        proj.col(i1).noalias() = u.middleRows(i1 * n2, n2).transpose() * p2;
                } else {
                    CMatrix v = CMatrix::Zero(n2, rank);
                    for (Eigen::Index i1 = 0; i1 < n1; ++i1)
                        v.noalias() += p1[i1] * u.middleRows(i1 * n2, n2);
                    proj = v.transpose();
                }
                gram.noalias() += proj.adjoint() * q * proj;
            }
        } else {
            CVector pa(n1 * n2);
            for (Eigen::Index i1 = 0; i1 < n1; ++i1)
                pa.segment(i1 * n2, n2) = p1[i1] * p2;
            if (shared) {
                CMatrix outer = CMatrix::Zero(rank, rank); // sum_m w_m w_m^H
                for (int m = 0; m < op_.transmit_configs(); ++m) {
                    const CVector w = op_.spatial[m].transpose() * pa;
                    outer.noalias() += w * w.adjoint();
                }
                const CMatrix& hh = op_.gram(0);
                for (Eigen::Index a = 0; a < d; ++a)
                    for (Eigen::Index b = 0; b < d; ++b)
                        gram(a, b) = hh.block(a * rank, b * rank, rank, rank).cwiseProduct(outer.transpose()).sum();
            } else {
                for (int m = 0; m < op_.transmit_configs(); ++m) {
                    const CVector w = op_.spatial[m].transpose() * pa;
                    const CMatrix& hh = op_.gram(m);
                    if (rank == 1) {
                        gram.noalias() += std::norm(w[0]) * hh;
                        continue;
                    }
                    for (Eigen::Index a = 0; a < d; ++a)
                        for (Eigen::Index b = 0; b < d; ++b)
                            gram(a, b) += w.dot(hh.block(a * rank, b * rank, rank, rank) * w);
                }
            }
        }

        const CMatrix& psi = dict_.psi[k];
        const RVector num = (psi.adjoint() * g).rowwise().squaredNorm();
        const RVector den = quadratic_diag(psi, gram);
        return argmax_ratio(num, den, score);
    }

    // (psi3 kron I)^H HH (psi3 kron I) for a stream-history Gram matrix HH.
    static CMatrix delay_quadratic(const CMatrix& hh, const CVector& p3, int rank)
    {
        const Eigen::Index d = p3.size();
        CMatrix half = CMatrix::Zero(hh.rows(), rank);
        for (Eigen::Index b = 0; b < d; ++b)
            if (p3[b] != cplx{})
                half.noalias() += p3[b] * hh.middleCols(b * rank, rank);
        CMatrix q = CMatrix::Zero(rank, rank);
        for (Eigen::Index a = 0; a < d; ++a)
            if (p3[a] != cplx{})
                q.noalias() += std::conj(p3[a]) * half.middleRows(a * rank, rank);
        return q;
    }

    const SensingOperator& op_;
    const MultiDictionary& dict_;
    GridIndex n_;
    Eigen::Index cols_;
    CMatrix t_;
};

// Larger score wins; near ties go to the lower source tag.
inline bool beats(const AtomMatch& cand, Source cand_src, const AtomMatch& best, Source best_src)
{
    const double tol = 1e-12 * std::max(std::abs(cand.score), std::abs(best.score));
    if (cand.score > best.score + tol)
        return true;
    return std::abs(cand.score - best.score) <= tol && cand_src < best_src;
}

} // namespace detail

// Atom of one source that best matches the residual: alternating
// per-dimension search, or a full scan for small dictionaries.
inline AtomMatch find_best_atom(const SourceModel& model, const CMatrix& residual, const MompOptions& opts = {})
{
    require(model.op && model.dict, ErrorKind::InvalidInput, "source model is incomplete");
    check_pair(*model.op, *model.dict);
    detail::AtomSearch search(model, model.op->adjoint(residual), residual.cols());
    return search.run(opts.max_sweeps, opts.coarse_starts, opts.exhaustive_atoms);
}

// Dual-source multidimensional OMP. Each iteration picks the best atom over
// all sources, re-fits every selected atom jointly by least squares and
// stops on max_paths, an exhausted residual, or a relative residual
// reduction below residual_tol (the atom that failed the test is discarded).
inline MompResult momp_estimate(const CMatrix& y, std::span<const SourceModel> sources, const MompOptions& opts = {})
{
    require(!sources.empty(), ErrorKind::EmptyInput, "no sources given");
    require(opts.max_paths >= 0 && opts.max_paths_per_source >= 0 && opts.residual_tol >= 0.0 && opts.noise_var >= 0.0 && opts.detection_factor > 0.0,
            ErrorKind::ConfigError, "invalid solver options");
    for (const auto& s : sources) {
        require(s.op && s.dict, ErrorKind::InvalidInput, "source model is incomplete");
        check_pair(*s.op, *s.dict);
        require(s.op->rows() == y.rows(), ErrorKind::ShapeMismatch, "observation height differs from sensing rows");
    }

    MompResult res;
    res.residual = y;
    res.coefficients.resize(0, y.cols());
    res.atoms.resize(y.rows(), 0);
    const double y_norm = y.norm();
    res.residual_norms.push_back(y_norm);
    if (y_norm == 0.0)
        return res;

    // Phi^H R per source, kept as Phi^H Y - sum_s (Phi^H a_s) c_s^T
    const Eigen::Index cols = y.cols();
    std::vector<CMatrix> corr_y;
    std::vector<std::vector<CMatrix>> corr_atoms(sources.size());
    for (const auto& src : sources)
        corr_y.push_back(src.op->adjoint(y));
    auto correlation = [&](std::size_t s) {
        CMatrix t = corr_y[s];
        const auto& ga = corr_atoms[s];
        if (ga.empty())
            return t;
        const Eigen::Index d = sources[s].op->taps;
        CMatrix slice(t.rows(), static_cast<Eigen::Index>(ga.size()));
        for (Eigen::Index i3 = 0; i3 < d; ++i3) {
            for (std::size_t a = 0; a < ga.size(); ++a)
                slice.col(static_cast<Eigen::Index>(a)) = ga[a].col(i3);
            t.middleCols(i3 * cols, cols).noalias() -= slice * res.coefficients;
        }
        return t;
    };

    while (static_cast<int>(res.support.size()) < opts.max_paths) {
        const double prev = res.residual_norms.back();
        if (prev <= 1e-13 * y_norm)
            break;
        ++res.iterations;

        AtomMatch best;
        Source best_src = sources.front().op->source;
        std::size_t best_model = 0;
        bool any = false;
        for (std::size_t s = 0; s < sources.size(); ++s) {
            if (opts.max_paths_per_source > 0) {
                int used = 0;
                for (const auto& e : res.support)
                    used += e.source == sources[s].op->source;
                if (used >= opts.max_paths_per_source)
                    continue;
            }
            detail::AtomSearch search(sources[s], correlation(s), cols);
            const AtomMatch m = search.run(opts.max_sweeps, opts.coarse_starts, opts.exhaustive_atoms);
            const Source src = sources[s].op->source;
            if (!any || detail::beats(m, src, best, best_src)) {
                any = true;
                best = m;
                best_src = src;
                best_model = s;
            }
        }
        if (!any || best.score <= 0.0)
            break;
        if (opts.noise_var > 0.0 &&
            best.score < opts.detection_factor * static_cast<double>(y.cols()) * opts.noise_var)
            break;

        const SupportEntry entry{best_src, best.index};
        bool repeated = false;
        for (const auto& e : res.support)
            repeated = repeated || e == entry;
        if (repeated)
            break;

        const CVector atom = composite_atom(*sources[best_model].op, *sources[best_model].dict, best.index);
        require(atom.norm() > 0.0, ErrorKind::NoProgress, "selected atom has zero norm");

        CMatrix atoms(y.rows(), res.atoms.cols() + 1);
        atoms << res.atoms, atom;
        const CMatrix coeffs = atoms.colPivHouseholderQr().solve(y);
        CMatrix residual = y - atoms * coeffs;
        const double now = residual.norm();
        if (opts.residual_tol > 0.0 && prev - now < opts.residual_tol * prev && now > 1e-13 * y_norm)
            break;

        res.support.push_back(entry);
        for (std::size_t s = 0; s < sources.size(); ++s)
            corr_atoms[s].push_back(sources[s].op->adjoint(atom));
        res.atoms = std::move(atoms);
        res.coefficients = coeffs;
        res.residual = std::move(residual);
        res.residual_norms.push_back(now);
        res.scores.push_back(best.score);
    }
    return res;
}

inline CMatrix reconstruct_observation(const MompResult& res)
{
    if (res.support.empty())
        return CMatrix::Zero(res.residual.rows(), res.residual.cols());
    return res.atoms * res.coefficients;
}

// Normalized squared error of the reconstruction against a reference observation.
inline double reconstruction_nmse(const MompResult& res, const CMatrix& reference)
{
    const CMatrix est = reconstruct_observation(res);
    require(est.rows() == reference.rows() && est.cols() == reference.cols(), ErrorKind::ShapeMismatch,
            "reference shape differs from the observation");
    const double ref = reference.squaredNorm();
    require(ref > 0.0, ErrorKind::InvalidInput, "reference observation is zero");
    return (est - reference).squaredNorm() / ref;
}

// Direction prior for one sensed array: its frame and the sign of the local
// z component of the directions it sees.
struct DirectionPrior {
    ArrayFrame frame;
    int z_sign = -1;
};

struct PathEstimate {
    Source source = Source::BM;
    GridIndex index{};
    DirectionVector local;     // array frame
    DirectionVector direction; // global frame
    double rel_delay = 0.0;    // relative to t0; BRM delays exclude the BS-RIS leg
    double gain = 0.0;         // coefficient row norm over sqrt(cols)
    double row_norm = 0.0;
    std::array<double, 3> resolution{}; // one grid cell of the physical array: x, y cosines and delay
};

// With drop_invisible set, atoms whose cosines fall outside the unit disc are
// skipped instead of raising InconsistentDirection.
inline std::vector<PathEstimate> extract_path_estimates(const MompResult& res, std::span<const SourceModel> sources,
                                                        const DirectionPrior& bs, const DirectionPrior& ris,
                                                        bool drop_invisible = false)
{
    require(!res.support.empty(), ErrorKind::EmptyInput, "empty support");
    std::vector<PathEstimate> out;
    const double cols = static_cast<double>(std::max<Eigen::Index>(1, res.coefficients.cols()));
    for (std::size_t s = 0; s < res.support.size(); ++s) {
        const SupportEntry& e = res.support[s];
        const SourceModel* model = nullptr;
        for (const auto& m : sources)
            if (m.op && m.op->source == e.source)
                model = &m;
        require(model != nullptr, ErrorKind::InvalidInput, "support refers to a missing source");
        const MultiDictionary& d = *model->dict;
        check_index(d, e.index);
        const DirectionPrior& prior = e.source == Source::BM ? bs : ris;

        const double cx = d.grid_x.values[e.index[0]];
        const double cy = d.grid_y.values[e.index[1]];
        if (drop_invisible && cx * cx + cy * cy > 1.0 + 1e-9)
            continue;

        PathEstimate p;
        p.source = e.source;
        p.index = e.index;
        p.local = resolve_direction_z(cx, cy, prior.z_sign);
        p.direction = prior.frame.to_global(p.local);
        p.rel_delay = d.delays.values[e.index[2]];
        if (e.source == Source::BRM)
            p.rel_delay -= model->op->bs_ris_delay;
        p.row_norm = res.coefficients.row(static_cast<Eigen::Index>(s)).norm();
        p.gain = p.row_norm / std::sqrt(cols);
        p.resolution = {2.0 / d.grid_x.physical, 2.0 / d.grid_y.physical, d.delays.sampling_period};
        out.push_back(p);
    }
    return out;
}

} // namespace momploc

#endif
