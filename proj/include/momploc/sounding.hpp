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

#ifndef MOMPLOC_SOUNDING_HPP
#define MOMPLOC_SOUNDING_HPP

#include "scene.hpp"

#include <bit>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace momploc {

enum class PrecoderMode {
    Random,  // every column drawn at random
    RisOnly, // every column aimed at the RIS
    Both,    // first ceil(N_RF/2) columns aimed at the RIS, the rest random
};

struct TrainingConfig {
    int transmit_configs = 32; // M_B
    int combiners = 8;         // M_M
    int frame_length = 64;     // N
    int rf_bs = 8;
    int rf_ms = 4;
    UpaGeometry bs_array{8, 8};
    UpaGeometry ms_array{4, 4};
    UpaGeometry ris_array{16, 16};
    PrecoderMode mode = PrecoderMode::Random;
    double tx_power = 0.1;  // watts
    double noise_var = 0.0; // watts
    // Configurations 2k and 2k+1 share the precoder and use opposite RIS
    // phases, which makes direct and cascaded sensing rows orthogonal.
    bool paired_ris_phases = false;
};

struct TrainingSet {
    std::vector<CMatrix> precoders_rf; // unit-modulus N_B x N_RF,B
    CMatrix precoder_bb;               // N_RF,B x N_RF,B, shared
    std::vector<CMatrix> precoders;    // F = F_RF F_BB
    std::vector<CMatrix> combiners_rf; // unit-modulus N_M x N_RF,M
    CMatrix combiner_bb;
    std::vector<CMatrix> combiners; // W = W_RF W_BB
    std::vector<CVector> ris_phases;
    CMatrix pilots; // N_RF,B x N, column n is s[n]
    double tx_power = 0.0;
    double noise_var = 0.0;

    int transmit_configs() const { return static_cast<int>(precoders.size()); }
    int combiner_count() const { return static_cast<int>(combiners.size()); }
    int frame_length() const { return static_cast<int>(pilots.cols()); }
    int streams() const { return static_cast<int>(pilots.rows()); }
    int rf_ms() const { return combiners.empty() ? 0 : static_cast<int>(combiners.front().cols()); }
};

inline bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

// Sylvester-ordered Hadamard matrix of order n.
inline Eigen::MatrixXd hadamard(int n)
{
    require(is_power_of_two(n), ErrorKind::ConfigError, "Hadamard order must be a power of two");
    Eigen::MatrixXd h(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            h(i, j) = (std::popcount(static_cast<unsigned>(i & j)) % 2 == 0) ? 1.0 : -1.0;
    return h;
}

namespace detail {

inline CMatrix random_phases(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
    CMatrix m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
        for (Eigen::Index r = 0; r < rows; ++r)
            m(r, c) = std::polar(1.0, phase(rng));
    return m;
}

} // namespace detail

inline TrainingSet generate_training_set(const TrainingConfig& cfg, const Node& bs,
                                         const std::optional<PropagationPath>& bs_ris_los, std::uint64_t seed)
{
    require(cfg.transmit_configs >= 1 && cfg.combiners >= 1, ErrorKind::ConfigError, "training counts must be positive");
    require(cfg.rf_bs >= 1 && cfg.rf_ms >= 1, ErrorKind::ConfigError, "RF chain counts must be positive");
    require(is_power_of_two(cfg.frame_length), ErrorKind::ConfigError, "frame length N must be a power of two");
    require(cfg.rf_bs <= cfg.frame_length, ErrorKind::ConfigError, "more streams than Hadamard rows");
    require(cfg.rf_ms <= cfg.ms_array.size(), ErrorKind::ConfigError, "more MS RF chains than antennas");
    require(cfg.mode == PrecoderMode::Random || bs_ris_los.has_value(), ErrorKind::ConfigError,
            "RIS-aimed precoders need the BS-RIS LoS path");
    require(!cfg.paired_ris_phases || cfg.transmit_configs % 2 == 0, ErrorKind::ConfigError,
            "paired RIS phases need an even number of transmit configurations");

    std::mt19937_64 rng(seed);
    TrainingSet ts;
    ts.tx_power = cfg.tx_power;
    ts.noise_var = cfg.noise_var;

    // distinct Hadamard rows, scaled so that (1/N) sum_n s[n] s[n]^H = I / N_s
    const int n = cfg.frame_length;
    const Eigen::MatrixXd h = hadamard(n);
    std::vector<int> rows(n);
    for (int i = 0; i < n; ++i)
        rows[i] = i;
    for (int i = 0; i < cfg.rf_bs; ++i) {
        std::uniform_int_distribution<int> pick(i, n - 1);
        std::swap(rows[i], rows[pick(rng)]);
    }
    ts.pilots.resize(cfg.rf_bs, n);
    for (int r = 0; r < cfg.rf_bs; ++r)
        ts.pilots.row(r) = h.row(rows[r]).cast<cplx>() / std::sqrt(static_cast<double>(cfg.rf_bs));

    const int n_bs = cfg.bs_array.size();
    CVector aimed;
    if (bs_ris_los)
        aimed = upa_response(bs.frame.to_local(bs_ris_los->departure), cfg.bs_array);
    const int n_aimed = cfg.mode == PrecoderMode::RisOnly ? cfg.rf_bs
                        : cfg.mode == PrecoderMode::Both  ? (cfg.rf_bs + 1) / 2
                                                          : 0;
    ts.precoder_bb = CMatrix::Identity(cfg.rf_bs, cfg.rf_bs) / std::sqrt(static_cast<double>(n_bs));
    for (int m = 0; m < cfg.transmit_configs; ++m) {
        if (cfg.paired_ris_phases && m % 2 == 1) {
            ts.precoders_rf.push_back(ts.precoders_rf.back());
            ts.precoders.push_back(ts.precoders.back());
            continue;
        }
        CMatrix rf = detail::random_phases(n_bs, cfg.rf_bs, rng);
        for (int c = 0; c < n_aimed; ++c)
            rf.col(c) = aimed;
        ts.precoders.push_back(rf * ts.precoder_bb);
        ts.precoders_rf.push_back(std::move(rf));
    }

    ts.combiner_bb = CMatrix::Identity(cfg.rf_ms, cfg.rf_ms);
    for (int m = 0; m < cfg.combiners; ++m) {
        ts.combiners_rf.push_back(detail::random_phases(cfg.ms_array.size(), cfg.rf_ms, rng));
        ts.combiners.push_back(ts.combiners_rf.back() * ts.combiner_bb);
    }

    for (int m = 0; m < cfg.transmit_configs; ++m) {
        if (cfg.paired_ris_phases && m % 2 == 1)
            ts.ris_phases.push_back(-ts.ris_phases.back());
        else
            ts.ris_phases.push_back(detail::random_phases(cfg.ris_array.size(), 1, rng).col(0));
    }
    return ts;
}

// Noiseless field at the MS antennas for transmit configuration m_B:
// column n is sum_d H_d F s[n - d], with s[n] = 0 before the frame starts.
inline CMatrix received_field(const ChannelTaps& h, const TrainingSet& ts, int mb)
{
    require(mb >= 0 && mb < ts.transmit_configs(), ErrorKind::ShapeMismatch, "transmit configuration out of range");
    const CMatrix& f = ts.precoders[mb];
    require(h.tx() == f.rows(), ErrorKind::ShapeMismatch, "channel and precoder disagree on BS antenna count");
    const int n = ts.frame_length();
    CMatrix field = CMatrix::Zero(h.rx(), n);
    for (int d = 0; d < h.depth() && d < n; ++d) {
        if (h.taps[d].isZero(0.0))
            continue;
        const CMatrix hf = h.taps[d] * f;
        field.rightCols(n - d).noalias() += hf * ts.pilots.leftCols(n - d);
    }
    return field;
}

// Row n of the result is (sqrt(Pt) W^H field[:, n] + W^H v[n])^T.
inline CMatrix combine_frame(const CMatrix& field, const TrainingSet& ts, int mm, std::mt19937_64* noise_rng)
{
    require(mm >= 0 && mm < ts.combiner_count(), ErrorKind::ShapeMismatch, "combiner index out of range");
    const CMatrix& w = ts.combiners[mm];
    require(field.rows() == w.rows(), ErrorKind::ShapeMismatch, "field and combiner disagree on MS antenna count");
    CMatrix received = std::sqrt(ts.tx_power) * field;
    if (noise_rng && ts.noise_var > 0.0) {
        std::normal_distribution<double> gauss(0.0, std::sqrt(ts.noise_var / 2.0));
        for (Eigen::Index c = 0; c < received.cols(); ++c)
            for (Eigen::Index r = 0; r < received.rows(); ++r) {
                const double re = gauss(*noise_rng);
                const double im = gauss(*noise_rng);
                received(r, c) += cplx{re, im};
            }
    }
    return (w.adjoint() * received).transpose();
}

inline CMatrix simulate_received_frame(const ChannelTaps& h, const TrainingSet& ts, int mb, int mm,
                                       std::mt19937_64* noise_rng)
{
    return combine_frame(received_field(h, ts, mb), ts, mm, noise_rng);
}

// Lower-triangular L with L L^H = W^H W.
inline CMatrix whitening_factor(const CMatrix& w)
{
    const CMatrix gram = w.adjoint() * w;
    Eigen::SelfAdjointEigenSolver<CMatrix> eig(gram, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    require(hi > 0.0 && lo >= 1e-12 * hi, ErrorKind::SingularCombiner, "combiner is not full column rank");
    Eigen::LLT<CMatrix> llt(gram);
    require(llt.info() == Eigen::Success, ErrorKind::SingularCombiner, "Cholesky factorization failed");
    return llt.matrixL();
}

struct WhitenedBlock {
    CMatrix block;
    CMatrix factor;
};

// Applies L^{-1} to every received vector (rows of `raw`).
inline WhitenedBlock whiten_block(const CMatrix& raw, const CMatrix& w)
{
    require(raw.cols() == w.cols(), ErrorKind::ShapeMismatch, "block width differs from combiner RF chains");
    WhitenedBlock out;
    out.factor = whitening_factor(w);
    out.block = out.factor.triangularView<Eigen::Lower>().solve(raw.transpose()).transpose();
    return out;
}

// Block (m_B, m_M) sits at row offset m_B * N and column offset m_M * N_RF,M.
struct ObservationBlock {
    CMatrix y;
    std::vector<CMatrix> whitening;
    int transmit_configs = 0;
    int combiners = 0;
    int frame_length = 0;
    int rf_ms = 0;

    CMatrix block(int mb, int mm) const
    {
        require(mb >= 0 && mb < transmit_configs && mm >= 0 && mm < combiners, ErrorKind::ShapeMismatch,
                "block index out of range");
        return y.block(static_cast<Eigen::Index>(mb) * frame_length, static_cast<Eigen::Index>(mm) * rf_ms,
                       frame_length, rf_ms);
    }
};

// `blocks` is indexed m_B * M_M + m_M; an empty matrix marks a missing block.
inline ObservationBlock assemble_observation(const std::vector<CMatrix>& blocks, int transmit_configs, int combiners,
                                             std::vector<CMatrix> whitening = {})
{
    require(transmit_configs >= 1 && combiners >= 1, ErrorKind::ShapeMismatch, "empty block grid");
    require(blocks.size() == static_cast<std::size_t>(transmit_configs) * combiners, ErrorKind::MissingBlock,
            "expected " + std::to_string(transmit_configs * combiners) + " blocks, got " + std::to_string(blocks.size()));
    for (std::size_t i = 0; i < blocks.size(); ++i)
        require(blocks[i].size() > 0, ErrorKind::MissingBlock, "block " + std::to_string(i) + " is missing");

    ObservationBlock obs;
    obs.transmit_configs = transmit_configs;
    obs.combiners = combiners;
    obs.frame_length = static_cast<int>(blocks.front().rows());
    obs.rf_ms = static_cast<int>(blocks.front().cols());
    obs.whitening = std::move(whitening);
    obs.y.resize(static_cast<Eigen::Index>(transmit_configs) * obs.frame_length,
                 static_cast<Eigen::Index>(combiners) * obs.rf_ms);
    for (int mb = 0; mb < transmit_configs; ++mb)
        for (int mm = 0; mm < combiners; ++mm) {
            const CMatrix& b = blocks[static_cast<std::size_t>(mb) * combiners + mm];
            require(b.rows() == obs.frame_length && b.cols() == obs.rf_ms, ErrorKind::ShapeMismatch,
                    "observation blocks differ in shape");
            obs.y.block(static_cast<Eigen::Index>(mb) * obs.frame_length, static_cast<Eigen::Index>(mm) * obs.rf_ms,
                        obs.frame_length, obs.rf_ms) = b;
        }
    return obs;
}

struct Sounding {
    ObservationBlock observation; // whitened, with noise
    CMatrix noiseless;            // whitened, noise-free counterpart of observation.y
};

// Runs every training frame. `channel(m_B)` yields the overall taps seen by
// transmit configuration m_B; noise is drawn frame by frame in (m_B, m_M) order.
inline Sounding sound_channel(const std::function<ChannelTaps(int)>& channel, const TrainingSet& ts,
                              std::mt19937_64* noise_rng)
{
    const int mbs = ts.transmit_configs();
    const int mms = ts.combiner_count();
    std::vector<CMatrix> factors;
    for (int mm = 0; mm < mms; ++mm)
        factors.push_back(whitening_factor(ts.combiners[mm]));

    std::vector<CMatrix> noisy(static_cast<std::size_t>(mbs) * mms);
    std::vector<CMatrix> clean(noisy.size());
    for (int mb = 0; mb < mbs; ++mb) {
        const CMatrix field = received_field(channel(mb), ts, mb);
        for (int mm = 0; mm < mms; ++mm) {
            const auto lower = factors[mm].triangularView<Eigen::Lower>();
            const std::size_t k = static_cast<std::size_t>(mb) * mms + mm;
            noisy[k] = lower.solve(combine_frame(field, ts, mm, noise_rng).transpose()).transpose();
            clean[k] = lower.solve(combine_frame(field, ts, mm, nullptr).transpose()).transpose();
        }
    }
    Sounding s;
    s.observation = assemble_observation(noisy, mbs, mms, factors);
    s.noiseless = assemble_observation(clean, mbs, mms).y;
    return s;
}

} // namespace momploc

#endif
