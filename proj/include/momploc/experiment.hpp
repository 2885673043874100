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

#ifndef MOMPLOC_EXPERIMENT_HPP
#define MOMPLOC_EXPERIMENT_HPP

#include "localization.hpp"
#include "sounding.hpp"

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace momploc {

enum class Mode { BmOnly, RisOnly, Both };

inline std::string_view to_string(Mode m)
{
    switch (m) {
    case Mode::BmOnly: return "bm-only";
    case Mode::RisOnly: return "ris-only";
    case Mode::Both: return "both";
    }
    return "unknown";
}

inline Mode mode_from_string(std::string_view s)
{
    for (Mode m : {Mode::BmOnly, Mode::RisOnly, Mode::Both})
        if (to_string(m) == s)
            return m;
    fail(ErrorKind::ConfigError, "unknown mode '" + std::string(s) + "'");
}

inline double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

struct SampleRegion {
    double x_min = -10.0;
    double x_max = 0.0;
    double y_min = -15.0;
    double y_max = -5.0;
    double z = 1.5;
};

struct SolverSettings {
    int max_paths = 0;            // 0: 10 per source in use
    int max_paths_per_source = 0; // 0: 10 when both sources compete, else no cap
    double residual_tol = 1e-3;
    int max_sweeps = 3;
    int coarse_starts = 4;
    long long exhaustive_atoms = 4096;
    bool noise_aware = true; // replace the relative-reduction stop by a detection threshold
    double detection_factor = 2.0;
};

struct ExperimentConfig {
    Scene scene = Scene::indoor_factory();
    SampleRegion region;
    int rf_bs = 8;
    int rf_ms = 4;
    int transmit_configs = 0; // 0: half the sensed elements (BS for bm-only, RIS otherwise)
    int combiners = 0;        // 0: half the MS elements
    int frame_length = 64;
    int taps = 32;
    double tx_power_dbm = 20.0;
    double noise_dbm = -94.0;
    double bandwidth_mhz = 100.0;
    DictionaryRatios ratios;
    SolverSettings solver;
    LocalizationOptions localization;
    Mode mode = Mode::Both;
    int trials = 100;
    std::uint64_t seed = 1;
    double blockage_prob = 0.2; // per-trial chance that the BS-MS LoS is blocked
    double t0_max_fraction = 0.25; // t0 drawn up to this fraction of the D Ts window
    bool paired_ris_phases = true; // used in mode both only

    double sampling_period() const { return 1.0 / (bandwidth_mhz * 1e6); }
    double tx_power() const { return dbm_to_watts(tx_power_dbm); }
    double noise_var() const { return std::isinf(noise_dbm) && noise_dbm < 0 ? 0.0 : dbm_to_watts(noise_dbm); }
    bool uses_bm() const { return mode != Mode::RisOnly; }
    bool uses_ris() const { return mode != Mode::BmOnly; }

    int resolved_transmit_configs() const
    {
        if (transmit_configs > 0)
            return transmit_configs;
        return std::max(1, (mode == Mode::BmOnly ? scene.bs.array.size() : scene.ris.array.size()) / 2);
    }
    int resolved_combiners() const { return combiners > 0 ? combiners : std::max(1, scene.ms.array.size() / 2); }
    int resolved_max_paths() const
    {
        if (solver.max_paths > 0)
            return solver.max_paths;
        return mode == Mode::Both ? 20 : 10;
    }
    int resolved_max_paths_per_source() const
    {
        if (solver.max_paths_per_source > 0)
            return solver.max_paths_per_source;
        return mode == Mode::Both ? 10 : 0;
    }

    PulseShape pulse() const { return PulseShape::sinc(sampling_period(), taps); }

    void validate() const
    {
        scene.validate();
        require(rf_bs >= 1 && rf_ms >= 1 && frame_length >= 1 && taps >= 1 && trials >= 1, ErrorKind::ConfigError,
                "counts must be positive");
        require(transmit_configs >= 0 && combiners >= 0, ErrorKind::ConfigError, "training counts must be non-negative");
        require(bandwidth_mhz > 0.0 && std::isfinite(tx_power_dbm), ErrorKind::ConfigError, "invalid power or bandwidth");
        require(ratios.x >= 1 && ratios.y >= 1 && ratios.delay >= 1, ErrorKind::ConfigError, "dictionary ratios must be >= 1");
        require(blockage_prob >= 0.0 && blockage_prob <= 1.0, ErrorKind::ConfigError, "blockage probability outside [0, 1]");
        require(t0_max_fraction >= 0.0 && t0_max_fraction <= 1.0, ErrorKind::ConfigError, "t0 fraction outside [0, 1]");
        require(region.x_min <= region.x_max && region.y_min <= region.y_max, ErrorKind::ConfigError, "empty sampling region");
        require(solver.max_paths >= 0 && solver.max_paths_per_source >= 0 && solver.max_sweeps >= 1 && solver.residual_tol >= 0.0 && solver.coarse_starts >= 0 && solver.exhaustive_atoms >= 0 &&
                    solver.detection_factor > 0.0,
                ErrorKind::ConfigError, "invalid solver settings");
        require(!scene.blockage.bs_ris || mode == Mode::BmOnly, ErrorKind::ConfigError,
                "RIS modes need the BS-RIS LoS path");
        for (const Vec3& p : {Vec3(region.x_min, region.y_min, region.z), Vec3(region.x_max, region.y_max, region.z)})
            require(scene.room.contains(p), ErrorKind::ConfigError, "sampling region leaves the room");
    }
};

// splitmix64 finalizer; trial and stream seeds are derived from it.
inline std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

enum class Stream : std::uint64_t { Position = 1, Blockage = 2, ClockOffset = 3, Training = 4, Noise = 5 };

inline std::uint64_t trial_seed(std::uint64_t seed, int trial, Stream stream)
{
    const std::uint64_t base = splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(trial)));
    return splitmix64(base + static_cast<std::uint64_t>(stream));
}

// Dictionaries depend only on the array sizes, pulse and ratios, so one
// context serves every trial.
struct TrialContext {
    PulseShape pulse;
    std::optional<MultiDictionary> bm_dict;
    std::optional<MultiDictionary> brm_dict;

    static TrialContext make(const ExperimentConfig& cfg)
    {
        TrialContext ctx;
        ctx.pulse = cfg.pulse();
        if (cfg.uses_bm())
            ctx.bm_dict = build_bm_dictionaries(cfg.scene.bs.array, ctx.pulse, cfg.ratios);
        if (cfg.uses_ris())
            ctx.brm_dict = build_brm_dictionaries(cfg.scene.ris.array, ctx.pulse, cfg.ratios);
        return ctx;
    }
};

struct TrialRecord {
    int trial = 0;
    Mode mode = Mode::Both;
    bool ok = false;
    std::string status = "ok"; // error kind name on failure
    std::string message;
    std::optional<FixMethod> method;
    Vec3 truth = Vec3::Zero();
    double t0 = 0.0;
    Vec3 estimate = Vec3::Constant(std::numeric_limits<double>::quiet_NaN());
    double t0_hat = std::numeric_limits<double>::quiet_NaN();
    double error = std::numeric_limits<double>::infinity();
    double nmse = std::numeric_limits<double>::quiet_NaN();
    double fix_residual = std::numeric_limits<double>::quiet_NaN();
    int iterations = 0;
    int bm_paths = 0;
    int brm_paths = 0;
    bool bs_ms_blocked = false;
    double wall_ms = 0.0; // kept out of the deterministic outputs
};

// Geometry, clock offset and training of one trial, all fixed by (seed, trial).
struct TrialSetup {
    int trial = 0;
    Scene scene;
    bool bs_ms_blocked = false;
    std::vector<PropagationPath> bm_paths, br_paths, rm_paths;
    std::optional<PropagationPath> br_los;
    bool bm_los = false;
    bool rm_los = false;
    double t0 = 0.0;
    TrainingSet training;
};

// Sensing operators of the sources in use, tied to a setup and a context.
struct TrialOperators {
    std::optional<SensingOperator> bm, brm;
    std::vector<SourceModel> models;
};

namespace detail {

inline std::optional<PropagationPath> los_of(const std::vector<PropagationPath>& paths)
{
    for (const auto& p : paths)
        if (p.label == PathLabel::LoS)
            return p;
    return std::nullopt;
}

} // namespace detail

inline TrialSetup prepare_trial(const ExperimentConfig& cfg, int trial)
{
    TrialSetup st;
    st.trial = trial;
    Scene& scene = st.scene;
    scene = cfg.scene;
    {
        std::mt19937_64 rng(trial_seed(cfg.seed, trial, Stream::Position));
        std::uniform_real_distribution<double> ux(cfg.region.x_min, cfg.region.x_max);
        std::uniform_real_distribution<double> uy(cfg.region.y_min, cfg.region.y_max);
        const double x = ux(rng);
        const double y = uy(rng);
        scene.ms.position = {x, y, cfg.region.z};
    }
    {
        std::mt19937_64 rng(trial_seed(cfg.seed, trial, Stream::Blockage));
        std::bernoulli_distribution blocked(cfg.blockage_prob);
        st.bs_ms_blocked = scene.blockage.bs_ms || blocked(rng);
        scene.blockage.bs_ms = st.bs_ms_blocked;
    }

    if (cfg.uses_bm())
        st.bm_paths = trace_link(scene, Link::BsMs);
    if (cfg.uses_ris()) {
        st.br_paths = trace_link(scene, Link::BsRis);
        st.rm_paths = trace_link(scene, Link::RisMs);
        st.br_los = detail::los_of(st.br_paths);
        require(st.br_los.has_value(), ErrorKind::NoLoSPath, "BS-RIS LoS path is missing");
    }
    st.bm_los = cfg.uses_bm() && detail::los_of(st.bm_paths).has_value();
    st.rm_los = cfg.uses_ris() && detail::los_of(st.rm_paths).has_value();

    // clock offset, capped by the earliest arrival so relative delays stay non-negative
    double earliest = std::numeric_limits<double>::infinity();
    for (const auto& p : st.bm_paths)
        earliest = std::min(earliest, p.delay);
    if (st.br_los)
        for (const auto& p : st.rm_paths)
            earliest = std::min(earliest, st.br_los->delay + p.delay);
    require(std::isfinite(earliest), ErrorKind::NoLoSPath, "no propagation path reaches the MS");
    {
        std::mt19937_64 rng(trial_seed(cfg.seed, trial, Stream::ClockOffset));
        const double cap = std::min(cfg.t0_max_fraction * cfg.taps * cfg.sampling_period(), earliest);
        st.t0 = std::uniform_real_distribution<double>(0.0, cap)(rng);
    }

    TrainingConfig tc;
    tc.transmit_configs = cfg.resolved_transmit_configs();
    tc.combiners = cfg.resolved_combiners();
    tc.frame_length = cfg.frame_length;
    tc.rf_bs = cfg.rf_bs;
    tc.rf_ms = cfg.rf_ms;
    tc.bs_array = scene.bs.array;
    tc.ms_array = scene.ms.array;
    tc.ris_array = scene.ris.array;
    tc.mode = cfg.mode == Mode::BmOnly    ? PrecoderMode::Random
              : cfg.mode == Mode::RisOnly ? PrecoderMode::RisOnly
                                          : PrecoderMode::Both;
    tc.tx_power = cfg.tx_power();
    tc.noise_var = cfg.noise_var();
    tc.paired_ris_phases = cfg.mode == Mode::Both && cfg.paired_ris_phases && tc.transmit_configs % 2 == 0;
    st.training = generate_training_set(tc, scene.bs, st.br_los, trial_seed(cfg.seed, trial, Stream::Training));
    return st;
}

inline Sounding sound_trial(const ExperimentConfig& cfg, const TrialContext& ctx, const TrialSetup& st)
{
    const Scene& scene = st.scene;
    const TrainingSet& ts = st.training;
    std::optional<ChannelTaps> bm_taps;
    if (cfg.uses_bm())
        bm_taps = assemble_bm_taps(st.bm_paths, scene.bs, scene.ms, ctx.pulse, st.t0);
    auto channel = [&](int mb) {
        if (!cfg.uses_ris())
            return *bm_taps;
        ChannelTaps h =
            assemble_brm_taps(st.br_paths, st.rm_paths, ts.ris_phases[mb], scene.bs, scene.ris, scene.ms, ctx.pulse, st.t0);
        return bm_taps ? overall_taps(*bm_taps, h) : h;
    };
    std::mt19937_64 noise_rng(trial_seed(cfg.seed, st.trial, Stream::Noise));
    return sound_channel(channel, ts, &noise_rng);
}

// The returned models point into `ops` and `ctx`.
inline void build_operators(const ExperimentConfig& cfg, const TrialContext& ctx, const TrialSetup& st, TrialOperators& ops)
{
    ops = {};
    if (cfg.uses_bm())
        ops.bm = build_bm_sensing(st.training, st.scene.bs.array, cfg.taps);
    if (cfg.uses_ris())
        ops.brm = build_brm_sensing(st.training, *st.br_los, st.scene.bs, st.scene.ris, cfg.taps);
    if (ops.bm)
        ops.models.push_back({&*ops.bm, &*ctx.bm_dict});
    if (ops.brm)
        ops.models.push_back({&*ops.brm, &*ctx.brm_dict});
}

inline MompOptions solver_options(const ExperimentConfig& cfg, double noise_var)
{
    MompOptions mo;
    mo.max_paths = cfg.resolved_max_paths();
    mo.max_paths_per_source = cfg.resolved_max_paths_per_source();
    mo.max_sweeps = cfg.solver.max_sweeps;
    mo.coarse_starts = cfg.solver.coarse_starts;
    mo.exhaustive_atoms = cfg.solver.exhaustive_atoms;
    mo.residual_tol = cfg.solver.residual_tol;
    if (cfg.solver.noise_aware && noise_var > 0.0) {
        mo.residual_tol = 0.0;
        mo.noise_var = noise_var;
        mo.detection_factor = cfg.solver.detection_factor;
    }
    return mo;
}

inline std::vector<PathEstimate> estimates_from(const MompResult& sol, const TrialOperators& ops, const Scene& scene)
{
    return extract_path_estimates(sol, ops.models, {scene.bs.frame, scene.bs.z_sign_prior()},
                                  {scene.ris.frame, scene.ris.z_sign_prior()}, true);
}

// Mode-dependent localization branch. The LoS availability flags come from
// the scene (genie knowledge of which links are in LoS).
inline PositionFix localize_estimates(const ExperimentConfig& cfg, const Scene& scene, bool bm_los, bool rm_los,
                                      const std::vector<PathEstimate>& estimates)
{
    const LocalizationOptions& lo = cfg.localization;
    const double c = scene.speed_of_light;
    switch (cfg.mode) {
    case Mode::BmOnly:
        require(bm_los, ErrorKind::NoLoSPath, "BS-MS LoS is blocked");
        return localize_one_los(scene.bs.position, estimates, Source::BM, lo, c);
    case Mode::RisOnly:
        require(rm_los, ErrorKind::NoLoSPath, "RIS-MS LoS is blocked");
        return localize_one_los(scene.ris.position, estimates, Source::BRM, lo, c);
    case Mode::Both:
        if (bm_los && rm_los)
            return localize_two_los({scene.bs.position, scene.ris.position, c}, estimates, lo);
        if (rm_los)
            return localize_one_los(scene.ris.position, estimates, Source::BRM, lo, c);
        require(bm_los, ErrorKind::NoLoSPath, "no LoS path to the MS");
        return localize_one_los(scene.bs.position, estimates, Source::BM, lo, c);
    }
    fail(ErrorKind::ConfigError, "unknown mode");
}

// Everything a trial produced, for callers that need more than the record.
struct TrialArtifacts {
    std::optional<TrialSetup> setup;
    std::optional<Sounding> sounding;
    std::optional<MompResult> solution;
    std::vector<PathEstimate> estimates;
    std::optional<PositionFix> fix;
};

namespace detail {

inline void run_trial_body(const ExperimentConfig& cfg, const TrialContext& ctx, TrialRecord& rec, TrialArtifacts& art)
{
    art.setup = prepare_trial(cfg, rec.trial);
    const TrialSetup& st = *art.setup;
    rec.truth = st.scene.ms.position;
    rec.t0 = st.t0;
    rec.bs_ms_blocked = st.bs_ms_blocked;
    // fail early when the LoS the mode relies on is missing
    if (cfg.mode == Mode::BmOnly)
        require(st.bm_los, ErrorKind::NoLoSPath, "BS-MS LoS is blocked");
    if (cfg.mode == Mode::RisOnly)
        require(st.rm_los, ErrorKind::NoLoSPath, "RIS-MS LoS is blocked");

    art.sounding = sound_trial(cfg, ctx, st);
    TrialOperators ops;
    build_operators(cfg, ctx, st, ops);
    art.solution = momp_estimate(art.sounding->observation.y, ops.models, solver_options(cfg, st.training.noise_var));
    const MompResult& sol = *art.solution;
    rec.iterations = sol.iterations;
    if (art.sounding->noiseless.squaredNorm() > 0.0)
        rec.nmse = reconstruction_nmse(sol, art.sounding->noiseless);
    require(!sol.support.empty(), ErrorKind::NoLoSPath, "no path detected");

    art.estimates = estimates_from(sol, ops, st.scene);
    for (const auto& e : art.estimates)
        (e.source == Source::BM ? rec.bm_paths : rec.brm_paths)++;

    art.fix = localize_estimates(cfg, st.scene, st.bm_los, st.rm_los, art.estimates);
    rec.method = art.fix->method;
    rec.estimate = art.fix->position;
    rec.t0_hat = art.fix->t0;
    rec.fix_residual = art.fix->residual;
    rec.error = (art.fix->position - rec.truth).norm();
    rec.ok = true;
}

} // namespace detail

// One Monte-Carlo trial. Library errors become a failure record.
inline TrialRecord run_trial(const ExperimentConfig& cfg, const TrialContext& ctx, int trial, TrialArtifacts* artifacts = nullptr)
{
    TrialRecord rec;
    rec.trial = trial;
    rec.mode = cfg.mode;
    TrialArtifacts local;
    TrialArtifacts& art = artifacts ? *artifacts : local;
    const auto start = std::chrono::steady_clock::now();
    try {
        detail::run_trial_body(cfg, ctx, rec, art);
    } catch (const Error& e) {
        rec.ok = false;
        rec.status = std::string(to_string(e.kind()));
        rec.message = e.what();
        rec.error = std::numeric_limits<double>::infinity();
    }
    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return rec;
}

// Nearest-rank percentile, p in (0, 1]. Infinite entries take part.
inline double percentile(std::vector<double> values, double p)
{
    require(!values.empty(), ErrorKind::EmptyInput, "percentile of an empty set");
    require(p > 0.0 && p <= 1.0, ErrorKind::InvalidInput, "percentile outside (0, 1]");
    std::sort(values.begin(), values.end());
    const auto rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(values.size())));
    return values[std::max<std::size_t>(rank, 1) - 1];
}

struct ExperimentSummary {
    int trials = 0;
    int failures = 0;
    double median = 0.0;
    double p80 = 0.0;
    double p90 = 0.0;
    double mean_nmse = std::numeric_limits<double>::quiet_NaN();
    std::map<std::string, int> methods;
    std::map<std::string, int> failure_kinds;
};

inline ExperimentSummary summarize(const std::vector<TrialRecord>& records)
{
    require(!records.empty(), ErrorKind::EmptyInput, "no trial records");
    ExperimentSummary s;
    std::vector<double> errors;
    double nmse_sum = 0.0;
    int nmse_count = 0;
    for (const auto& r : records) {
        errors.push_back(r.error);
        if (!r.ok) {
            ++s.failures;
            ++s.failure_kinds[r.status];
        }
        if (r.method)
            ++s.methods[std::string(to_string(*r.method))];
        if (std::isfinite(r.nmse)) {
            nmse_sum += r.nmse;
            ++nmse_count;
        }
    }
    s.trials = static_cast<int>(records.size());
    s.median = percentile(errors, 0.5);
    s.p80 = percentile(errors, 0.8);
    s.p90 = percentile(errors, 0.9);
    if (nmse_count > 0)
        s.mean_nmse = nmse_sum / nmse_count;
    return s;
}

struct ExperimentResult {
    std::vector<TrialRecord> records;
    ExperimentSummary summary;
};

inline ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                       const std::function<void(const TrialRecord&)>& on_trial = {})
{
    cfg.validate();
    const TrialContext ctx = TrialContext::make(cfg);
    ExperimentResult out;
    for (int t = 0; t < cfg.trials; ++t) {
        out.records.push_back(run_trial(cfg, ctx, t));
        if (on_trial)
            on_trial(out.records.back());
    }
    out.summary = summarize(out.records);
    return out;
}

struct CdfPoint {
    double value = 0.0;
    double probability = 0.0;
};

// Right-continuous empirical CDF: one point per distinct value, holding the
// fraction of samples <= value. Infinite samples (failures) are allowed.
inline std::vector<CdfPoint> empirical_cdf(std::vector<double> errors)
{
    require(!errors.empty(), ErrorKind::EmptyInput, "empty error list");
    for (double e : errors)
        require(!std::isnan(e), ErrorKind::InvalidInput, "NaN in error list");
    std::sort(errors.begin(), errors.end());
    std::vector<CdfPoint> out;
    const double n = static_cast<double>(errors.size());
    for (std::size_t i = 0; i < errors.size(); ++i) {
        if (i + 1 < errors.size() && errors[i + 1] == errors[i])
            continue;
        out.push_back({errors[i], static_cast<double>(i + 1) / n});
    }
    return out;
}

} // namespace momploc

#endif
