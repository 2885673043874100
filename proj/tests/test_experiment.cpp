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

#include "support.hpp"

#include <gtest/gtest.h>

#include <set>
#include <sstream>

using namespace momploc;
using namespace momploc::testing;

namespace {

// Small arrays and short windows so a hundred trials take seconds.
ExperimentConfig cheap_config(Mode mode)
{
    ExperimentConfig cfg;
    cfg.scene.bs.array = {4, 4};
    cfg.scene.ris.array = {6, 6};
    cfg.scene.ms.array = {2, 2};
    cfg.rf_bs = 4;
    cfg.rf_ms = 2;
    cfg.frame_length = 32;
    cfg.taps = 16;
    cfg.bandwidth_mhz = 50.0;
    cfg.ratios = {2, 2, 2};
    cfg.mode = mode;
    cfg.trials = 100;
    cfg.seed = 7;
    return cfg;
}

std::string records_text(const std::vector<TrialRecord>& r)
{
    std::ostringstream os;
    write_records_csv(os, r);
    write_fixes_csv(os, fixes_from_records(r));
    return os.str();
}

template <class F>
ErrorKind kind_of(F&& f)
{
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    ADD_FAILURE() << "no error raised";
    return ErrorKind::InvalidInput;
}

} // namespace

TEST(Experiment, OnGridNoiselessTrialIsExact)
{
    const OnGridCase oc = make_on_grid_case();
    const TrialContext ctx = TrialContext::make(oc.cfg);
    const TrialRecord r = run_trial(oc.cfg, ctx, 0);
    ASSERT_TRUE(r.ok) << r.message;
    EXPECT_LE(r.error, 1e-6);
    ASSERT_TRUE(r.method);
    EXPECT_EQ(*r.method, FixMethod::TwoLos);
    EXPECT_NEAR(r.t0_hat, 0.0, 1e-15);
    EXPECT_LE(r.nmse, 1e-10);
    EXPECT_EQ(r.bm_paths, 1);
    EXPECT_EQ(r.brm_paths, 1);
}

TEST(Experiment, SameSeedSameRecord)
{
    const ExperimentConfig cfg = cheap_config(Mode::Both);
    const TrialContext ctx = TrialContext::make(cfg);
    for (int t : {0, 3}) {
        const TrialRecord a = run_trial(cfg, ctx, t), b = run_trial(cfg, ctx, t);
        EXPECT_EQ(records_text({a}), records_text({b}));
        EXPECT_EQ(a.status, b.status);
        EXPECT_EQ(a.error, b.error);
    }
    ExperimentConfig other = cfg;
    other.seed = 8;
    EXPECT_NE(prepare_trial(cfg, 0).scene.ms.position, prepare_trial(other, 0).scene.ms.position);
    EXPECT_NE(prepare_trial(cfg, 0).scene.ms.position, prepare_trial(cfg, 1).scene.ms.position);
}

TEST(Experiment, BlockedBmOnlyReportsNoLoS)
{
    ExperimentConfig cfg = cheap_config(Mode::BmOnly);
    cfg.blockage_prob = 1.0;
    cfg.trials = 3;
    const auto res = run_experiment(cfg);
    ASSERT_EQ(res.records.size(), 3u);
    for (const auto& r : res.records) {
        EXPECT_FALSE(r.ok);
        EXPECT_EQ(r.status, "NoLoSPath");
        EXPECT_TRUE(std::isinf(r.error));
        EXPECT_TRUE(r.bs_ms_blocked);
    }
    EXPECT_EQ(res.summary.failures, 3);
    EXPECT_EQ(res.summary.failure_kinds.at("NoLoSPath"), 3);
}

TEST(Experiment, HundredTrialsGiveHundredRecords)
{
    const auto res = run_experiment(cheap_config(Mode::BmOnly));
    ASSERT_EQ(res.records.size(), 100u);
    EXPECT_EQ(res.summary.trials, 100);
    for (int t = 0; t < 100; ++t)
        EXPECT_EQ(res.records[static_cast<std::size_t>(t)].trial, t);
    std::vector<double> errors;
    for (const auto& r : res.records)
        errors.push_back(r.error);
    EXPECT_EQ(res.summary.median, percentile(errors, 0.5));
    EXPECT_EQ(res.summary.p80, percentile(errors, 0.8));
    EXPECT_EQ(res.summary.p90, percentile(errors, 0.9));
    EXPECT_GT(res.summary.trials - res.summary.failures, 50);
}

TEST(Experiment, BatchOutputIsDeterministic)
{
    ExperimentConfig cfg = cheap_config(Mode::RisOnly);
    cfg.trials = 12;
    EXPECT_EQ(records_text(run_experiment(cfg).records), records_text(run_experiment(cfg).records));
}

TEST(Experiment, MoreNoiseDoesNotHelp)
{
    ExperimentConfig cfg = cheap_config(Mode::BmOnly);
    cfg.noise_dbm = -80.0;
    const double quiet = run_experiment(cfg).summary.median;
    cfg.noise_dbm += 10.0 * std::log10(2.0);
    const double loud = run_experiment(cfg).summary.median;
    EXPECT_GE(loud, quiet);
}

TEST(Percentile, NearestRank)
{
    EXPECT_EQ(percentile({3.0, 1.0, 2.0}, 0.5), 2.0);
    EXPECT_EQ(percentile({1, 2, 3, 4, 5, 6, 7, 8, 9, 10}, 0.8), 8.0);
    EXPECT_EQ(percentile({1.0}, 0.01), 1.0);
    const double inf = std::numeric_limits<double>::infinity();
    EXPECT_EQ(percentile({1.0, inf, inf}, 0.5), inf);
    EXPECT_EQ(kind_of([] { percentile({}, 0.5); }), ErrorKind::EmptyInput);
    EXPECT_EQ(kind_of([] { percentile({1.0}, 0.0); }), ErrorKind::InvalidInput);
}

TEST(Cdf, Examples)
{
    const auto a = empirical_cdf({3.0, 1.0, 2.0});
    ASSERT_EQ(a.size(), 3u);
    for (int i = 0; i < 3; ++i) {
        EXPECT_EQ(a[static_cast<std::size_t>(i)].value, i + 1.0);
        EXPECT_DOUBLE_EQ(a[static_cast<std::size_t>(i)].probability, (i + 1) / 3.0);
    }
    const auto b = empirical_cdf({5.0, 5.0, 5.0});
    ASSERT_EQ(b.size(), 1u);
    EXPECT_EQ(b[0].value, 5.0);
    EXPECT_EQ(b[0].probability, 1.0);
    EXPECT_EQ(kind_of([] { empirical_cdf({}); }), ErrorKind::EmptyInput);
    EXPECT_EQ(kind_of([] { empirical_cdf({1.0, std::nan("")}); }), ErrorKind::InvalidInput);
    const auto c = empirical_cdf({std::numeric_limits<double>::infinity(), 1.0});
    EXPECT_EQ(c.back().probability, 1.0);
    EXPECT_EQ(c.front().probability, 0.5);
}

TEST(Cdf, MonotoneAndEndsAtOne)
{
    std::mt19937_64 rng(1);
    std::exponential_distribution<double> e(1.0);
    std::uniform_int_distribution<int> n(1, 200);
    for (int k = 0; k < 50; ++k) {
        std::vector<double> v(static_cast<std::size_t>(n(rng)));
        for (auto& x : v)
            x = std::round(e(rng) * 4.0) / 4.0; // plenty of repeats
        const auto cdf = empirical_cdf(v);
        for (std::size_t i = 1; i < cdf.size(); ++i) {
            EXPECT_GT(cdf[i].value, cdf[i - 1].value);
            EXPECT_GT(cdf[i].probability, cdf[i - 1].probability);
        }
        EXPECT_DOUBLE_EQ(cdf.back().probability, 1.0);
        for (const auto& p : cdf) {
            const auto below = std::count_if(v.begin(), v.end(), [&](double x) { return x <= p.value; });
            EXPECT_DOUBLE_EQ(p.probability, static_cast<double>(below) / static_cast<double>(v.size()));
        }
    }
}

TEST(Config, ModeNamesAndSeeds)
{
    for (Mode m : {Mode::BmOnly, Mode::RisOnly, Mode::Both})
        EXPECT_EQ(mode_from_string(to_string(m)), m);
    EXPECT_EQ(kind_of([] { mode_from_string("dual"); }), ErrorKind::ConfigError);

    EXPECT_EQ(trial_seed(1, 2, Stream::Noise), trial_seed(1, 2, Stream::Noise));
    std::set<std::uint64_t> seen;
    for (int t = 0; t < 50; ++t)
        for (Stream s : {Stream::Position, Stream::Blockage, Stream::ClockOffset, Stream::Training, Stream::Noise})
            seen.insert(trial_seed(1, t, s));
    EXPECT_EQ(seen.size(), 250u);
    // reference value of the standard splitmix64 step from state 0
    EXPECT_EQ(splitmix64(0), 0xE220A8397B1DCDAFULL);
}

TEST(Config, DefaultsAndValidation)
{
    ExperimentConfig cfg;
    EXPECT_NO_THROW(cfg.validate());
    EXPECT_EQ(cfg.resolved_transmit_configs(), 128);
    EXPECT_EQ(cfg.resolved_combiners(), 8);
    EXPECT_EQ(cfg.resolved_max_paths(), 20);
    EXPECT_EQ(cfg.resolved_max_paths_per_source(), 10);
    cfg.mode = Mode::BmOnly;
    EXPECT_EQ(cfg.resolved_transmit_configs(), 32);
    EXPECT_EQ(cfg.resolved_max_paths(), 10);
    EXPECT_EQ(cfg.resolved_max_paths_per_source(), 0);
    EXPECT_NEAR(cfg.sampling_period(), 1e-8, 1e-22);

    ExperimentConfig bad;
    bad.blockage_prob = 1.5;
    EXPECT_EQ(kind_of([&] { bad.validate(); }), ErrorKind::ConfigError);
    bad = {};
    bad.region.z = 20.0;
    EXPECT_EQ(kind_of([&] { bad.validate(); }), ErrorKind::ConfigError);
    bad = {};
    bad.scene.blockage.bs_ris = true;
    EXPECT_EQ(kind_of([&] { bad.validate(); }), ErrorKind::ConfigError);
    bad.mode = Mode::BmOnly;
    EXPECT_NO_THROW(bad.validate());
}

TEST(Config, NoiseAwareOptions)
{
    ExperimentConfig cfg;
    const MompOptions quiet = solver_options(cfg, 0.0);
    EXPECT_EQ(quiet.noise_var, 0.0);
    EXPECT_EQ(quiet.residual_tol, cfg.solver.residual_tol);
    const MompOptions noisy = solver_options(cfg, 1e-12);
    EXPECT_EQ(noisy.noise_var, 1e-12);
    EXPECT_EQ(noisy.residual_tol, 0.0);
    cfg.solver.noise_aware = false;
    EXPECT_EQ(solver_options(cfg, 1e-12).noise_var, 0.0);
}
