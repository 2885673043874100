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

// Command-line front end: scene simulation, sounding, estimation,
// localization, Monte-Carlo experiments and CDF export.

#include "momploc/momploc.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using namespace momploc;

namespace {

struct CommonArgs {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> mode;
    std::optional<int> trials;
    std::optional<int> ris_size;
    std::optional<int> ratio;
    std::string out = ".";
    int trial = 0;
};

void add_common(CLI::App* app, CommonArgs& a, bool with_trial)
{
    app->add_option("--config", a.config, "JSON configuration file");
    app->add_option("--seed", a.seed, "RNG seed");
    app->add_option("--mode", a.mode, "bm-only, ris-only or both");
    app->add_option("--ris-size", a.ris_size, "RIS elements per side");
    app->add_option("--ratio", a.ratio, "dictionary oversampling ratio (all dimensions)");
    app->add_option("--out", a.out, "output directory");
    if (with_trial)
        app->add_option("--trial", a.trial, "trial index whose draws are used")->check(CLI::NonNegativeNumber);
}

ExperimentConfig load_config(const CommonArgs& a)
{
    ExperimentConfig cfg = a.config.empty() ? ExperimentConfig{} : load_experiment_config(a.config);
    if (a.seed)
        cfg.seed = *a.seed;
    if (a.mode)
        cfg.mode = mode_from_string(*a.mode);
    if (a.trials)
        cfg.trials = *a.trials;
    if (a.ris_size) {
        require(*a.ris_size >= 1, ErrorKind::ConfigError, "--ris-size must be positive");
        cfg.scene.ris.array = {*a.ris_size, *a.ris_size};
    }
    if (a.ratio) {
        require(*a.ratio >= 1, ErrorKind::ConfigError, "--ratio must be positive");
        cfg.ratios = {*a.ratio, *a.ratio, *a.ratio};
    }
    cfg.validate();
    return cfg;
}

fs::path out_dir(const CommonArgs& a)
{
    fs::path dir(a.out);
    fs::create_directories(dir);
    return dir;
}

std::ofstream open_out(const fs::path& p, bool binary = false)
{
    std::ofstream os(p, binary ? std::ios::binary : std::ios::out);
    require(os.good(), ErrorKind::InvalidInput, "cannot write '" + p.string() + "'");
    return os;
}

std::ifstream open_in(const fs::path& p, bool binary = false)
{
    std::ifstream is(p, binary ? std::ios::binary : std::ios::in);
    require(is.good(), ErrorKind::InvalidInput, "cannot read '" + p.string() + "'");
    return is;
}

bool is_csv(const fs::path& p) { return p.extension() == ".csv"; }

int cmd_simulate(const CommonArgs& a, bool dump_dicts)
{
    const ExperimentConfig cfg = load_config(a);
    const TrialSetup st = prepare_trial(cfg, a.trial);
    const fs::path dir = out_dir(a);
    std::vector<LinkPath> paths;
    for (const auto& p : st.bm_paths)
        paths.push_back({Link::BsMs, p});
    for (const auto& p : st.br_paths)
        paths.push_back({Link::BsRis, p});
    for (const auto& p : st.rm_paths)
        paths.push_back({Link::RisMs, p});
    auto os = open_out(dir / "paths.csv");
    write_paths_csv(os, paths);
    json trial = {{"trial", a.trial},
                  {"ms_position", json::array({st.scene.ms.position.x(), st.scene.ms.position.y(), st.scene.ms.position.z()})},
                  {"t0_s", st.t0},
                  {"bs_ms_blocked", st.bs_ms_blocked},
                  {"scene", scene_to_json(st.scene)}};
    open_out(dir / "trial.json") << trial.dump(2) << '\n';
    if (dump_dicts) {
        const TrialContext ctx = TrialContext::make(cfg);
        for (const auto* d : {ctx.bm_dict ? &*ctx.bm_dict : nullptr, ctx.brm_dict ? &*ctx.brm_dict : nullptr}) {
            if (!d)
                continue;
            for (int k = 0; k < 3; ++k) {
                auto bs = open_out(dir / ("dictionary_" + std::string(to_string(d->source)) + "_" + std::to_string(k + 1) + ".bin"), true);
                write_matrix_binary(bs, d->psi[k]);
            }
        }
    }
    std::cout << paths.size() << " paths written to " << (dir / "paths.csv").string() << '\n';
    return 0;
}

int cmd_sound(const CommonArgs& a, bool csv)
{
    const ExperimentConfig cfg = load_config(a);
    const TrialContext ctx = TrialContext::make(cfg);
    const TrialSetup st = prepare_trial(cfg, a.trial);
    const Sounding snd = sound_trial(cfg, ctx, st);
    const fs::path dir = out_dir(a);
    const std::string ext = csv ? ".csv" : ".bin";
    auto write = [&](const fs::path& p, const CMatrix& m) {
        auto os = open_out(p, !csv);
        csv ? write_matrix_csv(os, m) : write_matrix_binary(os, m);
    };
    write(dir / ("observation" + ext), snd.observation.y);
    write(dir / ("observation_noiseless" + ext), snd.noiseless);
    std::cout << "observation " << snd.observation.y.rows() << " x " << snd.observation.y.cols() << " written to "
              << (dir / ("observation" + ext)).string() << '\n';
    return 0;
}

int cmd_estimate(const CommonArgs& a, const std::string& observation)
{
    const ExperimentConfig cfg = load_config(a);
    const TrialContext ctx = TrialContext::make(cfg);
    const TrialSetup st = prepare_trial(cfg, a.trial);
    const fs::path dir = out_dir(a);
    const fs::path obs_path = observation.empty() ? dir / "observation.bin" : fs::path(observation);
    auto is = open_in(obs_path, !is_csv(obs_path));
    const CMatrix y = is_csv(obs_path) ? read_matrix_csv(is) : read_matrix_binary(is);
    TrialOperators ops;
    build_operators(cfg, ctx, st, ops);
    const MompResult sol = momp_estimate(y, ops.models, solver_options(cfg, st.training.noise_var));
    std::vector<PathEstimate> est;
    if (!sol.support.empty())
        est = estimates_from(sol, ops, st.scene);
    auto os = open_out(dir / "estimates.csv");
    write_estimates_csv(os, est);
    std::cout << est.size() << " path estimates written to " << (dir / "estimates.csv").string() << '\n';
    return 0;
}

int cmd_localize(const CommonArgs& a, const std::string& estimates)
{
    const ExperimentConfig cfg = load_config(a);
    const TrialSetup st = prepare_trial(cfg, a.trial);
    const fs::path dir = out_dir(a);
    const fs::path in_path = estimates.empty() ? dir / "estimates.csv" : fs::path(estimates);
    auto is = open_in(in_path);
    const auto est = read_estimates_csv(is, st.scene, cfg.sampling_period());
    FixRow row;
    row.trial = a.trial;
    try {
        const PositionFix fix = localize_estimates(cfg, st.scene, st.bm_los, st.rm_los, est);
        row.method = std::string(to_string(fix.method));
        row.position = fix.position;
        row.t0 = fix.t0;
        row.error = (fix.position - st.scene.ms.position).norm();
        row.residual = fix.residual;
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::ConfigError)
            throw;
        std::cerr << "localization failed: " << e.what() << '\n';
        row.method = "none";
        row.position = Vec3::Constant(std::numeric_limits<double>::quiet_NaN());
        row.t0 = std::numeric_limits<double>::quiet_NaN();
        row.error = std::numeric_limits<double>::infinity();
        row.residual = std::numeric_limits<double>::quiet_NaN();
    }
    auto os = open_out(dir / "fixes.csv");
    write_fixes_csv(os, {row});
    std::cout << "fix (" << row.method << ") error " << row.error << " m written to " << (dir / "fixes.csv").string() << '\n';
    return 0;
}

int cmd_experiment(const CommonArgs& a, bool quiet)
{
    const ExperimentConfig cfg = load_config(a);
    const fs::path dir = out_dir(a);
    const auto result = run_experiment(cfg, [&](const TrialRecord& r) {
        if (!quiet)
            std::cerr << "trial " << r.trial << ": " << (r.ok ? "ok" : r.status) << ", error " << r.error << " m\n";
    });
    {
        auto os = open_out(dir / "records.csv");
        write_records_csv(os, result.records);
    }
    {
        auto os = open_out(dir / "fixes.csv");
        write_fixes_csv(os, fixes_from_records(result.records));
    }
    {
        auto os = open_out(dir / "timing.csv");
        write_timing_csv(os, result.records);
    }
    {
        auto os = open_out(dir / "summary.csv");
        write_summary_csv(os, std::string(to_string(cfg.mode)), result.summary);
    }
    std::vector<double> errors;
    for (const auto& r : result.records)
        errors.push_back(r.error);
    {
        auto os = open_out(dir / "cdf.csv");
        write_cdf_csv(os, empirical_cdf(errors));
    }
    const auto& s = result.summary;
    std::cout << "mode " << to_string(cfg.mode) << ": " << s.trials << " trials, " << s.failures << " failures, median " << s.median
              << " m, P80 " << s.p80 << " m, P90 " << s.p90 << " m\n";
    return 0;
}

int cmd_cdf(const std::string& input, const std::string& out)
{
    auto is = open_in(input);
    const auto errors = read_errors_csv(is);
    const auto cdf = empirical_cdf(errors);
    if (out.empty() || out == "-") {
        write_cdf_csv(std::cout, cdf);
    } else {
        const fs::path p(out);
        if (p.has_parent_path())
            fs::create_directories(p.parent_path());
        auto os = open_out(p);
        write_cdf_csv(os, cdf);
    }
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"RIS-aided compressive channel estimation and localization"};
    app.require_subcommand(1);

    CommonArgs sim_args, sound_args, est_args, loc_args, exp_args;
    bool dump_dicts = false, sound_csv = false, quiet = false;
    std::string observation, estimates, cdf_in, cdf_out;

    auto* sim = app.add_subcommand("simulate", "trace the scene of one trial and write its paths");
    add_common(sim, sim_args, true);
    sim->add_flag("--dump-dictionaries", dump_dicts, "also write the dictionaries in flat binary form");

    auto* sound = app.add_subcommand("sound", "simulate the training frames of one trial");
    add_common(sound, sound_args, true);
    sound->add_flag("--csv", sound_csv, "write CSV instead of flat binary");

    auto* est = app.add_subcommand("estimate", "estimate paths from an observation");
    add_common(est, est_args, true);
    est->add_option("--observation", observation, "observation file (.bin or .csv)");

    auto* loc = app.add_subcommand("localize", "locate the MS from path estimates");
    add_common(loc, loc_args, true);
    loc->add_option("--estimates", estimates, "estimates CSV");

    auto* exp = app.add_subcommand("experiment", "run the Monte-Carlo experiment");
    add_common(exp, exp_args, false);
    exp->add_option("--trials", exp_args.trials, "number of trials");
    exp->add_flag("--quiet", quiet, "no per-trial progress");

    auto* cdf = app.add_subcommand("cdf", "empirical CDF of an error column");
    cdf->add_option("--input", cdf_in, "CSV with an err_m column")->required();
    cdf->add_option("--out", cdf_out, "output CSV (stdout when omitted)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*sim)
            return cmd_simulate(sim_args, dump_dicts);
        if (*sound)
            return cmd_sound(sound_args, sound_csv);
        if (*est)
            return cmd_estimate(est_args, observation);
        if (*loc)
            return cmd_localize(loc_args, estimates);
        if (*exp)
            return cmd_experiment(exp_args, quiet);
        if (*cdf)
            return cmd_cdf(cdf_in, cdf_out);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.kind() == ErrorKind::ConfigError ? 2 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
