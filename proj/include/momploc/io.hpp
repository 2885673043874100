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

#ifndef MOMPLOC_IO_HPP
#define MOMPLOC_IO_HPP

#include "experiment.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace momploc {

using json = nlohmann::json;

namespace detail {

// Shortest text that parses back to the same double; keeps CSVs bit-stable.
inline std::string fmt(double v)
{
    if (std::isnan(v))
        return "nan";
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline Vec3 vec3_from(const json& j, const char* what)
{
    require(j.is_array() && j.size() == 3, ErrorKind::ConfigError, std::string(what) + " must be a 3-element array");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline json to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

inline void check_keys(const json& j, std::initializer_list<const char*> allowed, const char* where)
{
    require(j.is_object(), ErrorKind::ConfigError, std::string(where) + " must be an object");
    for (const auto& item : j.items()) {
        bool ok = false;
        for (const char* a : allowed)
            ok = ok || item.key() == a;
        require(ok, ErrorKind::ConfigError, "unknown key '" + item.key() + "' in " + where);
    }
}

template <typename T>
void read_opt(const json& j, const char* key, T& out)
{
    if (j.contains(key)) {
        try {
            out = j.at(key).get<T>();
        } catch (const json::exception& e) {
            fail(ErrorKind::ConfigError, std::string("bad value for '") + key + "': " + e.what());
        }
    }
}

inline Node node_from(const json& j, Node node, const char* where)
{
    check_keys(j, {"position", "array", "x_axis", "y_axis", "facing"}, where);
    if (j.contains("position"))
        node.position = vec3_from(j["position"], "position");
    if (j.contains("array")) {
        const json& a = j["array"];
        require(a.is_array() && a.size() == 2, ErrorKind::ConfigError, "array must be [n_x, n_y]");
        node.array = {a[0].get<int>(), a[1].get<int>()};
        require(node.array.n_x >= 1 && node.array.n_y >= 1, ErrorKind::ConfigError, "array dimensions must be positive");
    }
    if (j.contains("x_axis") || j.contains("y_axis")) {
        require(j.contains("x_axis") && j.contains("y_axis"), ErrorKind::ConfigError, "give both x_axis and y_axis");
        node.frame = ArrayFrame::from_axes(vec3_from(j["x_axis"], "x_axis").normalized(),
                                           vec3_from(j["y_axis"], "y_axis").normalized());
    }
    read_opt(j, "facing", node.facing);
    require(node.facing >= -1 && node.facing <= 1, ErrorKind::ConfigError, "facing must be -1, 0 or 1");
    return node;
}

inline json node_to(const Node& n)
{
    return {{"position", to_json(n.position)},
            {"array", json::array({n.array.n_x, n.array.n_y})},
            {"x_axis", to_json(n.frame.axes.col(0))},
            {"y_axis", to_json(n.frame.axes.col(1))},
            {"facing", n.facing}};
}

inline cplx complex_from(const json& j)
{
    if (j.is_number())
        return {j.get<double>(), 0.0};
    require(j.is_array() && j.size() == 2, ErrorKind::ConfigError, "complex values are [re, im]");
    return {j[0].get<double>(), j[1].get<double>()};
}

} // namespace detail

// Scene keys: room {min, max}, bs / ris / ms {position, array, x_axis,
// y_axis, facing}, surfaces [{label, axis, coordinate, reflection, enabled}],
// blockage {bs_ms, bs_ris, ris_ms}, fc (GHz). Missing keys keep the indoor
// defaults; unknown keys are rejected.
inline Scene scene_from_json(const json& j, Scene base = Scene::indoor_factory())
{
    detail::check_keys(j, {"room", "bs", "ris", "ms", "surfaces", "blockage", "fc", "reflection"}, "scene");
    Scene s = std::move(base);
    bool room_changed = false;
    if (j.contains("room")) {
        detail::check_keys(j["room"], {"min", "max"}, "room");
        if (j["room"].contains("min"))
            s.room.min = detail::vec3_from(j["room"]["min"], "room.min");
        if (j["room"].contains("max"))
            s.room.max = detail::vec3_from(j["room"]["max"], "room.max");
        room_changed = true;
    }
    if (j.contains("bs"))
        s.bs = detail::node_from(j["bs"], s.bs, "bs");
    if (j.contains("ris"))
        s.ris = detail::node_from(j["ris"], s.ris, "ris");
    if (j.contains("ms"))
        s.ms = detail::node_from(j["ms"], s.ms, "ms");
    if (j.contains("surfaces")) {
        require(j["surfaces"].is_array(), ErrorKind::ConfigError, "surfaces must be an array");
        s.surfaces.clear();
        for (const json& e : j["surfaces"]) {
            detail::check_keys(e, {"label", "axis", "coordinate", "reflection", "enabled"}, "surface");
            Surface surf;
            const auto label = path_label_from_string(e.value("label", std::string("floor")));
            require(label.has_value() && *label != PathLabel::LoS, ErrorKind::ConfigError, "bad surface label");
            surf.label = *label;
            detail::read_opt(e, "axis", surf.axis);
            detail::read_opt(e, "coordinate", surf.coordinate);
            if (e.contains("reflection"))
                surf.reflection = detail::complex_from(e["reflection"]);
            detail::read_opt(e, "enabled", surf.enabled);
            s.surfaces.push_back(surf);
        }
    } else if (room_changed || j.contains("reflection")) {
        const cplx gamma = j.contains("reflection") ? detail::complex_from(j["reflection"]) : std::polar(0.7, kPi);
        s.surfaces = box_surfaces(s.room, gamma);
    }
    if (j.contains("blockage")) {
        detail::check_keys(j["blockage"], {"bs_ms", "bs_ris", "ris_ms"}, "blockage");
        detail::read_opt(j["blockage"], "bs_ms", s.blockage.bs_ms);
        detail::read_opt(j["blockage"], "bs_ris", s.blockage.bs_ris);
        detail::read_opt(j["blockage"], "ris_ms", s.blockage.ris_ms);
    }
    if (j.contains("fc")) {
        s.carrier_hz = j["fc"].get<double>() * 1e9;
        require(s.carrier_hz > 0.0, ErrorKind::ConfigError, "carrier frequency must be positive");
    }
    s.validate();
    return s;
}

inline json scene_to_json(const Scene& s)
{
    json surfaces = json::array();
    for (const auto& f : s.surfaces)
        surfaces.push_back({{"label", std::string(to_string(f.label))},
                            {"axis", f.axis},
                            {"coordinate", f.coordinate},
                            {"reflection", json::array({f.reflection.real(), f.reflection.imag()})},
                            {"enabled", f.enabled}});
    return {{"room", {{"min", detail::to_json(s.room.min)}, {"max", detail::to_json(s.room.max)}}},
            {"bs", detail::node_to(s.bs)},
            {"ris", detail::node_to(s.ris)},
            {"ms", detail::node_to(s.ms)},
            {"surfaces", surfaces},
            {"blockage", {{"bs_ms", s.blockage.bs_ms}, {"bs_ris", s.blockage.bs_ris}, {"ris_ms", s.blockage.ris_ms}}},
            {"fc", s.carrier_hz / 1e9}};
}

// Experiment keys: the scene keys plus ms_region {x, y, z}, training
// {transmit_configs, combiners, frame_length, taps, rf_bs, rf_ms,
// paired_ris_phases}, power {tx_dbm, noise_dbm}, bandwidth_mhz, dictionary
// {ratio or ratio_x, ratio_y, ratio_delay}, solver {...}, localization {...},
// mode, trials, seed, blockage_prob, t0_max_fraction.
inline ExperimentConfig experiment_from_json(const json& j)
{
    static const std::initializer_list<const char*> scene_keys = {"room", "bs", "ris", "ms", "surfaces", "blockage", "fc", "reflection"};
    detail::check_keys(j, {"room", "bs", "ris", "ms", "surfaces", "blockage", "fc", "reflection", "ms_region", "training", "power",
                           "bandwidth_mhz", "dictionary", "solver", "localization", "mode", "trials", "seed", "blockage_prob",
                           "t0_max_fraction"},
                       "config");
    ExperimentConfig cfg;
    json scene_part = json::object();
    for (const char* k : scene_keys)
        if (j.contains(k))
            scene_part[k] = j[k];
    cfg.scene = scene_from_json(scene_part);

    if (j.contains("ms_region")) {
        const json& r = j["ms_region"];
        detail::check_keys(r, {"x", "y", "z"}, "ms_region");
        if (r.contains("x")) {
            require(r["x"].is_array() && r["x"].size() == 2, ErrorKind::ConfigError, "ms_region.x must be [min, max]");
            cfg.region.x_min = r["x"][0].get<double>();
            cfg.region.x_max = r["x"][1].get<double>();
        }
        if (r.contains("y")) {
            require(r["y"].is_array() && r["y"].size() == 2, ErrorKind::ConfigError, "ms_region.y must be [min, max]");
            cfg.region.y_min = r["y"][0].get<double>();
            cfg.region.y_max = r["y"][1].get<double>();
        }
        detail::read_opt(r, "z", cfg.region.z);
    }
    if (j.contains("training")) {
        const json& t = j["training"];
        detail::check_keys(t, {"transmit_configs", "combiners", "frame_length", "taps", "rf_bs", "rf_ms", "paired_ris_phases"},
                           "training");
        detail::read_opt(t, "transmit_configs", cfg.transmit_configs);
        detail::read_opt(t, "combiners", cfg.combiners);
        detail::read_opt(t, "frame_length", cfg.frame_length);
        detail::read_opt(t, "taps", cfg.taps);
        detail::read_opt(t, "rf_bs", cfg.rf_bs);
        detail::read_opt(t, "rf_ms", cfg.rf_ms);
        detail::read_opt(t, "paired_ris_phases", cfg.paired_ris_phases);
    }
    if (j.contains("power")) {
        detail::check_keys(j["power"], {"tx_dbm", "noise_dbm"}, "power");
        detail::read_opt(j["power"], "tx_dbm", cfg.tx_power_dbm);
        if (j["power"].contains("noise_dbm")) {
            const json& n = j["power"]["noise_dbm"];
            cfg.noise_dbm = n.is_null() ? -std::numeric_limits<double>::infinity() : n.get<double>();
        }
    }
    detail::read_opt(j, "bandwidth_mhz", cfg.bandwidth_mhz);
    if (j.contains("dictionary")) {
        const json& d = j["dictionary"];
        detail::check_keys(d, {"ratio", "ratio_x", "ratio_y", "ratio_delay"}, "dictionary");
        if (d.contains("ratio")) {
            const int r = d["ratio"].get<int>();
            require(r >= 1, ErrorKind::ConfigError, "dictionary ratio must be >= 1");
            cfg.ratios = {r, r, r};
        }
        detail::read_opt(d, "ratio_x", cfg.ratios.x);
        detail::read_opt(d, "ratio_y", cfg.ratios.y);
        detail::read_opt(d, "ratio_delay", cfg.ratios.delay);
    }
    if (j.contains("solver")) {
        const json& s = j["solver"];
        detail::check_keys(s, {"max_paths", "max_paths_per_source", "residual_tol", "max_sweeps", "coarse_starts", "exhaustive_atoms",
                               "noise_aware", "detection_factor"},
                           "solver");
        detail::read_opt(s, "max_paths", cfg.solver.max_paths);
        detail::read_opt(s, "max_paths_per_source", cfg.solver.max_paths_per_source);
        detail::read_opt(s, "residual_tol", cfg.solver.residual_tol);
        detail::read_opt(s, "max_sweeps", cfg.solver.max_sweeps);
        detail::read_opt(s, "coarse_starts", cfg.solver.coarse_starts);
        detail::read_opt(s, "exhaustive_atoms", cfg.solver.exhaustive_atoms);
        detail::read_opt(s, "noise_aware", cfg.solver.noise_aware);
        detail::read_opt(s, "detection_factor", cfg.solver.detection_factor);
    }
    if (j.contains("localization")) {
        const json& l = j["localization"];
        detail::check_keys(l, {"az_tol", "denom_eps", "wall_tol_s", "wall_mad_factor", "merge_unresolved"}, "localization");
        detail::read_opt(l, "az_tol", cfg.localization.az_tol);
        detail::read_opt(l, "denom_eps", cfg.localization.denom_eps);
        detail::read_opt(l, "wall_tol_s", cfg.localization.wall_tol_s);
        detail::read_opt(l, "wall_mad_factor", cfg.localization.wall_mad_factor);
        detail::read_opt(l, "merge_unresolved", cfg.localization.merge_unresolved);
    }
    if (j.contains("mode"))
        cfg.mode = mode_from_string(j["mode"].get<std::string>());
    detail::read_opt(j, "trials", cfg.trials);
    detail::read_opt(j, "seed", cfg.seed);
    detail::read_opt(j, "blockage_prob", cfg.blockage_prob);
    detail::read_opt(j, "t0_max_fraction", cfg.t0_max_fraction);
    cfg.validate();
    return cfg;
}

inline json experiment_to_json(const ExperimentConfig& cfg)
{
    json j = scene_to_json(cfg.scene);
    j["ms_region"] = {{"x", json::array({cfg.region.x_min, cfg.region.x_max})},
                      {"y", json::array({cfg.region.y_min, cfg.region.y_max})},
                      {"z", cfg.region.z}};
    j["training"] = {{"transmit_configs", cfg.transmit_configs}, {"combiners", cfg.combiners},
                     {"frame_length", cfg.frame_length},         {"taps", cfg.taps},
                     {"rf_bs", cfg.rf_bs},                       {"rf_ms", cfg.rf_ms},
                     {"paired_ris_phases", cfg.paired_ris_phases}};
    j["power"] = {{"tx_dbm", cfg.tx_power_dbm}, {"noise_dbm", std::isinf(cfg.noise_dbm) ? json(nullptr) : json(cfg.noise_dbm)}};
    j["bandwidth_mhz"] = cfg.bandwidth_mhz;
    j["dictionary"] = {{"ratio_x", cfg.ratios.x}, {"ratio_y", cfg.ratios.y}, {"ratio_delay", cfg.ratios.delay}};
    j["solver"] = {{"max_paths", cfg.solver.max_paths},
                   {"max_paths_per_source", cfg.solver.max_paths_per_source},
                   {"residual_tol", cfg.solver.residual_tol},
                   {"max_sweeps", cfg.solver.max_sweeps},
                   {"coarse_starts", cfg.solver.coarse_starts},
                   {"exhaustive_atoms", cfg.solver.exhaustive_atoms},
                   {"noise_aware", cfg.solver.noise_aware},
                   {"detection_factor", cfg.solver.detection_factor}};
    j["localization"] = {{"az_tol", cfg.localization.az_tol},
                         {"denom_eps", cfg.localization.denom_eps},
                         {"wall_tol_s", cfg.localization.wall_tol_s},
                         {"wall_mad_factor", cfg.localization.wall_mad_factor},
                         {"merge_unresolved", cfg.localization.merge_unresolved}};
    j["mode"] = std::string(to_string(cfg.mode));
    j["trials"] = cfg.trials;
    j["seed"] = cfg.seed;
    j["blockage_prob"] = cfg.blockage_prob;
    j["t0_max_fraction"] = cfg.t0_max_fraction;
    return j;
}

inline json read_json_file(const std::string& path)
{
    std::ifstream in(path);
    require(in.good(), ErrorKind::ConfigError, "cannot open '" + path + "'");
    try {
        return json::parse(in, nullptr, true, true);
    } catch (const json::exception& e) {
        fail(ErrorKind::ConfigError, "cannot parse '" + path + "': " + e.what());
    }
}

inline ExperimentConfig load_experiment_config(const std::string& path)
{
    try {
        return experiment_from_json(read_json_file(path));
    } catch (const json::exception& e) {
        fail(ErrorKind::ConfigError, std::string("bad config: ") + e.what());
    }
}

// ---- CSV -----------------------------------------------------------------

struct LinkPath {
    Link link = Link::BsMs;
    PropagationPath path;
};

inline void write_paths_csv(std::ostream& os, const std::vector<LinkPath>& paths)
{
    using detail::fmt;
    os << "source,gain_re,gain_im,phi_x,phi_y,phi_z,theta_x,theta_y,theta_z,tau_s,label\n";
    for (const auto& lp : paths) {
        const auto& p = lp.path;
        os << to_string(lp.link) << ',' << fmt(p.gain.real()) << ',' << fmt(p.gain.imag()) << ',' << fmt(p.departure.x) << ','
           << fmt(p.departure.y) << ',' << fmt(p.departure.z) << ',' << fmt(p.arrival.x) << ',' << fmt(p.arrival.y) << ','
           << fmt(p.arrival.z) << ',' << fmt(p.delay) << ',' << to_string(p.label) << '\n';
    }
}

// Directions are written in the global frame.
inline void write_estimates_csv(std::ostream& os, const std::vector<PathEstimate>& est)
{
    using detail::fmt;
    os << "source,j1,j2,j3,phi_x,phi_y,phi_z,rel_delay_s,gain,row_norm\n";
    for (const auto& e : est)
        os << to_string(e.source) << ',' << e.index[0] << ',' << e.index[1] << ',' << e.index[2] << ',' << fmt(e.direction.x) << ','
           << fmt(e.direction.y) << ',' << fmt(e.direction.z) << ',' << fmt(e.rel_delay) << ',' << fmt(e.gain) << ','
           << fmt(e.row_norm) << '\n';
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line)
{
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ','))
        out.push_back(cell);
    if (!line.empty() && line.back() == ',')
        out.emplace_back();
    return out;
}

inline double parse_double(const std::string& s)
{
    if (s == "inf")
        return std::numeric_limits<double>::infinity();
    if (s == "-inf")
        return -std::numeric_limits<double>::infinity();
    if (s == "nan")
        return std::numeric_limits<double>::quiet_NaN();
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        require(used == s.size(), ErrorKind::InvalidInput, "trailing characters in number '" + s + "'");
        return v;
    } catch (const std::logic_error&) {
        fail(ErrorKind::InvalidInput, "not a number: '" + s + "'");
    }
}

// Reads a CSV with a header row into named columns.
inline std::vector<std::vector<std::string>> read_csv_rows(std::istream& is, const std::vector<std::string>& header)
{
    std::string line;
    require(static_cast<bool>(std::getline(is, line)), ErrorKind::InvalidInput, "missing CSV header");
    if (!line.empty() && line.back() == '\r')
        line.pop_back();
    require(split_csv_line(line) == header, ErrorKind::InvalidInput, "unexpected CSV header '" + line + "'");
    std::vector<std::vector<std::string>> rows;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        auto cells = split_csv_line(line);
        require(cells.size() == header.size(), ErrorKind::InvalidInput, "CSV row has the wrong number of cells");
        rows.push_back(std::move(cells));
    }
    return rows;
}

} // namespace detail

// Reads estimates back; local directions and resolutions are rebuilt from
// the scene arrays and the sampling period.
inline std::vector<PathEstimate> read_estimates_csv(std::istream& is, const Scene& scene, double sampling_period)
{
    const auto rows = detail::read_csv_rows(
        is, {"source", "j1", "j2", "j3", "phi_x", "phi_y", "phi_z", "rel_delay_s", "gain", "row_norm"});
    std::vector<PathEstimate> out;
    for (const auto& r : rows) {
        PathEstimate e;
        require(r[0] == "BM" || r[0] == "BRM", ErrorKind::InvalidInput, "unknown source '" + r[0] + "'");
        e.source = r[0] == "BM" ? Source::BM : Source::BRM;
        e.index = {std::stoi(r[1]), std::stoi(r[2]), std::stoi(r[3])};
        e.direction = DirectionVector::from(
            {detail::parse_double(r[4]), detail::parse_double(r[5]), detail::parse_double(r[6])});
        const Node& node = e.source == Source::BM ? scene.bs : scene.ris;
        e.local = node.frame.to_local(e.direction);
        e.rel_delay = detail::parse_double(r[7]);
        e.gain = detail::parse_double(r[8]);
        e.row_norm = detail::parse_double(r[9]);
        e.resolution = {2.0 / node.array.n_x, 2.0 / node.array.n_y, sampling_period};
        out.push_back(e);
    }
    return out;
}

struct FixRow {
    int trial = 0;
    std::string method;
    Vec3 position = Vec3::Zero();
    double t0 = 0.0;
    double error = 0.0;
    double residual = 0.0;
};

inline void write_fixes_csv(std::ostream& os, const std::vector<FixRow>& fixes)
{
    using detail::fmt;
    os << "trial,method,mx,my,mz,t0_s,err_m,residual\n";
    for (const auto& f : fixes)
        os << f.trial << ',' << f.method << ',' << fmt(f.position.x()) << ',' << fmt(f.position.y()) << ','
           << fmt(f.position.z()) << ',' << fmt(f.t0) << ',' << fmt(f.error) << ',' << fmt(f.residual) << '\n';
}

inline std::vector<FixRow> fixes_from_records(const std::vector<TrialRecord>& records)
{
    std::vector<FixRow> out;
    for (const auto& r : records)
        out.push_back({r.trial, r.method ? std::string(to_string(*r.method)) : "none", r.estimate, r.t0_hat, r.error, r.fix_residual});
    return out;
}

inline void write_records_csv(std::ostream& os, const std::vector<TrialRecord>& records)
{
    using detail::fmt;
    os << "trial,mode,status,method,true_x,true_y,true_z,t0_s,est_x,est_y,est_z,t0_hat_s,err_m,nmse,iterations,"
          "bm_paths,brm_paths,bs_ms_blocked\n";
    for (const auto& r : records)
        os << r.trial << ',' << to_string(r.mode) << ',' << r.status << ',' << (r.method ? std::string(to_string(*r.method)) : "none")
           << ',' << fmt(r.truth.x()) << ',' << fmt(r.truth.y()) << ',' << fmt(r.truth.z()) << ',' << fmt(r.t0) << ','
           << fmt(r.estimate.x()) << ',' << fmt(r.estimate.y()) << ',' << fmt(r.estimate.z()) << ',' << fmt(r.t0_hat) << ','
           << fmt(r.error) << ',' << fmt(r.nmse) << ',' << r.iterations << ',' << r.bm_paths << ',' << r.brm_paths << ','
           << (r.bs_ms_blocked ? 1 : 0) << '\n';
}

inline void write_timing_csv(std::ostream& os, const std::vector<TrialRecord>& records)
{
    os << "trial,wall_ms\n";
    for (const auto& r : records)
        os << r.trial << ',' << detail::fmt(r.wall_ms) << '\n';
}

inline void write_summary_csv(std::ostream& os, const std::string& mode, const ExperimentSummary& s)
{
    using detail::fmt;
    os << "mode,trials,failures,median_m,p80_m,p90_m,mean_nmse\n";
    os << mode << ',' << s.trials << ',' << s.failures << ',' << fmt(s.median) << ',' << fmt(s.p80) << ',' << fmt(s.p90) << ','
       << fmt(s.mean_nmse) << '\n';
}

inline void write_cdf_csv(std::ostream& os, const std::vector<CdfPoint>& cdf)
{
    os << "error_m,probability\n";
    for (const auto& p : cdf)
        os << detail::fmt(p.value) << ',' << detail::fmt(p.probability) << '\n';
}

// Errors from a one-column file with header "err_m", or the err_m column of
// a fixes or records CSV.
inline std::vector<double> read_errors_csv(std::istream& is)
{
    std::string line;
    require(static_cast<bool>(std::getline(is, line)), ErrorKind::InvalidInput, "missing CSV header");
    if (!line.empty() && line.back() == '\r')
        line.pop_back();
    const auto header = detail::split_csv_line(line);
    std::size_t col = header.size();
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == "err_m")
            col = i;
    require(col < header.size(), ErrorKind::InvalidInput, "no err_m column");
    std::vector<double> out;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        const auto cells = detail::split_csv_line(line);
        require(cells.size() == header.size(), ErrorKind::InvalidInput, "CSV row has the wrong number of cells");
        out.push_back(detail::parse_double(cells[col]));
    }
    return out;
}

inline void write_matrix_csv(std::ostream& os, const CMatrix& m)
{
    os << "row,col,re,im\n";
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            os << r << ',' << c << ',' << detail::fmt(m(r, c).real()) << ',' << detail::fmt(m(r, c).imag()) << '\n';
}

inline CMatrix read_matrix_csv(std::istream& is)
{
    const auto rows = detail::read_csv_rows(is, {"row", "col", "re", "im"});
    Eigen::Index nr = 0, nc = 0;
    for (const auto& r : rows) {
        const long long i = std::stoll(r[0]), j = std::stoll(r[1]);
        require(i >= 0 && j >= 0, ErrorKind::InvalidInput, "negative matrix index");
        nr = std::max<Eigen::Index>(nr, i + 1);
        nc = std::max<Eigen::Index>(nc, j + 1);
    }
    require(static_cast<std::size_t>(nr * nc) == rows.size(), ErrorKind::InvalidInput, "matrix CSV is not dense");
    CMatrix m = CMatrix::Constant(nr, nc, cplx{std::numeric_limits<double>::quiet_NaN(), 0.0});
    for (const auto& r : rows)
        m(std::stoll(r[0]), std::stoll(r[1])) = {detail::parse_double(r[2]), detail::parse_double(r[3])};
    return m;
}

// ---- flat binary -----------------------------------------------------------
// 8-byte magic "OBSF64\0\0", uint64 rows, uint64 cols (little endian), then
// rows * cols (re, im) float64 pairs in row-major order.

inline constexpr char kBinaryMagic[8] = {'O', 'B', 'S', 'F', '6', '4', '\0', '\0'};

namespace detail {

template <typename T>
void put_le(std::ostream& os, T v)
{
    static_assert(std::endian::native == std::endian::little, "little-endian host required");
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get_le(std::istream& is)
{
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    require(static_cast<bool>(is), ErrorKind::InvalidInput, "truncated binary matrix");
    return v;
}

} // namespace detail

inline void write_matrix_binary(std::ostream& os, const CMatrix& m)
{
    os.write(kBinaryMagic, sizeof kBinaryMagic);
    detail::put_le<std::uint64_t>(os, static_cast<std::uint64_t>(m.rows()));
    detail::put_le<std::uint64_t>(os, static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            detail::put_le<double>(os, m(r, c).real());
            detail::put_le<double>(os, m(r, c).imag());
        }
}

inline CMatrix read_matrix_binary(std::istream& is)
{
    char magic[8];
    is.read(magic, sizeof magic);
    require(static_cast<bool>(is) && std::memcmp(magic, kBinaryMagic, sizeof magic) == 0, ErrorKind::InvalidInput,
            "bad binary matrix magic");
    const auto rows = detail::get_le<std::uint64_t>(is);
    const auto cols = detail::get_le<std::uint64_t>(is);
    require(rows < (1ULL << 32) && cols < (1ULL << 32), ErrorKind::InvalidInput, "implausible binary matrix size");
    CMatrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            const double re = detail::get_le<double>(is);
            const double im = detail::get_le<double>(is);
            m(r, c) = {re, im};
        }
    return m;
}

} // namespace momploc

#endif
