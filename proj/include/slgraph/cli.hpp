#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <variant>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "slgraph/boundary_forms.hpp"
#include "slgraph/endpoint_analysis.hpp"
#include "slgraph/errors.hpp"
#include "slgraph/graph_io.hpp"
#include "slgraph/hamiltonian_flow.hpp"
#include "slgraph/spectral_solver.hpp"
#include "slgraph/weyl_report.hpp"

namespace slg::cli {

using nlohmann::json;

enum ExitCode { Ok = 0, BadInput = 1, NoConvergence = 2, Internal = 3 };

inline constexpr int schema_version = 1;
inline constexpr long long default_seed = 20240611;
inline constexpr int weyl_min_eigenvalues = 20;

struct RunConfig {
    std::string subcommand;
    std::string input;
    std::string extension = "friedrichs";
    std::optional<double> lambda_max;
    int mesh_layers = SolverOptions{}.mesh_layers;
    int refine = SolverOptions{}.refine;
    double energy = 1.0;
    long long seed = default_seed;
    std::string out = ".";
    int workers = 1;
};

/// Settings recorded in every report. The worker count is left out: it does not change results.
inline json defaults_json(const RunConfig& c) {
    const SolverOptions o;
    const TrajectoryOptions t;
    return {{"extension", c.extension},
            {"lambda_max", c.lambda_max ? json(*c.lambda_max) : json(nullptr)},
            {"mesh_layers", c.mesh_layers},
            {"refine", c.refine},
            {"energy", c.energy},
            {"seed", c.seed},
            {"grading", o.grading},
            {"kappa", o.kappa},
            {"min_elements", o.min_elements},
            {"series_order", o.series_order},
            {"secular_chunks", o.secular_chunks},
            {"gkn_tolerance", 1e-10},
            {"trajectory_rel_tol", t.rel_tol},
            {"trajectory_stop_fraction", t.stop_fraction},
            {"weyl_min_eigenvalues", weyl_min_eigenvalues},
            {"weyl_fit_window", "[lambda_max/10, lambda_max]"}};
}

inline json header(const RunConfig& c) {
    return {{"schema_version", schema_version}, {"command", c.subcommand}, {"input", c.input},
            {"defaults", defaults_json(c)}};
}

inline void write_text(const RunConfig& c, const std::string& name, const std::string& text) {
    std::filesystem::create_directories(c.out);
    std::ofstream f(std::filesystem::path(c.out) / name, std::ios::binary);
    if (!f) throw InputError("--out", "cannot write " + name + " in " + c.out);
    f << text;
}

inline void write_json(const RunConfig& c, const std::string& name, const json& j) {
    write_text(c, name, j.dump(2) + "\n");
}

inline SolverOptions solver_options(const RunConfig& c) {
    SolverOptions o;
    o.mesh_layers = c.mesh_layers;
    o.refine = c.refine;
    o.workers = c.workers;
    return o;
}

// --- subcommands -------------------------------------------------------------

inline json classify(const MetricGraph& g) {
    const auto def = graph_deficiency(g);
    json eps = json::array();
    bool flow_complete = true;
    int disagreements = 0;
    for (const auto& e : g.edges())
        for (Side s : {Side::Left, Side::Right}) {
            const auto cls = classify_endpoint(e, s);
            const bool complete = is_complete_at(e, s);
            const auto l2 = l2_solution_test(e, s);
            const bool lp = cls.kind == EndpointKind::LimitPoint;
            disagreements += (complete != lp) + (lp != (l2.verdict == L2Verdict::NotAllL2));
            flow_complete = flow_complete && complete;
            eps.push_back({{"edge", e.id},
                           {"side", to_string(s)},
                           {"vertex", g.vertex(e.vertex(s)).id},
                           {"order", cls.order},
                           {"class", to_string(cls.kind)},
                           {"flow_complete", complete},
                           {"l2_all_solutions", l2.verdict == L2Verdict::AllL2},
                           {"l2_amplitude_exponent", l2.amplitude_exponent}});
        }
    json j = to_json(def);
    j["endpoints"] = eps;
    j["flow_complete"] = flow_complete;
    j["classification_disagreements"] = disagreements;
    j["unique_extension"] = def.total == 0;
    return j;
}

inline std::pair<json, std::string> flow(const MetricGraph& g, double energy) {
    if (!(energy > 0.0)) throw InputError("--energy", "must be positive");
    json rows = json::array();
    std::ostringstream csv;
    csv << "edge,direction,t,x,xi,energy\n";
    char buf[200];
    for (const auto& e : g.edges()) {
        const double x0 = 0.5 * (e.p.a + e.p.b);
        const double xi = std::sqrt(energy / e.p.value(x0));
        for (Direction d : {Direction::TowardA, Direction::TowardB}) {
            const auto esc = escape_time(e, x0, energy, d);
            TrajectoryOptions opt;
            opt.t_max = esc.reached ? 2.0 * esc.time + 1.0 : 50.0;
            const auto tr = integrate_trajectory(e, x0, d == Direction::TowardA ? xi : -xi, opt);
            const char* dir = d == Direction::TowardA ? "toward_a" : "toward_b";
            json r{{"edge", e.id},
                   {"direction", dir},
                   {"x0", x0},
                   {"energy", energy},
                   {"complete", is_complete_at(e, target_side(d))},
                   {"escape", to_json(esc)},
                   {"trajectory",
                    {{"hit_cutoff", tr.hit_cutoff},
                     {"cutoff_time", tr.hit_cutoff ? json(tr.cutoff_time) : json(nullptr)},
                     {"energy_drift", tr.energy_drift},
                     {"monotone", tr.monotone},
                     {"samples", tr.samples.size()}}}};
            if (esc.reached && tr.hit_cutoff) r["trajectory"]["escape_time_difference"] = std::abs(tr.cutoff_time - esc.time);
            rows.push_back(r);
            for (const auto& s : tr.samples) {
                std::snprintf(buf, sizeof buf, "%s,%s,%.12g,%.15g,%.12g,%.12g\n", e.id.c_str(), dir, s.t, s.x, s.xi,
                              s.energy);
                csv << buf;
            }
        }
    }
    return {json{{"trajectories", rows}}, csv.str()};
}

inline json gkn_json(const GknReport& r) {
    return {{"valid", r.valid}, {"rank", r.rank}, {"expected_rank", r.expected},
            {"max_violation", r.max_violation}, {"diagnostics", r.diagnostics}};
}

inline json extensions(const MetricGraph& g, const std::string& requested) {
    std::vector<std::string> specs{"friedrichs", "kirchhoff", "delta:-5", "delta:0", "delta:1", "delta:10"};
    if (std::find(specs.begin(), specs.end(), requested) == specs.end()) specs.push_back(requested);
    json list = json::array();
    bool all_valid = true;
    for (const auto& s : specs) {
        const auto bc = build_extension(g, s);
        const auto r = gkn_validate(bc);
        all_valid = all_valid && r.valid;
        json j = to_json(g, bc);
        j["spec"] = s;
        j["gkn"] = gkn_json(r);
        list.push_back(j);
    }
    return {{"deficiency", graph_deficiency(g).total}, {"extensions", list}, {"all_valid", all_valid}};
}

inline const char* weyl_companion(const std::string& ext) { return ext == "friedrichs" ? "kirchhoff" : "friedrichs"; }

struct RunResult {
    int code = Ok;
    std::string message;
};

namespace detail {

inline void require_lambda(const RunConfig& c) {
    if (!c.lambda_max) throw InputError("--lambda-max", "required for " + c.subcommand);
}

inline RunResult inconsistent(const RunConfig& c, const std::vector<const Spectrum*>& spectra) {
    json d = header(c);
    json list = json::array();
    for (const auto* s : spectra)
        list.push_back({{"extension", s->extension},
                        {"consistent", s->consistent},
                        {"galerkin_total", s->galerkin_total},
                        {"secular_total", s->secular_total},
                        {"diagnostics", s->diagnostics}});
    d["spectra"] = list;
    write_json(c, "diagnostics.json", d);
    return {NoConvergence, "Galerkin and secular eigenvalue sets disagree; see diagnostics.json"};
}

inline std::string summary_text(const json& r) {
    std::ostringstream o;
    const auto& cl = r["classify"];
    o << "graph: " << r["input"].get<std::string>() << "\n";
    o << "endpoints:";
    for (const auto& e : cl["endpoints"])
        o << " " << e["edge"].get<std::string>() << "." << e["side"].get<std::string>() << "="
          << e["class"].get<std::string>();
    o << "\n";
    const int N = cl["totals"]["N"];
    o << "deficiency: " << N << "\n";
    if (cl["totals"]["essentially_selfadjoint"].get<bool>())
        o << "essentially self-adjoint; flow complete; unique extension\n";
    else
        o << "not essentially self-adjoint; flow " << (cl["flow_complete"].get<bool>() ? "complete" : "incomplete")
          << "; self-adjoint extensions form a " << N << "x" << N << " unitary family\n";
    if (r.contains("extensions"))
        o << "extensions: " << r["extensions"]["extensions"].size() << " checked, boundary conditions "
          << (r["extensions"]["all_valid"].get<bool>() ? "valid" : "INVALID") << "\n";
    if (r.contains("spectrum")) {
        const auto& s = r["spectrum"];
        o << "spectrum (" << s["metadata"]["extension"].get<std::string>() << ", lambda <= "
          << s["metadata"]["lambda_max"].get<double>() << "): " << s["metadata"]["galerkin_total"].get<int>()
          << " eigenvalues counted, Galerkin/secular " << (s["metadata"]["consistent"].get<bool>() ? "agree" : "DISAGREE")
          << "\n  first:";
        int k = 0;
        for (const auto& e : s["eigenvalues"]) {
            if (k++ == 8) break;
            char buf[64];
            std::snprintf(buf, sizeof buf, " %.10g", e["lambda"].get<double>());
            o << buf;
            if (e["multiplicity"].get<int>() > 1) o << "(x" << e["multiplicity"].get<int>() << ")";
        }
        o << "\n";
    }
    if (r.contains("weyl")) {
        const auto& w = r["weyl"];
        const auto& v = w["verdict"];
        char buf[400];
        const auto& cd = v["constants"]["c_der"];
        std::snprintf(buf, sizeof buf, "Weyl slope: C_emp = %.6g (+- %.2g); C_der = %s; C_class = %.6g\n",
                      v["c_emp"].get<double>(), v["c_emp_error"].get<double>(),
                      cd.is_number() ? std::to_string(cd.get<double>()).c_str() : "infinity",
                      v["constants"]["c_class"].get<double>());
        o << buf;
        if (v["c_class_disagrees_with_c_der"].get<bool>()) {
            std::snprintf(buf, sizeof buf, "  class constant differs from the Liouville-length constant by %.4g%%\n",
                          100.0 * v["c_class_vs_c_der"].get<double>());
            o << buf;
        }
        const auto& il = w["interlacing"];
        o << "interlacing against " << w["companion"].get<std::string>() << ": max gap "
          << il["worst_gap"].get<int>() << " <= deficiency " << il["deficiency"].get<int>() << " "
          << (il["holds"].get<bool>() ? "holds" : "VIOLATED") << "\n";
    }
    if (!r["missing"].empty()) {
        o << "missing artifacts:";
        for (const auto& m : r["missing"]) o << " " << m.get<std::string>();
        o << "\n";
    }
    return o.str();
}

inline json theory_map() {
    return {{"classify.totals.N", "deficiency index as the sum of per-edge endpoint contributions"},
            {"classify.endpoints.class", "regular / limit-circle / limit-point by vanishing order of p"},
            {"classify.endpoints.flow_complete", "completeness of the principal-symbol flow versus limit-point type"},
            {"flow.escape", "escape time of the symbol flow as (1/(2 sqrt E)) int p^(-1/2)"},
            {"extensions.gkn", "self-adjoint extensions as Lagrangian boundary conditions on the traces"},
            {"spectrum.eigenvalues", "variational spectrum of the chosen extension, confirmed by the secular equation"},
            {"weyl.interlacing", "counting functions of two extensions differ by at most the deficiency index"},
            {"weyl.verdict.c_emp", "leading Weyl asymptotics of the counting function"},
            {"weyl.verdict.constants.c_der", "classical constant (1/pi) sum_e int_e p^(-1/2)"},
            {"weyl.verdict.constants.c_class", "edge-class constant: R sqrt(L/pi), RLC sqrt(2/pi) L^(1/4), LC 1"}};
}

inline std::optional<json> read_artifact(const RunConfig& c, const std::string& name) {
    const auto path = std::filesystem::path(c.out) / name;
    if (!std::filesystem::exists(path)) return std::nullopt;
    std::ifstream f(path, std::ios::binary);
    try {
        return json::parse(f);
    } catch (const json::exception& e) {
        throw InputError(path.string(), std::string("unreadable artifact: ") + e.what());
    }
}

}  // namespace detail

/// Runs one subcommand and writes its artifacts to c.out.
inline RunResult run(const RunConfig& c) {
    const auto g = load_graph(c.input);
    if (c.mesh_layers < 0) throw InputError("--mesh-layers", "must be non-negative");
    if (c.refine < 1) throw InputError("--refine", "must be at least 1");
    if (c.workers < 1) throw InputError("--workers", "must be at least 1");

    if (c.subcommand == "classify") {
        json j = header(c);
        j["classification"] = classify(g);
        write_json(c, "classify.json", j);
        return {};
    }
    if (c.subcommand == "flow") {
        auto [j, csv] = flow(g, c.energy);
        json out = header(c);
        out.update(j);
        write_json(c, "flow.json", out);
        write_text(c, "flow.csv", csv);
        return {};
    }
    if (c.subcommand == "extensions") {
        json j = header(c);
        j.update(extensions(g, c.extension));
        write_json(c, "extensions.json", j);
        return {};
    }
    if (c.subcommand == "spectrum") {
        detail::require_lambda(c);
        const auto bc = build_extension(g, c.extension);
        const auto s = eigenvalues(g, bc, *c.lambda_max, solver_options(c));
        json j = header(c);
        j.update(to_json(s));
        write_json(c, "spectrum.json", j);
        write_text(c, "staircase.csv", staircase_csv(s));
        if (!s.consistent) return detail::inconsistent(c, {&s});
        return {};
    }
    if (c.subcommand == "weyl") {
        detail::require_lambda(c);
        const auto opt = solver_options(c);
        const auto P = eigenvalues(g, build_extension(g, c.extension), *c.lambda_max, opt);
        const std::string other = weyl_companion(c.extension);
        const auto F = eigenvalues(g, build_extension(g, other), *c.lambda_max, opt);
        if (!P.consistent || !F.consistent) return detail::inconsistent(c, {&P, &F});
        const auto v = weyl_verdict(g, P, weyl_min_eigenvalues);
        const auto fc = empirical_slope(F, weyl_min_eigenvalues);
        const auto il = interlacing_check(P, F, graph_deficiency(g).total);
        json j = header(c);
        j["verdict"] = to_json(v);
        j["companion"] = other;
        j["companion_c_emp"] = fc.slope;
        j["slope_difference"] = std::abs(v.fit.slope - fc.slope);
        j["interlacing"] = to_json(il);
        write_json(c, "weyl.json", j);
        write_text(c, "weyl.csv", weyl_csv(il, v.constants));
        if (!il.holds) throw InvariantError("interlacing bound violated; see weyl.json");
        return {};
    }
    if (c.subcommand == "report") {
        json r = header(c);
        json missing = json::array();
        const std::vector<std::pair<std::string, std::string>> parts{{"classify", "classify.json"},
                                                                     {"flow", "flow.json"},
                                                                     {"extensions", "extensions.json"},
                                                                     {"spectrum", "spectrum.json"},
                                                                     {"weyl", "weyl.json"}};
        for (const auto& [key, file] : parts) {
            auto a = detail::read_artifact(c, file);
            if (!a) {
                missing.push_back(file);
                continue;
            }
            if (key == "classify") (*a)["classification"]["input"] = (*a)["input"];
            r[key] = key == "classify" ? (*a)["classification"] : *a;
        }
        r["missing"] = missing;
        if (!r.contains("classify")) {
            std::string names;
            for (const auto& m : missing) names += " " + m.get<std::string>();
            throw InputError("report", "missing artifacts in " + c.out + ":" + names);
        }
        r["theory_map"] = detail::theory_map();
        write_json(c, "report.json", r);
        write_text(c, "report.txt", detail::summary_text(r));
        return {};
    }
    throw InputError("subcommand", "unknown subcommand '" + c.subcommand + "'");
}

/// Maps exceptions to exit codes; writes diagnostics.json for numerical failures.
inline RunResult run_guarded(const RunConfig& c) {
    try {
        return run(c);
    } catch (const InputError& e) {
        return {BadInput, e.what()};
    } catch (const NumericalError& e) {
        try {
            json d = header(c);
            d["error"] = e.what();
            d["estimate"] = e.estimate();
            write_json(c, "diagnostics.json", d);
        } catch (const std::exception&) {
        }
        return {NoConvergence, e.what()};
    } catch (const InvariantError& e) {
        return {Internal, e.what()};
    } catch (const std::exception& e) {
        return {Internal, e.what()};
    }
}

/// Parses argv; returns the config or an exit code (help prints and exits 0).
inline std::variant<RunConfig, int> parse(int argc, const char* const* argv) {
    CLI::App app{"Sturm-Liouville operators on metric graphs"};
    app.require_subcommand(1);
    auto cfg = std::make_shared<RunConfig>();
    auto common = [&](CLI::App* s) {
        s->add_option("input", cfg->input, "graph description (JSON)")->required();
        s->add_option("--extension", cfg->extension, "friedrichs|kirchhoff|delta:<alpha>|custom:<path>");
        s->add_option("--mesh-layers", cfg->mesh_layers, "geometric layers at singular ends");
        s->add_option("--refine", cfg->refine, "uniform refinements of the base mesh");
        s->add_option("--seed", cfg->seed, "seed (recorded for reproducibility)");
        s->add_option("--out", cfg->out, "output directory");
        s->add_option("--workers", cfg->workers, "worker threads");
        s->add_option("--energy", cfg->energy, "symbol energy for the flow");
        s->add_option_function<double>("--lambda-max", [cfg](double v) { cfg->lambda_max = v; },
                                       "upper end of the spectral window");
    };
    for (const char* name : {"classify", "flow", "extensions", "spectrum", "weyl", "report"}) {
        auto* s = app.add_subcommand(name);
        common(s);
        s->callback([cfg, name] { cfg->subcommand = name; });
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return static_cast<int>(BadInput);
    }
    return *cfg;
}

inline int main(int argc, const char* const* argv) {
    auto parsed = parse(argc, argv);
    if (auto* code = std::get_if<int>(&parsed)) return *code;
    const auto& cfg = std::get<RunConfig>(parsed);
    const auto r = run_guarded(cfg);
    if (r.code != Ok) std::cerr << "error: " << r.message << "\n";
    return r.code;
}

}  // namespace slg::cli
