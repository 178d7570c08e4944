#include "misspec/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "misspec/divergence.hpp"
#include "misspec/entropy.hpp"
#include "misspec/normal.hpp"
#include "misspec/testing.hpp"
#include "misspec/textio.hpp"
#include "misspec/verify.hpp"

namespace misspec::cli {

namespace {

const std::vector<std::string>& valid_keys() {
    static const std::vector<std::string> keys = {
        "scenario.model",          "scenario.n_list",        "scenario.reps",
        "scenario.master_seed",    "scenario.tail_radius",   "mixture.support_points",
        "mixture.half_width",      "mixture.dirichlet_total", "mixture.mcmc_steps",
        "mixture.mcmc_burnin",     "mixture.mcmc_thin",      "mixture.proposal_scale",
        "regression.bins",         "regression.box_half",    "regression.axis_points",
        "curve.n_alphas",
    };
    return keys;
}

void reject_unknown_key(const std::string& key) {
    const auto& keys = valid_keys();
    if (std::find(keys.begin(), keys.end(), key) != keys.end()) return;
    std::string msg = "unknown config key '" + key + "'; valid keys are:";
    for (const auto& k : keys) msg += "\n  " + k;
    throw std::runtime_error(msg);
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<int> parse_int_list(const std::string& v) {
    std::vector<int> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(std::stoi(item));
    }
    return out;
}

std::ofstream open_out(const std::filesystem::path& dir, const std::string& name) {
    std::filesystem::create_directories(dir);
    std::ofstream os(dir / name, std::ios::binary); // '\n' line ends on every platform
    if (!os) throw std::runtime_error("cannot open output file " + (dir / name).string());
    return os;
}

} // namespace

std::vector<std::pair<std::string, std::string>> parse_config_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot read scenario file " + path);
    std::vector<std::pair<std::string, std::string>> entries;
    std::string line, section;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw std::runtime_error(path + ":" + std::to_string(lineno) + ": malformed section");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected key = value");
        const std::string key = section.empty() ? trim(line.substr(0, eq))
                                                : section + "." + trim(line.substr(0, eq));
        reject_unknown_key(key);
        entries.push_back({key, trim(line.substr(eq + 1))});
    }
    return entries;
}

ScenarioSpec scenario_from_config(const std::vector<std::pair<std::string, std::string>>& entries) {
    ScenarioModel model = ScenarioModel::parametric_interior;
    for (const auto& [k, v] : entries)
        if (k == "scenario.model") model = scenario_model_from_string(v);
    ScenarioSpec spec = default_scenario(model);
    for (const auto& [k, v] : entries) {
        if (k == "scenario.model") continue;
        else if (k == "scenario.n_list") spec.n_list = parse_int_list(v);
        else if (k == "scenario.reps") spec.reps = std::stoi(v);
        else if (k == "scenario.master_seed") spec.master_seed = std::stoull(v);
        else if (k == "scenario.tail_radius") spec.tail_radius = std::stod(v);
        else if (k == "mixture.support_points") spec.support_points = std::stoi(v);
        else if (k == "mixture.half_width") spec.half_width = std::stod(v);
        else if (k == "mixture.dirichlet_total") spec.dirichlet_total = std::stod(v);
        else if (k == "mixture.mcmc_steps") spec.mcmc.steps = std::stoi(v);
        else if (k == "mixture.mcmc_burnin") spec.mcmc.burnin = std::stoi(v);
        else if (k == "mixture.mcmc_thin") spec.mcmc.thin = std::stoi(v);
        else if (k == "mixture.proposal_scale") spec.mcmc.proposal_scale = std::stod(v);
        else if (k == "regression.bins") spec.bins = std::stoi(v);
        else if (k == "regression.box_half") spec.box_half = std::stod(v);
        else if (k == "regression.axis_points") spec.axis_points = std::stoi(v);
        else if (k == "curve.n_alphas") { /* consumed by cmd_curve */ }
        else reject_unknown_key(k);
    }
    spec.validate();
    return spec;
}

namespace {

int cmd_curve(const RunConfig& cfg, int n_alphas) {
    const std::filesystem::path out(cfg.out_dir);
    const auto& g = default_grid();
    const DensityHandle p0 = gaussian(0.0, std::sqrt(2.0));
    const DensityHandle q_left = q_of_p(gaussian(1.5, 1.0), p0, gaussian(0.0, 1.0), g);
    const DensityHandle q_right = q_of_p(gaussian(1.5, 1.0), p0, gaussian(1.0, 1.0), g);
    const TransformCurve left = transform_curve(p0, q_left, n_alphas, g);
    const TransformCurve right = transform_curve(p0, q_right, n_alphas, g);
    {
        auto os = open_out(out, "curve_left.csv");
        left.write_table(os);
    }
    {
        auto os = open_out(out, "curve_right.csv");
        right.write_table(os);
    }
    auto os = open_out(out, "curve_summary.txt");
    write_kv(os, "left.left_limit", left.left_limit);
    write_kv(os, "left.right_limit", left.right_limit);
    write_kv(os, "left.slope_at_zero", left.slope_at_zero);
    write_kv(os, "left.margin", sup_log_margin(p0, q_left, g));
    write_kv(os, "right.left_limit", right.left_limit);
    write_kv(os, "right.right_limit", right.right_limit);
    write_kv(os, "right.slope_at_zero", right.slope_at_zero);
    write_kv(os, "right.margin", sup_log_margin(p0, q_right, g));
    std::cout << "curve: wrote curve_left.csv, curve_right.csv, curve_summary.txt\n";
    return 0;
}

int cmd_project(const RunConfig& cfg) {
    const std::filesystem::path out(cfg.out_dir);
    const auto& g = default_grid();
    auto os = open_out(out, "projections.txt");

    const auto interior =
        project_parametric(normal_location_family(-3.0, 3.0), gaussian(0.0, std::sqrt(2.0)), 1e-7, g);
    write_kv(os, "parametric_interior.theta_star", interior.theta_star);
    write_kv(os, "parametric_interior.kl_min", interior.kl_min);
    const auto boundary =
        project_parametric(normal_location_family(1.0, 2.0), gaussian(0.0, 1.0), 1e-7, g);
    write_kv(os, "parametric_boundary.theta_star", boundary.theta_star);
    write_kv(os, "parametric_boundary.kl_min", boundary.kl_min);

    ScenarioSpec mspec = default_scenario(ScenarioModel::mixture);
    const MixingDistribution& fstar = mixture_scenario_projection(mspec);
    write_kv(os, "mixture.dual_gap", mixture_dual_gap(gaussian(0.0, 1.5), fstar, mixture_grid()));
    write_kv(os, "mixture.objective",
             mixture_objective(gaussian(0.0, 1.5), fstar, mixture_grid()));
    {
        auto cs = open_out(out, "mixture_fstar.csv");
        cs << "support,weight\n";
        for (std::size_t j = 0; j < fstar.support.size(); ++j)
            cs << fmt_g17(fstar.support[j]) << ',' << fmt_g17(fstar.weights[j]) << '\n';
    }

    for (bool laplace : {false, true}) {
        RegressionSpec rs;
        rs.basis = RegressionBasis{3, -1.5, 1.5};
        rs.f0 = [basis = rs.basis](double x) {
            const std::vector<double> c0 = {-0.4, -0.1, 0.2};
            return c0[basis.bin_of(x)];
        };
        rs.f0_bound = 1.0;
        rs.likelihood =
            laplace ? RegressionSpec::Likelihood::laplace : RegressionSpec::Likelihood::normal;
        rs.error = laplace ? ErrorSpec{ErrorSpec::Kind::gaussian, 0.5, 1.0}
                           : ErrorSpec{ErrorSpec::Kind::laplace, 0.0, 1.0 / std::sqrt(2.0)};
        const auto coeffs = project_regression(rs, 200000, derive_seed({cfg.master_seed, 0xF}));
        auto cs = open_out(out, laplace ? "regression_fstar_laplace.csv"
                                        : "regression_fstar_normal.csv");
        cs << "basis_index,coefficient\n";
        for (std::size_t b = 0; b < coeffs.size(); ++b)
            cs << b << ',' << fmt_g17(coeffs[b]) << '\n';
    }
    std::cout << "project: wrote projections.txt and coefficient tables\n";
    return 0;
}

int cmd_test_bounds(const RunConfig& cfg, std::vector<std::string>& failures) {
    const std::filesystem::path out(cfg.out_dir);
    const auto& g = default_grid();
    auto os = open_out(out, "test_bounds.csv");
    os << "case,n,type1_hat,type1_se,type2_hat,type2_se,bound\n";

    const Sampler p01 = normal_sampler(0.0, 1.0);
    const DensityHandle q_gauss = gaussian(1.0, 1.0);
    for (int n : {5, 10, 20}) {
        const PowerBound pb = iid_power_bound(p01, q_gauss, n, 100000,
                                              derive_seed({cfg.master_seed, 0x71, (std::uint64_t)n}), g);
        os << "gaussian_shift,n=" << n << ',' << fmt_g17(pb.type1_hat) << ',' << fmt_g17(pb.type1_se)
           << ',' << fmt_g17(pb.type2_hat) << ',' << fmt_g17(pb.type2_se) << ',' << fmt_g17(pb.bound)
           << '\n';
        if (pb.type1_hat + pb.type2_hat > pb.bound + 3.0 * (pb.type1_se + pb.type2_se))
            failures.push_back("power_bound.gaussian_n" + std::to_string(n));
    }
    {
        const Sampler p02 = normal_sampler(0.0, std::sqrt(2.0));
        const DensityHandle q = q_of_p(gaussian(1.5, 1.0), p02.target, gaussian(0.0, 1.0), g);
        const PowerBound pb =
            iid_power_bound(p02, q, 10, 100000, derive_seed({cfg.master_seed, 0x72}), g);
        os << "tilted_alternative,n=10," << fmt_g17(pb.type1_hat) << ',' << fmt_g17(pb.type1_se)
           << ',' << fmt_g17(pb.type2_hat) << ',' << fmt_g17(pb.type2_se) << ',' << fmt_g17(pb.bound)
           << '\n';
        if (pb.type1_hat + pb.type2_hat > pb.bound + 3.0 * (pb.type1_se + pb.type2_se))
            failures.push_back("power_bound.tilted");
    }

    // Shell-aggregated test on the boundary location family.
    const ParametricFamily fam = normal_location_family(1.0, 2.0);
    const DensityHandle p0 = gaussian(0.0, 1.0);
    const DensityHandle pstar = gaussian(1.0, 1.0);
    const double eps = 0.3;
    const ShellCover cover =
        build_shell_cover(fam, p0, pstar, 1.0, [](double th) { return std::sqrt(th - 1.0); }, eps, 3,
                          0.125, 8, derive_seed({cfg.master_seed, 0x73}), g);
    const int n = 800, J = 2;
    const ShellTest st = shell_test(cover, fam, p0, pstar, n, J);
    std::vector<double> probes;
    for (double th = 1.0 + J * eps * J * eps + 0.02; th <= 2.0; th += 0.1) probes.push_back(th);
    const ShellEmpirical emp = shell_test_empirical(st, cover, fam, p01, pstar, probes, n, 4000,
                                                    derive_seed({cfg.master_seed, 0x74}));
    auto ss = open_out(out, "shell_bounds.txt");
    write_kv(ss, "epsilon", eps);
    write_kv(ss, "n", static_cast<double>(n));
    write_kv(ss, "J", static_cast<double>(J));
    for (std::size_t j = 0; j < st.cells_per_shell.size(); ++j)
        write_kv(ss, "cells_shell" + std::to_string(j + 1),
                 static_cast<double>(st.cells_per_shell[j]));
    write_kv(ss, "type1_bound", st.type1_bound);
    write_kv(ss, "type1_bound_geometric", st.type1_bound_geometric);
    write_kv(ss, "type2_bound", st.type2_bound);
    write_kv(ss, "type1_hat", emp.type1_hat);
    write_kv(ss, "type1_se", emp.type1_se);
    write_kv(ss, "worst_type2_hat", emp.worst_type2_hat);
    write_kv(ss, "type2_se", emp.type2_se);
    if (emp.type1_hat > st.type1_bound + 3.0 * emp.type1_se) failures.push_back("shell.type1");
    if (emp.worst_type2_hat > st.type2_bound + 3.0 * emp.type2_se) failures.push_back("shell.type2");
    std::cout << "test-bounds: wrote test_bounds.csv, shell_bounds.txt\n";
    return failures.empty() ? 0 : 1;
}

int cmd_cover(const RunConfig& cfg, std::vector<std::string>& failures) {
    const std::filesystem::path out(cfg.out_dir);
    const auto& g = default_grid();
    auto os = open_out(out, "covers.csv");
    os << "case,eps,n_balls,radius_used,certified\n";

    {
        const DensityHandle p0 = gaussian(0.0, 1.0);
        const DensityHandle pstar = gaussian(1.0, 1.0);
        LocalCoverInput in;
        const int G = 161;
        std::vector<double> thetas(G);
        for (int i = 0; i < G; ++i) thetas[i] = 1.0 + i / (G - 1.0);
        for (double th : thetas) in.members.push_back(gaussian(th, 1.0));
        in.d = [thetas](int i, int j) { return std::sqrt(std::fabs(thetas[i] - thetas[j])); };
        in.d_to_star = [thetas](int i) { return std::sqrt(thetas[i] - 1.0); };
        in.p0 = p0;
        in.pstar = pstar;
        const CoverReport rep =
            local_cover_for_testing(in, 0.3, 100, derive_seed({cfg.master_seed, 0x81}), g);
        os << "parametric_annulus," << fmt_g17(0.3) << ',' << rep.n_balls << ','
           << fmt_g17(rep.radius_used) << ',' << (rep.certified ? 1 : 0) << '\n';
        if (!rep.certified) failures.push_back("cover.parametric_annulus");

        auto cs = open_out(out, "parametric_cover_cells.csv");
        cs << "center_theta,radius,min_member_margin\n";
        for (int c : rep.centers) {
            double min_margin = std::numeric_limits<double>::infinity();
            for (int i = 0; i < G; ++i) {
                if (rep.assignment[i] != rep.assignment[c]) continue;
                min_margin = std::min(min_margin,
                                      misspec_margin(p0, in.members[i], pstar, g));
            }
            cs << fmt_g17(thetas[c]) << ',' << fmt_g17(rep.radius_used) << ','
               << fmt_g17(min_margin) << '\n';
        }
    }

    const EntropyCurve curve = mixture_entropy_curve(2.0, {0.2, 0.1, 0.05, 0.02}, 10000, 41,
                                                     derive_seed({cfg.master_seed, 0x82}));
    {
        auto cs = open_out(out, "entropy_curve.csv");
        cs << "eps,log_cover\n";
        for (std::size_t i = 0; i < curve.eps.size(); ++i)
            cs << fmt_g17(curve.eps[i]) << ',' << fmt_g17(curve.log_cover[i]) << '\n';
    }
    auto ss = open_out(out, "cover_summary.txt");
    write_kv(ss, "entropy.gamma", curve.gamma_fit);
    write_kv(ss, "entropy.c", curve.c_fit);
    write_kv(ss, "entropy.points_in_fit", static_cast<double>(curve.points_in_fit));
    std::cout << "cover: wrote covers.csv, entropy_curve.csv, cover_summary.txt\n";
    return failures.empty() ? 0 : 1;
}

int cmd_rate(const RunConfig& cfg, std::vector<std::string>& failures) {
    if (cfg.scenario_path.empty())
        throw std::runtime_error("rate: --scenario <path> is required");
    auto entries = parse_config_file(cfg.scenario_path);
    for (const auto& ov : cfg.overrides) {
        reject_unknown_key(ov.first);
        entries.push_back(ov);
    }
    ScenarioSpec spec = scenario_from_config(entries);
    if (cfg.seed_given) spec.master_seed = cfg.master_seed;

    const auto records = run_scenario(spec, env_thread_cap());
    const RateFit fit = fit_scenario(records);
    const auto contracts = check_scenario_contracts(spec, records);

    const std::filesystem::path out(cfg.out_dir);
    {
        auto os = open_out(out, "records.csv");
        write_records_csv(os, records);
    }
    {
        auto os = open_out(out, "summary.txt");
        write_rate_summary(os, spec, records, fit, contracts);
    }
    for (const auto& c : contracts)
        if (!c.pass) failures.push_back(c.name + ": " + c.detail);
    std::cout << "rate " << spec.name() << ": beta = " << fmt_g17(fit.beta)
              << ", r2 = " << fmt_g17(fit.r2) << "\n";
    return failures.empty() ? 0 : 1;
}

int cmd_verify(const RunConfig& cfg, std::vector<std::string>& failures) {
    const auto results = verify_suite(cfg.master_seed);
    const std::filesystem::path out(cfg.out_dir);
    auto os = open_out(out, "verify_report.txt");
    for (const auto& r : results) {
        os << (r.pass ? "PASS " : "FAIL ") << r.name << ": " << r.detail << "\n";
        std::cout << (r.pass ? "PASS " : "FAIL ") << r.name << "\n";
        if (!r.pass) failures.push_back(r.name + ": " + r.detail);
    }
    return failures.empty() ? 0 : 1;
}

} // namespace

int run(const std::vector<std::string>& args) {
    CLI::App app{"posterior concentration under misspecification: batch experiments"};
    app.require_subcommand(1);

    RunConfig cfg;
    std::vector<std::string> set_pairs;
    int n_alphas = 99;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--scenario", cfg.scenario_path, "scenario config file");
        sub->add_option("--out", cfg.out_dir, "output directory");
        sub->add_option("--seed", cfg.master_seed, "master seed")
            ->each([&](const std::string&) { cfg.seed_given = true; });
        sub->add_option("--set", set_pairs, "override config entries, section.key=value");
    };
    CLI::App* c_curve = app.add_subcommand("curve", "Hellinger-transform curve tables");
    c_curve->add_option("--n-alphas", n_alphas, "points on the alpha grid");
    CLI::App* c_project = app.add_subcommand("project", "minimal-KL projections");
    CLI::App* c_bounds = app.add_subcommand("test-bounds", "testing bounds vs Monte Carlo");
    CLI::App* c_cover = app.add_subcommand("cover", "covers and entropy growth");
    CLI::App* c_rate = app.add_subcommand("rate", "posterior rate experiment");
    CLI::App* c_verify = app.add_subcommand("verify", "full property suite");
    for (CLI::App* sub : {c_curve, c_project, c_bounds, c_cover, c_rate, c_verify}) add_common(sub);

    std::vector<const char*> argv;
    argv.push_back("misspec");
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        for (const auto& sp : set_pairs) {
            const auto eq = sp.find('=');
            if (eq == std::string::npos)
                throw std::runtime_error("--set expects section.key=value, got '" + sp + "'");
            const std::string key = sp.substr(0, eq);
            reject_unknown_key(key);
            cfg.overrides.push_back({key, sp.substr(eq + 1)});
        }

        std::vector<std::string> failures;
        int status = 0;
        if (c_curve->parsed()) {
            cfg.command = "curve";
            status = cmd_curve(cfg, n_alphas);
        } else if (c_project->parsed()) {
            cfg.command = "project";
            status = cmd_project(cfg);
        } else if (c_bounds->parsed()) {
            cfg.command = "test-bounds";
            status = cmd_test_bounds(cfg, failures);
        } else if (c_cover->parsed()) {
            cfg.command = "cover";
            status = cmd_cover(cfg, failures);
        } else if (c_rate->parsed()) {
            cfg.command = "rate";
            status = cmd_rate(cfg, failures);
        } else if (c_verify->parsed()) {
            cfg.command = "verify";
            status = cmd_verify(cfg, failures);
        }
        if (!failures.empty()) {
            const std::filesystem::path out(cfg.out_dir);
            auto os = open_out(out, "failures.txt");
            for (const auto& f : failures) {
                os << f << "\n";
                std::cerr << "FAIL " << f << "\n";
            }
        }
        return status;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

} // namespace misspec::cli
