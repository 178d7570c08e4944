#pragma once

// Monte Carlo posterior-rate experiments: five built-in scenarios (interior
// and boundary location fits, the mixture model, normal and Laplace
// regression), replications fanned out over derived seeds and merged
// deterministically.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "misspec/posterior.hpp"

namespace misspec {

enum class ScenarioModel {
    parametric_interior,
    parametric_boundary,
    mixture,
    regression_normal,
    regression_laplace,
};

std::string to_string(ScenarioModel m);
ScenarioModel scenario_model_from_string(const std::string& s);

struct ScenarioSpec {
    ScenarioModel model = ScenarioModel::parametric_interior;
    std::vector<int> n_list;
    int reps = 32;
    std::uint64_t master_seed = 1;
    double tail_radius = 0.0; // 0 -> model default

    // mixture knobs
    int support_points = 41;
    double half_width = 2.0;
    double dirichlet_total = 4.0;
    McmcConfig mcmc{};

    // regression knobs
    int bins = 3;
    double box_half = 1.5;
    int axis_points = 31;

    std::string name() const { return to_string(model); }
    void validate() const; // n_list strictly increasing, reps >= 8
};

// Defaults per model: n grids, tail radii, sampler scales.
ScenarioSpec default_scenario(ScenarioModel m);

struct ExperimentRecord {
    std::string scenario;
    int n = 0;
    int rep = 0;
    std::uint64_t seed = 0;
    double tail_mass = 0.0;
    double quantile_radius = 0.0;
    double radius_alt = 0.0; // secondary metric (sqrt metric for location fits)
    double evidence = 0.0;
    std::string diagnostics;
};

std::vector<ExperimentRecord> run_scenario(const ScenarioSpec& spec, int max_threads);

RateFit fit_scenario(const std::vector<ExperimentRecord>& records);

struct ContractResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

// Scenario-level contracts: the fitted rate window, concentration
// monotonicity across the n grid (one inversion allowed), and per-model
// targeting checks.
std::vector<ContractResult> check_scenario_contracts(const ScenarioSpec& spec,
                                                     const std::vector<ExperimentRecord>& records);

void write_records_csv(std::ostream& os, const std::vector<ExperimentRecord>& records);
void write_rate_summary(std::ostream& os, const ScenarioSpec& spec,
                        const std::vector<ExperimentRecord>& records, const RateFit& fit,
                        const std::vector<ContractResult>& contracts);

// MISSPEC_THREADS if set, else hardware concurrency, at least 1.
int env_thread_cap();

// Runs fn(0..n_tasks-1) on up to max_threads workers; any task exception is
// rethrown after join.
void parallel_for(int n_tasks, const std::function<void(int)>& fn, int max_threads);

// Shared pieces reused by the verification suites.
struct ParametricScenarioOracle {
    double theta_star = 0.0;
    double sigma0_sq = 1.0; // truth variance
    // Closed-form neighborhood moments for the unit-variance location model:
    // -P0 log(p_theta/p_star) and P0 (log(p_theta/p_star))^2 under N(m0, s0^2).
    KlMoments moments(double theta) const;
};

const MixingDistribution& mixture_scenario_projection(const ScenarioSpec& spec);

} // namespace misspec
