// Copyright (C) 2026 The prefsample Authors
// SPDX-License-Identifier: Apache-2.0

// One PASS/FAIL line per acceptance criterion; nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include "prefsample/dpo.hpp"
#include "prefsample/experiment.hpp"
#include "prefsample/objective.hpp"
#include "prefsample/textio.hpp"
#include "prefsample/verify.hpp"
#include "test_util.hpp"

using namespace prefsample;
using namespace prefsample::testing;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(const std::string& name, bool pass, const std::string& detail, double seconds) {
    if (!pass) ++failures;
    std::cout << (pass ? "PASS " : "FAIL ") << name << ": " << detail << " [" << format_double(seconds) << " s]"
              << std::endl;
}

class Timer {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

RunConfig default_config() { return load_run_config(fs::path(PREFSAMPLE_CONFIG_DIR) / "default.ini"); }

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

InstanceSpec calculus_spec() {
    InstanceSpec spec;
    spec.num_prompts = 2;
    return spec;
}

// Entrywise second differences of a scalar function.
Matrix fd_hessian(const std::function<double(const Vector&)>& f, const Vector& x, double h) {
    const auto n = x.size();
    Matrix m(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i; j < n; ++j) {
            const auto at = [&](double si, double sj) {
                Vector y = x;
                y[i] += si * h;
                y[j] += sj * h;
                return f(y);
            };
            m(i, j) = m(j, i) = (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)) / (4.0 * h * h);
        }
    return m;
}

void density_ratio(const RunConfig& config) {
    Timer timer;
    const auto& vc = config.verify;
    double worst = 0.0;
    for (std::size_t i = 0; i < vc.instances; ++i) {
        const auto inst = random_instance(vc.instance, vc.seed, i);
        for (std::size_t x = 0; x < inst.prompts.size(); ++x)
            worst = std::max(worst, check_density_ratio(inst.theta, inst.ref, inst.beta, x));
    }
    const double t = timer.seconds();
    report("density ratio", vc.instances >= 20 && worst < 1e-10 && t < 10.0,
           "max deviation " + format_double(worst) + " over " + std::to_string(vc.instances) +
               " instances (tolerance 1e-10, limit 10 s)",
           t);
}

void gradients() {
    Timer timer;
    const std::size_t seeds = 20;
    double worst_hat = 0.0, worst_pop = 0.0, worst_j = 0.0;
    for (std::uint64_t seed = 1; seed <= seeds; ++seed) {
        const auto inst = random_instance(calculus_spec(), 100 + seed, 0);
        const auto& th = inst.theta;
        const double beta = inst.beta;

        Rng rng(seed, 5);
        DpoBatch batch;
        for (int i = 0; i < 64; ++i)
            batch.triples.push_back({rng.below(th.num_prompts()), rng.below(inst.space->size()),
                                     rng.below(inst.space->size())});
        const auto lhat = [&](const Vector& p) { return empirical_loss(th.with_params(p), inst.ref, beta, batch); };
        worst_hat = std::max(worst_hat, rel_error(loss_gradient(th, inst.ref, beta, batch),
                                                  fd_gradient(lhat, th.params(), 1e-5)));

        for (auto kind : {StrategyKind::Vanilla, StrategyKind::TPILAF}) {
            const auto measure = PairMeasure::build({kind, beta}, th, inst.ref, inst.prompts);
            const auto l = [&](const Vector& p) {
                return population_loss(measure, th.with_params(p), inst.ref, beta, inst.oracle);
            };
            worst_pop = std::max(worst_pop, rel_error(population_loss_gradient(measure, th, inst.ref, beta, inst.oracle),
                                                      fd_gradient(l, th.params(), 1e-5)));
        }

        const auto j = [&](const Vector& p) {
            return evaluate_j(th.with_params(p), inst.ref, beta, inst.oracle, inst.prompts).j_value;
        };
        worst_j = std::max(worst_j, rel_error(grad_j(th, inst.ref, beta, inst.oracle, inst.prompts),
                                              fd_gradient(j, th.params(), 1e-5)));
    }
    report("gradients", std::max({worst_hat, worst_pop, worst_j}) <= 1e-5,
           "max relative error vs central differences (h=1e-5) over " + std::to_string(seeds) +
               " seeds: empirical loss " + format_double(worst_hat) + ", population loss " +
               format_double(worst_pop) + ", J " + format_double(worst_j) + " (tolerance 1e-5)",
           timer.seconds());
}

void alignment(const RunConfig& config) {
    Timer timer;
    const auto& vc = config.verify;
    std::size_t bound_ok = 0, tp_ok = 0, va_ok = 0, invalid = 0;
    for (std::size_t i = 0; i < vc.instances; ++i) {
        const auto inst = random_instance(vc.instance, vc.seed, i);
        AlignmentOptions opt;
        opt.t = vc.alignment_t;
        opt.reward_bound = vc.reward_bound;
        const auto tp = check_alignment(inst.theta, inst.theta_star, inst.ref, inst.beta, inst.prompts, opt);
        opt.density = StrategyKind::Vanilla;
        const auto va = check_alignment(inst.theta, inst.theta_star, inst.ref, inst.beta, inst.prompts, opt);
        if (!tp.valid) ++invalid;
        if (tp.valid && tp.holds) ++bound_ok;
        if (tp.quad_ratio >= 3.2 && tp.quad_ratio <= 4.8) ++tp_ok;
        if (va.quad_ratio >= 1.6 && va.quad_ratio <= 2.4) ++va_ok;
    }
    const std::size_t n = vc.instances;
    report("alignment", invalid == 0 && bound_ok == n && tp_ok == n && va_ok == n,
           "bound holds " + std::to_string(bound_ok) + "/" + std::to_string(n) + ", T-PILAF halving ratio in [3.2, 4.8] " +
               std::to_string(tp_ok) + "/" + std::to_string(n) + ", Vanilla halving ratio in [1.6, 2.4] " +
               std::to_string(va_ok) + "/" + std::to_string(n),
           timer.seconds());
}

void hessian_of_j() {
    Timer timer;
    const std::size_t seeds = 10;
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= seeds; ++seed) {
        const auto inst = random_instance(calculus_spec(), 200 + seed, 0);
        const auto j = [&](const Vector& p) {
            return evaluate_j(inst.theta_star.with_params(p), inst.ref, inst.beta, inst.oracle, inst.prompts).j_value;
        };
        const Matrix analytic =
            -sigma_star_simplified(inst.theta_star, inst.ref, inst.beta, inst.prompts).sigma_star / inst.beta;
        worst = std::max(worst, (fd_hessian(j, inst.theta_star.params(), 1e-4) - analytic).cwiseAbs().maxCoeff());
    }
    report("hessian of J at theta*", worst <= 1e-6,
           "max elementwise deviation of second differences (h=1e-4) from -Sigma*/beta over " +
               std::to_string(seeds) + " seeds: " + format_double(worst) + " (tolerance 1e-6)",
           timer.seconds());
}

void general_covariance() {
    Timer timer;
    const std::size_t seeds = 10;
    std::map<std::string, double> worst;
    for (auto kind : {StrategyKind::Vanilla, StrategyKind::TPILAF}) {
        double w = 0.0;
        for (std::uint64_t seed = 1; seed <= seeds; ++seed) {
            const auto inst = random_instance(calculus_spec(), 300 + seed, 0);
            const auto measure = PairMeasure::build({kind, inst.beta}, inst.theta_star, inst.ref, inst.prompts);
            const Matrix sigma = sigma_star_general(measure, inst.theta_star, inst.ref, inst.beta).sigma_star;
            const auto g = [&](const Vector& p) {
                return population_loss_gradient(measure, inst.theta_star.with_params(p), inst.ref, inst.beta,
                                                inst.oracle);
            };
            w = std::max(w, (fd_jacobian(g, inst.theta_star.params(), 1e-5) - sigma).cwiseAbs().maxCoeff());
        }
        worst[std::string(strategy_name(kind))] = w;
    }
    report("general covariance", worst["vanilla"] <= 1e-6 && worst["tpilaf"] <= 1e-6,
           "max elementwise deviation from the finite-difference hessian of the population loss over " +
               std::to_string(seeds) + " seeds: vanilla " + format_double(worst["vanilla"]) + ", tpilaf " +
               format_double(worst["tpilaf"]) + " (tolerance 1e-6)",
           timer.seconds());
}

void costs(RunConfig config) {
    Timer timer;
    config.cost_pairs = 10000;
    RunOverrides ov;
    ov.strategies = {"vanilla", "bestofn", "hybrid", "pilaf"};
    config = apply_overrides(std::move(config), ov);
    bool pass = true;
    std::string detail;
    for (const auto& row : cost_table(config)) {
        const auto kind = parse_strategy_kind(row.strategy.substr(0, row.strategy.find(' ')));
        bool ok = row.annotation_per_pair == 2.0;
        switch (kind) {
            case StrategyKind::BestOfN: ok = ok && row.sampling_per_pair == 8.0; break;
            case StrategyKind::PILAF: ok = ok && std::abs(row.sampling_per_pair - 3.0) <= 0.05; break;
            default: ok = ok && row.sampling_per_pair == 2.0; break;
        }
        pass = pass && ok;
        if (!detail.empty()) detail += ", ";
        detail += row.strategy + " " + format_double(row.sampling_per_pair) + "/" + format_double(row.annotation_per_pair);
    }
    report("costs", pass,
           "sampling/annotation per pair over 10000 pairs: " + detail +
               " (expected vanilla 2/2, bestofn 8/2, hybrid 2/2, pilaf 3 +- 0.05/2)",
           timer.seconds());
}

void degeneracy() {
    Timer timer;
    double worst_pilaf = 0.0, worst_tpilaf = 0.0;
    for (std::uint64_t i = 0; i < 20; ++i) {
        const auto inst = random_instance(calculus_spec(), 400, i);
        for (std::size_t x = 0; x < inst.prompts.size(); ++x) {
            worst_pilaf = std::max(worst_pilaf, total_variation(pair_density({StrategyKind::PILAF, 0.0}, inst.theta, inst.ref, x),
                                                                pair_density({StrategyKind::Vanilla}, inst.theta, inst.ref, x)));
            worst_tpilaf = std::max(
                worst_tpilaf, total_variation(pair_density({StrategyKind::TPILAF, inst.beta}, inst.ref, inst.ref, x),
                                              pair_density({StrategyKind::Vanilla}, inst.ref, inst.ref, x)));
        }
    }
    report("degeneracy", worst_pilaf == 0.0 && worst_tpilaf == 0.0,
           "total variation to vanilla: pilaf at beta=0 " + format_double(worst_pilaf) + ", tpilaf at theta=ref " +
               format_double(worst_tpilaf) + " (expected exactly 0)",
           timer.seconds());
}

void asymptotics(const RunConfig& config) {
    Timer timer;
    const auto& vc = config.verify;
    InstanceSpec spec = vc.instance;
    spec.num_prompts = vc.asymptotics_prompts;
    spec.beta = vc.asymptotics_beta;
    spec.ref_scale = vc.asymptotics_ref_scale;
    spec.star_scale = vc.asymptotics_star_scale;
    const auto inst = random_instance(spec, vc.seed, 0);
    const StrategySpec strategy{vc.asymptotics_strategy, spec.beta};
    const std::size_t n1 = vc.asymptotics_n, n2 = 2 * vc.asymptotics_n;
    const auto s1 = run_replication_study(inst.theta_star, inst.ref, spec.beta, strategy, inst.prompts, n1,
                                          vc.asymptotics_m, vc.seed);
    const auto s2 = run_replication_study(inst.theta_star, inst.ref, spec.beta, strategy, inst.prompts, n2,
                                          vc.asymptotics_m, vc.seed + 1);
    const double ratio = s2.mean_error_norm() / s1.mean_error_norm();
    const auto tail = chi_square_tail_check(s2, s2.d_eff);
    std::string tails;
    for (const auto& row : tail.rows)
        tails += " eps=" + format_double(row.eps) + " " + format_double(row.empirical) + "<=" +
                 format_double(row.chi_square_tail + 3.0 * row.se);
    report("asymptotics", ratio >= 0.6 && ratio <= 0.8 && tail.pass(),
           "error ratio n=" + std::to_string(n2) + " vs n=" + std::to_string(n1) + " over m=" +
               std::to_string(vc.asymptotics_m) + ": " + format_double(ratio) + " (expected [0.6, 0.8]); tails" + tails,
           timer.seconds());
}

ExperimentResult run_pair(RunConfig config, const fs::path& dir) {
    RunOverrides ov;
    ov.strategies = {"vanilla", "pilaf"};
    ov.output_dir = dir;
    return run_experiment(apply_overrides(std::move(config), ov));
}

void end_to_end_and_determinism(const RunConfig& config) {
    const fs::path base = fs::temp_directory_path() / "prefsample_acceptance";
    fs::remove_all(base);

    Timer timer;
    const auto a = run_pair(config, base / "a");
    double sum_v = 0.0, sum_p = 0.0;
    std::size_t n_v = 0, n_p = 0;
    std::int64_t budget_v = -1, budget_p = -1;
    bool equal_budget = true;
    for (const auto& row : a.summary) {
        auto& budget = row.strategy == "pilaf" ? budget_p : budget_v;
        if (budget >= 0 && budget != row.annotation_cost) equal_budget = false;
        budget = row.annotation_cost;
        if (row.strategy == "pilaf")
            sum_p += row.j, ++n_p;
        else
            sum_v += row.j, ++n_v;
    }
    equal_budget = equal_budget && budget_v == budget_p;
    const double mean_v = sum_v / static_cast<double>(n_v), mean_p = sum_p / static_cast<double>(n_p);
    report("end-to-end", n_p >= 5 && n_p == n_v && equal_budget && mean_p >= mean_v,
           "mean final J over " + std::to_string(n_p) + " seeds at annotation budget " + std::to_string(budget_p) +
               ": pilaf " + format_double(mean_p) + ", vanilla " + format_double(mean_v),
           timer.seconds());

    Timer timer2;
    run_pair(config, base / "b");
    std::size_t same = 0;
    for (const auto& f : a.files)
        if (slurp(f) == slurp(base / "b" / f.filename())) ++same;
    report("determinism", same == a.files.size() && !a.files.empty(),
           std::to_string(same) + "/" + std::to_string(a.files.size()) + " output files byte-identical across runs",
           timer2.seconds());
    fs::remove_all(base);
}

}  // namespace

int main() {
    try {
        const RunConfig config = default_config();
        density_ratio(config);
        gradients();
        alignment(config);
        hessian_of_j();
        general_covariance();
        costs(config);
        degeneracy();
        asymptotics(config);
        end_to_end_and_determinism(config);
    } catch (const std::exception& e) {
        std::cout << "FAIL acceptance aborted: " << e.what() << std::endl;
        return 1;
    }
    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
    return failures == 0 ? 0 : 1;
}
