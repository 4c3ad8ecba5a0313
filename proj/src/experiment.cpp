// Copyright (C) 2026 The prefsample Authors
// SPDX-License-Identifier: Apache-2.0

#include "prefsample/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>

#include "prefsample/error.hpp"
#include "prefsample/textio.hpp"

namespace prefsample {

namespace {

std::string num(double v) {
    PREFSAMPLE_CHECK(std::isfinite(v), NumericalError, "non-finite value in CSV output");
    return format_double(v);
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    PREFSAMPLE_CHECK(out.good(), ConfigError, "cannot write " + path.string());
    return out;
}

std::filesystem::path prepare_output_dir(const RunConfig& config) {
    std::filesystem::path dir = config.output_dir.empty() ? std::filesystem::path(".") : config.output_dir;
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    PREFSAMPLE_CHECK(!ec, ConfigError, "cannot create output directory " + dir.string() + ": " + ec.message());
    return dir;
}

bool in_range(double v, double lo, double hi) { return v >= lo && v <= hi; }

const char* verdict(bool ok) { return ok ? "PASS" : "FAIL"; }

}  // namespace

RunConfig apply_overrides(RunConfig config, const RunOverrides& overrides) {
    if (overrides.seeds) {
        PREFSAMPLE_CHECK(!overrides.seeds->empty(), ConfigError, "seed override is empty");
        config.seeds = *overrides.seeds;
    }
    if (!overrides.strategies.empty()) {
        std::vector<StrategyKind> keep;
        for (const auto& s : overrides.strategies) keep.push_back(parse_strategy_kind(s));
        std::erase_if(config.strategies, [&](const StrategySpec& s) {
            return std::find(keep.begin(), keep.end(), s.kind) == keep.end();
        });
        PREFSAMPLE_CHECK(!config.strategies.empty(), ConfigError, "strategy filter matches no configured strategy");
    }
    if (overrides.output_dir) config.output_dir = *overrides.output_dir;
    return config;
}

std::string trajectory_file_name(const std::string& strategy, std::uint64_t seed) {
    return "traj_" + strategy + "_" + std::to_string(seed) + ".csv";
}

void write_trajectory_csv(std::ostream& out, const std::vector<TrajectoryRecord>& records) {
    out << kTrajectoryHeader << '\n';
    for (const auto& r : records)
        out << r.strategy << ',' << r.seed << ',' << r.step << ',' << num(r.expected_reward) << ',' << num(r.kl) << ','
            << num(r.j_value) << ',' << r.sampling_cost << ',' << r.annotation_cost << '\n';
}

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
    out << kSummaryHeader << '\n';
    for (const auto& r : rows)
        out << r.strategy << ',' << r.seed << ',' << num(r.reward) << ',' << num(r.kl) << ',' << num(r.j) << ','
            << r.sampling_cost << ',' << r.annotation_cost << '\n';
}

ExperimentResult run_experiment(const RunConfig& config) {
    config.validate();
    const Instance inst = build_instance(config);
    const auto dir = prepare_output_dir(config);

    struct Job {
        StrategySpec strategy;
        std::uint64_t seed;
    };
    std::vector<Job> jobs;
    for (const auto& s : config.strategies)
        for (auto seed : config.seeds) jobs.push_back({s, seed});

    ExperimentResult result;
    result.summary.resize(jobs.size());
    result.trajectories.resize(jobs.size());
    std::vector<std::exception_ptr> errors(jobs.size());
    std::vector<char> written(jobs.size(), 0);  // not vector<bool>: written from several threads

#pragma omp parallel for schedule(dynamic)
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        try {
            TrainConfig tc = config.train;
            tc.seed = jobs[i].seed;
            const TrainResult tr = train(tc, inst.theta0, inst.ref, inst.oracle, inst.prompts, jobs[i].strategy);
            const auto rep = evaluate_j(tr.policy, inst.ref, tc.beta, inst.oracle, inst.prompts);
            result.summary[i] = {jobs[i].strategy.name(), jobs[i].seed, rep.expected_reward, rep.kl, rep.j_value,
                                 tr.ledger.sampling, tr.ledger.annotation};
            result.trajectories[i] = tr.trajectory;
            auto out = open_out(dir / trajectory_file_name(jobs[i].strategy.name(), jobs[i].seed));
            written[i] = 1;
            write_trajectory_csv(out, tr.trajectory);
            PREFSAMPLE_CHECK(out.good(), ConfigError, "write failed");
        } catch (...) {
            errors[i] = std::current_exception();
        }
    }

    auto cleanup = [&] {
        std::error_code ec;
        for (std::size_t i = 0; i < jobs.size(); ++i)
            if (written[i]) std::filesystem::remove(dir / trajectory_file_name(jobs[i].strategy.name(), jobs[i].seed), ec);
        std::filesystem::remove(dir / "summary.csv", ec);
    };
    for (const auto& e : errors)
        if (e) {
            cleanup();
            std::rethrow_exception(e);
        }
    try {
        auto out = open_out(dir / "summary.csv");
        write_summary_csv(out, result.summary);
        PREFSAMPLE_CHECK(out.good(), ConfigError, "write failed");
    } catch (...) {
        cleanup();
        throw;
    }
    for (const auto& j : jobs) result.files.push_back(dir / trajectory_file_name(j.strategy.name(), j.seed));
    result.files.push_back(dir / "summary.csv");
    return result;
}

VerifyWhich parse_verify_which(std::string_view name) {
    if (name == "alignment") return VerifyWhich::Alignment;
    if (name == "density") return VerifyWhich::Density;
    if (name == "asymptotics") return VerifyWhich::Asymptotics;
    if (name == "all") return VerifyWhich::All;
    throw ConfigError("unknown verify target '" + std::string(name) + "'");
}

int run_verify(const RunConfig& config, VerifyWhich which, std::ostream& log) {
    config.validate();
    const auto dir = prepare_output_dir(config);
    const auto& vc = config.verify;
    bool assertions_ok = true;
    bool preconditions_ok = true;
    auto want = [&](VerifyWhich w) { return which == VerifyWhich::All || which == w; };

    if (want(VerifyWhich::Density)) {
        auto csv = open_out(dir / "verify_density.csv");
        csv << "instance,prompt,deviation\n";
        double worst = 0.0;
        for (std::size_t i = 0; i < vc.instances; ++i) {
            const auto inst = random_instance(vc.instance, vc.seed, i);
            for (std::size_t x = 0; x < inst.prompts.size(); ++x) {
                const double dev = check_density_ratio(inst.theta, inst.ref, inst.beta, x);
                worst = std::max(worst, dev);
                csv << i << ',' << x << ',' << num(dev) << '\n';
            }
        }
        const bool ok = worst < 1e-10;
        assertions_ok &= ok;
        log << verdict(ok) << " density: max deviation " << format_double(worst) << " over " << vc.instances
            << " instances (tolerance 1e-10)\n";
    }

    if (want(VerifyWhich::Alignment)) {
        auto csv = open_out(dir / "verify_alignment.csv");
        csv << "instance,density,t,residual,bound,quad_ratio,holds,valid\n";
        std::size_t held = 0, second_order = 0, first_order = 0, invalid = 0;
        for (std::size_t i = 0; i < vc.instances; ++i) {
            const auto inst = random_instance(vc.instance, vc.seed, i);
            AlignmentOptions opt;
            opt.t = vc.alignment_t;
            opt.reward_bound = vc.reward_bound;
            const auto tp = check_alignment(inst.theta, inst.theta_star, inst.ref, inst.beta, inst.prompts, opt);
            opt.density = StrategyKind::Vanilla;
            const auto va = check_alignment(inst.theta, inst.theta_star, inst.ref, inst.beta, inst.prompts, opt);
            for (const auto* r : {&tp, &va})
                csv << i << ',' << (r == &tp ? "tpilaf" : "vanilla") << ',' << num(opt.t) << ',' << num(r->residual_norm)
                    << ',' << num(r->bound_value) << ',' << num(r->quad_ratio) << ',' << r->holds << ',' << r->valid
                    << '\n';
            if (!tp.valid) {
                ++invalid;
                log << "INVALID alignment instance " << i << ": " << tp.note << '\n';
                continue;
            }
            held += tp.holds;
            second_order += in_range(tp.quad_ratio, 3.2, 4.8);
            first_order += in_range(va.quad_ratio, 1.6, 2.4);
        }
        const std::size_t valid = vc.instances - invalid;
        const bool ok = held == valid && second_order == valid && first_order == valid;
        assertions_ok &= ok;
        preconditions_ok &= invalid == 0;
        log << verdict(ok) << " alignment: bound holds " << held << "/" << valid << ", T-PILAF halving ratio in [3.2, 4.8] "
            << second_order << "/" << valid << ", Vanilla halving ratio in [1.6, 2.4] " << first_order << "/" << valid;
        if (invalid) log << " (" << invalid << " instances violate the reward bound)";
        log << '\n';
    }

    if (want(VerifyWhich::Asymptotics)) {
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
        auto csv = open_out(dir / "verify_asymptotics.csv");
        csv << "n,replication,error_norm,value_gap,grad_norm,iterations\n";
        for (const auto* s : {&s1, &s2})
            for (std::size_t r = 0; r < s->error_norms.size(); ++r)
                csv << s->n_samples << ',' << r << ',' << num(s->error_norms[r]) << ',' << num(s->value_gaps[r]) << ','
                    << num(s->grad_norms[r]) << ',' << s->iterations[r] << '\n';
        const double ratio = s2.mean_error_norm() / s1.mean_error_norm();
        const bool scale_ok = in_range(ratio, 0.6, 0.8);
        const auto tail = chi_square_tail_check(s2, s2.d_eff);
        const auto sigma = sigma_star_general(inst.theta_star, inst.ref, spec.beta, strategy, inst.prompts).sigma_star;
        const double c_hat = covariance_domination(s2, inst.theta_star, sigma);
        assertions_ok &= scale_ok && tail.pass();
        log << verdict(scale_ok) << " asymptotics scaling: mean error ratio n=" << n2 << " vs n=" << n1 << " is "
            << format_double(ratio) << " (expected [0.6, 0.8]); dropped " << s1.dropped << "+" << s2.dropped << '\n';
        for (const auto& row : tail.rows)
            log << verdict(row.pass) << " asymptotics tail eps=" << format_double(row.eps) << ": empirical "
                << format_double(row.empirical) << " vs chi2_" << tail.d_eff << " tail "
                << format_double(row.chi_square_tail) << " + 3 SE " << format_double(3 * row.se) << " (closed-form bound "
                << format_double(row.closed_form) << ")\n";
        log << "INFO asymptotics: median rescaling " << format_double(tail.scale) << ", covariance domination c_hat "
            << format_double(c_hat) << '\n';
    }

    if (!assertions_ok) return kExitAssertion;
    if (!preconditions_ok) return kExitConfig;
    return kExitOk;
}

std::vector<CostRow> cost_table(const RunConfig& config) {
    config.validate();
    const Instance inst = build_instance(config);
    std::vector<CostRow> rows;
    for (const auto& s : config.strategies) {
        Rng rng(config.seeds.front(), streams::kRun);
        CostLedger ledger;
        PairSampler sampler(s, inst.theta0, inst.ref);
        for (std::size_t i = 0; i < config.cost_pairs; ++i) {
            const std::size_t x = rng.categorical(inst.prompts.weights);
            const auto pair = sampler.draw(x, rng, ledger);
            label_pair(inst.oracle, x, pair.first, pair.second, rng, ledger);
        }
        const double n = static_cast<double>(config.cost_pairs);
        std::string label = s.name();
        if (s.kind == StrategyKind::BestOfN) label += " (N=" + std::to_string(s.n_candidates) + ")";
        rows.push_back({label, static_cast<double>(ledger.sampling) / n, static_cast<double>(ledger.annotation) / n});
    }
    return rows;
}

void print_cost_table(std::ostream& out, const std::vector<CostRow>& rows) {
    out << std::left << std::setw(18) << "strategy" << std::right << std::setw(10) << "sampling" << std::setw(12)
        << "annotation" << '\n';
    for (const auto& r : rows)
        out << std::left << std::setw(18) << r.strategy << std::right << std::fixed << std::setprecision(4)
            << std::setw(10) << r.sampling_per_pair << std::setw(12) << r.annotation_per_pair << '\n';
    out.unsetf(std::ios::floatfield);
}

}  // namespace prefsample
