// Copyright (C) 2026 The prefsample Authors
// SPDX-License-Identifier: Apache-2.0

#include "prefsample/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "prefsample/error.hpp"
#include "prefsample/textio.hpp"

namespace prefsample {

namespace {

std::vector<std::string> tokens(const std::string& text) {
    std::string s = text;
    std::replace(s.begin(), s.end(), ',', ' ');
    std::istringstream in(s);
    std::vector<std::string> out;
    for (std::string t; in >> t;) out.push_back(t);
    return out;
}

class Reader {
public:
    explicit Reader(const IniDocument& doc) : doc_(doc) {}

    template <class T, class Parse>
    void get(const std::string& section, const std::string& key, T& out, Parse&& parse) const {
        const auto* e = doc_.find(section, key);
        if (!e) return;
        try {
            out = parse(e->value);
        } catch (const Error& err) {
            doc_.fail(*e, err.what());
        }
    }

    void real(const std::string& s, const std::string& k, double& out) const {
        get(s, k, out, [&](const std::string& v) {
            double d = 0.0;
            if (!parse_double(v, d) || !std::isfinite(d)) throw ConfigError(k + ": expected a number, got '" + v + "'");
            return d;
        });
    }
    void real(const std::string& s, const std::string& k, std::optional<double>& out) const {
        if (!doc_.has(s, k)) return;
        double d = 0.0;
        real(s, k, d);
        out = d;
    }
    template <class U>
    void integer(const std::string& s, const std::string& k, U& out) const {
        get(s, k, out, [&](const std::string& v) {
            std::uint64_t u = 0;
            if (!parse_u64(v, u) || u > std::numeric_limits<U>::max())
                throw ConfigError(k + ": expected a nonnegative integer, got '" + v + "'");
            return static_cast<U>(u);
        });
    }
    void flag(const std::string& s, const std::string& k, bool& out) const {
        get(s, k, out, [&](const std::string& v) {
            if (v == "true" || v == "yes" || v == "1") return true;
            if (v == "false" || v == "no" || v == "0") return false;
            throw ConfigError(k + ": expected true or false, got '" + v + "'");
        });
    }
    void text(const std::string& s, const std::string& k, std::string& out) const {
        get(s, k, out, [](const std::string& v) { return v; });
    }
    const IniDocument::Entry* entry(const std::string& s, const std::string& k) const { return doc_.find(s, k); }
    [[noreturn]] void fail(const IniDocument::Entry& e, const std::string& what) const { doc_.fail(e, what); }

private:
    const IniDocument& doc_;
};

}  // namespace

IniDocument IniDocument::parse(const std::string& text, const std::string& origin) {
    IniDocument doc;
    doc.origin_ = origin;
    std::istringstream in(text);
    std::string line, section;
    std::size_t lineno = 0;
    auto error = [&](const std::string& what) {
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + what);
    };
    while (std::getline(in, line)) {
        ++lineno;
        const auto cut = line.find_first_of("#;");
        const std::string body(trim(std::string_view(line).substr(0, cut)));
        if (body.empty()) continue;
        if (body.front() == '[') {
            if (body.back() != ']') error("unterminated section header");
            section = std::string(trim(std::string_view(body).substr(1, body.size() - 2)));
            if (section.empty()) error("empty section name");
            continue;
        }
        const auto eq = body.find('=');
        if (eq == std::string::npos) error("expected `key = value`");
        if (section.empty()) error("key outside of any section");
        const std::string key(trim(std::string_view(body).substr(0, eq)));
        const std::string value(trim(std::string_view(body).substr(eq + 1)));
        if (key.empty()) error("empty key");
        auto& keys = doc.sections_[section];
        if (keys.count(key)) error("duplicate key '" + key + "' in [" + section + "]");
        keys[key] = Entry{value, lineno, false};
    }
    return doc;
}

IniDocument IniDocument::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    PREFSAMPLE_CHECK(in.good(), ConfigError, "cannot open config " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.string());
}

bool IniDocument::has(const std::string& section, const std::string& key) const {
    const auto s = sections_.find(section);
    return s != sections_.end() && s->second.count(key) > 0;
}

const IniDocument::Entry* IniDocument::find(const std::string& section, const std::string& key) const {
    const auto s = sections_.find(section);
    if (s == sections_.end()) return nullptr;
    const auto k = s->second.find(key);
    if (k == s->second.end()) return nullptr;
    k->second.used = true;
    return &k->second;
}

void IniDocument::require_all_used() const {
    for (const auto& [section, keys] : sections_)
        for (const auto& [key, entry] : keys)
            if (!entry.used) fail(entry, "unknown key '" + key + "' in [" + section + "]");
}

void IniDocument::fail(const Entry& entry, const std::string& what) const {
    throw ConfigError(origin_ + ":" + std::to_string(entry.line) + ": " + what);
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
    std::vector<std::uint64_t> out;
    for (const auto& t : tokens(text)) {
        std::uint64_t v = 0;
        PREFSAMPLE_CHECK(parse_u64(t, v), ConfigError, "bad seed '" + t + "'");
        out.push_back(v);
    }
    return out;
}

void RunConfig::validate() const {
    instance.vocab.validate();
    PREFSAMPLE_CHECK(instance.num_prompts >= 1, ConfigError, "num_prompts must be >= 1");
    PREFSAMPLE_CHECK(instance.prompt_weights.empty() || instance.prompt_weights.size() == instance.num_prompts,
                     ConfigError, "prompt_weights must have num_prompts entries");
    prompt_space().validate();
    PREFSAMPLE_CHECK(instance.reward_bound > 0.0, ConfigError, "reward_bound must be positive");
    if (instance.oracle == OracleSource::Table)
        PREFSAMPLE_CHECK(std::filesystem::exists(instance.oracle_table), ConfigError,
                         "oracle table " + instance.oracle_table.string() + " does not exist");
    train.validate();
    PREFSAMPLE_CHECK(!strategies.empty(), ConfigError, "at least one strategy is required");
    PREFSAMPLE_CHECK(!seeds.empty(), ConfigError, "at least one seed is required");
    std::set<StrategyKind> kinds;
    for (const auto& s : strategies) {
        s.validate();
        PREFSAMPLE_CHECK(s.beta == train.beta, ConfigError, "strategy beta must equal the training beta");
        PREFSAMPLE_CHECK(kinds.insert(s.kind).second, ConfigError, "strategy " + s.name() + " listed twice");
    }
    PREFSAMPLE_CHECK(cost_pairs >= 1, ConfigError, "cost_pairs must be >= 1");
    verify.instance.vocab.validate();
    PREFSAMPLE_CHECK(verify.instance.beta > 0.0 && verify.asymptotics_beta > 0.0, ConfigError,
                     "verify betas must be positive");
    PREFSAMPLE_CHECK(verify.instances >= 1 && verify.asymptotics_m >= 2 && verify.asymptotics_n >= 1 &&
                         verify.asymptotics_prompts >= 1 && verify.instance.num_prompts >= 1,
                     ConfigError,
                     "verify sizes must be positive");
}

PromptSpace RunConfig::prompt_space() const {
    if (instance.prompt_weights.empty()) return PromptSpace::uniform(instance.num_prompts);
    return PromptSpace{instance.prompt_weights};
}

RunConfig parse_run_config(const std::string& text, const std::string& origin, const std::filesystem::path& base_dir) {
    const IniDocument doc = IniDocument::parse(text, origin);
    const Reader rd(doc);
    RunConfig c;

    auto& in = c.instance;
    rd.integer("instance", "vocab_size", in.vocab.vocab_size);
    rd.integer("instance", "max_len", in.vocab.max_len);
    rd.integer("instance", "num_prompts", in.num_prompts);
    rd.get("instance", "prompt_weights", in.prompt_weights, [](const std::string& v) {
        std::vector<double> w;
        for (const auto& t : tokens(v)) {
            double d = 0.0;
            if (!parse_double(t, d)) throw ConfigError("bad prompt weight '" + t + "'");
            w.push_back(d);
        }
        return w;
    });
    rd.get("instance", "oracle", in.oracle, [](const std::string& v) {
        if (v == "realizable") return OracleSource::Realizable;
        if (v == "table") return OracleSource::Table;
        throw ConfigError("oracle must be `realizable` or `table`, got '" + v + "'");
    });
    rd.integer("instance", "seed", in.instance_seed);
    rd.get("instance", "oracle_table", in.oracle_table, [&](const std::string& v) {
        std::filesystem::path p(v);
        return p.is_relative() && !base_dir.empty() ? base_dir / p : p;
    });
    rd.real("instance", "reward_bound", in.reward_bound);
    rd.real("instance", "ref_scale", in.ref_scale);
    rd.real("instance", "star_scale", in.star_scale);
    rd.real("instance", "init_scale", in.init_scale);
    if (in.oracle == OracleSource::Table) {
        const auto* e = rd.entry("instance", "oracle_table");
        if (!e) throw ConfigError(origin + ": [instance] oracle = table needs oracle_table");
        if (!std::filesystem::exists(in.oracle_table))
            rd.fail(*e, "oracle table " + in.oracle_table.string() + " does not exist");
    }

    auto& tr = c.train;
    rd.real("train", "beta", tr.beta);
    rd.real("train", "step_size", tr.step_size);
    rd.get("train", "mode", tr.mode, [](const std::string& v) { return parse_train_mode(v); });
    rd.integer("train", "rounds", tr.rounds);
    rd.integer("train", "steps_per_round", tr.steps_per_round);
    rd.integer("train", "batch_size", tr.batch_size);
    rd.integer("train", "epochs", tr.epochs);
    rd.integer("train", "eval_interval", tr.eval_interval);
    rd.integer("train", "dataset_size", tr.dataset_size);
    rd.get("train", "optimizer", tr.optimizer, [](const std::string& v) { return parse_optimizer(v); });

    std::size_t best_of_n = 8;
    bool exact = true;
    rd.integer("strategies", "best_of_n", best_of_n);
    rd.flag("strategies", "exact_partitions", exact);
    if (const auto* e = rd.entry("strategies", "list")) {
        for (const auto& name : tokens(e->value)) {
            StrategySpec s;
            try {
                s.kind = parse_strategy_kind(name);
            } catch (const ConfigError& err) {
                rd.fail(*e, err.what());
            }
            s.beta = tr.beta;
            s.n_candidates = best_of_n;
            s.exact_partitions = exact;
            c.strategies.push_back(s);
        }
        if (c.strategies.empty()) rd.fail(*e, "strategy list is empty");
    }

    if (const auto* e = rd.entry("run", "seeds")) {
        try {
            c.seeds = parse_seed_list(e->value);
        } catch (const ConfigError& err) {
            rd.fail(*e, err.what());
        }
        if (c.seeds.empty()) rd.fail(*e, "seed list is empty");
    }
    rd.get("run", "output_dir", c.output_dir, [](const std::string& v) { return std::filesystem::path(v); });
    rd.integer("run", "cost_pairs", c.cost_pairs);

    auto& v = c.verify;
    rd.integer("verify", "seed", v.seed);
    rd.integer("verify", "instances", v.instances);
    rd.integer("verify", "vocab_size", v.instance.vocab.vocab_size);
    rd.integer("verify", "max_len", v.instance.vocab.max_len);
    rd.integer("verify", "num_prompts", v.instance.num_prompts);
    rd.real("verify", "beta", v.instance.beta);
    rd.real("verify", "ref_scale", v.instance.ref_scale);
    rd.real("verify", "star_scale", v.instance.star_scale);
    rd.real("verify", "theta_scale", v.instance.theta_scale);
    rd.real("verify", "alignment_t", v.alignment_t);
    rd.real("verify", "reward_bound", v.reward_bound);
    rd.integer("verify", "asymptotics_n", v.asymptotics_n);
    rd.integer("verify", "asymptotics_m", v.asymptotics_m);
    rd.integer("verify", "asymptotics_prompts", v.asymptotics_prompts);
    rd.real("verify", "asymptotics_beta", v.asymptotics_beta);
    rd.real("verify", "asymptotics_ref_scale", v.asymptotics_ref_scale);
    rd.real("verify", "asymptotics_star_scale", v.asymptotics_star_scale);
    rd.get("verify", "asymptotics_strategy", v.asymptotics_strategy,
           [](const std::string& s) { return parse_strategy_kind(s); });

    doc.require_all_used();
    if (c.strategies.empty()) throw ConfigError(origin + ": [strategies] list is required and must be nonempty");
    if (c.seeds.empty()) throw ConfigError(origin + ": [run] seeds is required and must be nonempty");
    try {
        c.validate();
    } catch (const ConfigError& err) {
        throw ConfigError(origin + ": " + err.what());
    } catch (const StructuralError& err) {
        throw ConfigError(origin + ": " + err.what());
    }
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    PREFSAMPLE_CHECK(in.good(), ConfigError, "cannot open config " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_run_config(ss.str(), path.string(), path.parent_path());
}

Instance build_instance(const RunConfig& config) {
    const auto& in = config.instance;
    auto space = std::make_shared<const ResponseSpace>(in.vocab);
    Rng rng(in.instance_seed, streams::kExperimentInstance);
    LogitPolicy ref = LogitPolicy::gaussian(space, in.num_prompts, in.ref_scale, rng);
    const LogitPolicy d_star = LogitPolicy::gaussian(space, in.num_prompts, in.star_scale, rng);
    const LogitPolicy d_init = LogitPolicy::gaussian(space, in.num_prompts, in.init_scale, rng);
    LogitPolicy theta0 = ref.with_params(ref.params() + d_init.params());
    std::optional<OracleReward> oracle;
    if (in.oracle == OracleSource::Table) {
        oracle = load_oracle_table(in.oracle_table, space, in.num_prompts, in.reward_bound);
    } else {
        try {
            oracle = OracleReward::realizable(ref.with_params(ref.params() + d_star.params()), ref, config.train.beta,
                                              in.reward_bound);
        } catch (const StructuralError& e) {
            throw ConfigError(std::string("realizable oracle violates reward_bound: ") + e.what());
        }
    }
    return {space, std::move(ref), std::move(theta0), std::move(*oracle), config.prompt_space()};
}

}  // namespace prefsample
