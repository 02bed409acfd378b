// Command-line front end: run one policy over a trace, compare policies,
// generate synthetic traces, materialize the built-in example instances, and
// drive the randomized verification suites.
//
// Exit codes: 0 success, 1 internal error or failed property, 2 bad usage or
// bad input, 3 search budget exceeded.

#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "karma/karma.hpp"

namespace {

using json = nlohmann::ordered_json;

karma::DemandTrace load_trace_file(const std::string& path, std::int64_t slice_bytes) {
    std::ifstream in(path);
    if (!in) throw karma::input_error("no such file: " + path);
    return karma::load_trace(in, slice_bytes);
}

karma::UserId resolve_user(const karma::DemandTrace& trace, const std::string& token) {
    for (std::int64_t u = 0; u < trace.n_users(); ++u)
        if (trace.users[u] == token) return u;
    try {
        std::size_t pos = 0;
        long long v = std::stoll(token, &pos);
        if (pos == token.size() && v >= 0 && v < trace.n_users()) return v;
    } catch (const std::exception&) {
    }
    throw karma::input_error("unknown user: " + token);
}

std::string fmt_double(double v) {
    std::ostringstream os;
    os << std::setprecision(12) << v;
    return os.str();
}

std::string disparity_str(const karma::Metrics& m) {
    return m.disparity_finite ? karma::rat_to_string(m.disparity) : "inf";
}

json metrics_json(const karma::Metrics& m) {
    json j;
    j["utilization"] = karma::rat_to_string(m.utilization);
    j["utilization_f"] = karma::to_double(m.utilization);
    j["fairness"] = karma::rat_to_string(m.fairness);
    j["fairness_f"] = karma::to_double(m.fairness);
    j["disparity"] = disparity_str(m);
    if (m.disparity_finite) j["disparity_f"] = karma::to_double(m.disparity);
    return j;
}

struct CommonInputs {
    std::string trace_path;
    std::string example_name;
    std::string config_path;
    std::int64_t example_n = 0;
    std::string alpha;
    std::string init_credits;
    std::string fair_share;
    std::int64_t slice_mb = 0;  // 0 = demands already in slices
};

void add_common(CLI::App* cmd, CommonInputs& in) {
    auto* trace = cmd->add_option("--trace", in.trace_path, "demand trace CSV (quantum,user,demand)");
    auto* example = cmd->add_option("--example", in.example_name,
                                    "built-in instance: fig3, fig4, fig6-gain, fig6-loss, "
                                    "maxmin-worstcase, table1, table2");
    trace->excludes(example);
    example->excludes(trace);
    cmd->add_option("--n", in.example_n, "user count for parametric examples");
    cmd->add_option("--config", in.config_path, "config file (key = value lines)");
    cmd->add_option("--alpha", in.alpha, "override alpha (rational, e.g. 1/2)");
    cmd->add_option("--init-credits", in.init_credits, "override initial credits per user");
    cmd->add_option("--fair-share", in.fair_share, "override uniform fair share (slices)");
    cmd->add_option("--slice-mb", in.slice_mb, "quantize trace demands from MB to slices");
}

std::pair<karma::DemandTrace, karma::Config> resolve_inputs(const CommonInputs& in) {
    karma::DemandTrace trace;
    std::optional<karma::Config> cfg;
    if (!in.example_name.empty()) {
        karma::Example ex = karma::gen_example(in.example_name, in.example_n);
        trace = ex.trace;
        cfg = ex.config;
    } else if (!in.trace_path.empty()) {
        trace = load_trace_file(in.trace_path, in.slice_mb > 0 ? in.slice_mb * (1 << 20) : 0);
    } else {
        throw karma::input_error("need --trace or --example");
    }
    if (!in.config_path.empty()) {
        std::ifstream f(in.config_path);
        if (!f) throw karma::input_error("no such file: " + in.config_path);
        cfg = karma::parse_config_text(f, trace);
    }
    if (!cfg) {
        std::istringstream empty("");
        cfg = karma::parse_config_text(empty, trace);
    }
    if (!in.fair_share.empty())
        cfg = karma::make_uniform_config(trace.n_users(), karma::rat_parse(in.fair_share),
                                         cfg->alpha, cfg->init_credits);
    if (!in.alpha.empty()) cfg->alpha = karma::rat_parse(in.alpha);
    if (!in.init_credits.empty()) cfg->init_credits = karma::rat_parse(in.init_credits);
    cfg->validate();
    return {trace, *cfg};
}

karma::StrategyProfile build_profile(const karma::DemandTrace& trace,
                                     const std::vector<std::string>& nonconformant,
                                     const std::vector<std::string>& scripts) {
    karma::StrategyProfile profile;
    for (const auto& token : nonconformant)
        profile.by_user[resolve_user(trace, token)] = {karma::StrategyKind::nonconformant, {}};
    for (const auto& spec : scripts) {
        auto colon = spec.find(':');
        if (colon == std::string::npos)
            throw karma::input_error("bad --script, expected user:d0,d1,...: " + spec);
        karma::UserId u = resolve_user(trace, spec.substr(0, colon));
        std::vector<std::int64_t> vals;
        std::stringstream ss(spec.substr(colon + 1));
        std::string item;
        while (std::getline(ss, item, ','))
            vals.push_back(std::stoll(item));
        profile.by_user[u] = {karma::StrategyKind::scripted, vals};
    }
    return profile;
}

void write_output(const std::string& path, const std::string& body) {
    if (path.empty() || path == "-") {
        std::cout << body;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw karma::input_error("cannot write: " + path);
    out << body;
}

int cmd_run(const CommonInputs& in, const std::string& policy_name,
            const std::vector<std::string>& nonconformant, const std::vector<std::string>& scripts,
            const std::string& out_path, const std::string& per_quantum_path) {
    auto [trace, cfg] = resolve_inputs(in);
    karma::PolicyKind policy = karma::parse_policy(policy_name);
    karma::StrategyProfile profile = build_profile(trace, nonconformant, scripts);
    karma::SimReport rep = karma::run(trace, policy, cfg, profile);

    json j;
    j["policy"] = karma::policy_name(policy);
    j["users"] = trace.users;
    j["quanta"] = rep.quanta;
    j["capacity"] = rep.capacity;
    j["alpha"] = karma::rat_to_string(cfg.alpha);
    json per_user = json::array();
    for (std::int64_t u = 0; u < trace.n_users(); ++u) {
        json row;
        row["user"] = trace.users[u];
        row["total_alloc"] = rep.total_alloc[u];
        row["total_useful"] = rep.total_useful[u];
        row["total_demand"] = rep.total_demand[u];
        row["welfare"] = rep.welfare[u] ? json(karma::rat_to_string(*rep.welfare[u])) : json();
        if (policy == karma::PolicyKind::karma)
            row["credits"] = karma::rat_to_string(rep.credits.back()[u]);
        per_user.push_back(row);
    }
    j["per_user"] = per_user;
    j["metrics"] = metrics_json(rep.metrics);
    write_output(out_path, j.dump(2) + "\n");

    if (!per_quantum_path.empty()) {
        std::ostringstream csv;
        csv << "quantum,user,reported,true,alloc,useful,credits\n";
        for (std::int64_t t = 0; t < rep.quanta; ++t)
            for (std::int64_t u = 0; u < trace.n_users(); ++u) {
                csv << t << "," << trace.users[u] << "," << rep.reported[t][u] << ","
                    << trace.demand[t][u] << "," << rep.alloc[t][u] << "," << rep.useful[t][u]
                    << ",";
                if (policy == karma::PolicyKind::karma)
                    csv << karma::rat_to_string(rep.credits[t][u]);
                csv << "\n";
            }
        write_output(per_quantum_path, csv.str());
    }
    return 0;
}

int cmd_compare(CommonInputs in, const std::string& policies_csv, std::string alphas_csv,
                const std::string& out_path) {
    // For compare, --alpha doubles as the karma variant list.
    if (alphas_csv.empty()) alphas_csv = in.alpha;
    in.alpha.clear();
    auto [trace, cfg] = resolve_inputs(in);
    std::vector<karma::PolicyKind> policies;
    {
        std::stringstream ss(policies_csv);
        std::string item;
        while (std::getline(ss, item, ','))
            policies.push_back(karma::parse_policy(item));
    }
    std::vector<karma::Rat> alphas;
    if (!alphas_csv.empty()) {
        std::stringstream ss(alphas_csv);
        std::string item;
        while (std::getline(ss, item, ','))
            alphas.push_back(karma::rat_parse(item));
    }
    auto rows = karma::compare_policies(trace, cfg, policies, alphas);
    std::ostringstream csv;
    csv << "label,policy,alpha,utilization,fairness,disparity,total_useful,total_alloc\n";
    for (const auto& r : rows) {
        csv << r.label << "," << karma::policy_name(r.policy) << ","
            << karma::rat_to_string(r.alpha) << "," << fmt_double(karma::to_double(r.metrics.utilization))
            << "," << fmt_double(karma::to_double(r.metrics.fairness)) << ","
            << (r.metrics.disparity_finite ? fmt_double(karma::to_double(r.metrics.disparity))
                                           : std::string("inf"))
            << "," << r.total_useful << "," << r.total_alloc << "\n";
    }
    write_output(out_path, csv.str());
    return 0;
}

int cmd_gen_trace(std::int64_t n, std::int64_t t, std::uint64_t seed, const karma::BurstParams& p,
                  const std::string& out_path) {
    karma::DemandTrace trace = karma::gen_synthetic(n, t, p, seed);
    std::ostringstream body;
    karma::save_trace(trace, body);
    write_output(out_path, body.str());
    return 0;
}

int cmd_example(const std::string& name, std::int64_t n, const std::string& out_path,
                const std::string& config_out) {
    karma::Example ex = karma::gen_example(name, n);
    std::ostringstream body;
    karma::save_trace(ex.trace, body);
    write_output(out_path, body.str());
    if (!config_out.empty()) {
        std::ostringstream cfg;
        cfg << "alpha = " << karma::rat_to_string(ex.config.alpha) << "\n";
        if (ex.config.weighted()) {
            cfg << "fair_share = ";
            bool first = true;
            for (const auto& [u, share] : ex.config.per_user_share) {
                cfg << (first ? "" : ",") << ex.trace.users[u] << ":" << karma::rat_to_string(share);
                first = false;
            }
            cfg << "\n";
        } else {
            cfg << "fair_share = " << karma::rat_to_string(ex.config.uniform_share) << "\n";
        }
        cfg << "init_credits = " << karma::rat_to_string(ex.config.init_credits) << "\n";
        cfg << "capacity_mode = "
            << (ex.config.churn == karma::ChurnMode::fixed_capacity ? "fixed" : "scale-on-churn")
            << "\n";
        write_output(config_out, cfg.str());
    }
    return 0;
}

int cmd_verify(bool pareto, bool lemma1, bool lemma2, bool theorem5, bool collusion,
               std::uint64_t seed, std::uint64_t budget, std::uint64_t instances,
               const std::string& out_path) {
    bool any = pareto || lemma1 || lemma2 || theorem5 || collusion;
    if (!any) pareto = lemma1 = lemma2 = theorem5 = collusion = true;

    std::vector<karma::PropertyResult> results;
    if (pareto) results.push_back(karma::verify_pareto(seed, instances ? instances : 100));
    if (lemma1) results.push_back(karma::verify_lemma1(seed, instances ? instances : 200, budget));
    if (lemma2) results.push_back(karma::verify_lemma2(seed, instances ? instances : 200, budget));
    if (theorem5) results.push_back(karma::verify_theorem5(seed, instances ? instances : 500));
    if (collusion)
        results.push_back(karma::verify_collusion(seed, instances ? std::max<std::uint64_t>(1, instances / 16) : 12,
                                                  std::max<std::uint64_t>(budget, 4'000'000)));

    bool all_pass = true;
    json j;
    json suites = json::array();
    for (const auto& r : results) {
        json s;
        s["name"] = r.name;
        s["pass"] = r.pass;
        s["checked"] = r.checked;
        if (!r.pass) s["counterexample"] = r.detail;
        suites.push_back(s);
        all_pass = all_pass && r.pass;
    }
    j["seed"] = seed;
    j["suites"] = suites;
    j["pass"] = all_pass;
    write_output(out_path, j.dump(2) + "\n");
    if (!all_pass) {
        for (const auto& r : results)
            if (!r.pass) std::cerr << "FAIL " << r.name << ": " << r.detail << "\n";
        return 1;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"karma: credit-based resource allocation engine"};
    app.require_subcommand(1);

    CommonInputs run_in;
    std::string run_policy = "karma";
    std::vector<std::string> run_nonconformant, run_scripts;
    std::string run_out, run_per_quantum;
    auto* run = app.add_subcommand("run", "simulate one policy over a trace");
    add_common(run, run_in);
    run->add_option("--policy", run_policy, "karma | maxmin | maxmin-t0 | strict");
    run->add_option("--nonconformant", run_nonconformant,
                    "users reporting max(demand, fair share)")
        ->delimiter(',');
    run->add_option("--script", run_scripts, "scripted reports, user:d0,d1,... (repeatable)");
    run->add_option("-o,--out", run_out, "report JSON path (default stdout)");
    run->add_option("--per-quantum", run_per_quantum, "also write per-quantum CSV here");

    CommonInputs cmp_in;
    std::string cmp_policies = "karma,maxmin,maxmin-t0,strict";
    std::string cmp_alphas, cmp_out;
    auto* cmp = app.add_subcommand("compare", "metrics table across policies");
    add_common(cmp, cmp_in);
    cmp->add_option("--policies", cmp_policies, "comma-separated policy list");
    cmp->add_option("--alpha-list", cmp_alphas, "comma-separated alphas for karma rows");
    cmp->add_option("-o,--out", cmp_out, "CSV path (default stdout)");

    std::int64_t gen_n = 100, gen_t = 900;
    std::uint64_t gen_seed = 42;
    karma::BurstParams burst;
    std::string gen_out;
    auto* gen = app.add_subcommand("gen-trace", "generate a synthetic bursty trace");
    gen->add_option("--n", gen_n, "users");
    gen->add_option("--t", gen_t, "quanta");
    gen->add_option("--seed", gen_seed, "RNG seed");
    gen->add_option("--fair-share", burst.fair_share, "long-run mean demand (slices)");
    gen->add_option("--burst-amplitude", burst.burst_amplitude, "demand jitter width; 0 = constant");
    gen->add_option("--burst-period", burst.burst_period, "quanta between spikes");
    gen->add_option("--bursty-percent", burst.bursty_percent, "share of bursty users");
    gen->add_option("-o,--out", gen_out, "trace CSV path (default stdout)");

    std::string ex_name, ex_out, ex_config_out;
    std::int64_t ex_n = 0;
    auto* ex = app.add_subcommand("example", "write a built-in instance as trace + config");
    ex->add_option("--name", ex_name, "instance name")->required();
    ex->add_option("--n", ex_n, "user count for parametric instances");
    ex->add_option("-o,--out", ex_out, "trace CSV path (default stdout)");
    ex->add_option("--config-out", ex_config_out, "config file path");

    bool v_pareto = false, v_lemma1 = false, v_lemma2 = false, v_theorem5 = false,
         v_collusion = false;
    std::uint64_t v_seed = 7, v_budget = 1'000'000, v_instances = 0;
    std::string v_out;
    auto* ver = app.add_subcommand("verify", "randomized property suites against the oracles");
    ver->add_flag("--pareto", v_pareto, "per-quantum Pareto efficiency");
    ver->add_flag("--lemma1", v_lemma1, "over-reporting never gains");
    ver->add_flag("--lemma2", v_lemma2, "under-reporting bounded (1.5x / 2x weighted)");
    ver->add_flag("--theorem5", v_theorem5, "min cumulative allocation is maximin-optimal");
    ver->add_flag("--collusion", v_collusion, "pairwise collusion spot checks");
    ver->add_option("--seed", v_seed, "RNG seed");
    ver->add_option("--budget", v_budget, "max candidate reports per deviation search");
    ver->add_option("--instances", v_instances, "override instance count per suite");
    ver->add_option("-o,--out", v_out, "verdict JSON path (default stdout)");

    try {
        app.parse(argc, argv);
        if (*run)
            return cmd_run(run_in, run_policy, run_nonconformant, run_scripts, run_out,
                           run_per_quantum);
        if (*cmp) return cmd_compare(cmp_in, cmp_policies, cmp_alphas, cmp_out);
        if (*gen) return cmd_gen_trace(gen_n, gen_t, gen_seed, burst, gen_out);
        if (*ex) return cmd_example(ex_name, ex_n, ex_out, ex_config_out);
        if (*ver)
            return cmd_verify(v_pareto, v_lemma1, v_lemma2, v_theorem5, v_collusion, v_seed,
                              v_budget, v_instances, v_out);
        return 2;
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    } catch (const karma::budget_error& e) {
        std::cerr << "budget exceeded: " << e.what() << "\n";
        return 3;
    } catch (const karma::input_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
}
