#include "rsmdp/cli.hpp"

#include "rsmdp/constrained.hpp"
#include "rsmdp/dp.hpp"
#include "rsmdp/game_lp.hpp"
#include "rsmdp/learn.hpp"
#include "rsmdp/oracle.hpp"
#include "rsmdp/spectral.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace rsmdp::cli {

using json = nlohmann::json;

std::string sha256_hex(const std::string& text) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(text.data(), text.size(), digest, &len, EVP_sha256(), nullptr);
    std::ostringstream hex;
    for (unsigned int k = 0; k < len; ++k) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[k]);
    return hex.str();
}

std::string problem_digest(const std::string& json_text) {
    try {
        return sha256_hex(json::parse(json_text).dump());
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("problem file is not valid JSON: ") + e.what());
    }
}

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

json to_json(const Vector& v) {
    json a = json::array();
    for (Eigen::Index k = 0; k < v.size(); ++k) a.push_back(v[k]);
    return a;
}

json to_json(const Matrix& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(to_json(Vector(m.row(r).transpose())));
    return rows;
}

json to_json(const std::vector<std::vector<int>>& cells) { return json(cells); }

/// {"actions": [...]} for a deterministic policy or {"y": [[...]]} for a randomized one.
Policy load_policy(const std::string& path, const Mdp& m) {
    json doc;
    try {
        doc = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("policy file is not valid JSON: ") + e.what());
    }
    Policy pol;
    if (doc.contains("actions")) {
        if (!doc["actions"].is_array()) throw ParseError("policy actions must be a list");
        std::vector<int> act;
        for (const auto& a : doc["actions"]) {
            if (!a.is_number_integer()) throw ParseError("policy actions must be integers");
            act.push_back(a.get<int>());
        }
        pol = Policy::deterministic(act, m.n_actions);
    } else if (doc.contains("y")) {
        const auto& rows = doc["y"];
        if (!rows.is_array() || rows.empty() || !rows[0].is_array()) throw ParseError("policy y must be a matrix");
        Matrix y(rows.size(), rows[0].size());
        for (std::size_t r = 0; r < rows.size(); ++r) {
            if (!rows[r].is_array() || rows[r].size() != rows[0].size()) throw ValidationError("policy y is ragged");
            for (std::size_t c = 0; c < rows[r].size(); ++c) {
                if (!rows[r][c].is_number()) throw ParseError("policy y entries must be numbers");
                y(r, c) = rows[r][c].get<double>();
            }
        }
        pol = Policy::randomized(y);
    } else {
        throw ParseError("policy file needs \"actions\" or \"y\"");
    }
    pol.check_against(m);
    return pol;
}

CostTag parse_tag(const std::string& s) {
    if (s == "c") return CostTag::Primary;
    if (s == "k") return CostTag::Constraint;
    throw ValidationError("--cost must be c or k");
}

struct Common {
    std::string problem;
    std::string out;
    std::uint64_t seed = 0;
    int threads = 1;
};

struct Loaded {
    Mdp m;
    std::string digest;
};

Loaded load(const Common& c) {
    const std::string text = read_file(c.problem);
    return {parse_problem(text), problem_digest(text)};
}

json cmd_eval(const Mdp& m, const std::string& policy_path, const std::string& cost, json& stats) {
    const Policy pol = load_policy(policy_path, m);
    const SpectralResult r = evaluate_policy(m, pol, parse_tag(cost));
    stats["classes"] = r.classes.size();
    return {{"lambda", to_json(r.lambda)},
            {"classes", to_json(r.classes)},
            {"class_log_rho", r.class_log_rho},
            {"partition", to_json(r.partition)}};
}

json cmd_solve(const Mdp& m, const std::string& mode, const GenerationOptions& gen, json& stats) {
    if (mode == "dp") {
        const DpSolution s = relative_value_iteration(m, CostTag::Primary);
        stats["iterations"] = s.iterations;
        return {{"mode", "dp"},
                {"Psi", to_json(s.Psi)},
                {"V", to_json(s.V)},
                {"policy", s.policy.argmax_actions()},
                {"lambda_star", s.lambda_star},
                {"partition", to_json(s.partition)},
                {"residual", s.residual},
                {"reducible_warning", s.reducible_warning}};
    }
    if (mode != "lp") throw ValidationError("--mode must be dp or lp");
    const GameSolution s = solve_with_generation(m, CostTag::Primary, gen);
    const Vector V_tight = tighten_relative_values(m, s.beta, s.V);
    const MultichainReport mc = verify_multichain(m, s.beta, V_tight);
    stats["rounds"] = s.rounds;
    stats["pivots"] = s.pivots;
    stats["candidates"] = s.candidates.total();
    return {{"mode", "lp"},
            {"beta", to_json(s.beta)},
            {"V", to_json(s.V)},
            {"V_tight", to_json(V_tight)},
            {"policy", to_json(s.policy.y())},
            {"lambda_star", s.lambda_star()},
            {"primal_obj", s.primal_obj},
            {"dual_obj", s.dual_obj},
            {"gap", s.gap},
            {"max_violation", s.max_violation},
            {"multichain_residual", mc.max_residual},
            {"multichain_worst_state", mc.worst_state}};
}

json cmd_constrained(const Mdp& m, const AscentConfig& cfg, const std::string& trace_path, json& stats) {
    const AscentResult r = subgradient_ascent(m, cfg);
    if (!trace_path.empty()) {
        std::ofstream f(trace_path);
        if (!f) throw ValidationError("cannot write trace file " + trace_path);
        write_ascent_csv(f, r.trace);
    }
    double best_psi = -kInf;
    for (const auto& s : r.trace) best_psi = std::max(best_psi, s.psi);
    stats["steps"] = r.trace.size();
    return {{"gamma", r.gamma},
            {"converged", r.converged},
            {"max_psi", best_psi},
            {"policy", to_json(r.policy.y())},
            {"mix_weight", r.mix_weight},
            {"cost_lambda", to_json(r.cost_lambda)},
            {"constraint_lambda", to_json(r.constraint_lambda)},
            {"objective", r.objective},
            {"feasible", r.feasible},
            {"trace", trace_path}};
}

json cmd_oracle(const Mdp& m, int horizon, bool enumerate, int grid, int paths, const std::string& policy_path,
                std::uint64_t seed, json& stats) {
    json res = json::object();
    const Policy pol = policy_path.empty()
                           ? Policy::deterministic(std::vector<int>(m.n_states, 0), m.n_actions)
                           : load_policy(policy_path, m);
    if (horizon > 0) {
        res["finite_horizon_value"] = to_json(finite_horizon_value(m, pol, CostTag::Primary, horizon));
        if (horizon >= 100) {
            const GrowthEstimate g = growth_rate_estimate(m, pol, CostTag::Primary, horizon);
            res["growth_estimate"] = to_json(g.estimate);
            res["tail_slope"] = to_json(g.tail_slope);
        }
        if (paths > 0) {
            json mc = json::array();
            for (int s = 0; s < m.n_states; ++s) {
                const MonteCarloEstimate e = monte_carlo_cost(m, pol, CostTag::Primary, s, horizon, paths, seed + s);
                mc.push_back({{"estimate", e.estimate}, {"half_width", e.half_width}});
            }
            res["monte_carlo"] = mc;
        }
    }
    if (enumerate) {
        const EnumerationReport e = enumerate_policies(m, CostTag::Primary);
        stats["policies"] = e.n_policies;
        json argmin = json::array();
        for (int p : e.argmin) argmin.push_back(decode_policy(p, m.n_states, m.n_actions));
        res["enumeration"] = {{"min_lambda", to_json(e.min_lambda)},
                              {"argmin_policies", argmin},
                              {"lambda_star", e.lambda_star},
                              {"argmax_state", e.argmax_state}};
    }
    if (grid > 0) {
        const GridResult g = constrained_grid_search(m, grid);
        stats["grid_points"] = g.n_points;
        res["grid"] = {{"feasible", g.feasible}, {"n_feasible", g.n_feasible}};
        if (g.feasible) {
            res["grid"]["y"] = to_json(g.y);
            res["grid"]["objective"] = g.objective;
            res["grid"]["cost_lambda"] = to_json(g.cost_lambda);
            res["grid"]["constraint_lambda"] = to_json(g.constraint_lambda);
        }
    }
    return res;
}

json cmd_learn(const Mdp& m, LearnerConfig cfg, bool theta_given, const std::string& trace_path, json& stats) {
    if (!theta_given) {
        if (!m.bound) throw ValidationError("--theta is required when the problem has no bound");
        cfg.theta = *m.bound;
    }
    const LearnResult r = run_two_timescale(m, cfg);
    if (!trace_path.empty()) {
        std::ofstream f(trace_path);
        if (!f) throw ValidationError("cannot write trace file " + trace_path);
        write_learn_csv(f, r.trace);
    }
    stats["steps"] = cfg.max_steps;
    return {{"gamma", r.gamma},
            {"gamma_tail_range", r.gamma_tail_max - r.gamma_tail_min},
            {"lambda_estimate", r.table.lambda_estimate()},
            {"greedy_policy", r.greedy_policy},
            {"tail_average", to_json(r.tail_average)},
            {"policy", to_json(r.policy.y())},
            {"mix_weight", r.mix_weight},
            {"cost_lambda", to_json(r.cost_lambda)},
            {"constraint_lambda", to_json(r.constraint_lambda)},
            {"theta", cfg.theta},
            {"trace", trace_path}};
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Risk-sensitive MDP solver"};
    app.require_subcommand(1);
    Common common;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--problem", common.problem, "problem JSON file")->required();
        sub->add_option("--out", common.out, "write the report here instead of stdout");
        sub->add_option("--seed", common.seed, "seed for every random choice");
        sub->add_option("--threads", common.threads, "worker threads (computations are sequential)")
            ->check(CLI::PositiveNumber);
    };

    std::string policy_path, cost = "c", mode = "lp", trace_path;
    GenerationOptions gen;
    gen.eps = 1e-7;
    AscentConfig ascent;
    int horizon = 0, grid = 0, paths = 0;
    bool enumerate = false;
    LearnerConfig learner;
    double theta = 0.0;

    auto* eval = app.add_subcommand("eval", "per-state growth rates of a fixed policy");
    add_common(eval);
    eval->add_option("--policy", policy_path, "policy JSON file")->required();
    eval->add_option("--cost", cost, "c or k");

    auto* solve = app.add_subcommand("solve", "unconstrained optimum");
    add_common(solve);
    solve->add_option("--mode", mode, "dp or lp");
    solve->add_option("--eps", gen.eps, "separation tolerance");
    solve->add_option("--max-rounds", gen.max_rounds, "generation round limit");

    auto* constrained = app.add_subcommand("constrained", "Lagrangian subgradient ascent");
    add_common(constrained);
    constrained->add_option("--gamma0", ascent.gamma0, "initial multiplier")->required();
    constrained->add_option("--steps", ascent.max_steps, "step limit")->required();
    constrained->add_option("--a0", ascent.a0, "step size scale");
    constrained->add_option("--trace", trace_path, "trace CSV path");

    auto* oracle = app.add_subcommand("oracle", "brute-force reference values");
    add_common(oracle);
    oracle->add_option("--horizon", horizon, "finite horizon N");
    oracle->add_flag("--enumerate", enumerate, "enumerate deterministic policies");
    oracle->add_option("--grid", grid, "constrained grid mesh");
    oracle->add_option("--paths", paths, "Monte Carlo paths per start state (needs --horizon)");
    oracle->add_option("--policy", policy_path, "policy for the horizon computations (default: action 0)");

    auto* learn = app.add_subcommand("learn", "two-timescale learning");
    add_common(learn);
    learn->add_option("--steps", learner.max_steps, "simulation steps")->required();
    auto* theta_opt = learn->add_option("--theta", theta, "constraint level (default: the problem bound)");
    learn->add_option("--trace", trace_path, "trace CSV path");
    learn->add_option("--a0", learner.a0, "fast step size scale");
    learn->add_option("--b0", learner.b0, "slow step size scale");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kValidation;
    }

    const auto t0 = std::chrono::steady_clock::now();
    json report;
    json params = json::object();
    json stats = json::object();
    try {
        const Loaded in = load(common);
        const Mdp& m = in.m;
        report["problem_digest"] = in.digest;
        params["seed"] = common.seed;
        params["threads"] = common.threads;
        if (eval->parsed()) {
            report["command"] = "eval";
            params["cost"] = cost;
            report["results"] = cmd_eval(m, policy_path, cost, stats);
        } else if (solve->parsed()) {
            report["command"] = "solve";
            params["mode"] = mode;
            params["eps"] = gen.eps;
            params["max_rounds"] = gen.max_rounds;
            gen.seed = common.seed;
            report["results"] = cmd_solve(m, mode, gen, stats);
        } else if (constrained->parsed()) {
            report["command"] = "constrained";
            params["gamma0"] = ascent.gamma0;
            params["steps"] = ascent.max_steps;
            params["a0"] = ascent.a0;
            ascent.generation.seed = common.seed;
            report["results"] = cmd_constrained(m, ascent, trace_path, stats);
        } else if (oracle->parsed()) {
            report["command"] = "oracle";
            params["horizon"] = horizon;
            params["enumerate"] = enumerate;
            params["grid"] = grid;
            params["paths"] = paths;
            report["results"] = cmd_oracle(m, horizon, enumerate, grid, paths, policy_path, common.seed, stats);
        } else {
            report["command"] = "learn";
            learner.seed = common.seed;
            learner.theta = theta;
            params["steps"] = learner.max_steps;
            params["a0"] = learner.a0;
            params["b0"] = learner.b0;
            report["results"] = cmd_learn(m, learner, theta_opt->count() > 0, trace_path, stats);
            params["theta"] = report["results"]["theta"];
        }
    } catch (const GuardError& e) {
        err << "guard exceeded: " << e.what() << '\n';
        return kGuard;
    } catch (const ParseError& e) {
        err << "invalid input: " << e.what() << '\n';
        return kValidation;
    } catch (const ValidationError& e) {
        err << "invalid input: " << e.what() << '\n';
        return kValidation;
    } catch (const NumericError& e) {
        err << "numeric failure: " << e.what() << '\n';
        return kNumeric;
    }
    report["parameters"] = params;
    report["solver_stats"] = stats;
    report["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    const std::string text = report.dump(2) + "\n";
    if (common.out.empty()) {
        out << text;
    } else {
        std::ofstream f(common.out);
        if (!f) {
            err << "cannot write " << common.out << '\n';
            return kValidation;
        }
        f << text;
    }
    return kOk;
}

}  // namespace rsmdp::cli
