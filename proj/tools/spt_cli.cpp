#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "spt/errors.hpp"
#include "spt/model.hpp"
#include "spt/model_io.hpp"
#include "spt/output.hpp"
#include "spt/parallel.hpp"
#include "spt/portfolio.hpp"
#include "spt/qp_approx.hpp"
#include "spt/sde_sim.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace spt;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

/// Settings merged from the experiment file and the command line; flags win.
class Settings {
public:
    Settings(std::string command, json merged) : command_(std::move(command)), j_(std::move(merged)) {}

    const std::string& command() const { return command_; }
    const json& raw() const { return j_; }
    bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }

    std::string str(const std::string& key, const std::string& def) const
    {
        if (!has(key)) return def;
        if (!j_.at(key).is_string()) throw ConfigError(key, "expected a string");
        return j_.at(key).get<std::string>();
    }

    std::uint64_t u64(const std::string& key, std::uint64_t def) const
    {
        if (!has(key)) return def;
        const json& v = j_.at(key);
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
            throw ConfigError(key, "expected a non-negative integer");
        return v.get<std::uint64_t>();
    }

    long long integer(const std::string& key, long long def, long long lo) const
    {
        if (!has(key)) return def;
        const json& v = j_.at(key);
        if (!v.is_number_integer()) throw ConfigError(key, "expected an integer");
        const long long x = v.get<long long>();
        if (x < lo) throw ConfigError(key, "must be at least " + std::to_string(lo));
        return x;
    }

    double real(const std::string& key, double def, double lo, bool inclusive) const
    {
        if (!has(key)) return def;
        const json& v = j_.at(key);
        if (!v.is_number()) throw ConfigError(key, "expected a number");
        const double x = v.get<double>();
        if (!std::isfinite(x) || (inclusive ? x < lo : x <= lo))
            throw ConfigError(key, std::string("must be ") + (inclusive ? ">= " : "> ") + std::to_string(lo));
        return x;
    }

    std::vector<double> reals(const std::string& key, std::vector<double> def) const
    {
        if (!has(key)) return def;
        const json& v = j_.at(key);
        if (v.is_number()) return {v.get<double>()};
        if (!v.is_array() || v.empty()) throw ConfigError(key, "expected a number or a non-empty array");
        std::vector<double> out;
        for (const auto& e : v) {
            if (!e.is_number()) throw ConfigError(key, "expected numbers");
            out.push_back(e.get<double>());
        }
        return out;
    }

    std::vector<std::string> names(const std::string& key, std::vector<std::string> def) const
    {
        if (!has(key)) return def;
        const json& v = j_.at(key);
        std::vector<std::string> out;
        if (v.is_string()) {
            std::stringstream ss(v.get<std::string>());
            std::string item;
            while (std::getline(ss, item, ','))
                if (!item.empty()) out.push_back(item);
        } else if (v.is_array()) {
            for (const auto& e : v) {
                if (!e.is_string()) throw ConfigError(key, "expected strings");
                out.push_back(e.get<std::string>());
            }
        } else {
            throw ConfigError(key, "expected a string or an array of strings");
        }
        if (out.empty()) throw ConfigError(key, "empty list");
        return out;
    }

private:
    std::string command_;
    json j_;
};

struct Context {
    Settings settings;
    std::optional<ModelInputs> model;
    json model_json;
    std::uint64_t seed = 1;
    fs::path out_dir;
    std::string format = "csv";
    json metadata;
};

json read_json_file(const std::string& path, const std::string& key)
{
    std::ifstream in(path);
    if (!in) throw ConfigError(key, "cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(key, std::string("invalid JSON: ") + e.what());
    }
}

Context make_context(const Settings& s, bool needs_model)
{
    Context ctx{s, std::nullopt, json(), 1, fs::path("."), "csv", json()};
    ctx.seed = s.u64("seed", 1);
    ctx.out_dir = s.str("out", ".");
    ctx.format = s.str("format", "csv");
    if (ctx.format != "csv" && ctx.format != "json") throw ConfigError("format", "expected csv or json");
    set_thread_count(static_cast<unsigned>(s.integer("threads", 0, 0)));
    if (needs_model) {
        if (!s.has("model")) throw ConfigError("model", "a model file is required");
        const std::string path = s.str("model", "");
        ctx.model_json = read_json_file(path, "model");
        ctx.model = parse_model(ctx.model_json);
    }
    json hashed = s.raw();
    hashed.erase("out");
    hashed.erase("threads");
    hashed["command"] = s.command();
    hashed["model_spec"] = ctx.model_json;
    ctx.metadata = {{"command", s.command()}, {"config_hash", config_hash(hashed)}, {"seed", ctx.seed}};
    if (ctx.model) ctx.metadata["model"] = model_summary(*ctx.model);
    std::error_code ec;
    fs::create_directories(ctx.out_dir, ec);
    if (ec) throw ConfigError("out", "cannot create output directory: " + ec.message());
    return ctx;
}

/// Rows of doubles with named columns, written as CSV or as a JSON object.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

fs::path write_table(const Context& ctx, const std::string& stem, const Table& t, json extra = json::object())
{
    json meta = ctx.metadata;
    for (auto it = extra.begin(); it != extra.end(); ++it) meta[it.key()] = it.value();
    const fs::path path = ctx.out_dir / (stem + (ctx.format == "csv" ? ".csv" : ".json"));
    std::ofstream os(path);
    if (!os) throw ConfigError("out", "cannot write '" + path.string() + "'");
    if (ctx.format == "csv") {
        CsvWriter w(os, meta, t.header);
        for (const auto& r : t.rows) w.row(r);
    } else {
        json j;
        j["metadata"] = meta;
        j["columns"] = t.header;
        j["rows"] = t.rows;
        write_json(os, j);
    }
    return path;
}

fs::path write_json_file(const Context& ctx, const std::string& stem, json body)
{
    body["metadata"] = ctx.metadata;
    const fs::path path = ctx.out_dir / (stem + ".json");
    std::ofstream os(path);
    if (!os) throw ConfigError("out", "cannot write '" + path.string() + "'");
    write_json(os, body);
    return path;
}

std::vector<double> to_std(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

LogAffineFamily family_from_bundle(const json& b)
{
    if (!b.contains("family") || !b.at("family").is_array()) throw ConfigError("bundle", "missing family coefficients");
    std::vector<Mat> blocks;
    for (const auto& member : b.at("family")) {
        const std::size_t K = member.size();
        const std::size_t d = K ? member.at(0).size() : 0;
        Mat w(K, d);
        for (std::size_t k = 0; k < K; ++k)
            for (std::size_t i = 0; i < d; ++i) w(k, i) = member.at(k).at(i).get<double>();
        blocks.push_back(std::move(w));
    }
    return LogAffineFamily(std::move(blocks));
}

GeneratedPortfolio portfolio_by_name(const Context& ctx, const std::string& name)
{
    const ModelInputs& m = *ctx.model;
    if (name == "market") return market_portfolio();
    if (name == "equal") return equal_weight_portfolio(m.dim);
    if (name == "unconstrained") {
        if (!m.has_gradient_drift())
            throw NotGradientError("the unconstrained optimum needs a drift field that is a gradient; this model has none");
        return unconstrained_optimum(m);
    }
    if (name == "long_only") {
        if (m.dim != 2) throw ConfigError("portfolio", "long_only is only available for d = 2 (model has d = " + std::to_string(m.dim) + ")");
        auto gp = solve_two_asset_long_only(m).portfolio;
        gp.name = "long_only";
        return gp;
    }
    if (name == "qp") {
        if (!ctx.settings.has("bundle")) throw ConfigError("bundle", "the qp portfolio needs a bundle written by the qp command");
        const json b = read_json_file(ctx.settings.str("bundle", ""), "bundle");
        const auto fam = family_from_bundle(b);
        if (fam.dim() != m.dim) throw ConfigError("bundle", "bundle dimension does not match the model");
        Vec mu(fam.size());
        for (int i = 0; i < fam.size(); ++i) mu[i] = b.at("mu").at(i).get<double>();
        auto gp = qp_portfolio(fam, mu);
        gp.name = "qp";
        return gp;
    }
    throw ConfigError("portfolio", "unknown portfolio '" + name + "' (market, equal, unconstrained, long_only, qp)");
}

/// Evaluation points for weight tables: a grid on (0,1) for d = 2, Dirichlet draws otherwise.
std::vector<SimplexPoint> table_points(const Context& ctx, long long n)
{
    const int d = ctx.model->dim;
    std::vector<SimplexPoint> pts;
    if (d == 2) {
        for (long long k = 0; k < n; ++k) {
            const double x = (k + 0.5) / static_cast<double>(n);
            pts.push_back(SimplexPoint::unchecked((Vec(2) << x, 1.0 - x).finished()));
        }
    } else {
        pts = sample_dirichlet(Vec::Ones(d), static_cast<std::size_t>(n), ctx.seed);
    }
    return pts;
}

Table weight_table(const std::vector<SimplexPoint>& pts, const std::vector<GeneratedPortfolio>& ps)
{
    const int d = pts.empty() ? 0 : pts.front().dim();
    Table t;
    for (int i = 1; i <= d; ++i) t.header.push_back("x" + std::to_string(i));
    for (const auto& p : ps)
        for (int i = 1; i <= d; ++i) t.header.push_back((ps.size() == 1 ? std::string() : p.name + "_") + "pi" + std::to_string(i));
    for (const auto& x : pts) {
        std::vector<double> row = to_std(x.coords());
        for (const auto& p : ps) {
            const Vec w = p.weights(x);
            row.insert(row.end(), w.data(), w.data() + w.size());
        }
        t.rows.push_back(std::move(row));
    }
    return t;
}

int cmd_weights(const Settings& s)
{
    Context ctx = make_context(s, true);
    const long long n = s.integer("grid", 101, 1);
    const auto def = ctx.model->dim == 2 ? std::vector<std::string>{"unconstrained", "long_only"} : std::vector<std::string>{"unconstrained"};
    std::vector<GeneratedPortfolio> ps;
    for (const auto& name : s.names("portfolio", def)) ps.push_back(portfolio_by_name(ctx, name));
    const auto path = write_table(ctx, "weights", weight_table(table_points(ctx, n), ps));
    std::cout << "wrote " << path.string() << '\n';
    return 0;
}

int cmd_qp(const Settings& s)
{
    Context ctx = make_context(s, true);
    const ModelInputs& m = *ctx.model;
    const int M = static_cast<int>(s.integer("M", 25, 1));
    const int K = static_cast<int>(s.integer("K", 100, 1));
    const auto N = static_cast<std::size_t>(s.integer("N", 100, 1));
    const auto n_eval = static_cast<std::size_t>(s.integer("n_eval", 100000, 2));
    const double tol = s.real("tol", 1e-8, 0.0, false);
    const int max_iter = static_cast<int>(s.integer("max_iter", 100000, 1));
    const long long grid = s.integer("grid", 101, 1);

    const std::uint64_t family_seed = ctx.seed;
    const auto fam = generate_family(M, K, m.dim, family_seed);
    const auto qp = assemble_qp(m, fam, N, ctx.seed + 1);
    const auto sol = solve_qp(qp, tol, max_iter);
    auto gp = qp_portfolio(fam, sol.mu);
    const auto lam = lambda_E_estimate(m, gp, n_eval, ctx.seed + 2);
    json bundle = qp_bundle(fam, qp, sol, lam, family_seed);
    bundle["eval_seed"] = ctx.seed + 2;
    bundle["n_eval"] = n_eval;
    const auto bpath = write_json_file(ctx, "qp_bundle", bundle);
    const auto wpath = write_table(ctx, "qp_weights", weight_table(table_points(ctx, grid), {gp}));
    std::cout << "lambda_E " << lam.estimate << " +- " << lam.stderr_ << (sol.converged ? "" : " (solver did not converge)") << '\n';
    std::cout << "wrote " << bpath.string() << '\n' << "wrote " << wpath.string() << '\n';
    return 0;
}

int cmd_simulate(const Settings& s)
{
    Context ctx = make_context(s, true);
    const ModelInputs& m = *ctx.model;
    SimConfig cfg;
    cfg.dt = s.real("dt", 1e-3, 0.0, false);
    cfg.T = s.real("T", 1.0, 0.0, true);
    cfg.seed = ctx.seed;
    cfg.record_stride = static_cast<std::size_t>(s.integer("stride", 1, 1));
    std::vector<GeneratedPortfolio> ps;
    for (const auto& name : s.names("portfolio", {"market", "unconstrained"})) ps.push_back(portfolio_by_name(ctx, name));
    SimplexPoint x0 = SimplexPoint::barycenter(m.dim);
    if (s.has("x0")) {
        const auto v = s.reals("x0", {});
        if (static_cast<int>(v.size()) != m.dim) throw ConfigError("x0", "expected " + std::to_string(m.dim) + " entries");
        try {
            x0 = SimplexPoint(Eigen::Map<const Vec>(v.data(), m.dim));
        } catch (const InvalidInput& e) {
            throw ConfigError("x0", e.what());
        }
    }

    Table t;
    t.header.push_back("time");
    for (int i = 1; i <= m.dim; ++i) t.header.push_back("x" + std::to_string(i));
    for (const auto& p : ps) t.header.push_back("log_V_" + p.name);
    json extra = {{"dt", cfg.dt}, {"T", cfg.T}};

    if (cfg.T == 0.0) {
        const auto path = write_table(ctx, "simulate", t, extra);
        std::cout << "wrote " << path.string() << '\n';
        return 0;
    }
    if (cfg.T < cfg.dt) throw ConfigError("T", "must be 0 or at least dt");
    const auto res = simulate(m, x0, cfg, ps);
    for (std::size_t k = 0; k < res.path.times.size(); ++k) {
        std::vector<double> row{res.path.times[k]};
        const auto x = to_std(res.path.states[k]);
        row.insert(row.end(), x.begin(), x.end());
        for (const auto& w : res.wealth) row.push_back(w.log_V[k]);
        t.rows.push_back(std::move(row));
    }
    json growth = json::object();
    for (const auto& w : res.wealth) {
        const auto g = growth_rate(w);
        growth[w.name] = {{"growth", g.rate}, {"stderr", g.stderr_}, {"log_V_T", w.log_V.back()},
                          {"guard_trips", w.guard_trips}, {"step_size_warning", w.step_size_warning}};
        std::cout << w.name << " growth " << g.rate << " +- " << g.stderr_ << '\n';
        if (w.step_size_warning) std::cerr << "warning: " << w.name << " hit the wealth guard on more than 0.1% of steps; reduce dt\n";
    }
    extra["boundary_hits"] = res.path.boundary_hits;
    const auto path = write_table(ctx, "simulate", t, extra);
    const auto gpath = write_json_file(ctx, "growth", {{"dt", cfg.dt}, {"T", cfg.T}, {"portfolios", growth}, {"boundary_hits", res.path.boundary_hits}});
    std::cout << "wrote " << path.string() << '\n' << "wrote " << gpath.string() << '\n';
    return 0;
}

int cmd_capcurve(const Settings& s)
{
    Context ctx = make_context(s, false);
    const auto as = s.reals("a", {0.5, 1.0, 2.0});
    const auto ds = s.reals("d", {500, 5000});
    const auto draws = static_cast<std::size_t>(s.integer("draws", 1000, 1));
    Table t;
    t.header = {"a", "d", "rank", "mean", "q05", "median", "q95"};
    std::uint64_t stream = 0;
    for (double d : ds) {
        if (d < 2 || d != std::floor(d)) throw ConfigError("d", "entries must be integers >= 2");
        for (double a : as) {
            if (!(a > 0.0)) throw ConfigError("a", "entries must be positive");
            const auto c = capital_distribution_curve(a, static_cast<int>(d), draws, ctx.seed + stream++);
            for (int r = 0; r < c.d; ++r) t.rows.push_back({a, d, r + 1.0, c.mean[r], c.q05[r], c.median[r], c.q95[r]});
        }
    }
    const auto path = write_table(ctx, "capcurve", t, {{"draws", draws}});
    std::cout << "wrote " << path.string() << '\n';
    return 0;
}

std::string component_text(const GraphReport& g)
{
    std::string out = g.connected ? "connected" : "disconnected ";
    if (g.connected) return out;
    for (std::size_t c = 0; c < g.components.size(); ++c) {
        out += (c ? ",{" : "{");
        for (std::size_t k = 0; k < g.components[c].size(); ++k) out += (k ? "," : "") + std::to_string(g.components[c][k] + 1);
        out += "}";
    }
    return out;
}

int cmd_diagnose(const Settings& s)
{
    Context ctx = make_context(s, true);
    const ModelInputs& m = *ctx.model;
    const auto n = static_cast<std::size_t>(s.integer("n", 20000, 10));
    const auto graph = check_graph_connectivity(m, SimplexPoint::barycenter(m.dim));
    const auto diag = assumption_diagnostics(m, n, ctx.seed);
    json j;
    j["graph"] = {{"connected", graph.connected},
                  {"matrix_power_positive", graph.matrix_power_positive},
                  {"summary", component_text(graph)},
                  {"components", graph.components}};
    j["assumptions"] = {{"advisory", "sampled checks; they cannot prove integrability or global bounds"},
                        {"pass", diag.pass},
                        {"failures", diag.failures},
                        {"violated_conditions", diag.violated_conditions},
                        {"min_LR_over_R", diag.min_LR_over_R},
                        {"sampled_min_coordinate", diag.sampled_min_coordinate},
                        {"boundary_decay", diag.boundary_decay},
                        {"max_boundary_ratio", diag.max_boundary_ratio},
                        {"abs_LR_over_R", {{"mean", diag.abs_LR_over_R.mean}, {"stderr", diag.abs_LR_over_R.stderr_}}},
                        {"abs_L_log_R", {{"mean", diag.abs_L_log_R.mean}, {"stderr", diag.abs_L_log_R.stderr_}}},
                        {"floors", diag.floors},
                        {"truncated_integral", diag.truncated_integral},
                        {"divergence_suspected", diag.divergence_suspected},
                        {"nan_flag", diag.nan_flag}};
    j["rank_based_spec"] = is_rank_based_spec(m);
    if (m.has_gradient_drift()) j["rank_based_optimum"] = is_rank_based_portfolio(unconstrained_optimum(m), m.dim, 200, ctx.seed);
    if (m.dim == 2) j["concave_generated_long_only"] = concavity_criterion(m);
    j["pass"] = diag.pass && graph.connected;
    const auto path = write_json_file(ctx, "diagnose", j);
    std::cout << "graph: " << component_text(graph) << '\n';
    std::cout << "assumptions: " << (diag.pass ? "pass" : "fail") << '\n';
    for (const auto& f : diag.failures) std::cout << "  " << f << '\n';
    std::cout << "wrote " << path.string() << '\n';
    return 0;
}

int cmd_lambda(const Settings& s)
{
    Context ctx = make_context(s, true);
    const ModelInputs& m = *ctx.model;
    const auto n = static_cast<std::size_t>(s.integer("n", 100000, 2));
    json j;
    std::optional<double> cf;
    if (const auto* p = std::get_if<DirichletParams>(&m.preset)) {
        try {
            cf = lambda_dirichlet_closed_form(*p);
            j["lambda_closed_form"] = *cf;
        } catch (const InvalidParameter& e) {
            j["lambda_closed_form_error"] = e.what();
        }
    }
    const auto names = s.names("portfolio", {"unconstrained"});
    json reports = json::object();
    for (const auto& name : names) {
        const auto gp = portfolio_by_name(ctx, name);
        const auto r = lambda_mc(m, gp, n, ctx.seed, name == "unconstrained" ? cf : std::nullopt);
        json rj = {{"lambda_mc", r.lambda_mc}, {"stderr", r.stderr_}, {"method", r.method},
                   {"divergent_variance", r.divergent_variance}, {"consistent", r.consistent},
                   {"effective_samples", r.effective_samples}};
        if (r.ibp) rj["ibp"] = {{"mean", r.ibp->mean}, {"stderr", r.ibp->stderr_}, {"discrepancy", r.ibp_discrepancy}};
        reports[name] = rj;
        std::cout << name << " lambda " << r.lambda_mc << " +- " << r.stderr_ << '\n';
    }
    j["portfolios"] = reports;
    if (m.dim == 2) {
        const auto two = solve_two_asset_long_only(m);
        j["lambda_long"] = two.lambda_long;
        j["lambda_unconstrained_quadrature"] = two.lambda_unconstrained;
        j["two_asset"] = {{"x_lower", two.x_lower}, {"x_upper", two.x_upper}, {"theta1", two.theta1}, {"theta2", two.theta2},
                          {"concave_generated", two.concave_generated}};
        std::cout << "lambda_long " << two.lambda_long << '\n';
    }
    if (cf) std::cout << "lambda closed form " << *cf << '\n';
    const auto path = write_json_file(ctx, "lambda", j);
    std::cout << "wrote " << path.string() << '\n';
    return 0;
}

const std::map<std::string, std::set<std::string>>& allowed_keys()
{
    static const std::map<std::string, std::set<std::string>> keys{
        {"weights", {"grid", "portfolio"}},
        {"qp", {"M", "K", "N", "n_eval", "tol", "max_iter", "grid"}},
        {"simulate", {"dt", "T", "stride", "portfolio", "bundle", "x0"}},
        {"capcurve", {"a", "d", "draws"}},
        {"diagnose", {"n"}},
        {"lambda", {"n", "portfolio", "bundle"}},
    };
    return keys;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Robust growth-optimal portfolios on the simplex"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Show help for every subcommand");

    // Every option is collected as a string and typed later, so config files and flags share one validator.
    std::map<std::string, std::string> flags;
    std::string config_path;
    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON experiment file; flags override its entries");
        sub->add_option_function<std::string>("--model", [&](const std::string& v) { flags["model"] = v; }, "Model JSON file");
        sub->add_option_function<std::string>("--seed", [&](const std::string& v) { flags["seed"] = v; }, "Random seed (u64)");
        sub->add_option_function<std::string>("--out", [&](const std::string& v) { flags["out"] = v; }, "Output directory");
        sub->add_option_function<std::string>("--threads", [&](const std::string& v) { flags["threads"] = v; }, "Worker threads, 0 = all cores");
        sub->add_option_function<std::string>("--format", [&](const std::string& v) { flags["format"] = v; }, "csv or json");
    };
    auto opt = [&](CLI::App* sub, const std::string& name, const std::string& help) {
        sub->add_option_function<std::string>("--" + name, [&flags, name](const std::string& v) { flags[name] = v; }, help);
    };

    auto* weights = app.add_subcommand("weights", "Tabulate portfolio weights");
    common(weights);
    opt(weights, "grid", "Number of evaluation points (grid on (0,1) for d = 2)");
    opt(weights, "portfolio", "Comma-separated: unconstrained, long_only, market, equal, qp");

    auto* qp = app.add_subcommand("qp", "Solve the log-affine quadratic program");
    common(qp);
    opt(qp, "M", "Number of basis functions");
    opt(qp, "K", "Hyperplanes per basis function");
    opt(qp, "N", "Samples used to assemble Q and r");
    opt(qp, "n_eval", "Samples for the growth-rate estimate");
    opt(qp, "tol", "Frank-Wolfe gap tolerance");
    opt(qp, "max_iter", "Iteration cap");
    opt(qp, "grid", "Weight-table points");

    auto* sim = app.add_subcommand("simulate", "Simulate market weights and wealth curves");
    common(sim);
    opt(sim, "dt", "Time step");
    opt(sim, "T", "Horizon (0 writes only the header)");
    opt(sim, "stride", "Record every n-th step");
    opt(sim, "portfolio", "Comma-separated: market, unconstrained, long_only, equal, qp");
    opt(sim, "bundle", "QP bundle for the qp portfolio");
    opt(sim, "x0", "Initial weights, comma-separated");

    auto* cap = app.add_subcommand("capcurve", "Capital distribution curves of Dirichlet draws");
    common(cap);
    opt(cap, "a", "Comma-separated Dirichlet parameters");
    opt(cap, "d", "Comma-separated dimensions");
    opt(cap, "draws", "Draws per curve");

    auto* diag = app.add_subcommand("diagnose", "Graph condition, assumption and rank diagnostics");
    common(diag);
    opt(diag, "n", "Samples");

    auto* lam = app.add_subcommand("lambda", "Growth rates by closed form, quadrature and Monte Carlo");
    common(lam);
    opt(lam, "n", "Monte Carlo samples");
    opt(lam, "portfolio", "Comma-separated portfolios to evaluate");
    opt(lam, "bundle", "QP bundle for the qp portfolio");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    }

    CLI::App* chosen = app.get_subcommands().front();
    const std::string command = chosen->get_name();
    try {
        json merged = json::object();
        if (!config_path.empty()) {
            merged = read_json_file(config_path, "config");
            if (!merged.is_object()) throw ConfigError("config", "expected a JSON object");
        }
        static const std::set<std::string> common_keys{"model", "seed", "out", "threads", "format"};
        for (auto it = merged.begin(); it != merged.end(); ++it) {
            if (!common_keys.count(it.key()) && !allowed_keys().at(command).count(it.key()))
                throw ConfigError(it.key(), "unknown key for '" + command + "'");
        }
        for (const auto& [key, text] : flags) {
            // Flag text is parsed as JSON when it looks like a number or array, else kept as a string.
            static const std::set<std::string> string_keys{"model", "out", "bundle", "format", "portfolio"};
            json v = text;
            if (!string_keys.count(key)) {
                try {
                    v = json::parse(text);
                    if (!v.is_number() && !v.is_array()) v = text;
                } catch (const json::parse_error&) {
                    v = text;
                }
            }
            if (v.is_string() && text.find(',') != std::string::npos && !string_keys.count(key)) {
                json arr = json::array();
                std::stringstream ss(text);
                std::string item;
                while (std::getline(ss, item, ',')) {
                    try {
                        arr.push_back(json::parse(item));
                    } catch (const json::parse_error&) {
                        throw ConfigError(key, "cannot parse '" + item + "'");
                    }
                }
                v = arr;
            }
            merged[key] = v;
        }
        const Settings settings(command, merged);
        if (command == "weights") return cmd_weights(settings);
        if (command == "qp") return cmd_qp(settings);
        if (command == "simulate") return cmd_simulate(settings);
        if (command == "capcurve") return cmd_capcurve(settings);
        if (command == "diagnose") return cmd_diagnose(settings);
        if (command == "lambda") return cmd_lambda(settings);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const NotGradientError& e) {
        std::cerr << "unsupported model: " << e.what() << '\n';
        return kExitConfig;
    } catch (const InvalidParameter& e) {
        std::cerr << "invalid parameter: " << e.what() << '\n';
        return kExitConfig;
    } catch (const InvalidInput& e) {
        std::cerr << "invalid input: " << e.what() << '\n';
        return kExitConfig;
    } catch (const SptError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitNumerical;
    }
    return kExitConfig;
}
