#include "mixtile/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mixtile/errors.hpp"
#include "mixtile/factor.hpp"
#include "mixtile/geodata.hpp"
#include "mixtile/mle.hpp"
#include "mixtile/predict.hpp"
#include "mixtile/rng.hpp"
#include "mixtile/taskgraph.hpp"
#include "mixtile/tilestore.hpp"

namespace mixtile {

namespace {

using json = nlohmann::ordered_json;

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    std::string command;
    std::size_t n = 0;
    std::vector<std::size_t> sizes;
    std::size_t nb = 256;
    std::vector<std::string> policies;
    std::string theta;
    std::optional<std::uint64_t> seed;
    std::string metric = "euclidean";
    double radius = kEarthRadiusKm;
    std::size_t k = 10;
    std::string data;
    std::string out;
    std::string trace;
    std::size_t threads = 0;
    std::string range_bounds = "0.001,3";
    std::string smoothness_bounds = "0.05,5";
    double tolerance = 1e-3;
    std::size_t max_iters = 500;
    bool refit = false;
    std::string format = "json";
    std::size_t reps = 3;
    bool residual = false;
};

MaternParams parse_theta(const std::string& text, const char* flag) {
    if (text.empty()) throw UsageError(std::string(flag) + " is required");
    try {
        return MaternParams::parse(text);
    } catch (const DomainError& e) {
        throw UsageError(std::string(flag) + ": " + e.what());
    }
}

PolicySpec parse_policy(const std::string& text) {
    try {
        return PolicySpec::parse(text);
    } catch (const DomainError& e) {
        throw UsageError(std::string("--policy: ") + e.what());
    }
}

std::pair<double, double> parse_bounds(const std::string& text, const char* flag) {
    const auto comma = text.find(',');
    if (comma == std::string::npos) throw UsageError(std::string(flag) + " expects lo,hi");
    char* end = nullptr;
    const std::string lo_text = text.substr(0, comma);
    const std::string hi_text = text.substr(comma + 1);
    const double lo = std::strtod(lo_text.c_str(), &end);
    if (lo_text.empty() || *end != '\0') throw UsageError(std::string(flag) + " expects lo,hi");
    const double hi = std::strtod(hi_text.c_str(), &end);
    if (hi_text.empty() || *end != '\0') throw UsageError(std::string(flag) + " expects lo,hi");
    if (!(lo > 0.0) || !(hi >= lo) || !std::isfinite(hi)) throw UsageError(std::string(flag) + " needs 0 < lo <= hi");
    return {lo, hi};
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& seed) {
    if (seed) return *seed;
    if (const char* env = std::getenv("MIXTILE_SEED"); env && *env) {
        char* end = nullptr;
        const unsigned long long v = std::strtoull(env, &end, 10);
        if (*end != '\0' || env[0] == '-') throw UsageError("MIXTILE_SEED is not an unsigned integer");
        return v;
    }
    return 0;
}

DistanceMetric parse_metric(const RunConfig& cfg) {
    if (cfg.metric == "euclidean") return DistanceMetric::euclidean();
    if (cfg.metric == "great-circle") {
        try {
            return DistanceMetric::great_circle(cfg.radius);
        } catch (const DomainError& e) {
            throw UsageError(std::string("--radius: ") + e.what());
        }
    }
    throw UsageError("--metric must be euclidean or great-circle");
}

std::size_t grid_of(std::size_t n, std::size_t nb) { return (n + nb - 1) / nb; }

json theta_json(const MaternParams& p) { return json::array({p.variance, p.range, p.smoothness}); }

json policy_json(const PolicySpec& spec, std::size_t grid) {
    const PrecisionPolicy policy = spec.resolve(grid);
    json j;
    j["spec"] = spec.to_string();
    j["mode"] = std::string(to_string(spec.mode));
    j["dp_percent"] = spec.dp_percent;
    j["diag_thick"] = policy.effective_thickness(grid);
    return j;
}

json header(const RunConfig& cfg) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["command"] = cfg.command;
    return j;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

template <class F>
void emit(const std::string& path, std::ostream& fallback, F&& write) {
    if (path.empty()) {
        write(fallback);
        fallback.flush();
        return;
    }
    std::ofstream file(path, std::ios::binary);
    if (!file) throw std::runtime_error("cannot write " + path);
    write(static_cast<std::ostream&>(file));
    file.flush();
    if (!file) throw std::runtime_error("failed writing " + path);
}

GeoDataset load(const RunConfig& cfg) {
    if (cfg.data.empty()) throw UsageError("--data is required");
    return read_dataset(std::filesystem::path(cfg.data), cfg.radius);
}

std::string error_type(const std::exception& e) {
    if (dynamic_cast<const ParseError*>(&e)) return "parse";
    if (dynamic_cast<const NotPositiveDefiniteError*>(&e)) return "not_positive_definite";
    if (dynamic_cast<const EstimationError*>(&e)) return "estimation";
    if (dynamic_cast<const PredictionError*>(&e)) return "prediction";
    if (dynamic_cast<const GenerationError*>(&e)) return "generation";
    if (dynamic_cast<const AssemblyError*>(&e)) return "assembly";
    if (dynamic_cast<const PrecisionOverflowError*>(&e)) return "precision_overflow";
    if (dynamic_cast<const DomainError*>(&e)) return "domain";
    if (dynamic_cast<const DimensionError*>(&e)) return "dimension";
    return "runtime";
}

void write_error(std::ostream& err, const std::string& command, const std::exception& e) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["command"] = command;
    j["error"]["type"] = error_type(e);
    j["error"]["message"] = e.what();
    if (const auto* pe = dynamic_cast<const ParseError*>(&e)) j["error"]["line"] = pe->line();
    err << j.dump() << '\n';
}

int cmd_generate(const RunConfig& cfg, std::ostream& out) {
    const MaternParams theta0 = parse_theta(cfg.theta, "--theta0");
    const DistanceMetric metric = parse_metric(cfg);
    const std::uint64_t seed = resolve_seed(cfg.seed);

    json config = header(cfg);
    config["n"] = cfg.n;
    config["theta0"] = theta_json(theta0);
    config["seed"] = seed;
    config["metric"] = cfg.metric;
    if (metric.is_great_circle()) config["radius"] = metric.radius;
    config["nb"] = cfg.nb;

    std::vector<Location> loc = generate_locations(cfg.n, seed);
    if (metric.is_great_circle())
        for (auto& l : loc) l = {-180.0 + 360.0 * l.x, -90.0 + 180.0 * l.y};
    const GeoDataset ds = generate_field(std::move(loc), theta0, metric, seed, cfg.nb, cfg.threads);

    emit(cfg.out, out, [&](std::ostream& os) {
        os << "# " << config.dump() << '\n';
        write_dataset(ds, os);
    });
    if (!cfg.out.empty()) {
        config["out"] = cfg.out;
        out << config.dump() << '\n';
    }
    return 0;
}

int cmd_loglik(const RunConfig& cfg, std::ostream& out) {
    const MaternParams theta = parse_theta(cfg.theta, "--theta");
    const PolicySpec spec = parse_policy(cfg.policies.empty() ? "dp" : cfg.policies.front());
    const GeoDataset ds = load(cfg);
    const std::size_t grid = grid_of(ds.size(), cfg.nb);

    json doc = header(cfg);
    json& config = doc["config"];
    config["data"] = cfg.data;
    config["n"] = ds.size();
    config["nb"] = cfg.nb;
    config["grid"] = grid;
    config["policy"] = policy_json(spec, grid);
    config["theta"] = theta_json(theta);
    config["threads"] = resolve_threads(cfg.threads);

    FactorStats stats;
    const LikelihoodEval e = loglik(ds, theta, spec.resolve(grid), {cfg.nb, cfg.threads}, &stats);
    if (!e.feasible) throw NotPositiveDefiniteError(ds.size());
    json& result = doc["result"];
    result["loglik"] = e.value;
    result["logdet"] = e.logdet;
    result["quadform"] = e.quadform;
    result["dp_flops"] = stats.dp_flops;
    result["sp_flops"] = stats.sp_flops;
    emit(cfg.out, out, [&](std::ostream& os) { os << doc.dump(2) << '\n'; });
    return 0;
}

int cmd_estimate(const RunConfig& cfg, std::ostream& out) {
    const PolicySpec spec = parse_policy(cfg.policies.empty() ? "dp" : cfg.policies.front());
    const auto [rlo, rhi] = parse_bounds(cfg.range_bounds, "--range-bounds");
    const auto [slo, shi] = parse_bounds(cfg.smoothness_bounds, "--smoothness-bounds");
    if (!(cfg.tolerance > 0.0)) throw UsageError("--tol must be positive");
    const GeoDataset ds = load(cfg);
    const std::size_t grid = grid_of(ds.size(), cfg.nb);
    const PrecisionPolicy policy = spec.resolve(grid);

    OptimizerConfig opt;
    opt.eval = {cfg.nb, cfg.threads};
    opt.range_lower = rlo;
    opt.range_upper = rhi;
    opt.smoothness_lower = slo;
    opt.smoothness_upper = shi;
    opt.tolerance = cfg.tolerance;
    opt.max_iterations = cfg.max_iters;

    json doc = header(cfg);
    json& config = doc["config"];
    config["data"] = cfg.data;
    config["n"] = ds.size();
    config["nb"] = cfg.nb;
    config["grid"] = grid;
    config["policy"] = policy_json(spec, grid);
    config["threads"] = resolve_threads(cfg.threads);
    config["range_bounds"] = {rlo, rhi};
    config["smoothness_bounds"] = {slo, shi};
    config["tolerance"] = cfg.tolerance;
    config["max_iterations"] = cfg.max_iters;
    json simplex = json::array();
    for (const auto& v : opt.initial_simplex) simplex.push_back({v[0], v[1]});
    config["initial_simplex"] = simplex;
    config["morton_sort"] = opt.morton_sort;

    std::ofstream trace;
    if (!cfg.trace.empty()) {
        trace.open(cfg.trace, std::ios::binary);
        if (!trace) throw std::runtime_error("cannot write " + cfg.trace);
        trace << "# " << config.dump() << '\n';
        write_trace_header(trace);
        opt.trace = [&trace](const TraceEntry& e) { write_trace_row(trace, e); };
    }

    const FitResult fit = estimate(ds, policy, opt);
    if (trace.is_open()) {
        trace.flush();
        if (!trace) throw std::runtime_error("failed writing " + cfg.trace);
    }

    json& result = doc["result"];
    result["theta_hat"] = theta_json(fit.theta_hat);
    result["final_ll"] = fit.final_ll;
    result["iterations"] = fit.iterations;
    result["evaluations"] = fit.evaluations;
    result["converged"] = fit.converged;
    emit(cfg.out, out, [&](std::ostream& os) { os << doc.dump(2) << '\n'; });
    return 0;
}

int cmd_predict(const RunConfig& cfg, std::ostream& out) {
    if (cfg.format != "json" && cfg.format != "csv") throw UsageError("--format must be json or csv");
    std::vector<PolicySpec> specs;
    for (const auto& p : cfg.policies.empty() ? std::vector<std::string>{"dp"} : cfg.policies)
        specs.push_back(parse_policy(p));
    std::optional<MaternParams> theta;
    if (!cfg.theta.empty() || !cfg.refit) theta = parse_theta(cfg.theta, "--theta");
    const std::uint64_t seed = resolve_seed(cfg.seed);
    const GeoDataset ds = load(cfg);
    if (cfg.k < 2 || cfg.k > ds.size()) throw UsageError("--k must be between 2 and the number of observations");
    const std::size_t grid = grid_of(ds.size(), cfg.nb);

    json config = header(cfg);
    config["data"] = cfg.data;
    config["n"] = ds.size();
    config["nb"] = cfg.nb;
    config["grid"] = grid;
    config["k"] = cfg.k;
    config["seed"] = seed;
    config["refit"] = cfg.refit;
    config["theta"] = theta ? theta_json(*theta) : json(nullptr);
    json pols = json::array();
    for (const auto& s : specs) pols.push_back(policy_json(s, grid));
    config["policies"] = pols;
    config["threads"] = resolve_threads(cfg.threads);

    KFoldOptions opts;
    opts.eval = {cfg.nb, cfg.threads};
    opts.refit = cfg.refit;
    opts.fit.eval = opts.eval;
    const FoldAssignment folds = kfold_split(ds.size(), cfg.k, seed);

    std::vector<std::pair<std::string, PredictionReport>> reports;
    for (const auto& s : specs)
        reports.emplace_back(s.to_string(),
                             pmse_kfold(ds, theta.value_or(MaternParams{}), s.resolve(grid), folds, opts));

    emit(cfg.out, out, [&](std::ostream& os) {
        if (cfg.format == "csv") {
            os << "# " << config.dump() << '\n';
            write_report_csv_header(os);
            for (const auto& [name, r] : reports) write_report_csv_rows(os, r, name, 0);
        } else {
            json doc;
            doc["schema_version"] = kSchemaVersion;
            doc["command"] = cfg.command;
            config.erase("schema_version");
            config.erase("command");
            doc["config"] = config;
            json variants = json::array();
            for (const auto& [name, r] : reports) variants.push_back(json::parse(report_to_json(r, name)));
            doc["variants"] = variants;
            os << doc.dump(2) << '\n';
        }
    });
    return 0;
}

int cmd_bench(const RunConfig& cfg, std::ostream& out) {
    const MaternParams theta = parse_theta(cfg.theta, "--theta");
    std::vector<PolicySpec> specs;
    for (const auto& p : cfg.policies.empty() ? std::vector<std::string>{"dp"} : cfg.policies)
        specs.push_back(parse_policy(p));
    if (cfg.sizes.empty()) throw UsageError("--n is required");
    const std::uint64_t seed = resolve_seed(cfg.seed);

    json config = header(cfg);
    config["n"] = cfg.sizes;
    config["nb"] = cfg.nb;
    json pols = json::array();
    for (const auto& s : specs) pols.push_back(s.to_string());
    config["policies"] = pols;
    config["theta"] = theta_json(theta);
    config["reps"] = cfg.reps;
    config["seed"] = seed;
    config["residual"] = cfg.residual;
    config["threads"] = resolve_threads(cfg.threads);

    emit(cfg.out, out, [&](std::ostream& os) {
        os << "# " << config.dump() << '\n';
        os << "n,nb,policy,diag_thick,reps,wall_time,dp_flops,sp_flops,residual,logdet\n";
        os.flush();
        for (std::size_t n : cfg.sizes) {
            const std::vector<Location> loc = generate_locations(n, seed);
            Rng rng(derive_seed(seed, 1));
            std::vector<double> z(n);
            for (double& v : z) v = rng.normal();
            const GeoDataset ds(loc, z);
            const std::size_t grid = grid_of(n, cfg.nb);
            for (const auto& spec : specs) {
                const PrecisionPolicy policy = spec.resolve(grid);
                std::optional<CholeskyFactor> factor;
                double ld = 0.0;
                double seconds = 0.0;
                for (std::size_t r = 0; r < cfg.reps; ++r) {
                    const auto t0 = std::chrono::steady_clock::now();
                    TileMatrix sigma = assemble_covariance(ds, theta, cfg.nb, policy, cfg.threads);
                    FactorResult res = try_cholesky(std::move(sigma), policy, FactorOptions::with_threads(cfg.threads));
                    if (auto* bad = std::get_if<NotPositiveDefinite>(&res))
                        throw NotPositiveDefiniteError(bad->global_index);
                    factor.emplace(std::move(std::get<CholeskyFactor>(res)));
                    const std::vector<double> y = forward_solve(*factor, z);
                    ld = logdet(*factor);
                    seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                }
                std::string residual;
                if (cfg.residual) {
                    const TileMatrix exact = assemble_covariance(ds, theta, cfg.nb, PrecisionPolicy::dp(), cfg.threads);
                    const std::vector<double> x = solve(*factor, z);
                    const std::vector<double> ax = symmetric_multiply(exact, x);
                    double num = 0.0, den = 0.0;
                    for (std::size_t i = 0; i < n; ++i) {
                        num = std::max(num, std::abs(ax[i] - z[i]));
                        den = std::max(den, std::abs(z[i]));
                    }
                    residual = fmt(num / den);
                }
                const FactorStats& st = factor->stats();
                os << n << ',' << cfg.nb << ',' << spec.to_string() << ',' << policy.effective_thickness(grid) << ','
                   << cfg.reps << ',' << fmt(seconds / static_cast<double>(cfg.reps)) << ',' << fmt(st.dp_flops)
                   << ',' << fmt(st.sp_flops) << ',' << residual << ',' << fmt(ld) << '\n';
                os.flush();
            }
        }
    });
    return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Mixed-precision tile Cholesky for Gaussian-process maximum likelihood", "mixtile"};
    app.require_subcommand(1);
    RunConfig cfg;

    auto common = [&cfg](CLI::App* sub) {
        sub->add_option("--nb", cfg.nb, "tile size")->check(CLI::PositiveNumber);
        sub->add_option("--threads", cfg.threads, "worker threads (0: all available)");
        sub->add_option("--out", cfg.out, "output file (default: stdout)");
    };

    CLI::App* gen = app.add_subcommand("generate", "simulate a Matérn field at irregular locations");
    gen->add_option("--n", cfg.n, "number of locations")->required()->check(CLI::PositiveNumber);
    gen->add_option("--theta0", cfg.theta, "variance,range,smoothness")->default_str("1,0.1,0.5");
    gen->add_option("--seed", cfg.seed, "random seed (fallback: MIXTILE_SEED, then 0)");
    gen->add_option("--metric", cfg.metric, "euclidean or great-circle");
    gen->add_option("--radius", cfg.radius, "sphere radius for great-circle distances");
    common(gen);

    CLI::App* ll = app.add_subcommand("loglik", "evaluate the log-likelihood at fixed parameters");
    ll->add_option("--data", cfg.data, "dataset CSV")->required();
    ll->add_option("--theta", cfg.theta, "variance,range,smoothness")->required();
    ll->add_option("--policy", cfg.policies, "dp, mp:<percent> or dst:<percent>")->expected(1);
    ll->add_option("--radius", cfg.radius, "sphere radius for lon,lat data");
    common(ll);

    CLI::App* est = app.add_subcommand("estimate", "maximum likelihood estimation");
    est->add_option("--data", cfg.data, "dataset CSV")->required();
    est->add_option("--policy", cfg.policies, "dp, mp:<percent> or dst:<percent>")->expected(1);
    est->add_option("--trace", cfg.trace, "write every likelihood evaluation to this CSV");
    est->add_option("--range-bounds", cfg.range_bounds, "lo,hi")->capture_default_str();
    est->add_option("--smoothness-bounds", cfg.smoothness_bounds, "lo,hi")->capture_default_str();
    est->add_option("--tol", cfg.tolerance, "simplex value-spread tolerance")->capture_default_str();
    est->add_option("--max-iters", cfg.max_iters, "iteration cap")->capture_default_str();
    est->add_option("--radius", cfg.radius, "sphere radius for lon,lat data");
    common(est);

    CLI::App* pred = app.add_subcommand("predict", "k-fold cross-validated kriging error");
    pred->add_option("--data", cfg.data, "dataset CSV")->required();
    pred->add_option("--theta", cfg.theta, "variance,range,smoothness (required unless --refit)");
    pred->add_option("--policy", cfg.policies, "repeatable: dp, mp:<percent> or dst:<percent>")->take_all();
    pred->add_option("--k", cfg.k, "number of folds")->capture_default_str();
    pred->add_option("--seed", cfg.seed, "fold seed (fallback: MIXTILE_SEED, then 0)");
    pred->add_flag("--refit", cfg.refit, "re-estimate parameters on every training split");
    pred->add_option("--format", cfg.format, "json or csv")->capture_default_str();
    pred->add_option("--radius", cfg.radius, "sphere radius for lon,lat data");
    common(pred);

    CLI::App* bench = app.add_subcommand("bench", "time likelihood evaluations and count flops");
    bench->add_option("--n", cfg.sizes, "problem sizes, comma-separated")
        ->required()
        ->delimiter(',')
        ->check(CLI::PositiveNumber);
    bench->add_option("--policy", cfg.policies, "repeatable: dp, mp:<percent> or dst:<percent>")->take_all();
    bench->add_option("--reps", cfg.reps, "evaluations per (n, policy)")->capture_default_str()->check(CLI::PositiveNumber);
    bench->add_option("--theta", cfg.theta, "variance,range,smoothness")->default_str("1,0.1,0.5");
    bench->add_option("--seed", cfg.seed, "random seed (fallback: MIXTILE_SEED, then 0)");
    bench->add_flag("--residual", cfg.residual, "report the solve residual against the FP64 covariance");
    common(bench);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? 0 : kExitUsage;
    }

    if (cfg.theta.empty() && (gen->parsed() || bench->parsed())) cfg.theta = "1,0.1,0.5";
    for (CLI::App* sub : app.get_subcommands()) cfg.command = sub->get_name();

    try {
        if (gen->parsed()) return cmd_generate(cfg, out);
        if (ll->parsed()) return cmd_loglik(cfg, out);
        if (est->parsed()) return cmd_estimate(cfg, out);
        if (pred->parsed()) return cmd_predict(cfg, out);
        return cmd_bench(cfg, out);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        write_error(err, cfg.command, e);
        return kExitRuntime;
    }
}

}  // namespace mixtile
