#include "pcci/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "pcci/baselines.hpp"
#include "pcci/cdf.hpp"
#include "pcci/dataset.hpp"
#include "pcci/errors.hpp"
#include "pcci/gencorr.hpp"
#include "pcci/parallel.hpp"
#include "pcci/simulate.hpp"

namespace pcci {

namespace {

struct usage_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::vector<std::string> split_list(const std::string& s, char sep = ',') {
    std::vector<std::string> out;
    std::string item;
    std::stringstream ss(s);
    while (std::getline(ss, item, sep))
        if (!item.empty()) out.push_back(item);
    return out;
}

// Basis shorthand: "poly<degree>" or "bspline<df>"; expanded additively over
// the covariate dimension with an intercept.
BasisSpec parse_basis_shorthand(const std::string& text, std::size_t d) {
    if (text.rfind("poly", 0) == 0) {
        const std::string deg = text.substr(4);
        std::size_t degree = 1;
        if (!deg.empty()) degree = static_cast<std::size_t>(std::stoul(deg));
        return BasisSpec::additive_uniform(BasisSpec::polynomial(degree), d);
    }
    if (text.rfind("bspline", 0) == 0) {
        const std::string df = text.substr(7);
        std::size_t dof = 5;
        if (!df.empty()) dof = static_cast<std::size_t>(std::stoul(df));
        return BasisSpec::additive_uniform(BasisSpec::bspline(dof), d);
    }
    throw usage_error("unknown basis '" + text + "' (expected poly<degree> or bspline<df>)");
}

void check_output_path(const std::string& path) {
    if (path.empty() || path == "-") return;
    const std::filesystem::path parent = std::filesystem::path(path).parent_path();
    if (!parent.empty() && !std::filesystem::is_directory(parent))
        throw io_error("output directory does not exist: " + parent.string());
}

void check_input_path(const std::string& path) {
    if (!std::filesystem::is_regular_file(path)) throw io_error("input file not found: " + path);
}

void write_text(const std::string& path, const std::string& text, std::ostream& out) {
    if (path.empty() || path == "-") {
        out << text;
        return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot write file: " + path);
    f << text;
    if (!f) throw io_error("failed writing " + path);
}

// Options shared by the statistical subcommands; canonical_argv rebuilds the
// exact flag sequence that reproduces the run.
struct TestOptions {
    std::string basis_kind = "bspline";
    std::size_t degree = 2;
    std::size_t df = 5;
    double tau_min = 0.01;
    double tau_max = 0.99;
    std::size_t m = 0;  // 0: ceil(sqrt(n))
    double delta_fraction = 0.01;
    bool no_penalty = false;
    double penalty_c = 1.1;
    std::size_t penalty_sims = 1000;
    std::uint64_t seed = 0;

    void add_flags(CLI::App* cmd) {
        cmd->add_option("--basis", basis_kind, "Basis family: bspline or poly")
            ->capture_default_str();
        cmd->add_option("--degree", degree, "Polynomial degree (basis=poly)")
            ->capture_default_str();
        cmd->add_option("--df", df, "B-spline degrees of freedom per coordinate (basis=bspline)")
            ->capture_default_str();
        cmd->add_option("--tau-min", tau_min, "Lowest quantile level")->capture_default_str();
        cmd->add_option("--tau-max", tau_max, "Highest quantile level")->capture_default_str();
        cmd->add_option("--m", m, "Quantile grid size; 0 selects ceil(sqrt(n))")
            ->capture_default_str();
        cmd->add_option("--delta-fraction", delta_fraction,
                        "Trimming ramp width as a fraction of each sub-interval")
            ->capture_default_str();
        cmd->add_flag("--no-penalty", no_penalty, "Disable the simulated L1 penalty");
        cmd->add_option("--penalty-c", penalty_c, "Penalty multiplier c")->capture_default_str();
        cmd->add_option("--penalty-sims", penalty_sims, "Penalty tuning simulation count")
            ->capture_default_str();
        cmd->add_option("--seed", seed, "Random seed")->capture_default_str();
    }

    void validate() const {
        if (!(tau_min > 0.0 && tau_min < tau_max && tau_max < 1.0))
            throw usage_error("--tau-min/--tau-max must satisfy 0 < tau-min < tau-max < 1");
        if (!(delta_fraction > 0.0 && delta_fraction < 0.5))
            throw usage_error("--delta-fraction must be in (0, 0.5)");
        if (basis_kind != "bspline" && basis_kind != "poly")
            throw usage_error("--basis must be 'bspline' or 'poly'");
        if (m == 1) throw usage_error("--m must be 0 (auto) or >= 2");
    }

    std::string basis_shorthand() const {
        return basis_kind == "poly" ? "poly" + std::to_string(degree)
                                    : "bspline" + std::to_string(df);
    }

    BasisSpec basis(std::size_t d) const { return parse_basis_shorthand(basis_shorthand(), d); }

    void canonical_argv(std::vector<std::string>& argv) const {
        argv.insert(argv.end(), {"--basis", basis_kind});
        if (basis_kind == "poly") argv.insert(argv.end(), {"--degree", std::to_string(degree)});
        if (basis_kind == "bspline") argv.insert(argv.end(), {"--df", std::to_string(df)});
        argv.insert(argv.end(), {"--tau-min", format_double(tau_min)});
        argv.insert(argv.end(), {"--tau-max", format_double(tau_max)});
        argv.insert(argv.end(), {"--m", std::to_string(m)});
        argv.insert(argv.end(), {"--delta-fraction", format_double(delta_fraction)});
        if (no_penalty) argv.push_back("--no-penalty");
        argv.insert(argv.end(), {"--penalty-c", format_double(penalty_c)});
        argv.insert(argv.end(), {"--penalty-sims", std::to_string(penalty_sims)});
        argv.insert(argv.end(), {"--seed", std::to_string(seed)});
    }

    PcConfig pc_config(std::size_t d, double alpha) const {
        PcConfig cfg;
        cfg.alpha = alpha;
        cfg.tau_min = tau_min;
        cfg.tau_max = tau_max;
        cfg.m = m;
        cfg.delta_fraction = delta_fraction;
        cfg.basis_x = basis(d);
        cfg.basis_y = basis(d);
        cfg.penalized = !no_penalty;
        cfg.penalty_c = penalty_c;
        cfg.penalty_sims = penalty_sims;
        cfg.seed = seed;
        return cfg;
    }
};

nlohmann::json config_json(const std::vector<std::string>& argv) {
    nlohmann::json j;
    j["argv"] = argv;
    return j;
}

// ---------------------------------------------------------------- test ----

int cmd_test(const std::string& input, const std::string& x, const std::string& y,
             const std::string& z_list, const std::string& methods_list,
             const std::string& q_list, double alpha, bool gcm_squared,
             const TestOptions& options, const std::string& output, std::ostream& out) {
    options.validate();
    if (!(alpha > 0.0 && alpha < 1.0)) throw usage_error("--alpha must be in (0, 1)");

    const std::vector<std::string> methods = split_list(methods_list);
    if (methods.empty()) throw usage_error("--method must name at least one of pc, gcm, npn");
    for (const auto& m : methods)
        if (m != "pc" && m != "gcm" && m != "npn")
            throw usage_error("unknown method '" + m + "' (expected pc, gcm or npn)");

    std::vector<std::size_t> qs;
    for (const auto& tok : split_list(q_list)) {
        long v = 0;
        try {
            v = std::stol(tok);
        } catch (const std::exception&) {
            throw usage_error("--q expects positive integers, got '" + tok + "'");
        }
        if (v < 1) throw usage_error("--q must be >= 1, got " + tok);
        qs.push_back(static_cast<std::size_t>(v));
    }
    if (qs.empty()) throw usage_error("--q must list at least one value");

    check_input_path(input);
    check_output_path(output);

    ColumnSpec columns;
    columns.x = x;
    columns.y = y;
    columns.z = split_list(z_list);

    const Dataset raw = load_csv(input, columns);
    const Dataset data = to_pseudo_obs(raw);

    std::vector<std::string> argv = {"test", "--input", input, "--x", x, "--y", y};
    if (!columns.z.empty()) argv.insert(argv.end(), {"--z", z_list});
    argv.insert(argv.end(), {"--method", methods_list, "--q", q_list});
    argv.insert(argv.end(), {"--alpha", format_double(alpha)});
    if (gcm_squared) argv.push_back("--gcm-squared");
    options.canonical_argv(argv);
    const nlohmann::json config = config_json(argv);

    nlohmann::json results = nlohmann::json::array();
    for (const auto& method : methods) {
        if (method == "pc") {
            const PcConfig cfg = options.pc_config(data.d, alpha);
            for (TestResult& r : pc_test_multi(data, cfg, qs)) {
                r.config = config;
                r.config["q"] = r.q;
                results.push_back(test_result_to_json(r));
            }
        } else if (method == "gcm") {
            MeanRegressionSpec spec;
            spec.basis = options.basis(data.d);
            Dataset gcm_data = data;
            if (gcm_squared) {
                Dataset squared = raw;
                for (double& v : squared.x) v *= v;
                for (double& v : squared.y) v *= v;
                gcm_data = to_pseudo_obs(squared);
            }
            TestResult r = gcm_test(gcm_data, spec, spec, alpha);
            r.seed = options.seed;
            r.config = config;
            results.push_back(test_result_to_json(r));
        } else {
            TestResult r = npn_test(data, alpha);
            r.seed = options.seed;
            r.config = config;
            results.push_back(test_result_to_json(r));
        }
    }

    nlohmann::json artifact;
    artifact["config"] = config;
    artifact["no_multiplicity_correction"] = true;
    artifact["results"] = results;
    write_text(output, artifact.dump(2) + "\n", out);
    return 0;
}

// ------------------------------------------------------------- fit-cdf ----

int cmd_fit_cdf(const std::string& input, const std::string& response,
                const std::string& z_list, bool assume_transformed, const TestOptions& options,
                const std::string& output, std::ostream& out) {
    options.validate();
    check_input_path(input);
    check_output_path(output);

    ColumnSpec columns;
    columns.x = response;
    columns.z = split_list(z_list);
    // load_csv wants an y column; reuse the response when none is needed
    columns.y = response;

    Dataset data = load_csv(input, columns);
    if (!assume_transformed) data = to_pseudo_obs(data);
    for (double v : data.x)
        if (!(v >= 0.0 && v <= 1.0))
            throw domain_error("fit-cdf: response outside [0, 1]; omit --assume-transformed");

    const std::size_t m = options.m > 0 ? options.m : default_grid_size(data.n);
    const QuantileGrid grid = equidistant_grid(options.tau_min, options.tau_max, m);
    const BasisSpec basis = options.basis(data.d);

    std::optional<PenaltySchedule> penalty;
    if (!options.no_penalty) {
        Matrix W;
        W.rows = data.n;
        W.cols = basis.dimension();
        W.data = design_matrix(basis, data.z, data.n, data.d);
        penalty = select_penalty(W, grid.taus, options.penalty_c, options.penalty_sims,
                                 derive_seed(options.seed, 1));
    }
    const ConditionalCdfModel model =
        fit_conditional_cdf(data.x, data.z, data.n, data.d, basis, grid, penalty);

    std::vector<std::string> argv = {"fit-cdf", "--input", input, "--response", response};
    if (!columns.z.empty()) argv.insert(argv.end(), {"--z", z_list});
    if (assume_transformed) argv.push_back("--assume-transformed");
    options.canonical_argv(argv);

    nlohmann::json artifact;
    artifact["config"] = config_json(argv);
    artifact["model"] = cdf_model_to_json(model);
    write_text(output, artifact.dump(2) + "\n", out);
    return 0;
}

// ------------------------------------------------------------ simulate ----

int cmd_simulate(const std::string& dgp_name, std::size_t d, std::size_t n, double beta,
                 double gamma0_sq, std::uint64_t seed, const std::string& output,
                 std::ostream& out) {
    if (n < 1) throw usage_error("--n must be >= 1");
    DgpSpec spec;
    spec.id = dgp_from_string(dgp_name);
    spec.d = spec.id == DgpId::LOCAL ? 1 : d;
    spec.beta = beta;
    spec.gamma0_sq = gamma0_sq;
    if (spec.id != DgpId::LOCAL && d < 1) throw usage_error("--d must be >= 1");
    check_output_path(output);

    const Dataset data = sample_dgp(spec, n, seed);

    std::vector<std::string> argv = {"simulate", "--dgp", dgp_name,
                                     "--d", std::to_string(spec.d),
                                     "--n", std::to_string(n)};
    if (spec.id == DgpId::LOCAL) {
        argv.insert(argv.end(), {"--beta", format_double(beta)});
        argv.insert(argv.end(), {"--gamma0-sq", format_double(gamma0_sq)});
    }
    argv.insert(argv.end(), {"--seed", std::to_string(seed)});

    // config travels as a comment line; the CSV reader skips '#' lines
    std::ostringstream text;
    text << "# config " << config_json(argv).dump() << "\n";
    text << data.x_name << ',' << data.y_name;
    for (const auto& name : data.z_names) text << ',' << name;
    text << '\n';
    char buf[40];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        text << buf;
    };
    for (std::size_t i = 0; i < data.n; ++i) {
        put(data.x[i]);
        text << ',';
        put(data.y[i]);
        for (std::size_t j = 0; j < data.d; ++j) {
            text << ',';
            put(data.z_at(i, j));
        }
        text << '\n';
    }
    write_text(output, text.str(), out);
    return 0;
}

// ----------------------------------------------------------- benchmark ----

StudyTest parse_study_test(const std::string& text, std::size_t d) {
    const std::vector<std::string> parts = split_list(text, ':');
    if (parts.empty()) throw usage_error("empty test spec");
    StudyTest test;
    test.name = text;
    const std::string& kind = parts[0];
    if (kind == "pc")
        test.kind = StudyTest::Kind::pc;
    else if (kind == "gcm")
        test.kind = StudyTest::Kind::gcm;
    else if (kind == "npn")
        test.kind = StudyTest::Kind::npn;
    else
        throw usage_error("unknown test '" + kind + "' in --tests");

    for (std::size_t i = 1; i < parts.size(); ++i) {
        const std::string& opt = parts[i];
        if (opt.rfind("q=", 0) == 0) {
            const long v = std::stol(opt.substr(2));
            if (v < 1) throw usage_error("test option q must be >= 1 in '" + text + "'");
            test.q = static_cast<std::size_t>(v);
        } else if (opt.rfind("basis=", 0) == 0) {
            test.basis = parse_basis_shorthand(opt.substr(6), d);
        } else if (opt == "nopenalty") {
            test.penalized = false;
        } else {
            throw usage_error("unknown test option '" + opt + "' in '" + text + "'");
        }
    }
    return test;
}

int cmd_benchmark(const std::string& dgp_name, std::size_t d, std::size_t n,
                  std::size_t replicates, const std::string& tests_list, double alpha,
                  double beta, double gamma0_sq, const TestOptions& options,
                  const std::string& output, const std::string& csv_output, std::ostream& out,
                  std::ostream& err) {
    options.validate();
    if (!(alpha > 0.0 && alpha < 1.0)) throw usage_error("--alpha must be in (0, 1)");
    if (replicates < 1) throw usage_error("--replicates must be >= 1");
    check_output_path(output);
    if (!csv_output.empty()) check_output_path(csv_output);

    StudyConfig study;
    study.dgp.id = dgp_from_string(dgp_name);
    study.dgp.d = study.dgp.id == DgpId::LOCAL ? 1 : d;
    study.dgp.beta = beta;
    study.dgp.gamma0_sq = gamma0_sq;
    study.n = n;
    study.replicates = replicates;
    study.alpha = alpha;
    study.master_seed = options.seed;
    study.pc_defaults = options.pc_config(study.dgp.d, alpha);
    study.pc_defaults.basis_x.reset();  // per-test bases take precedence
    study.pc_defaults.basis_y.reset();

    const std::vector<std::string> test_specs = split_list(tests_list);
    if (test_specs.empty()) throw usage_error("--tests must list at least one test");
    for (const auto& spec : test_specs) study.tests.push_back(parse_study_test(spec, study.dgp.d));

    std::vector<std::string> argv = {"benchmark", "--dgp", dgp_name,
                                     "--d", std::to_string(study.dgp.d),
                                     "--n", std::to_string(n),
                                     "--replicates", std::to_string(replicates),
                                     "--tests", tests_list,
                                     "--alpha", format_double(alpha)};
    if (study.dgp.id == DgpId::LOCAL) {
        argv.insert(argv.end(), {"--beta", format_double(beta)});
        argv.insert(argv.end(), {"--gamma0-sq", format_double(gamma0_sq)});
    }
    options.canonical_argv(argv);

    SimReport report = run_study(study);
    report.config = config_json(argv);
    err << "benchmark finished in " << format_double(report.runtime_seconds) << " s\n";

    write_text(output, sim_report_to_json(report).dump(2) + "\n", out);
    if (!csv_output.empty()) sim_report_to_csv(report, csv_output);
    return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Partial-copula conditional independence testing"};
    app.require_subcommand(1);

    // ---- test
    auto* test = app.add_subcommand("test", "Run conditional independence tests on a CSV file");
    std::string input, output, x = "x", y = "y", z_list, methods = "pc", q_list = "1";
    double alpha = 0.05;
    bool gcm_squared = false;
    int threads = 0;
    TestOptions test_options;
    test->add_option("--input", input, "Input CSV file")->required();
    test->add_option("--output", output, "Output JSON path ('-' for stdout)");
    test->add_option("--x", x, "Name of the x column")->capture_default_str();
    test->add_option("--y", y, "Name of the y column")->capture_default_str();
    test->add_option("--z", z_list, "Comma-separated z column names");
    test->add_option("--method", methods, "Comma-separated tests: pc, gcm, npn")
        ->capture_default_str();
    test->add_option("--q", q_list, "Comma-separated generalized-correlation dimensions")
        ->capture_default_str();
    test->add_option("--alpha", alpha, "Significance level")->capture_default_str();
    test->add_flag("--gcm-squared", gcm_squared,
                   "Square x and y before the GCM regression stage");
    test->add_option("--threads", threads, "Worker thread cap (0 = all)");
    test_options.add_flags(test);

    // ---- fit-cdf
    auto* fit = app.add_subcommand("fit-cdf", "Fit a conditional CDF model and emit it as JSON");
    std::string fit_input, fit_output, fit_response = "x", fit_z;
    bool assume_transformed = false;
    int fit_threads = 0;
    TestOptions fit_options;
    fit->add_option("--input", fit_input, "Input CSV file")->required();
    fit->add_option("--output", fit_output, "Output JSON path ('-' for stdout)");
    fit->add_option("--response", fit_response, "Response column")->capture_default_str();
    fit->add_option("--z", fit_z, "Comma-separated covariate column names");
    fit->add_flag("--assume-transformed", assume_transformed,
                  "Input already lies in the unit cube; skip the rank transform");
    fit->add_option("--threads", fit_threads, "Worker thread cap (0 = all)");
    fit_options.add_flags(fit);

    // ---- simulate
    auto* sim = app.add_subcommand("simulate", "Draw a dataset from a benchmark process");
    std::string sim_dgp = "H2", sim_output;
    std::size_t sim_d = 1, sim_n = 0;
    double sim_beta = 0.0, sim_gamma0 = 0.0;
    std::uint64_t sim_seed = 0;
    sim->add_option("--dgp", sim_dgp, "Process: H1-H4, A1-A4 or LOCAL")->capture_default_str();
    sim->add_option("--d", sim_d, "Covariate dimension")->capture_default_str();
    sim->add_option("--n", sim_n, "Sample size")->required();
    sim->add_option("--beta", sim_beta, "LOCAL: variance heterogeneity")->capture_default_str();
    sim->add_option("--gamma0-sq", sim_gamma0, "LOCAL: local-alternative strength")
        ->capture_default_str();
    sim->add_option("--seed", sim_seed, "Random seed")->capture_default_str();
    sim->add_option("--output", sim_output, "Output CSV path")->required();

    // ---- benchmark
    auto* bench = app.add_subcommand("benchmark", "Monte-Carlo level/power study");
    std::string bench_dgp = "H2", bench_tests = "pc:q=1", bench_output, bench_csv;
    std::size_t bench_d = 1, bench_n = 500, bench_reps = 100;
    double bench_alpha = 0.05, bench_beta = 0.0, bench_gamma0 = 0.0;
    int bench_threads = 0;
    TestOptions bench_options;
    bench->add_option("--dgp", bench_dgp, "Process: H1-H4, A1-A4 or LOCAL")
        ->capture_default_str();
    bench->add_option("--d", bench_d, "Covariate dimension")->capture_default_str();
    bench->add_option("--n", bench_n, "Sample size per replicate")->capture_default_str();
    bench->add_option("--replicates", bench_reps, "Number of replicates")->capture_default_str();
    bench->add_option("--tests", bench_tests,
                      "Comma-separated specs, e.g. pc:q=1:basis=poly2,gcm,npn")
        ->capture_default_str();
    bench->add_option("--alpha", bench_alpha, "Significance level")->capture_default_str();
    bench->add_option("--beta", bench_beta, "LOCAL: variance heterogeneity")
        ->capture_default_str();
    bench->add_option("--gamma0-sq", bench_gamma0, "LOCAL: local-alternative strength")
        ->capture_default_str();
    bench->add_option("--output", bench_output, "Output JSON path ('-' for stdout)");
    bench->add_option("--csv", bench_csv, "Optional long-format CSV path");
    bench->add_option("--threads", bench_threads, "Worker thread cap (0 = all)");
    bench_options.add_flags(bench);

    std::vector<std::string> argv(args);
    try {
        std::vector<const char*> cargv;
        cargv.push_back("pcci");
        for (const auto& a : argv) cargv.push_back(a.c_str());
        app.parse(static_cast<int>(cargv.size()), cargv.data());
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            out << app.help();
            return 0;
        }
        err << "usage error: " << e.what() << "\n";
        return 2;
    }

    try {
        if (test->parsed()) {
            set_max_threads(threads);
            return cmd_test(input, x, y, z_list, methods, q_list, alpha, gcm_squared,
                            test_options, output, out);
        }
        if (fit->parsed()) {
            set_max_threads(fit_threads);
            return cmd_fit_cdf(fit_input, fit_response, fit_z, assume_transformed, fit_options,
                               fit_output, out);
        }
        if (sim->parsed())
            return cmd_simulate(sim_dgp, sim_d, sim_n, sim_beta, sim_gamma0, sim_seed,
                                sim_output, out);
        if (bench->parsed()) {
            set_max_threads(bench_threads);
            return cmd_benchmark(bench_dgp, bench_d, bench_n, bench_reps, bench_tests,
                                 bench_alpha, bench_beta, bench_gamma0, bench_options,
                                 bench_output, bench_csv, out, err);
        }
        err << "usage error: no subcommand given\n";
        return 2;
    } catch (const usage_error& e) {
        err << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace pcci
