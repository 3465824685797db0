#include "pcci/simulate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>

#include "pcci/baselines.hpp"
#include "pcci/errors.hpp"
#include "pcci/parallel.hpp"
#include "pcci/special.hpp"

namespace pcci {

DgpId dgp_from_string(const std::string& name) {
    static const std::map<std::string, DgpId> table = {
        {"H1", DgpId::H1}, {"H2", DgpId::H2}, {"H3", DgpId::H3},   {"H4", DgpId::H4},
        {"A1", DgpId::A1}, {"A2", DgpId::A2}, {"A3", DgpId::A3},   {"A4", DgpId::A4},
        {"LOCAL", DgpId::LOCAL}};
    auto it = table.find(name);
    if (it == table.end()) throw domain_error("unknown data generating process: " + name);
    return it->second;
}

std::string dgp_to_string(DgpId id) {
    switch (id) {
        case DgpId::H1: return "H1";
        case DgpId::H2: return "H2";
        case DgpId::H3: return "H3";
        case DgpId::H4: return "H4";
        case DgpId::A1: return "A1";
        case DgpId::A2: return "A2";
        case DgpId::A3: return "A3";
        case DgpId::A4: return "A4";
        case DgpId::LOCAL: return "LOCAL";
    }
    return "?";
}

bool dgp_is_null(DgpId id) {
    switch (id) {
        case DgpId::H1:
        case DgpId::H2:
        case DgpId::H3:
        case DgpId::H4: return true;
        default: return false;
    }
}

namespace {

int dgp_process(DgpId id) {
    switch (id) {
        case DgpId::H1:
        case DgpId::A1: return 1;
        case DgpId::H2:
        case DgpId::A2: return 2;
        case DgpId::H3:
        case DgpId::A3: return 3;
        case DgpId::H4:
        case DgpId::A4: return 4;
        default: throw domain_error("dgp_process: not an H/A process");
    }
}

bool dgp_is_alternative(DgpId id) {
    return id == DgpId::A1 || id == DgpId::A2 || id == DgpId::A3 || id == DgpId::A4;
}

double eval_form(const std::vector<double>& lin, const std::vector<double>& quad,
                 const double* w, std::size_t len) {
    double v = 0.0;
    for (std::size_t j = 0; j < len; ++j) {
        v += lin[j] * w[j];
        if (!quad.empty()) v += quad[j] * w[j] * w[j];
    }
    return v;
}

}  // namespace

DgpCoefficients draw_dgp_coefficients(const DgpSpec& spec, Rng& rng) {
    if (spec.id == DgpId::LOCAL) return {};
    if (spec.d < 1) throw domain_error("sample_dgp: d must be >= 1");
    const int process = dgp_process(spec.id);
    const bool alternative = dgp_is_alternative(spec.id);
    const std::size_t d = spec.d;
    const std::size_t d2 = alternative ? d + 1 : d;  // f2/g2 also see X

    auto coef = [&]() {
        if (!alternative) return rng.normal();
        return spec.id == DgpId::A4 ? 5.0 * rng.sign() : rng.sign();
    };
    auto draw = [&](std::vector<double>& v, std::size_t len) {
        v.resize(len);
        for (double& c : v) c = coef();
    };

    DgpCoefficients out;
    switch (process) {
        case 1:
            draw(out.f1_lin, d);
            draw(out.f1_quad, d);
            draw(out.g1_lin, d);
            draw(out.g1_quad, d);
            draw(out.f2_lin, d2);
            draw(out.f2_quad, d2);
            draw(out.g2_lin, d2);
            draw(out.g2_quad, d2);
            break;
        case 2:
            draw(out.f1_lin, d);
            draw(out.f2_lin, d2);
            break;
        case 3:
            draw(out.f1_lin, d);
            draw(out.f1_quad, d);
            draw(out.f2_lin, d2);
            draw(out.f2_quad, d2);
            break;
        case 4:
            draw(out.g1_lin, d);
            draw(out.g1_quad, d);
            draw(out.g2_lin, d2);
            draw(out.g2_quad, d2);
            break;
    }
    return out;
}

Dataset sample_dgp_with(const DgpSpec& spec, const DgpCoefficients& coef, std::size_t n,
                        Rng& rng) {
    if (n < 1) throw empty_data_error("sample_dgp: n must be >= 1");
    if (spec.id == DgpId::LOCAL)
        throw domain_error("sample_dgp_with: LOCAL draws no coefficients; use sample_dgp");
    const int process = dgp_process(spec.id);
    const bool alternative = dgp_is_alternative(spec.id);
    const std::size_t d = spec.d;

    Dataset data;
    data.n = n;
    data.d = d;
    data.x.resize(n);
    data.y.resize(n);
    data.z.resize(n * d);
    data.z_names.resize(d);
    for (std::size_t j = 0; j < d; ++j) data.z_names[j] = "z" + std::to_string(j + 1);

    std::vector<double> w2(d + 1);
    for (std::size_t i = 0; i < n; ++i) {
        double* z = data.z.data() + i * d;
        for (std::size_t j = 0; j < d; ++j) z[j] = rng.uniform(-1.0, 1.0);

        double e1, e2;
        if (process == 1) {
            e1 = rng.asymmetric_laplace(0.8);
            e2 = rng.gumbel();
        } else {
            e1 = rng.normal();
            e2 = rng.normal();
        }

        double f1 = 0.0, g1 = 1.0, f2 = 0.0, g2 = 1.0;
        switch (process) {
            case 1:
                f1 = eval_form(coef.f1_lin, coef.f1_quad, z, d);
                g1 = std::exp(-std::fabs(eval_form(coef.g1_lin, coef.g1_quad, z, d)));
                break;
            case 2:
                f1 = eval_form(coef.f1_lin, {}, z, d);
                break;
            case 3:
                f1 = eval_form(coef.f1_lin, coef.f1_quad, z, d);
                break;
            case 4:
                g1 = eval_form(coef.g1_lin, coef.g1_quad, z, d);
                break;
        }
        const double x = f1 + g1 * e1;

        std::copy(z, z + d, w2.begin());
        std::size_t len2 = d;
        if (alternative) w2[len2++] = x;
        switch (process) {
            case 1:
                f2 = eval_form(coef.f2_lin, coef.f2_quad, w2.data(), len2);
                g2 = std::exp(-std::fabs(eval_form(coef.g2_lin, coef.g2_quad, w2.data(), len2)));
                break;
            case 2:
                f2 = eval_form(coef.f2_lin, {}, w2.data(), len2);
                break;
            case 3:
                f2 = eval_form(coef.f2_lin, coef.f2_quad, w2.data(), len2);
                break;
            case 4:
                g2 = eval_form(coef.g2_lin, coef.g2_quad, w2.data(), len2);
                break;
        }
        data.x[i] = x;
        data.y[i] = f2 + g2 * e2;
    }
    data.validate();
    return data;
}

Dataset sample_dgp(const DgpSpec& spec, std::size_t n, std::uint64_t seed) {
    if (spec.id == DgpId::LOCAL)
        return sample_local_alternative(spec.beta, spec.gamma0_sq, n, seed);
    Rng rng(seed);
    const DgpCoefficients coef = draw_dgp_coefficients(spec, rng);
    return sample_dgp_with(spec, coef, n, rng);
}

Dataset sample_local_alternative(double beta, double gamma0_sq, std::size_t n,
                                 std::uint64_t seed) {
    if (n < 1) throw empty_data_error("sample_local_alternative: n must be >= 1");
    if (beta < 0.0 || gamma0_sq < 0.0)
        throw domain_error("sample_local_alternative: beta and gamma0_sq must be >= 0");

    const double gamma = std::sqrt(gamma0_sq / std::sqrt(static_cast<double>(n)));
    Rng rng(seed);

    Dataset data;
    data.n = n;
    data.d = 1;
    data.x.resize(n);
    data.y.resize(n);
    data.z.resize(n);
    data.z_names = {"z1"};
    for (std::size_t i = 0; i < n; ++i) {
        const double z = rng.uniform();
        const double w = rng.normal();
        const double e1 = rng.normal();
        const double e2 = rng.normal();
        const double scale = beta * z * z + 1.0;
        data.z[i] = z;
        data.x[i] = scale * e1 + gamma * w;
        data.y[i] = scale * e2 + gamma * w;
    }
    data.validate();
    return data;
}

namespace {

struct ReplicateOutcome {
    std::vector<double> p_values;  // one per test, NaN on failure
    std::vector<bool> rejects;
};

std::string basis_key(const std::optional<BasisSpec>& basis) {
    return basis ? basis_to_json(*basis).dump() : "<default>";
}

}  // namespace

SimReport run_study(const StudyConfig& config) {
    if (config.replicates < 1) throw domain_error("run_study: replicates must be >= 1");
    if (config.tests.empty()) throw domain_error("run_study: no tests configured");
    const auto t0 = std::chrono::steady_clock::now();

    const std::size_t n_tests = config.tests.size();

    // pc entries sharing a basis and penalty setting reuse one pair of fits
    std::map<std::string, std::vector<std::size_t>> pc_groups;
    for (std::size_t t = 0; t < n_tests; ++t) {
        const StudyTest& test = config.tests[t];
        if (test.kind == StudyTest::Kind::pc)
            pc_groups[basis_key(test.basis) + (test.penalized ? "|p" : "|u")].push_back(t);
    }

    std::vector<ReplicateOutcome> outcomes(config.replicates);
    parallel_for(config.replicates, [&](std::size_t rep) {
        const std::uint64_t seed = derive_seed(config.master_seed, rep);
        ReplicateOutcome outcome;
        outcome.p_values.assign(n_tests, std::numeric_limits<double>::quiet_NaN());
        outcome.rejects.assign(n_tests, false);

        Dataset transformed;
        try {
            const Dataset raw = sample_dgp(config.dgp, config.n, seed);
            transformed = to_pseudo_obs(raw);
        } catch (const std::exception&) {
            outcomes[rep] = std::move(outcome);  // all tests fail for this replicate
            return;
        }

        for (const auto& [key, members] : pc_groups) {
            PcConfig pc = config.pc_defaults;
            pc.alpha = config.alpha;
            pc.seed = derive_seed(seed, 1000 + static_cast<std::uint64_t>(members.front()));
            const StudyTest& lead = config.tests[members.front()];
            pc.penalized = lead.penalized;
            if (lead.basis) {
                pc.basis_x = lead.basis;
                pc.basis_y = lead.basis;
            }
            try {
                const PcFit fit = pc_fit(transformed, pc);
                for (std::size_t t : members) {
                    try {
                        const TestResult r = pc_statistic(fit, pc, config.tests[t].q);
                        outcome.p_values[t] = r.p_value;
                        outcome.rejects[t] = r.reject;
                    } catch (const std::exception&) {
                    }
                }
            } catch (const std::exception&) {
            }
        }

        for (std::size_t t = 0; t < n_tests; ++t) {
            const StudyTest& test = config.tests[t];
            try {
                if (test.kind == StudyTest::Kind::gcm) {
                    MeanRegressionSpec spec;
                    spec.basis = test.basis
                                     ? *test.basis
                                     : BasisSpec::additive_uniform(BasisSpec::bspline(5),
                                                                   transformed.d);
                    const TestResult r = gcm_test(transformed, spec, spec, config.alpha);
                    outcome.p_values[t] = r.p_value;
                    outcome.rejects[t] = r.reject;
                } else if (test.kind == StudyTest::Kind::npn) {
                    const TestResult r = npn_test(transformed, config.alpha);
                    outcome.p_values[t] = r.p_value;
                    outcome.rejects[t] = r.reject;
                }
            } catch (const std::exception&) {
            }
        }
        outcomes[rep] = std::move(outcome);
    });

    SimReport report;
    report.tests.resize(n_tests);
    for (std::size_t t = 0; t < n_tests; ++t) {
        TestSummary& summary = report.tests[t];
        summary.name = config.tests[t].name;
        std::size_t rejects = 0;
        for (std::size_t rep = 0; rep < config.replicates; ++rep) {
            const double p = outcomes[rep].p_values[t];
            if (std::isnan(p)) {
                ++summary.failures;
                continue;
            }
            summary.p_values.push_back(p);
            summary.replicate_ids.push_back(rep);
            if (outcomes[rep].rejects[t]) ++rejects;
        }
        if (!summary.p_values.empty()) {
            summary.rejection_rate =
                static_cast<double>(rejects) / static_cast<double>(summary.p_values.size());
            summary.ks_uniform = ks_uniform(summary.p_values);
        }
    }

    report.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

nlohmann::json sim_report_to_json(const SimReport& report) {
    nlohmann::json j;
    if (!report.config.is_null()) j["config"] = report.config;
    nlohmann::json tests = nlohmann::json::array();
    for (const auto& summary : report.tests) {
        tests.push_back({{"test", summary.name},
                         {"p_values", summary.p_values},
                         {"replicates", summary.replicate_ids},
                         {"failures", summary.failures},
                         {"rejection_rate", summary.rejection_rate},
                         {"ks_uniform", summary.ks_uniform}});
    }
    j["tests"] = tests;
    return j;
}

void sim_report_to_csv(const SimReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write file: " + path);
    out << "replicate,test,p_value\n";
    char buf[40];
    for (const auto& summary : report.tests) {
        for (std::size_t i = 0; i < summary.p_values.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%.17g", summary.p_values[i]);
            out << summary.replicate_ids[i] << ',' << summary.name << ',' << buf << '\n';
        }
    }
    if (!out) throw io_error("failed writing " + path);
}

}  // namespace pcci
