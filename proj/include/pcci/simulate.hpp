#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pcci/basis.hpp"
#include "pcci/dataset.hpp"
#include "pcci/gencorr.hpp"
#include "pcci/rng.hpp"

namespace pcci {

enum class DgpId { H1, H2, H3, H4, A1, A2, A3, A4, LOCAL };

DgpId dgp_from_string(const std::string& name);
std::string dgp_to_string(DgpId id);
bool dgp_is_null(DgpId id);  // true when conditional independence holds

// H processes: X = f1(Z) + g1(Z) e1, Y = f2(Z) + g2(Z) e2 with fresh random
// coefficients each draw. A processes additionally feed X into f2/g2. LOCAL is
// the shrinking alternative X = (beta Z^2 + 1) e1 + gamma W (same for Y) with
// gamma^2 = gamma0_sq / sqrt(n).
struct DgpSpec {
    DgpId id = DgpId::H2;
    std::size_t d = 1;
    double beta = 0.0;       // LOCAL only
    double gamma0_sq = 0.0;  // LOCAL only
};

// Per-draw coefficients; exposed so degenerate configurations can be forced
// in tests. Entries for the second response may carry d+1 values (the extra
// slot multiplies X) under the A processes.
struct DgpCoefficients {
    std::vector<double> f1_lin, f1_quad, g1_lin, g1_quad;
    std::vector<double> f2_lin, f2_quad, g2_lin, g2_quad;
};

DgpCoefficients draw_dgp_coefficients(const DgpSpec& spec, Rng& rng);
Dataset sample_dgp_with(const DgpSpec& spec, const DgpCoefficients& coef, std::size_t n,
                        Rng& rng);

// Fresh coefficients, then n observations.
Dataset sample_dgp(const DgpSpec& spec, std::size_t n, std::uint64_t seed);

Dataset sample_local_alternative(double beta, double gamma0_sq, std::size_t n,
                                 std::uint64_t seed);

struct StudyTest {
    enum class Kind { pc, gcm, npn };
    Kind kind = Kind::pc;
    std::string name;                  // report label, e.g. "pc:q=3"
    std::size_t q = 1;                 // pc
    std::optional<BasisSpec> basis;    // pc: quantile basis; gcm: mean basis
    bool penalized = true;             // pc
};

struct StudyConfig {
    DgpSpec dgp;
    std::size_t n = 500;
    std::size_t replicates = 100;
    double alpha = 0.05;
    std::uint64_t master_seed = 0;
    std::vector<StudyTest> tests;
    PcConfig pc_defaults;  // tau range, m, delta fraction, penalty settings
};

struct TestSummary {
    std::string name;
    std::vector<double> p_values;          // replicate order, failures excluded
    std::vector<std::size_t> replicate_ids;  // originating replicate of each p-value
    std::size_t failures = 0;
    double rejection_rate = 0.0;
    double ks_uniform = 0.0;
};

struct SimReport {
    nlohmann::json config;
    std::vector<TestSummary> tests;
    double runtime_seconds = 0.0;  // diagnostic only; not serialized
};

// Runs `replicates` draws of the DGP; each replicate derives its own seed
// from (master_seed, index), is transformed to pseudo-observations and fed to
// every configured test. Individual replicate failures are counted, not fatal.
SimReport run_study(const StudyConfig& config);

nlohmann::json sim_report_to_json(const SimReport& report);
// Long format: replicate,test,p_value
void sim_report_to_csv(const SimReport& report, const std::string& path);

}  // namespace pcci
