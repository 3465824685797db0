#include "pcci/qreg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include <Eigen/Dense>

#include "pcci/errors.hpp"
#include "pcci/parallel.hpp"
#include "pcci/rng.hpp"

namespace pcci {

double pinball_loss(double u, double tau) {
    if (!(tau > 0.0 && tau < 1.0)) throw domain_error("pinball_loss: tau must be in (0, 1)");
    return u * (tau - (u < 0.0 ? 1.0 : 0.0));
}

double PenaltySchedule::lambda_for(double tau) const {
    // Canonicalize tau against the involution t -> 1 - t. The double rounding
    // in 1 - t makes sqrt(tau * (1 - tau)) asymmetric in the last ulp, so we
    // map tau and 1 - tau to a common representative first.
    const double g = 1.0 - tau;
    const double h = 1.0 - g;
    const double s = std::min(h, g);
    return c * lambda_base * std::sqrt(s * (1.0 - s));
}

PenaltySchedule select_penalty(const Matrix& W, const std::vector<double>& taus, double c,
                               std::size_t n_sim, std::uint64_t seed) {
    const std::size_t n = W.rows;
    const std::size_t p = W.cols;
    if (n < 1 || p < 1) throw shape_error("select_penalty: empty design");
    if (n_sim < 100) throw domain_error("select_penalty: n_sim must be >= 100");
    if (taus.empty()) throw domain_error("select_penalty: empty tau grid");
    for (double t : taus)
        if (!(t > 0.0 && t < 1.0)) throw domain_error("select_penalty: tau outside (0, 1)");

    std::vector<double> gamma(p, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < p; ++j) gamma[j] += W(i, j) * W(i, j);
    for (std::size_t j = 0; j < p; ++j) {
        gamma[j] /= static_cast<double>(n);
        if (gamma[j] <= 0.0)
            throw degeneracy_error("select_penalty: design column " + std::to_string(j) +
                                   " is identically zero");
    }

    std::vector<double> total(p, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < p; ++j) total[j] += W(i, j);

    std::vector<double> sup_values(n_sim);
    parallel_for(n_sim, [&](std::size_t s) {
        Rng rng(derive_seed(seed, s));
        std::vector<double> u(n);
        for (double& v : u) v = rng.uniform();

        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return u[a] < u[b]; });
        std::vector<double> sorted_u(n);
        for (std::size_t i = 0; i < n; ++i) sorted_u[i] = u[order[i]];

        // prefix[c] = sum of W rows whose u ranks among the c smallest
        std::vector<double> prefix((n + 1) * p, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double* row = W.row(order[i]);
            double* prev = prefix.data() + i * p;
            double* next = prefix.data() + (i + 1) * p;
            for (std::size_t j = 0; j < p; ++j) next[j] = prev[j] + row[j];
        }

        double sup = 0.0;
        for (double tau : taus) {
            const std::size_t count = static_cast<std::size_t>(
                std::upper_bound(sorted_u.begin(), sorted_u.end(), tau) - sorted_u.begin());
            const double* pre = prefix.data() + count * p;
            double norm = 0.0;
            for (std::size_t j = 0; j < p; ++j) {
                const double v = (tau * total[j] - pre[j]) / static_cast<double>(n) / gamma[j];
                norm = std::max(norm, std::fabs(v));
            }
            sup = std::max(sup, norm / std::sqrt(tau * (1.0 - tau)));
        }
        sup_values[s] = sup;
    });

    std::sort(sup_values.begin(), sup_values.end());
    const double q = 1.0 - 1.0 / static_cast<double>(n);
    std::size_t idx = static_cast<std::size_t>(
        std::ceil(q * static_cast<double>(n_sim)));
    idx = std::min(std::max<std::size_t>(idx, 1), n_sim) - 1;

    PenaltySchedule schedule;
    schedule.c = c;
    schedule.lambda_base = sup_values[idx];
    schedule.n_sim = n_sim;
    schedule.seed = seed;
    return schedule;
}

double penalized_objective(const Matrix& W, const std::vector<double>& x,
                           const std::vector<double>& beta, double tau, double lambda,
                           std::size_t intercept_col) {
    const std::size_t n = W.rows;
    const std::size_t p = W.cols;
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double u = x[i];
        const double* row = W.row(i);
        for (std::size_t j = 0; j < p; ++j) u -= row[j] * beta[j];
        loss += pinball_loss(u, tau);
    }
    double l1 = 0.0;
    for (std::size_t j = 0; j < p; ++j)
        if (j != intercept_col) l1 += std::fabs(beta[j]);
    return loss + lambda * l1;
}

namespace {

double soft_threshold(double v, double t) {
    if (v > t) return v - t;
    if (v < -t) return v + t;
    return 0.0;
}

}  // namespace

QuantileFit fit_penalized_quantile(const Matrix& W, const std::vector<double>& x, double tau,
                                   double lambda, const FitOptions& options) {
    const std::size_t n = W.rows;
    const std::size_t p = W.cols;
    if (n < 1 || p < 1) throw shape_error("fit_penalized_quantile: empty problem");
    if (x.size() != n) throw shape_error("fit_penalized_quantile: response length mismatch");
    if (!(tau > 0.0 && tau < 1.0))
        throw domain_error("fit_penalized_quantile: tau must be in (0, 1)");
    if (lambda < 0.0) throw domain_error("fit_penalized_quantile: lambda must be >= 0");

    // Column-major copy for the coordinate sweeps.
    std::vector<double> col(n * p);
    for (std::size_t j = 0; j < p; ++j)
        for (std::size_t i = 0; i < n; ++i) col[j * n + i] = W(i, j);

    const double c_tau = tau - 0.5;
    std::vector<double> beta(p, 0.0);
    std::vector<double> u(x);  // residuals x - W beta, maintained incrementally

    auto exact_objective = [&](const std::vector<double>& b) {
        return penalized_objective(W, x, b, tau, lambda, options.intercept_col);
    };

    std::vector<double> best_beta = beta;
    double best_obj = exact_objective(beta);

    // Huberized check objective at smoothing eps; the majorizer below touches
    // it at the current iterate, so this surrogate objective is monotone
    // under the MM sweeps and is the one tested for convergence.
    auto smoothed_objective = [&](double eps) {
        double obj = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double r = std::fabs(u[i]);
            obj += (r <= eps ? r * r / (2.0 * eps) + 0.5 * eps : r) * 0.5 + c_tau * u[i];
        }
        for (std::size_t j = 0; j < p; ++j)
            if (j != options.intercept_col) obj += lambda * std::fabs(beta[j]);
        return obj;
    };

    std::size_t outer_total = 0;
    bool converged = false;
    std::vector<double> a(n), A(p);

    auto refresh_residuals = [&]() {
        for (std::size_t i = 0; i < n; ++i) {
            double r = x[i];
            for (std::size_t j = 0; j < p; ++j) r -= W(i, j) * beta[j];
            u[i] = r;
        }
    };

    // One MM pass at fixed smoothing: returns true when successive smoothed
    // objectives came within `tol` relative before `cap` iterations ran out.
    // The quadratic surrogate is minimized in Gram form: building
    // H = W^T diag(w) W costs one pass over the data, after which coordinate
    // sweeps cost O(p) each, so the inner problem is solved to convergence.
    std::vector<double> H(p * p), b(p), grad(p), weight(n);
    auto run_stage = [&](double eps, double tol, std::size_t cap) {
        double prev_obj = smoothed_objective(eps);
        double prev_rel = -1.0;
        int steady = 0;
        for (std::size_t it = 0; it < cap && outer_total < options.max_outer; ++it) {
            ++outer_total;
            for (std::size_t i = 0; i < n; ++i) {
                a[i] = std::max(std::fabs(u[i]), eps);
                weight[i] = 0.5 / a[i];
            }
            // H and the linear term b = W^T diag(w) x - c_tau W^T 1
            for (std::size_t j = 0; j < p; ++j) {
                const double* wj = col.data() + j * n;
                for (std::size_t k = j; k < p; ++k) {
                    const double* wk = col.data() + k * n;
                    double s = 0.0;
                    for (std::size_t i = 0; i < n; ++i) s += weight[i] * wj[i] * wk[i];
                    H[j * p + k] = s;
                    H[k * p + j] = s;
                }
                double bj = 0.0;
                for (std::size_t i = 0; i < n; ++i) bj += wj[i] * (weight[i] * x[i] + c_tau);
                b[j] = bj;
                A[j] = H[j * p + j];
            }
            for (std::size_t j = 0; j < p; ++j) {
                double g = -b[j];
                for (std::size_t k = 0; k < p; ++k) g += H[j * p + k] * beta[k];
                grad[j] = g;
            }

            // coordinate descent on the surrogate, O(p) per coordinate move
            for (int sweep = 0; sweep < 400; ++sweep) {
                double max_step = 0.0;
                for (std::size_t j = 0; j < p; ++j) {
                    if (A[j] <= 0.0) continue;
                    const double target = beta[j] - grad[j] / A[j];
                    const double nb = (j == options.intercept_col)
                                          ? target
                                          : soft_threshold(target, lambda / A[j]);
                    const double delta = nb - beta[j];
                    if (delta != 0.0) {
                        beta[j] = nb;
                        const double* hj = H.data() + j * p;
                        for (std::size_t k = 0; k < p; ++k) grad[k] += hj[k] * delta;
                        max_step = std::max(max_step, std::fabs(delta));
                    }
                }
                if (max_step < 1e-13) break;
            }

            refresh_residuals();

            // one pass for both objectives
            double exact = 0.0;
            double smooth = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double r = std::fabs(u[i]);
                exact += 0.5 * r + c_tau * u[i];
                smooth += (r <= eps ? r * r / (2.0 * eps) + 0.5 * eps : r) * 0.5 + c_tau * u[i];
            }
            double l1 = 0.0;
            for (std::size_t j = 0; j < p; ++j)
                if (j != options.intercept_col) l1 += std::fabs(beta[j]);
            exact += lambda * l1;
            smooth += lambda * l1;

            if (exact < best_obj) {
                best_obj = exact;
                best_beta = beta;
            }
            const double rel = std::fabs(prev_obj - smooth) / (1.0 + std::fabs(smooth));
            prev_obj = smooth;
            // a near-constant descent rate means the iterate is crawling
            // along a flat valley; bail out and let the line search jump it
            if (rel > tol && prev_rel > 0.0 && std::fabs(rel - prev_rel) < 0.05 * prev_rel) {
                if (++steady >= 12) return false;
            } else {
                steady = 0;
            }
            prev_rel = rel;
#ifdef PCCI_QREG_TRACE
            if (it % 25 == 0 || rel < tol) {
                double bnorm = 0.0;
                for (std::size_t j = 0; j < p; ++j)
                    if (j != options.intercept_col) bnorm += std::fabs(beta[j]);
                std::fprintf(stderr,
                             "  eps=%.0e it=%zu smooth=%.15g exact=%.15g rel=%.3g b0=%.9g "
                             "l1=%.9g loss=%.9g\n",
                             eps, it, smooth, exact, rel, beta[options.intercept_col], bnorm,
                             exact - lambda * bnorm);
            }
#endif
            if (rel < tol) return true;
        }
        return false;
    };

    // Majorize-minimize on the Huberized check function: at smoothing eps the
    // loss sum_i L_tau(u_i) is bounded above by
    //   sum_i [ u_i^2 / (4 a_i) + a_i / 4 + c_tau u_i ],  a_i = max(|u_i^0|, eps),
    // which the inner coordinate-descent sweeps minimize exactly up to the L1
    // term's soft thresholding. Early stages are capped; the slow IRLS tail
    // is left to the active-set refinement below, with a short certification
    // pass at the final smoothing afterwards.
    // Exact minimization of the piecewise-linear objective along a direction:
    // the derivative in t is a step function whose jumps sit where a residual
    // or a penalized coefficient crosses zero, so the minimizer is found by
    // walking the sorted breakpoints until the slope turns nonnegative. This
    // clears the near-flat valleys that MM crawls through one short step at
    // a time.
    auto line_search_adopt = [&](const std::vector<double>& from,
                                 const std::vector<double>& dir) {
        std::vector<double> s(n, 0.0);
        for (std::size_t j = 0; j < p; ++j) {
            if (dir[j] == 0.0) continue;
            const double* wj = col.data() + j * n;
            for (std::size_t i = 0; i < n; ++i) s[i] += wj[i] * dir[j];
        }
        std::vector<double> r(n);
        for (std::size_t i = 0; i < n; ++i) {
            double v = x[i];
            for (std::size_t j = 0; j < p; ++j) v -= W(i, j) * from[j];
            r[i] = v;
        }
        double slope = 0.0;  // derivative as t -> -inf
        std::vector<std::pair<double, double>> breaks;
        for (std::size_t i = 0; i < n; ++i) {
            if (s[i] == 0.0) continue;
            slope += s[i] * ((s[i] < 0.0 ? 1.0 : 0.0) - tau);
            breaks.emplace_back(r[i] / s[i], std::fabs(s[i]));
        }
        for (std::size_t j = 0; j < p; ++j) {
            if (j == options.intercept_col || dir[j] == 0.0) continue;
            slope -= lambda * std::fabs(dir[j]);
            breaks.emplace_back(-from[j] / dir[j], 2.0 * lambda * std::fabs(dir[j]));
        }
        if (breaks.empty() || slope >= 0.0) return;
        std::sort(breaks.begin(), breaks.end());
        double t_star = breaks.back().first;
        for (const auto& [t, jump] : breaks) {
            slope += jump;
            if (slope >= 0.0) {
                t_star = t;
                break;
            }
        }
        if (t_star == 0.0 || !std::isfinite(t_star)) return;
        std::vector<double> candidate(p);
        for (std::size_t j = 0; j < p; ++j) candidate[j] = from[j] + t_star * dir[j];
        const double obj = exact_objective(candidate);
        if (obj < best_obj) {
            best_obj = obj;
            best_beta = candidate;
        }
    };

    const double stage_eps[] = {1e-2, 1e-4, 1e-6, 1e-8};
    const std::size_t stage_cap =
        std::max<std::size_t>(std::min<std::size_t>(options.max_outer / 8, 100), 1);
    std::vector<double> before_stage(p);
    for (double eps : stage_eps) {
        const bool final_stage = eps <= 1e-8;
        const double tol = final_stage ? options.rel_tol : std::max(1e-4 * eps, options.rel_tol);
        before_stage = beta;
        if (run_stage(eps, tol, stage_cap) && final_stage) converged = true;
        // exhaust the direction this stage moved along
        std::vector<double> dir(p);
        bool moved = false;
        for (std::size_t j = 0; j < p; ++j) {
            dir[j] = beta[j] - before_stage[j];
            moved = moved || dir[j] != 0.0;
        }
        if (moved) {
            const double before_obj = best_obj;
            line_search_adopt(beta, dir);
            if (best_obj < before_obj && eps <= 1e-4) {
                beta = best_beta;
                refresh_residuals();
            }
        }
    }

    // Active-set refinement: the optimum sits at a point where interpolated
    // observations plus zeroed penalized coefficients pin down beta. Solve for
    // the vertex suggested by the current iterate (and near variants) and keep
    // it only when the exact objective improves.
    auto active_set_snap = [&]() {
        std::vector<double> u_best(n);
        for (std::size_t i = 0; i < n; ++i) {
            double r = x[i];
            for (std::size_t j = 0; j < p; ++j) r -= W(i, j) * best_beta[j];
            u_best[i] = r;
        }
        std::vector<std::size_t> rows_by_residual(n);
        std::iota(rows_by_residual.begin(), rows_by_residual.end(), std::size_t{0});
        std::sort(rows_by_residual.begin(), rows_by_residual.end(),
                  [&](std::size_t a_, std::size_t b_) {
                      return std::fabs(u_best[a_]) < std::fabs(u_best[b_]);
                  });
        std::vector<std::size_t> penalized;
        for (std::size_t j = 0; j < p; ++j)
            if (j != options.intercept_col) penalized.push_back(j);
        std::sort(penalized.begin(), penalized.end(), [&](std::size_t a_, std::size_t b_) {
            return std::fabs(best_beta[a_]) < std::fabs(best_beta[b_]);
        });
        std::size_t near_zero = 0;
        while (near_zero < penalized.size() &&
               std::fabs(best_beta[penalized[near_zero]]) < 1e-6)
            ++near_zero;
        if (lambda == 0.0) near_zero = 0;

        auto try_vertex = [&](std::size_t n_zeros, std::size_t skip_row) {
            if (n_zeros > penalized.size() || n_zeros > p) return;
            const std::size_t n_rows = p - n_zeros;
            if (n_rows + (skip_row < n_rows ? 1 : 0) > n) return;
            Eigen::MatrixXd A(p, p);
            Eigen::VectorXd b_rhs(p);
            std::size_t r = 0;
            for (std::size_t c = 0; r < n_rows && c < n; ++c) {
                if (c == skip_row) continue;
                const std::size_t i = rows_by_residual[c];
                for (std::size_t j = 0; j < p; ++j) A(r, j) = W(i, j);
                b_rhs(r) = x[i];
                ++r;
            }
            if (r < n_rows) return;
            for (std::size_t zi = 0; zi < n_zeros; ++zi) {
                A.row(r).setZero();
                A(r, static_cast<long>(penalized[zi])) = 1.0;
                b_rhs(r) = 0.0;
                ++r;
            }
            const Eigen::VectorXd candidate = A.colPivHouseholderQr().solve(b_rhs);
            std::vector<double> cb(p);
            for (std::size_t j = 0; j < p; ++j) cb[j] = candidate(static_cast<long>(j));
            const double obj = exact_objective(cb);
            if (obj < best_obj) {
                best_obj = obj;
                best_beta = cb;
            }
        };

        const std::size_t z_lo = near_zero > 0 ? near_zero - 1 : 0;
        const std::size_t z_hi = std::min(near_zero + 1, penalized.size());
        for (std::size_t z = z_lo; z <= z_hi; ++z) {
            try_vertex(z, n);                          // no skipped row
            try_vertex(z, p - z > 0 ? p - z - 1 : n);  // swap out the borderline row
        }
    };

    // Along a null direction of the design the loss is constant and only the
    // L1 term moves, so MM can crawl down such a valley indefinitely (an
    // additive spline block plus the intercept is exactly collinear). The
    // penalty restricted to the direction is sum_j |v_j| |t - (-beta_j/v_j)|,
    // minimized in closed form at a weighted median of the breakpoints.
    std::vector<std::vector<double>> null_dirs;
    {
        Eigen::MatrixXd We(n, p);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < p; ++j) We(i, j) = W(i, j);
        Eigen::BDCSVD<Eigen::MatrixXd> svd(We, Eigen::ComputeThinV);
        const double cutoff = svd.singularValues()(0) * 1e-10;
        for (long k = 0; k < svd.matrixV().cols(); ++k) {
            if (k < svd.singularValues().size() && svd.singularValues()(k) > cutoff) continue;
            std::vector<double> v(p);
            for (std::size_t j = 0; j < p; ++j) v[j] = svd.matrixV()(static_cast<long>(j), k);
            null_dirs.push_back(std::move(v));
        }
    }
    auto null_direction_polish = [&]() {
        if (null_dirs.empty()) return;
        std::vector<double> work = best_beta;
        for (int pass = 0; pass < 3; ++pass) {
            for (const auto& v : null_dirs) {
                std::vector<std::pair<double, double>> breaks;  // (t, weight)
                double total = 0.0;
                for (std::size_t j = 0; j < p; ++j) {
                    if (j == options.intercept_col || v[j] == 0.0) continue;
                    breaks.emplace_back(-work[j] / v[j], std::fabs(v[j]));
                    total += std::fabs(v[j]);
                }
                if (breaks.empty()) continue;
                std::sort(breaks.begin(), breaks.end());
                double cum = 0.0;
                double t_star = breaks.back().first;
                for (const auto& [t, w] : breaks) {
                    cum += w;
                    if (cum >= 0.5 * total) {
                        t_star = t;
                        break;
                    }
                }
                if (t_star != 0.0)
                    for (std::size_t j = 0; j < p; ++j) work[j] += t_star * v[j];
            }
        }
        const double obj = exact_objective(work);
        if (obj < best_obj) {
            best_obj = obj;
            best_beta = work;
        }
    };

    // Simplex-style edge descent from the incumbent vertex. The active set
    // (interpolated rows plus zeroed penalized coordinates) defines a square
    // system; its solved unit directions are the polytope edges. Exact line
    // searches along every edge either move strictly downhill or certify the
    // vertex: a vertex of a convex piecewise-linear objective with no
    // improving edge is a global minimizer.
    auto edge_descent = [&]() {
        bool vertex_optimal = false;
        for (int pivot = 0; pivot < 600 && !vertex_optimal; ++pivot) {
            std::vector<double> u_best(n);
            for (std::size_t i = 0; i < n; ++i) {
                double r = x[i];
                for (std::size_t j = 0; j < p; ++j) r -= W(i, j) * best_beta[j];
                u_best[i] = r;
            }
            std::vector<std::size_t> order(n);
            std::iota(order.begin(), order.end(), std::size_t{0});
            std::sort(order.begin(), order.end(), [&](std::size_t a_, std::size_t b_) {
                return std::fabs(u_best[a_]) < std::fabs(u_best[b_]);
            });
            std::vector<std::size_t> zeros;
            if (lambda > 0.0)
                for (std::size_t j = 0; j < p; ++j)
                    if (j != options.intercept_col && std::fabs(best_beta[j]) < 1e-9)
                        zeros.push_back(j);
            while (zeros.size() > p) zeros.pop_back();
            const std::size_t n_rows = std::min(p - zeros.size(), n);

            Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n_rows + zeros.size(), p);
            for (std::size_t r = 0; r < n_rows; ++r)
                for (std::size_t j = 0; j < p; ++j) A(r, j) = W(order[r], j);
            for (std::size_t zi = 0; zi < zeros.size(); ++zi)
                A(n_rows + zi, static_cast<long>(zeros[zi])) = 1.0;

            Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
            lu.setThreshold(1e-10);
            const double obj_before = best_obj;

            if (lu.rank() < static_cast<long>(p)) {
                // flat directions of the active system: descend or certify them
                const Eigen::MatrixXd kernel = lu.kernel();
                for (long c = 0; c < kernel.cols(); ++c) {
                    std::vector<double> dir(p);
                    for (std::size_t j = 0; j < p; ++j) dir[j] = kernel(static_cast<long>(j), c);
                    line_search_adopt(best_beta, dir);
                }
            }
            for (std::size_t k = 0; k < n_rows + zeros.size() && best_obj == obj_before; ++k) {
                Eigen::VectorXd rhs = Eigen::VectorXd::Zero(A.rows());
                rhs(static_cast<long>(k)) = 1.0;
                const Eigen::VectorXd d = lu.solve(rhs);
                if (!d.allFinite() || (A * d - rhs).norm() > 1e-6 * (1.0 + rhs.norm()))
                    continue;  // inconsistent edge on a rank-deficient system
                std::vector<double> dir(p);
                for (std::size_t j = 0; j < p; ++j) dir[j] = d(static_cast<long>(j));
                line_search_adopt(best_beta, dir);
            }
            vertex_optimal = best_obj == obj_before;
        }
        return vertex_optimal;
    };

    // Alternate snapping and short certification passes at the final
    // smoothing; the direction accumulated across a stalled pass is the
    // valley direction, which the exact line search then exhausts. A vertex
    // certified by the edge descent counts as converged.
    std::vector<double> stage_start(p);
    for (int round = 0; round < 5 && !converged; ++round) {
        active_set_snap();
        null_direction_polish();
        if (edge_descent()) {
            converged = true;
            break;
        }
        beta = best_beta;
        refresh_residuals();
        stage_start = beta;
        converged = run_stage(1e-8, options.rel_tol, 200);
        if (!converged) {
            std::vector<double> dir(p);
            for (std::size_t j = 0; j < p; ++j) dir[j] = beta[j] - stage_start[j];
            line_search_adopt(beta, dir);
        }
    }
    active_set_snap();
    null_direction_polish();

    // Proximal-subgradient polish on the exact objective; keeps the best
    // iterate, so it can only improve on the MM solution.
    {
        beta = best_beta;
        for (std::size_t i = 0; i < n; ++i) {
            double r = x[i];
            for (std::size_t j = 0; j < p; ++j) r -= W(i, j) * beta[j];
            u[i] = r;
        }
        double wsq = 0.0;
        for (double v : col) wsq += v * v;
        const double step0 = wsq > 0.0 ? 1.0 / wsq : 1.0;
        std::vector<double> psi(n);
        for (int t = 0; t < 200; ++t) {
            const double step = step0 / std::sqrt(static_cast<double>(t) + 1.0);
            for (std::size_t i = 0; i < n; ++i)
                psi[i] = u[i] > 0.0 ? tau : (u[i] < 0.0 ? tau - 1.0 : 0.0);
            for (std::size_t j = 0; j < p; ++j) {
                const double* wj = col.data() + j * n;
                double g = 0.0;
                for (std::size_t i = 0; i < n; ++i) g -= psi[i] * wj[i];
                double nb = beta[j] - step * g;
                if (j != options.intercept_col) nb = soft_threshold(nb, step * lambda);
                beta[j] = nb;
            }
            for (std::size_t i = 0; i < n; ++i) {
                double r = x[i];
                for (std::size_t j = 0; j < p; ++j) r -= W(i, j) * beta[j];
                u[i] = r;
            }
            const double obj = exact_objective(beta);
            if (obj < best_obj) {
                best_obj = obj;
                best_beta = beta;
            }
        }
    }

    QuantileFit fit;
    fit.tau = tau;
    fit.beta = best_beta;
    fit.lambda = lambda;
    fit.objective = best_obj;
    fit.iterations = outer_total;
    fit.converged = converged;
    if (!converged)
        throw convergence_error("quantile fit did not converge within " +
                                    std::to_string(options.max_outer) + " iterations (tau=" +
                                    std::to_string(tau) + ")",
                                fit);
    return fit;
}

double predict_quantile(const QuantileFit& fit, const BasisSpec& spec,
                        std::span<const double> z) {
    if (spec.dimension() != fit.beta.size())
        throw shape_error("predict_quantile: basis dimension does not match fit");
    const std::vector<double> h = expand(spec, z);
    double v = 0.0;
    for (std::size_t j = 0; j < h.size(); ++j) v += h[j] * fit.beta[j];
    return v;
}

}  // namespace pcci
