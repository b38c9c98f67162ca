// This file is part of bellman-abc, a library and command-line tool for
// Bayesian inference of optimal action values in goal-directed MDPs.
//
// Copyright (c) 2026 the bellman-abc authors
// SPDX-License-Identifier: MIT

#include "babc/smc.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>

#include "babc/errors.hpp"
#include "babc/kernels.hpp"
#include "babc/parallel.hpp"

namespace babc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double half_inv_sq(double e) { return 1.0 / (2.0 * e * e); }

/// Slack used when comparing bandwidths for equality.
bool nearly_equal(double a, double b) {
    return std::abs(a - b) <= 1e-9 * std::max({1.0, std::abs(a), std::abs(b)});
}

/// ESS of a log-weight vector, or zero when every weight has vanished.
double ess_or_zero(const double* lw, int n) {
    double m = -kInf;
    for (int i = 0; i < n; ++i) m = std::max(m, lw[i]);
    if (!std::isfinite(m)) return 0.0;
    double s1 = 0.0, s2 = 0.0;
    kernels().exp_shift_sums(lw, static_cast<std::size_t>(n), m, &s1, &s2);
    return s1 * s1 / s2;
}

/**
 * Per-particle log-weight increments for moving the stage's bandwidths
 * `from` -> `to`, read off the residual caches.  Terms that are the same
 * for every particle are omitted; callers renormalize afterwards.
 */
void stage_increments(const ParticleSet& ps, const Posterior& post, Stage stage,
                      const ToleranceAssignment& from,
                      const ToleranceAssignment& to, double* out) {
    const int n = ps.n;
    switch (stage) {
    case Stage::I: {
        const double lam = half_inv_sq(post.effective_eps(to.eps_new));
        for (int i = 0; i < n; ++i) out[i] = -lam * ps.resid_new[i];
        return;
    }
    case Stage::II: {
        const double dl = half_inv_sq(post.effective_eps(to.eps_new)) -
                          half_inv_sq(post.effective_eps(from.eps_new));
        for (int i = 0; i < n; ++i) out[i] = -dl * ps.resid_new[i];
        return;
    }
    case Stage::III:
    case Stage::IVb: {
        const double dl = half_inv_sq(post.effective_eps(to.eps_new)) -
                          half_inv_sq(post.effective_eps(from.eps_new));
        for (int i = 0; i < n; ++i)
            out[i] = -dl * (ps.resid_old[i] + ps.resid_new[i]);
        return;
    }
    case Stage::IVa: {
        const double dl = half_inv_sq(post.effective_eps(to.eps_old)) -
                          half_inv_sq(post.effective_eps(from.eps_old));
        for (int i = 0; i < n; ++i) out[i] = -dl * ps.resid_old[i];
        return;
    }
    case Stage::Done:
        break;
    }
    throw ConfigError("no reweighting move exists for a finished update");
}

/// Validates that (from, to) is a legal bandwidth move for the stage.
void check_move(Stage stage, const ToleranceAssignment& from,
                const ToleranceAssignment& to) {
    auto fail = [&](const char* what) {
        throw ConfigError(std::string("invalid bandwidth move for stage ") +
                          stage_name(stage) + ": " + what);
    };
    const double slack = 1e-9;
    switch (stage) {
    case Stage::I:
        if (!from.eps_new.is_unconstrained()) fail("new batch already bounded");
        if (to.eps_new.is_unconstrained()) fail("new batch must become bounded");
        if (!nearly_equal(from.eps_old.get(), to.eps_old.get()))
            fail("old-data bandwidth must not move");
        if (to.eps_new.get() < to.eps_old.get() * (1.0 - slack))
            fail("new-batch bandwidth below old-data bandwidth");
        return;
    case Stage::II:
        if (from.eps_new.is_unconstrained() || to.eps_new.is_unconstrained())
            fail("both assignments must be bounded");
        if (!nearly_equal(from.eps_old.get(), to.eps_old.get()))
            fail("old-data bandwidth must not move");
        if (to.eps_new.get() > from.eps_new.get() * (1.0 + slack))
            fail("new-batch bandwidth must not rise");
        if (to.eps_new.get() < to.eps_old.get() * (1.0 - slack))
            fail("new-batch bandwidth below old-data bandwidth");
        return;
    case Stage::III:
        if (from.eps_new.is_unconstrained() || to.eps_new.is_unconstrained())
            fail("both assignments must be bounded");
        if (!nearly_equal(from.eps_old.get(), from.eps_new.get()) ||
            !nearly_equal(to.eps_old.get(), to.eps_new.get()))
            fail("bandwidths must move together");
        if (to.eps_new.get() > from.eps_new.get() * (1.0 + slack))
            fail("common bandwidth must not rise");
        return;
    case Stage::IVa:
        if (from.eps_new.is_unconstrained() || to.eps_new.is_unconstrained())
            fail("both assignments must be bounded");
        if (!nearly_equal(from.eps_new.get(), to.eps_new.get()))
            fail("new-batch bandwidth must not move");
        if (to.eps_old.get() < from.eps_old.get() * (1.0 - slack))
            fail("old-data bandwidth must not fall");
        if (to.eps_old.get() > to.eps_new.get() * (1.0 + slack))
            fail("old-data bandwidth above new-batch bandwidth");
        return;
    case Stage::IVb:
        if (from.eps_new.is_unconstrained() || to.eps_new.is_unconstrained())
            fail("both assignments must be bounded");
        if (!nearly_equal(from.eps_old.get(), from.eps_new.get()) ||
            !nearly_equal(to.eps_old.get(), to.eps_new.get()))
            fail("bandwidths must move together");
        if (to.eps_new.get() < from.eps_new.get() * (1.0 - slack))
            fail("common bandwidth must not fall");
        return;
    case Stage::Done:
        break;
    }
    throw ConfigError("no bandwidth move exists for a finished update");
}

} // namespace

const char* stage_name(Stage s) {
    switch (s) {
    case Stage::I: return "I";
    case Stage::II: return "II";
    case Stage::III: return "III";
    case Stage::IVa: return "IVa";
    case Stage::IVb: return "IVb";
    case Stage::Done: return "done";
    }
    return "?";
}

ParticleSet init_particles(int n, int d, const PriorSpec& prior, Rng& rng) {
    if (n < 2) throw ConfigError("particle count must be at least 2");
    if (d < 1) throw ConfigError("particle dimension must be positive");
    if (!(prior.sigma > 0.0) || !std::isfinite(prior.sigma))
        throw ConfigError("prior sigma must be positive and finite");
    if (!prior.mean.empty() && static_cast<int>(prior.mean.size()) != d)
        throw ConfigError("prior mean length does not match dimension");
    ParticleSet ps;
    ps.n = n;
    ps.d = d;
    ps.thetas.resize(static_cast<std::size_t>(n) * d);
    for (int i = 0; i < n; ++i) {
        double* th = ps.theta(i);
        for (int j = 0; j < d; ++j) {
            const double mu = prior.mean.empty() ? 0.0 : prior.mean[j];
            th[j] = mu + prior.sigma * rng.normal();
        }
    }
    ps.log_weights.assign(n, -std::log(static_cast<double>(n)));
    ps.resid_old.assign(n, 0.0);
    ps.resid_new.assign(n, 0.0);
    return ps;
}

void refresh_caches(ParticleSet& ps, const Posterior& post) {
    ps.resid_old.resize(ps.n);
    ps.resid_new.resize(ps.n);
    parallel_for(static_cast<std::size_t>(ps.n), [&](std::size_t i) {
        const auto sums = post.residual_sums(ps.theta(static_cast<int>(i)));
        ps.resid_old[i] = sums.old_part;
        ps.resid_new[i] = sums.new_part;
    });
}

std::vector<double> normalized_weights(const ParticleSet& ps) {
    std::vector<double> w(ps.n);
    kernels().vexp(ps.log_weights.data(), w.data(),
                   static_cast<std::size_t>(ps.n));
    const double s = kernels().sum(w.data(), static_cast<std::size_t>(ps.n));
    if (!(s > 0.0) || !std::isfinite(s))
        throw DegeneracyError("all particle weights vanished");
    for (double& x : w) x /= s;
    return w;
}

std::vector<double> weighted_mean(const ParticleSet& ps) {
    const std::vector<double> w = normalized_weights(ps);
    std::vector<double> mu(ps.d, 0.0);
    for (int i = 0; i < ps.n; ++i) {
        const double* th = ps.theta(i);
        for (int j = 0; j < ps.d; ++j) mu[j] += w[i] * th[j];
    }
    return mu;
}

double ess(const std::vector<double>& log_weights) {
    if (log_weights.empty()) throw ConfigError("no weights given");
    const double e = ess_or_zero(log_weights.data(),
                                 static_cast<int>(log_weights.size()));
    if (e == 0.0) throw DegeneracyError("all particle weights vanished");
    return e;
}

void normalize_log_weights(std::vector<double>& log_weights) {
    if (log_weights.empty()) throw ConfigError("no weights given");
    double m = -kInf;
    for (double x : log_weights) m = std::max(m, x);
    if (!std::isfinite(m)) throw DegeneracyError("all particle weights vanished");
    double s1 = 0.0, s2 = 0.0;
    kernels().exp_shift_sums(log_weights.data(), log_weights.size(), m, &s1, &s2);
    const double log_norm = m + std::log(s1);
    for (double& x : log_weights) x -= log_norm;
}

void reweight(ParticleSet& ps, const Posterior& post, Stage stage,
              const ToleranceAssignment& from, const ToleranceAssignment& to) {
    check_move(stage, from, to);
    std::vector<double> inc(ps.n);
    stage_increments(ps, post, stage, from, to, inc.data());
    for (int i = 0; i < ps.n; ++i) ps.log_weights[i] += inc[i];
    normalize_log_weights(ps.log_weights);
}

void resample_multinomial(ParticleSet& ps, Rng& rng) {
    const std::vector<double> w = normalized_weights(ps);
    double wsum = 0.0;
    for (double x : w) wsum += x;
    std::vector<double> thetas(ps.thetas.size());
    std::vector<double> ro(ps.n), rn(ps.n);
    for (int i = 0; i < ps.n; ++i) {
        const int a = rng.categorical(w.data(), ps.n, wsum);
        const double* src = ps.theta(a);
        std::copy(src, src + ps.d,
                  thetas.data() + static_cast<std::size_t>(i) * ps.d);
        ro[i] = ps.resid_old[a];
        rn[i] = ps.resid_new[a];
    }
    ps.thetas.swap(thetas);
    ps.resid_old.swap(ro);
    ps.resid_new.swap(rn);
    ps.log_weights.assign(ps.n, -std::log(static_cast<double>(ps.n)));
}

double find_tolerance(const ParticleSet& ps, const Posterior& post,
                      Stage stage, const ToleranceAssignment& from,
                      double limit, double alpha, const SmcConfig& cfg) {
    if (!(alpha > 0.0) || !(alpha < 1.0))
        throw ConfigError("ESS retention fraction must lie in (0, 1)");
    if (!(limit > 0.0) || !std::isfinite(limit))
        throw ConfigError("bandwidth limit must be positive and finite");
    const bool raising = (stage == Stage::IVa || stage == Stage::IVb);

    auto to_of = [&](double cand) {
        ToleranceAssignment to = from;
        switch (stage) {
        case Stage::I:
        case Stage::II:
            to.eps_new = Tolerance::at(cand);
            break;
        case Stage::III:
        case Stage::IVb:
            to.eps_old = Tolerance::at(cand);
            to.eps_new = Tolerance::at(cand);
            break;
        case Stage::IVa:
            to.eps_old = Tolerance::at(cand);
            break;
        case Stage::Done:
            throw ConfigError("no bandwidth search for a finished update");
        }
        return to;
    };

    std::vector<double> inc(ps.n), lw(ps.n);
    auto ess_at = [&](double cand) {
        stage_increments(ps, post, stage, from, to_of(cand), inc.data());
        for (int i = 0; i < ps.n; ++i) lw[i] = ps.log_weights[i] + inc[i];
        return ess_or_zero(lw.data(), ps.n);
    };

    const double e0 = ess(ps.log_weights);
    const double target = alpha * e0;
    const double e_limit = ess_at(limit);
    if (e_limit >= target) return limit;  // the limit itself retains enough ESS

    // The root is bracketed between the limit and a point that keeps
    // ESS above the target.
    double sat, unsat = limit;
    if (raising) {
        sat = (stage == Stage::IVa) ? from.eps_old.get() : from.eps_new.get();
    } else if (stage == Stage::I) {
        // No bandwidth is currently assigned: expand upward from the floor
        // until enough ESS is retained.  A bandwidth-independent likelihood
        // (noise-matched kernels) makes the curve flat; any choice is then
        // equivalent and the floor is returned.
        if (std::abs(ess_at(limit * 1e6) - e_limit) <=
            1e-9 * std::max(1.0, e0))
            return limit;
        double hi = 2.0 * limit;
        int tries = 0;
        while (ess_at(hi) < target) {
            hi *= 2.0;
            if (++tries > 200)
                throw NumericalError(
                    "bandwidth search could not bracket the ESS target");
        }
        sat = hi;
    } else {
        sat = from.eps_new.get();
    }

    double mid = 0.5 * (sat + unsat);
    for (int it = 0; it < cfg.bisect_max_iters; ++it) {
        mid = 0.5 * (sat + unsat);
        const double e = ess_at(mid);
        if (std::abs(e - target) <= cfg.ess_match_rtol * target) return mid;
        if (e >= target) sat = mid; else unsat = mid;
    }
    return mid;
}

KernelSelection adapt_kernel(const ParticleSet& entry_ps,
                             const ParticleSet& ps, const LogDensity& target,
                             HmcPlan& plan, const SmcConfig& cfg,
                             std::uint64_t seed, std::uint64_t step) {
    const int n = ps.n;
    const int d = ps.d;
    if (n < 1 || entry_ps.n < 1)
        throw ConfigError("kernel adaptation needs a nonempty particle set");
    if (entry_ps.d != d) throw ConfigError("particle dimensions disagree");

    // Mass matrix: reciprocal weighted variances of the entry population.
    const std::vector<double> w = normalized_weights(entry_ps);
    std::vector<double> mu(d, 0.0), var(d, 0.0);
    for (int i = 0; i < entry_ps.n; ++i) {
        const double* th = entry_ps.theta(i);
        for (int j = 0; j < d; ++j) mu[j] += w[i] * th[j];
    }
    for (int i = 0; i < entry_ps.n; ++i) {
        const double* th = entry_ps.theta(i);
        for (int j = 0; j < d; ++j) {
            const double dv = th[j] - mu[j];
            var[j] += w[i] * dv * dv;
        }
    }
    plan.mass_diag.assign(d, 0.0);
    bool floored = false;
    for (int j = 0; j < d; ++j) {
        double v = var[j];
        if (!(v >= 1e-8)) {
            v = 1e-8;
            floored = true;
        }
        var[j] = v;
        plan.mass_diag[j] = 1.0 / v;
    }
    if (floored)
        std::fprintf(stderr,
                     "bellman-abc: warning: near-zero particle variance; "
                     "mass entry floored\n");

    // One trial trajectory per particle with hyperparameters drawn from
    // the current bounds; the trajectory itself is discarded.
    std::vector<double> tdelta(n), zeta(n), lambda(n);
    std::vector<int> tl(n);
    std::vector<char> valid(n, 0);
    std::vector<double> th(d), p(d);
    for (int i = 0; i < n; ++i) {
        Rng r(substream(seed, "adapt_trial", step, static_cast<std::uint64_t>(i)));
        const double dt = r.uniform_pos() * plan.delta_star;
        const int L = 1 + static_cast<int>(r.uniform_int(
                              static_cast<std::uint64_t>(plan.l_star)));
        tdelta[i] = dt;
        tl[i] = L;
        const double* start = ps.theta(i);
        std::copy(start, start + d, th.begin());
        for (int j = 0; j < d; ++j)
            p[j] = std::sqrt(plan.mass_diag[j]) * r.normal();
        const double h0 = -target.value(th.data()) +
                          kinetic_energy(p, plan.mass_diag);
        const double v1 = leapfrog(th, p, dt, L, target, plan.mass_diag);
        const double h1 = -v1 + kinetic_energy(p, plan.mass_diag);
        const double z = h0 - h1;
        if (!std::isfinite(h1) || !std::isfinite(z)) {
            lambda[i] = 0.0;
            zeta[i] = std::numeric_limits<double>::quiet_NaN();
            continue;
        }
        valid[i] = 1;
        zeta[i] = z;
        double jump = 0.0;
        for (int j = 0; j < d; ++j) {
            const double dj = th[j] - start[j];
            jump += dj * dj * var[j];
        }
        lambda[i] = jump / L * (z >= 0.0 ? 1.0 : std::exp(z));
        if (!std::isfinite(lambda[i])) lambda[i] = 0.0;
    }

    // Fit the energy-error growth rate: minimize the absolute deviation of
    // |zeta| from alpha * delta^2 over the valid trials.
    auto dev = [&](double a) {
        double s = 0.0;
        for (int i = 0; i < n; ++i)
            if (valid[i])
                s += std::abs(std::abs(zeta[i]) - a * tdelta[i] * tdelta[i]);
        return s;
    };
    double rate_hi = 0.0;
    for (int i = 0; i < n; ++i)
        if (valid[i])
            rate_hi = std::max(rate_hi,
                               std::abs(zeta[i]) / (tdelta[i] * tdelta[i]));
    double alpha_star = 0.0;
    if (rate_hi > 0.0) {
        const double g = (std::sqrt(5.0) - 1.0) / 2.0;
        double lo = 0.0, hi = rate_hi;
        double c = hi - g * (hi - lo), e = lo + g * (hi - lo);
        double fc = dev(c), fe = dev(e);
        for (int it = 0; it < 100; ++it) {
            if (fc < fe) {
                hi = e;
                e = c;
                fe = fc;
                c = hi - g * (hi - lo);
                fc = dev(c);
            } else {
                lo = c;
                c = e;
                fc = fe;
                e = lo + g * (hi - lo);
                fe = dev(e);
            }
        }
        alpha_star = 0.5 * (lo + hi);
        if (dev(0.0) <= dev(alpha_star)) alpha_star = 0.0;
    }

    // New step-size bound: the size at which the fitted energy error would
    // reach |log 0.9|, or the largest tried size that stayed under it.
    const double zthr = std::abs(std::log(0.9));
    double cand = 0.0;
    bool has_cand = false;
    if (alpha_star > 0.0) {
        cand = std::sqrt(zthr / alpha_star);
        has_cand = true;
    }
    for (int i = 0; i < n; ++i) {
        if (valid[i] && std::abs(zeta[i]) < zthr) {
            cand = std::max(cand, tdelta[i]);
            has_cand = true;
        }
    }
    if (has_cand) {
        plan.delta_star = std::max(cand, 1e-6);
    } else {
        // Every trial diverged: back the bound off.
        plan.delta_star = std::max(0.5 * plan.delta_star, 1e-6);
    }

    // Resample per-particle hyperparameters proportionally to the scores.
    KernelSelection sel;
    sel.deltas.resize(n);
    sel.ls.resize(n);
    double lam_sum = 0.0;
    for (double x : lambda) lam_sum += x;
    const double* probs = lambda.data();
    std::vector<double> uniform_probs;
    if (!(lam_sum > 0.0) || !std::isfinite(lam_sum)) {
        uniform_probs.assign(n, 1.0);
        probs = uniform_probs.data();
        lam_sum = static_cast<double>(n);
    }
    Rng pick(substream(seed, "adapt_pick", step, 0));
    for (int i = 0; i < n; ++i) {
        const int a = pick.categorical(probs, n, lam_sum);
        sel.deltas[i] = tdelta[a];
        sel.ls[i] = tl[a];
    }

    // Leapfrog-bound vote: move by 5 when a majority of the resampled
    // counts sit in the trials' top or bottom quintile (nearest rank).
    std::vector<int> sorted_l(tl);
    std::sort(sorted_l.begin(), sorted_l.end());
    auto pct = [&](double q) {
        int k = static_cast<int>(std::ceil(q * n));
        k = std::min(std::max(k, 1), n);
        return sorted_l[k - 1];
    };
    const int p80 = pct(0.8), p20 = pct(0.2);
    int hi_cnt = 0, lo_cnt = 0;
    for (int i = 0; i < n; ++i) {
        if (sel.ls[i] >= p80) ++hi_cnt;
        if (sel.ls[i] <= p20) ++lo_cnt;
    }
    if (2 * hi_cnt > n) {
        plan.l_star = std::min(plan.l_star + 5, cfg.l_star_max);
    } else if (2 * lo_cnt > n && plan.l_star > 5) {
        plan.l_star = std::max(plan.l_star - 5, 5);
    }

    // Selections must respect the (possibly tightened) bounds.
    for (int i = 0; i < n; ++i) {
        sel.deltas[i] = std::min(sel.deltas[i], plan.delta_star);
        sel.ls[i] = std::min(sel.ls[i], plan.l_star);
    }
    return sel;
}

std::pair<GrDiagnostic, bool> gelman_rubin(const std::vector<ChainStats>& chains,
                                           double threshold, double majority) {
    const int nc = static_cast<int>(chains.size());
    if (nc < 2) throw ConfigError("mixing check needs at least two chains");
    const int m = chains[0].n_samples;
    const int d = chains[0].dim;
    for (const ChainStats& c : chains)
        if (c.n_samples != m || c.dim != d)
            throw ConfigError("mixing check needs equal-shape chains");
    if (m < 2) throw ConfigError("mixing check needs at least two samples per chain");
    if (d < 1) throw ConfigError("mixing check needs at least one dimension");

    GrDiagnostic g;
    g.w.resize(d);
    g.b.resize(d);
    g.sigma_hat_sq.resize(d);
    std::vector<double> means(nc);
    int pass = 0;
    for (int j = 0; j < d; ++j) {
        double grand = 0.0;
        for (int c = 0; c < nc; ++c) {
            double s = 0.0;
            for (int t = 0; t < m; ++t) s += chains[c].samples[t * d + j];
            means[c] = s / m;
            grand += means[c];
        }
        grand /= nc;
        double wv = 0.0, bv = 0.0;
        for (int c = 0; c < nc; ++c) {
            double s = 0.0;
            for (int t = 0; t < m; ++t) {
                const double dv = chains[c].samples[t * d + j] - means[c];
                s += dv * dv;
            }
            wv += s / (m - 1);
            const double dm = means[c] - grand;
            bv += dm * dm;
        }
        wv /= nc;
        bv *= static_cast<double>(m) / (nc - 1);
        g.w[j] = wv;
        g.b[j] = bv;
        double sh;
        if (wv > 0.0) {
            sh = ((static_cast<double>(m - 1) / m) * wv + bv) / wv;
        } else {
            sh = kInf;  // a stuck dimension never passes
        }
        g.sigma_hat_sq[j] = sh;
        if (sh < threshold) ++pass;
    }
    g.pass_fraction = static_cast<double>(pass) / d;
    return {g, g.pass_fraction >= majority};
}

StepResult smc_one_step(ParticleSet& ps, Posterior& post, Stage stage,
                        const ToleranceAssignment& from,
                        const ToleranceAssignment& to, HmcPlan& plan,
                        const SmcConfig& cfg, std::uint64_t seed,
                        std::uint64_t step) {
    StepResult res;
    const ParticleSet entry = ps;  // mass adaptation reads the entry population

    reweight(ps, post, stage, from, to);
    post.set_tolerances(to);
    res.ess_post_reweight = ess(ps.log_weights);
    if (res.ess_post_reweight < 0.5 * ps.n) {
        Rng r(substream(seed, "resample", step, 0));
        resample_multinomial(ps, r);
        res.resampled = true;
    }

    const KernelSelection sel =
        adapt_kernel(entry, ps, post, plan, cfg, seed, step);

    const int n = ps.n;
    const int d = ps.d;
    std::vector<HmcWalker> walkers;
    walkers.reserve(n);
    std::vector<Rng> rngs;
    rngs.reserve(n);
    std::vector<ChainStats> chains(n);
    for (int i = 0; i < n; ++i) {
        walkers.emplace_back(post,
                             std::vector<double>(ps.theta(i), ps.theta(i) + d),
                             plan.mass_diag, sel.deltas[i], sel.ls[i]);
        rngs.emplace_back(substream(seed, "mutate", step,
                                    static_cast<std::uint64_t>(i)));
        chains[i].dim = d;
        chains[i].samples.reserve(static_cast<std::size_t>(cfg.hmc_max_steps) * d);
    }

    bool effective = false;
    int rounds = 0;
    bool gr_checked = false;
    for (int t = 0; t < cfg.hmc_max_steps && !effective; ++t) {
        parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
            walkers[i].step(rngs[i]);
            const std::vector<double>& th = walkers[i].theta();
            chains[i].samples.insert(chains[i].samples.end(), th.begin(),
                                     th.end());
            chains[i].n_samples += 1;
        });
        ++rounds;
        if (rounds >= cfg.gr_min_steps && rounds >= 2) {
            auto checked = gelman_rubin(chains, cfg.gr_threshold, cfg.gr_majority);
            res.gr = std::move(checked.first);
            effective = checked.second;
            gr_checked = true;
        }
    }
    if (!gr_checked && rounds >= 2) {
        auto checked = gelman_rubin(chains, cfg.gr_threshold, cfg.gr_majority);
        res.gr = std::move(checked.first);
        effective = checked.second;
    }
    res.effective = effective;
    res.mutation_steps = rounds;

    long acc = 0, prop = 0;
    for (int i = 0; i < n; ++i) {
        acc += walkers[i].accepts();
        prop += walkers[i].proposals();
        chains[i].accepts = walkers[i].accepts();
        chains[i].proposals = walkers[i].proposals();
        const std::vector<double>& th = walkers[i].theta();
        std::copy(th.begin(), th.end(), ps.theta(i));
    }
    res.accept_rate = prop > 0 ? static_cast<double>(acc) / prop : 0.0;
    res.chains = std::move(chains);

    refresh_caches(ps, post);
    return res;
}

ToleranceState update_posterior(ParticleSet& ps, const TabularMdp& mdp,
                                const QIndex& idx, const PriorSpec& prior,
                                const Dataset& old_data,
                                const Dataset& new_data, double eps_old_start,
                                double eps_target, HmcPlan& plan,
                                const SmcConfig& cfg, std::uint64_t seed,
                                std::uint64_t stream_epoch,
                                std::uint64_t update_index,
                                std::vector<TraceRow>& trace) {
    if (!(eps_target > 0.0) || !std::isfinite(eps_target))
        throw ConfigError("target bandwidth must be positive and finite");
    if (!(eps_old_start > 0.0) || !std::isfinite(eps_old_start))
        throw ConfigError("starting bandwidth must be positive and finite");
    if (eps_old_start < eps_target * (1.0 - 1e-12))
        throw ConfigError("starting bandwidth below the target");
    if (ps.d != idx.d_theta())
        throw ConfigError("particle dimension does not match the value index");

    ToleranceState st;
    st.eps_old = Tolerance::at(eps_old_start);
    st.eps_new = new_data.empty() ? st.eps_old : Tolerance::unconstrained();

    Posterior post(mdp, idx, prior, old_data, new_data,
                   ToleranceAssignment{st.eps_old, st.eps_new});
    refresh_caches(ps, post);
    normalize_log_weights(ps.log_weights);

    double best_bell = kInf;
    bool raising = false;
    double anchor = 0.0;
    int steps = 0;

    for (;;) {
        Stage stage;
        double cap = 0.0;
        if (!raising) {
            if (st.eps_new.is_unconstrained()) {
                stage = Stage::I;
            } else if (st.eps_new.get() > st.eps_old.get() &&
                       !nearly_equal(st.eps_new.get(), st.eps_old.get())) {
                stage = Stage::II;
            } else if (st.eps_old.get() > eps_target &&
                       !nearly_equal(st.eps_old.get(), eps_target)) {
                stage = Stage::III;
            } else {
                break;  // both bandwidths reached the target
            }
        } else {
            const bool split = st.eps_new.get() > st.eps_old.get() &&
                               !nearly_equal(st.eps_new.get(), st.eps_old.get());
            stage = split ? Stage::IVa : Stage::IVb;
            cap = split ? std::min(2.0 * anchor, st.eps_new.get()) : 2.0 * anchor;
            const double cur = split ? st.eps_old.get() : st.eps_new.get();
            if (cap <= cur || nearly_equal(cap, cur)) {
                // The backoff window is exhausted; resume lowering and let a
                // fresh stall re-anchor higher.
                raising = false;
                st.c_m = 0;
                continue;
            }
        }

        if (++steps > cfg.max_stage_steps)
            throw DegeneracyError(
                "posterior update exceeded the per-update stage budget");

        const ToleranceAssignment from{st.eps_old, st.eps_new};
        ToleranceAssignment to = from;
        switch (stage) {
        case Stage::I:
        case Stage::II:
            to.eps_new = Tolerance::at(find_tolerance(
                ps, post, stage, from, st.eps_old.get(), cfg.alpha, cfg));
            break;
        case Stage::III: {
            const double e = find_tolerance(ps, post, stage, from, eps_target,
                                            cfg.alpha, cfg);
            to.eps_old = Tolerance::at(e);
            to.eps_new = Tolerance::at(e);
            break;
        }
        case Stage::IVa:
            to.eps_old = Tolerance::at(
                find_tolerance(ps, post, stage, from, cap, cfg.alpha, cfg));
            break;
        case Stage::IVb: {
            const double e =
                find_tolerance(ps, post, stage, from, cap, cfg.alpha, cfg);
            to.eps_old = Tolerance::at(e);
            to.eps_new = Tolerance::at(e);
            break;
        }
        case Stage::Done:
            throw ConfigError("no sampler step exists for a finished update");
        }

        const StepResult r =
            smc_one_step(ps, post, stage, from, to, plan, cfg, seed,
                         stream_epoch + static_cast<std::uint64_t>(steps));
        st.eps_old = to.eps_old;
        st.eps_new = to.eps_new;
        st.stage = stage;

        double bell = 0.0;
        {
            const std::vector<double> w = normalized_weights(ps);
            for (int i = 0; i < ps.n; ++i)
                bell += w[i] * (ps.resid_old[i] + ps.resid_new[i]);
        }

        TraceRow row;
        row.update_index = update_index;
        row.stage = stage;
        row.eps_old = st.eps_old.get();
        row.eps_new = st.eps_new.get();
        row.ess = r.ess_post_reweight;
        row.resampled = r.resampled;
        row.gr_pass_fraction = r.gr.pass_fraction;
        row.bellman_error = bell;
        row.accept_rate = r.accept_rate;
        trace.push_back(row);

        if (!cfg.adaptive) continue;

        if (!raising) {
            if (r.effective) st.c_m = 0; else ++st.c_m;
            if (stage == Stage::III) {
                // Progress is measured against the best error seen in this
                // update so that a relax-and-redescend cycle that merely
                // returns to the same floor counts as a stall.
                const bool improved =
                    bell < best_bell * (1.0 - cfg.bellman_improve_rtol);
                if (improved) {
                    st.c_b = 0;
                    best_bell = bell;
                } else {
                    ++st.c_b;
                }
                if (st.c_b >= cfg.n_b) break;  // error settled above target
            }
            if (st.c_m >= cfg.n_m) {
                raising = true;
                anchor = st.eps_old.get();
                st.c_m = 0;
            }
        } else if (r.effective) {
            // Mutation recovered at the relaxed bandwidth: resume lowering.
            raising = false;
            st.c_m = 0;
        }
    }

    st.stage = Stage::Done;
    return st;
}

} // namespace babc
