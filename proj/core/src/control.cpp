#include <qvlab/control.hpp>
#include <qvlab/parallel.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qvlab {

namespace {

void require_in_ball(const ControlProblem& problem, const Vec& a, const char* where) {
    if (a.size() != problem.space.n_modes())
        throw std::invalid_argument(std::string(where) + ": control dimension mismatch");
    if (a.norm() > problem.radius * (1.0 + 1e-12))
        throw std::invalid_argument(std::string(where) + ": control outside Lambda, |a| = " +
                                    std::to_string(a.norm()) + " > " +
                                    std::to_string(problem.radius));
}

Vec project_to_ball(const Vec& a, double radius) {
    const double n = a.norm();
    return n <= radius ? a : Vec((radius / n) * a);
}

bool lexicographic_less(const Vec& a, const Vec& b) {
    for (int k = 0; k < a.size(); ++k) {
        if (a[k] < b[k]) return true;
        if (a[k] > b[k]) return false;
    }
    return false;
}

/// e^{(T-t)A*} h, mode-wise.
Vec costate(const TruncatedSpace& space, const Vec& h, double t_end, double t) {
    return h.cwiseProduct(space.semigroup_factors(t_end - t));
}

/// int_0^tau e^{2 lambda u} du, mode-wise.
double exp_sq_integral(double lambda, double tau) {
    if (lambda == 0.0) return tau;
    return std::expm1(2.0 * lambda * tau) / (2.0 * lambda);
}

}  // namespace

ControlProblem make_quadratic_problem(const TruncatedSpace& space, double s, double t,
                                      const Vec& x0, const Vec& h, double radius) {
    require_dim(space, x0, "make_quadratic_problem");
    require_dim(space, h, "make_quadratic_problem");
    if (radius <= 0.0) throw std::invalid_argument("make_quadratic_problem: radius must be > 0");
    ControlProblem p;
    p.space = space;
    p.t_start = s;
    p.t_end = t;
    p.radius = radius;
    p.x0 = x0;
    p.b = [](double, const Vec&, const Vec& a) -> Vec { return a; };
    p.sigma_apply = [](double, const Vec&, const Vec& dw) -> Vec { return dw; };
    Mat gram = space.q.asDiagonal();
    p.sigma_gram = [gram](double, const Vec&) -> Mat { return gram; };
    p.running_cost = [](double, const Vec&, const Vec& a) { return 0.5 * a.squaredNorm(); };
    Vec hh = h;
    p.terminal_cost = [hh](const Vec& x) { return hh.dot(x); };
    p.quadratic_structure = true;
    p.coeff_c = std::max(1.0, radius);
    p.id = "quadratic";
    return p;
}

HypothesisSpotCheck hypothesis_spot_check(const ControlProblem& problem, int n_probes,
                                          std::uint64_t seed) {
    const int n = problem.space.n_modes();
    GaussianStream g(SeedSpec{seed, 0, "hypothesis-probes"}, 0);
    auto gvec = [&](double scale) {
        Vec v(n);
        for (int k = 0; k < n; ++k) v[k] = scale * g.next();
        return v;
    };
    HypothesisSpotCheck out;
    const double c = problem.coeff_c;
    const double slack = 1.0 + 1e-9;
    for (int p = 0; p < n_probes; ++p) {
        const double u = 0.5 * std::erfc(-g.next() / std::sqrt(2.0));
        const double t = problem.t_start + u * (problem.t_end - problem.t_start);
        const Vec x = gvec(2.0), y = gvec(2.0);
        Vec a = gvec(1.0);
        a *= problem.radius * 0.5 * std::erfc(-g.next() / std::sqrt(2.0)) /
             std::max(a.norm(), 1e-300);
        const double lip = (problem.b(t, x, a) - problem.b(t, y, a)).norm() /
                           std::max(1e-300, c * (x - y).norm());
        const double grw = problem.b(t, x, a).norm() / std::max(1e-300, c * (1.0 + x.norm()));
        out.worst_lipschitz = std::max(out.worst_lipschitz, lip);
        out.worst_growth = std::max(out.worst_growth, grw);
        if (lip > slack || grw > slack) out.ok = false;
        const Vec pr = gvec(1.5);
        if (!std::isfinite(hamiltonian(problem, t, x, pr, seed).value)) {
            ++out.n_nonfinite_f;
            out.ok = false;
        }
    }
    return out;
}

double current_value_hamiltonian(const ControlProblem& problem, double t, const Vec& x,
                                 const Vec& p, const Vec& a) {
    require_in_ball(problem, a, "current_value_hamiltonian");
    const double value = p.dot(problem.b(t, x, a)) + problem.running_cost(t, x, a);
    if (!std::isfinite(value))
        throw std::runtime_error("current_value_hamiltonian: non-finite value");
    return value;
}

HamiltonianResult hamiltonian(const ControlProblem& problem, double t, const Vec& x,
                              const Vec& p, std::uint64_t descent_seed) {
    HamiltonianResult out;
    if (problem.quadratic_structure) {
        const double pn = p.norm();
        if (pn <= problem.radius) {
            out.argmin = -p;
            out.value = -0.5 * pn * pn;
        } else {
            out.argmin = (-problem.radius / pn) * p;
            out.value = 0.5 * problem.radius * problem.radius - problem.radius * pn;
        }
        return out;
    }

    // Multi-start projected descent with central-difference gradients.
    const int n = problem.space.n_modes();
    const int n_starts = 32;
    const int max_iters = 200;
    const double tol = 1e-10;
    const double fd = 1e-6 * std::max(1.0, problem.radius);

    auto objective = [&](const Vec& a) {
        return p.dot(problem.b(t, x, a)) + problem.running_cost(t, x, a);
    };

    SeedSpec seed{descent_seed, 0, "hamiltonian-starts"};
    GaussianStream g(seed, 0);
    std::vector<std::pair<double, Vec>> minima;
    for (int s0 = 0; s0 < n_starts; ++s0) {
        Vec a(n);
        for (int k = 0; k < n; ++k) a[k] = g.next();
        a = project_to_ball(0.5 * problem.radius * a / std::max(a.norm(), 1e-300),
                            problem.radius);
        if (s0 == 0) a.setZero();  // the origin is always one of the starts

        double fa = objective(a);
        double step = 0.25 * problem.radius;
        Vec grad(n), trial(n);
        for (int it = 0; it < max_iters; ++it) {
            for (int k = 0; k < n; ++k) {
                Vec ap = a, am = a;
                ap[k] += fd;
                am[k] -= fd;
                grad[k] = (objective(project_to_ball(ap, problem.radius)) -
                           objective(project_to_ball(am, problem.radius))) /
                          (2.0 * fd);
            }
            bool moved = false;
            while (step > 1e-14 * problem.radius) {
                trial = project_to_ball(a - step * grad, problem.radius);
                const double ft = objective(trial);
                if (ft < fa - 1e-14 * std::abs(fa)) {
                    a = trial;
                    fa = ft;
                    moved = true;
                    step *= 1.5;
                    break;
                }
                step *= 0.5;
            }
            if (!moved || step * grad.norm() < tol) break;
        }
        minima.emplace_back(fa, a);
    }

    double best = minima.front().first;
    for (const auto& [v, a] : minima) best = std::min(best, v);
    if (!std::isfinite(best)) throw std::runtime_error("hamiltonian: non-finite cost");
    const double vtol = std::max(1e-9, 1e-9 * std::abs(best));
    Vec chosen;
    bool multivalued = false;
    for (const auto& [v, a] : minima) {
        if (v > best + vtol) continue;
        if (chosen.size() == 0) {
            chosen = a;
        } else if ((a - chosen).norm() > 1e-6 * (1.0 + problem.radius)) {
            multivalued = true;
            if (lexicographic_less(a, chosen)) chosen = a;
        }
    }
    out.value = best;
    out.argmin = chosen;
    out.multivalued = multivalued;
    return out;
}

double l0_apply(const ControlProblem& problem, const ValueCandidate& candidate, double t,
                const Vec& x) {
    double dt_v;
    if (candidate.dv_dt) {
        dt_v = candidate.dv_dt(t, x);
    } else {
        const double h = kTimeDerivativeStep;
        dt_v = (candidate.v(t + h, x) - candidate.v(t - h, x)) / (2.0 * h);
    }
    const Vec grad = candidate.grad(t, x);
    const double transport = grad.cwiseProduct(problem.space.lambda).dot(x);
    if (!candidate.hess)
        throw std::invalid_argument("l0_apply: candidate '" + candidate.id +
                                    "' supplies no Hessian");
    const double trace = 0.5 * trace_pairing(candidate.hess(t, x), problem.sigma_gram(t, x));
    return dt_v + transport + trace;
}

double hjb_residual(const ControlProblem& problem, const ValueCandidate& candidate, double t,
                    const Vec& x) {
    const Vec grad = candidate.grad(t, x);
    return l0_apply(problem, candidate, t, x) + hamiltonian(problem, t, x, grad).value;
}

double terminal_gap(const ControlProblem& problem, const ValueCandidate& candidate,
                    const Vec& x) {
    return candidate.v(problem.t_end, x) - problem.terminal_cost(x);
}

LqReference lq_reference(const TruncatedSpace& space, double s, double t, const Vec& x0,
                         const Vec& h, double radius) {
    require_dim(space, h, "lq_reference");
    if (radius < h.norm())
        throw std::invalid_argument(
            "lq_reference: radius < |h| would make the constraint bind; out of scope");

    LqReference ref;
    ref.h = h;
    ref.problem = make_quadratic_problem(space, s, t, x0, h, radius);
    ref.problem.id = "lq-reference";

    TruncatedSpace sp = space;
    Vec hh = h;
    const double t_end = t;

    ValueCandidate c;
    c.id = "lq-closed-form";
    c.provenance = ValueCandidate::Provenance::closed_form;
    c.v = [sp, hh, t_end](double tt, const Vec& x) {
        const Vec p = costate(sp, hh, t_end, tt);
        double tail = 0.0;
        for (int k = 0; k < sp.n_modes(); ++k)
            tail += hh[k] * hh[k] * exp_sq_integral(sp.lambda[k], t_end - tt);
        return x.dot(p) - 0.5 * tail;
    };
    c.grad = [sp, hh, t_end](double tt, const Vec&) { return costate(sp, hh, t_end, tt); };
    c.dv_dt = [sp, hh, t_end](double tt, const Vec& x) {
        const Vec p = costate(sp, hh, t_end, tt);
        return -x.dot(p.cwiseProduct(sp.lambda)) + 0.5 * p.squaredNorm();
    };
    const int n = space.n_modes();
    c.hess = [n](double, const Vec&) { return Mat::Zero(n, n); };
    ref.candidate = c;

    FeedbackPolicy pol;
    pol.id = "lq-optimal";
    pol.phi = [sp, hh, t_end](double tt, const Vec&) -> Vec {
        return -costate(sp, hh, t_end, tt);
    };
    ref.policy = pol;
    return ref;
}

double lq_bias_bound(const TruncatedSpace& space, const Vec& h, double s, double t, double dt) {
    const Vec p_start = costate(space, h, t, s);
    return 0.5 * dt * (h.squaredNorm() - p_start.squaredNorm());
}

ControlledPath simulate_controlled(const ControlProblem& problem, const FeedbackPolicy& policy,
                                   const TimeGrid& grid, const VecPath& noise) {
    require_same_grid(grid, noise.grid, "simulate_controlled");
    const int m = grid.n_steps;
    const double dt = grid.dt();
    const Vec efac = problem.space.semigroup_factors(dt);

    ControlledPath out;
    out.mild.W = noise;
    out.mild.drift_left.reserve(static_cast<std::size_t>(m));
    out.mild.noise_incr.reserve(static_cast<std::size_t>(m));
    out.controls.reserve(static_cast<std::size_t>(m));
    std::vector<Vec> xs(static_cast<std::size_t>(m) + 1);
    std::vector<double> cost(static_cast<std::size_t>(m) + 1, 0.0);
    xs[0] = problem.x0;
    for (int i = 0; i < m; ++i) {
        const double t = grid.time(i);
        const Vec& x = xs[static_cast<std::size_t>(i)];
        Vec a = policy.phi(t, x);
        require_in_ball(problem, a, "simulate_controlled");
        Vec bv = problem.b(t, x, a);
        Vec incr = problem.sigma_apply(t, x, noise.values[static_cast<std::size_t>(i) + 1] -
                                                 noise.values[static_cast<std::size_t>(i)]);
        Vec next = efac.cwiseProduct(x + dt * bv + incr);
        if (!next.allFinite())
            throw std::runtime_error("simulate_controlled: non-finite state at step " +
                                     std::to_string(i + 1));
        cost[static_cast<std::size_t>(i) + 1] =
            cost[static_cast<std::size_t>(i)] + dt * problem.running_cost(t, x, a);
        out.mild.drift_left.push_back(std::move(bv));
        out.mild.noise_incr.push_back(std::move(incr));
        out.controls.push_back(std::move(a));
        xs[static_cast<std::size_t>(i) + 1] = std::move(next);
    }
    out.mild.X = VecPath(grid, std::move(xs));
    out.cost = RealPath(grid, std::move(cost));
    return out;
}

namespace {
struct MeanStats {
    double mean = 0.0, se = 0.0;
    int n = 0;
};

MeanStats finite_mean(const std::vector<double>& xs, const std::vector<std::uint8_t>& keep) {
    MeanStats s;
    double sum = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i)
        if (keep[i]) {
            sum += xs[i];
            ++s.n;
        }
    if (s.n == 0) return s;
    s.mean = sum / s.n;
    double ss = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i)
        if (keep[i]) ss += (xs[i] - s.mean) * (xs[i] - s.mean);
    s.se = s.n > 1 ? std::sqrt(ss / (s.n - 1.0) / s.n) : 0.0;
    return s;
}
}  // namespace

CostEstimate cost_mc(const ControlProblem& problem, const FeedbackPolicy& policy,
                     const TimeGrid& grid, const EnsembleSpec& ensemble) {
    const std::size_t n = static_cast<std::size_t>(ensemble.n_paths);
    std::vector<double> sample(n, 0.0);
    std::vector<std::uint8_t> keep(n, 1);
    SeedSpec seed{ensemble.master_seed, 0, "control"};
    parallel_for(n, [&](std::uint64_t j) {
        VecPath w = sample_q_wiener(problem.space, grid, seed.with_path(j));
        ControlledPath cp = simulate_controlled(problem, policy, grid, w);
        const double c = cp.cost.values.back() + problem.terminal_cost(cp.mild.X.values.back());
        if (std::isfinite(c))
            sample[j] = c;
        else
            keep[j] = 0;
    });
    const MeanStats ms = finite_mean(sample, keep);
    CostEstimate est;
    est.j_hat = ms.mean;
    est.std_error = ms.se;
    est.n_paths = ms.n;
    est.master_seed = ensemble.master_seed;
    est.n_nonfinite = static_cast<int>(n) - ms.n;
    return est;
}

VerificationReport verification_gap(const ControlProblem& problem,
                                    const ValueCandidate& candidate,
                                    const FeedbackPolicy& policy, const TimeGrid& grid,
                                    const EnsembleSpec& ensemble, double bias_bound) {
    const std::size_t n = static_cast<std::size_t>(ensemble.n_paths);
    std::vector<double> cost(n, 0.0), integrand(n, 0.0);
    std::vector<std::uint8_t> keep(n, 1);
    const double dt = grid.dt();
    SeedSpec seed{ensemble.master_seed, 0, "control"};

    parallel_for(n, [&](std::uint64_t j) {
        VecPath w = sample_q_wiener(problem.space, grid, seed.with_path(j));
        ControlledPath cp = simulate_controlled(problem, policy, grid, w);
        double gap_acc = 0.0;
        for (int i = 0; i < grid.n_steps; ++i) {
            const double t = grid.time(i);
            const Vec& x = cp.mild.X.values[static_cast<std::size_t>(i)];
            const Vec p = candidate.grad(t, x);
            const Vec& a = cp.controls[static_cast<std::size_t>(i)];
            const double fcv = p.dot(problem.b(t, x, a)) + problem.running_cost(t, x, a);
            const double f = hamiltonian(problem, t, x, p).value;
            gap_acc += dt * (fcv - f);
        }
        const double c = cp.cost.values.back() + problem.terminal_cost(cp.mild.X.values.back());
        if (std::isfinite(c) && std::isfinite(gap_acc)) {
            cost[j] = c;
            integrand[j] = gap_acc;
        } else {
            keep[j] = 0;
        }
    });

    const double v_sx = candidate.v(grid.t_start, problem.x0);
    const MeanStats mc = finite_mean(cost, keep);
    const MeanStats mi = finite_mean(integrand, keep);
    std::vector<double> diff(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) diff[j] = cost[j] - v_sx - integrand[j];
    const MeanStats md = finite_mean(diff, keep);

    VerificationReport rep;
    rep.problem_id = problem.id;
    rep.policy_id = policy.id;
    rep.v_sx = v_sx;
    rep.j_hat = mc.mean;
    rep.se_cost = mc.se;
    rep.gap1 = mc.mean - v_sx;
    rep.gap2 = mi.mean;
    rep.se_gap2 = mi.se;
    rep.se_diff = md.se;
    rep.bias_bound = bias_bound;
    rep.n_paths = mc.n;
    rep.n_nonfinite = static_cast<int>(n) - mc.n;
    rep.gap2_nonneg_ok = rep.gap2 >= -3.0 * rep.se_gap2;
    rep.consistent_ok = std::abs(rep.gap1 - rep.gap2) <= 3.0 * rep.se_diff + bias_bound;
    return rep;
}

FeedbackPolicy argmin_feedback(const ControlProblem& problem, const ValueCandidate& candidate) {
    FeedbackPolicy pol;
    pol.id = "argmin[" + candidate.id + "]";
    auto hits = pol.multivalued_hits;
    // Copy what the closure needs; ControlProblem is cheap to copy.
    ControlProblem prob = problem;
    auto grad = candidate.grad;
    pol.phi = [prob, grad, hits](double t, const Vec& x) -> Vec {
        HamiltonianResult h = hamiltonian(prob, t, x, grad(t, x));
        if (h.multivalued) ++(*hits);
        return h.argmin;
    };
    return pol;
}

}  // namespace qvlab
