"""Oracle property battery: every identity the oracle is supposed to certify.

Each check returns a CheckResult with the measured worst value and its
tolerance; the battery is the engine behind the ``oracle-check`` CLI
subcommand and the acceptance suite, so the tolerances pinned here are the
project's single source of truth.

Checks, on randomly generated small instances:

* compatible-coefficient equivalences: the weighted least-squares
  coefficients of the score-feature fits satisfy G eta = grad_q and
  G phi = -grad_u with the unnormalized weighting on both sides;
* gradient identities: the exact policy / termination gradients match
  central finite differences of the start-conditioned objective;
* information-matrix structure: symmetry, positive semidefiniteness, and
  the single-step identity between the score outer product and the negated
  expected log-likelihood Hessian;
* path-matrix limits: the 1/T-scaled Monte-Carlo path information matrices
  converge to the analytic ones, with errors shrinking in T;
* TD-error consistency: conditional Monte-Carlo means of both TD errors,
  with exact tables plugged in, match the exact advantages within 3
  standard errors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mdp import TabularMdp
from .options import OptionParams, PolicyOverOptionsTable, one_hot_features
from .oracle import (
    exact_fim_theta,
    exact_fim_vartheta,
    exact_policy_gradient,
    exact_termination_gradient,
    exact_values,
    eta_normal_equations,
    finite_diff_gradient,
    least_squares_eta,
    least_squares_phi,
    mc_fim_estimate,
    phi_normal_equations,
    sample_delta_omega,
    sample_delta_u,
)

# Pinned tolerances.
EQUIV_REL_TOL = 1e-8          # compatible-coefficient equivalences
GRAD_FD_REL_TOL = 1e-5        # exact vs finite-difference gradients
FD_STEP = 1e-5
FIM_SYM_TOL = 1e-12
FIM_PSD_MIN = -1e-10
ALT_FORM_TOL = 1e-10          # single-step score/Hessian identity
MC_FIM_REL_TOL = 0.1          # T=200, 2e4 paths
MC_HORIZONS = (10, 50, 200)
MC_SEEDS = 10
LEMMA_SE_MULT = 3.0
LEMMA_MIN_SAMPLES = 500
LEMMA_SAMPLES = 10_000
BELLMAN_RES_TOL = 1e-10
CONT_ADVANTAGE_TOL = 1e-12


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    tolerance: float
    details: str = ""

    def line(self) -> str:
        status = "pass" if self.passed else "FAIL"
        extra = f"  ({self.details})" if self.details else ""
        return f"[{status}] {self.name}: value={self.value:.3e} tol={self.tolerance:.3e}{extra}"


def random_instance(rng: np.random.Generator, num_states=3, num_actions=2,
                    num_options=2, gamma=0.9, pi_over_epsilon=0.3):
    """Random dense MDP plus random smooth option parameters.

    Transition and start probabilities stay inside [0.05, 0.95]; parameter
    draws keep every termination well inside (0, 1) and the frozen policy
    over options keeps mass on every option, so no likelihood ratio
    degenerates.
    """
    S, A, O = num_states, num_actions, num_options

    def simplex_rows(shape):
        raw = rng.dirichlet(np.ones(S), size=shape)
        return 0.05 + (1.0 - 0.05 * S) * raw

    P = simplex_rows((S, A))
    R = rng.uniform(-1.0, 1.0, size=(S, A, S))
    d0 = simplex_rows(())
    mdp = TabularMdp(num_states=S, num_actions=A, transition=P, reward=R,
                     initial_dist=d0, gamma=gamma)
    params = OptionParams(
        num_options=O,
        theta=rng.normal(0.0, 0.7, size=(O, S, A)),
        vartheta=rng.normal(0.0, 0.7, size=(O, S)),
        epsilon_over_options=pi_over_epsilon,
    )
    fake_q = rng.normal(size=(S, O))
    probs = np.full((S, O), pi_over_epsilon / O)
    probs[np.arange(S), np.argmax(fake_q, axis=1)] += 1.0 - pi_over_epsilon
    pi_over = PolicyOverOptionsTable(probs=probs)
    fmap = one_hot_features(S)
    return mdp, params, fmap, pi_over


def rel_err(x, y):
    return float(np.linalg.norm(x - y) / np.linalg.norm(y))


def check_eta_equivalence(seed=0, instances=20, tol_scale=1.0) -> CheckResult:
    "G eta_tilde equals the exact policy gradient, unnormalized weighting."
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(instances):
        mdp, params, fmap, pi_over = random_instance(rng)
        start = (0, 0)
        G, _ = eta_normal_equations(mdp, params, fmap, pi_over, start)
        eta = least_squares_eta(mdp, params, fmap, pi_over, start)
        grad = exact_policy_gradient(mdp, params, fmap, pi_over, start)
        worst = max(worst, rel_err(G @ eta, grad))
    tol = EQUIV_REL_TOL * tol_scale
    return CheckResult("compatible_eta_equivalence", worst < tol, worst, tol,
                       f"{instances} instances")


def check_phi_equivalence(seed=1, instances=20, tol_scale=1.0) -> CheckResult:
    """G phi_tilde equals minus the exact termination gradient.

    The natural ascent direction on the arrival value is -phi_tilde, so the
    identity pairing the (PSD) termination metric with the gradient carries
    a minus sign.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(instances):
        mdp, params, fmap, pi_over = random_instance(rng)
        start = (0, 0)
        G, _ = phi_normal_equations(mdp, params, fmap, pi_over, start)
        phi = least_squares_phi(mdp, params, fmap, pi_over, start)
        grad = exact_termination_gradient(mdp, params, fmap, pi_over, start)
        metric = exact_fim_vartheta(mdp, params, fmap, pi_over, start=start, normalized=False)
        worst = max(worst, rel_err(metric @ phi, -grad))
        worst = max(worst, rel_err(G @ phi, -grad))  # Gram form agrees with the metric
    tol = EQUIV_REL_TOL * tol_scale
    return CheckResult("compatible_phi_equivalence", worst < tol, worst, tol,
                       f"{instances} instances; identity G phi = -grad_u")


def check_policy_gradient_fd(seed=2, instances=20, tol_scale=1.0) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(instances):
        mdp, params, fmap, pi_over = random_instance(rng)
        start = (0, 0)
        exact = exact_policy_gradient(mdp, params, fmap, pi_over, start)
        fd = finite_diff_gradient(mdp, params, fmap, pi_over, "theta", start, step=FD_STEP)
        worst = max(worst, rel_err(fd, exact))
    tol = GRAD_FD_REL_TOL * tol_scale
    return CheckResult("policy_gradient_finite_difference", worst < tol, worst, tol,
                       f"{instances} instances, step {FD_STEP}")


def check_termination_gradient_fd(seed=3, instances=20, tol_scale=1.0) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(instances):
        mdp, params, fmap, pi_over = random_instance(rng)
        start = (0, 0)
        exact = exact_termination_gradient(mdp, params, fmap, pi_over, start)
        fd = finite_diff_gradient(mdp, params, fmap, pi_over, "vartheta", start, step=FD_STEP)
        worst = max(worst, rel_err(fd, exact))
    tol = GRAD_FD_REL_TOL * tol_scale
    return CheckResult("termination_gradient_finite_difference", worst < tol, worst, tol,
                       f"{instances} instances, step {FD_STEP}")


def check_fim_structure(seed=4, instances=100, tol_scale=1.0):
    "Symmetry and PSD for both information matrices across random instances."
    rng = np.random.default_rng(seed)
    worst_asym = 0.0
    worst_eig = np.inf
    for _ in range(instances):
        mdp, params, fmap, pi_over = random_instance(rng)
        for G in (exact_fim_theta(mdp, params, fmap, pi_over, start=(0, 0)),
                  exact_fim_vartheta(mdp, params, fmap, pi_over, start=(0, 0))):
            worst_asym = max(worst_asym, float(np.abs(G - G.T).max()))
            worst_eig = min(worst_eig, float(np.linalg.eigvalsh(0.5 * (G + G.T)).min()))
    sym = CheckResult("fim_symmetry", worst_asym < FIM_SYM_TOL * tol_scale, worst_asym,
                      FIM_SYM_TOL * tol_scale, f"{instances} instances, both manifolds")
    psd_tol = FIM_PSD_MIN * (tol_scale if tol_scale > 0 else 1.0)
    psd = CheckResult("fim_positive_semidefinite",
                      worst_eig >= (FIM_PSD_MIN if tol_scale > 0 else np.inf),
                      worst_eig, psd_tol, "min eigenvalue across instances")
    return [sym, psd]


def check_alternate_form(seed=5, instances=50, tol_scale=1.0) -> CheckResult:
    """Single-step identity: E[score score^T] = -E[Hessian of the log likelihood].

    Checked by exact summation for a softmax categorical draw and for a
    Bernoulli termination draw.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(instances):
        # categorical: softmax logits z, scores e_a - pi, Hessian -(diag(pi)-pi pi^T)
        k = int(rng.integers(2, 5))
        z = rng.normal(size=k)
        e = np.exp(z - z.max())
        pi = e / e.sum()
        outer = np.zeros((k, k))
        for a in range(k):
            g = -pi.copy()
            g[a] += 1.0
            outer += pi[a] * np.outer(g, g)
        hess = np.diag(pi) - np.outer(pi, pi)
        worst = max(worst, float(np.abs(outer - hess).max()))
        # Bernoulli termination with feature vector x
        x = rng.normal(size=3)
        b = 1.0 / (1.0 + np.exp(-rng.normal()))
        outer_b = b * np.outer((1 - b) * x, (1 - b) * x) + (1 - b) * np.outer(b * x, b * x)
        hess_b = b * (1 - b) * np.outer(x, x)
        worst = max(worst, float(np.abs(outer_b - hess_b).max()))
    tol = ALT_FORM_TOL * tol_scale
    return CheckResult("single_step_alternate_form", worst < tol, worst, tol,
                       "categorical and termination draws, exact summation")


def check_mc_fim(manifold: str, seed=6, paths=20_000, tol_scale=1.0) -> list[CheckResult]:
    """Path-matrix limit: error at T=200 under tolerance, medians shrink in T."""
    master = np.random.default_rng(seed)
    mdp, params, fmap, pi_over = random_instance(master)
    start = (0, 0)
    if manifold == "theta":
        exact = exact_fim_theta(mdp, params, fmap, pi_over, start=start)
    else:
        exact = exact_fim_vartheta(mdp, params, fmap, pi_over, start=start)
    exact_norm = np.linalg.norm(exact)

    def err(horizon, run_seed):
        est = mc_fim_estimate(mdp, params, fmap, pi_over, manifold, horizon, paths,
                              np.random.default_rng(run_seed), start=start)
        return float(np.linalg.norm(est - exact) / exact_norm)

    fixed = err(MC_HORIZONS[-1], seed + 1000)
    tol = MC_FIM_REL_TOL * tol_scale
    main = CheckResult(f"mc_fim_{manifold}_t{MC_HORIZONS[-1]}", fixed < tol, fixed, tol,
                       f"{paths} paths, fixed seed")
    medians = []
    for horizon in MC_HORIZONS:
        errs = [err(horizon, seed + 2000 + k) for k in range(MC_SEEDS)]
        medians.append(float(np.median(errs)))
    monotone = all(medians[i] > medians[i + 1] for i in range(len(medians) - 1))
    if tol_scale == 0:
        monotone = False
    mono = CheckResult(
        f"mc_fim_{manifold}_monotone", monotone,
        medians[-1], medians[0],
        f"medians over {MC_SEEDS} seeds at T={MC_HORIZONS}: "
        + ", ".join(f"{m:.3f}" for m in medians))
    return [main, mono]


def check_lemma_u(seed=7, samples=LEMMA_SAMPLES, tol_scale=1.0) -> CheckResult:
    "Conditional mean of the policy TD error matches a_u in every cell."
    rng = np.random.default_rng(seed)
    mdp, params, fmap, pi_over = random_instance(rng)
    sol = exact_values(mdp, params, fmap, pi_over)
    worst = 0.0
    mult = LEMMA_SE_MULT * (tol_scale if tol_scale > 0 else 0.0)
    ok = True
    for s in range(mdp.num_states):
        for o in range(params.num_options):
            for a in range(mdp.num_actions):
                draws = sample_delta_u(mdp, params, fmap, pi_over, sol, s, o, a, samples, rng)
                if draws.size < LEMMA_MIN_SAMPLES:
                    continue
                se = draws.std(ddof=1) / np.sqrt(draws.size)
                gap = abs(draws.mean() - sol.a_u[s, o, a])
                zscore = gap / se if se > 0 else (0.0 if gap == 0 else np.inf)
                worst = max(worst, zscore)
                ok = ok and gap <= mult * se + 1e-12
    return CheckResult("td_error_u_consistency", ok, worst, LEMMA_SE_MULT,
                       f"worst z-score over cells, {samples} samples each")


def check_lemma_omega(seed=8, samples=LEMMA_SAMPLES, tol_scale=1.0) -> CheckResult:
    """Conditional mean of the termination TD error matches a_omega per cell.

    Conditioning is on the incumbent pair (the active option unchanged
    across the step); the bootstrap uses the realized next state-option
    value, the expansion the consistency argument integrates over.
    """
    rng = np.random.default_rng(seed)
    mdp, params, fmap, pi_over = random_instance(rng)
    sol = exact_values(mdp, params, fmap, pi_over)
    worst = 0.0
    mult = LEMMA_SE_MULT * (tol_scale if tol_scale > 0 else 0.0)
    ok = True
    for s in range(mdp.num_states):
        for o in range(params.num_options):
            draws = sample_delta_omega(mdp, params, fmap, pi_over, sol, s, o, samples, rng,
                                       bootstrap="pair")
            if draws.size < LEMMA_MIN_SAMPLES:
                continue
            se = draws.std(ddof=1) / np.sqrt(draws.size)
            gap = abs(draws.mean() - sol.a_omega[s, o])
            zscore = gap / se if se > 0 else (0.0 if gap == 0 else np.inf)
            worst = max(worst, zscore)
            ok = ok and gap <= mult * se + 1e-12
    return CheckResult("td_error_omega_consistency", ok, worst, LEMMA_SE_MULT,
                       f"worst z-score over cells, {samples} samples each")


def check_value_residuals(seed=9, instances=20, tol_scale=1.0):
    "Bellman residuals of the exact tables, and the continued-advantage identity."
    rng = np.random.default_rng(seed)
    worst_res = 0.0
    worst_id = 0.0
    for _ in range(instances):
        mdp, params, fmap, pi_over = random_instance(rng)
        sol = exact_values(mdp, params, fmap, pi_over)
        from .oracle import policy_tables

        pi, beta, _ = policy_tables(mdp, params, fmap)
        q_back = np.einsum("soa,soa->so", pi, sol.q_u)
        worst_res = max(worst_res, float(np.abs(q_back - sol.q_omega).max()))
        worst_id = max(worst_id, float(np.abs(sol.a_omega_continued + beta * sol.a_omega).max()))
    res = CheckResult("bellman_residual", worst_res < BELLMAN_RES_TOL * tol_scale,
                      worst_res, BELLMAN_RES_TOL * tol_scale, f"{instances} instances")
    ident = CheckResult("continued_advantage_identity",
                        worst_id < CONT_ADVANTAGE_TOL * tol_scale, worst_id,
                        CONT_ADVANTAGE_TOL * tol_scale, "u - q = -beta (q - v)")
    return [res, ident]


def run_battery(seed=0, instances=20, tol_scale=1.0, mc_paths=20_000,
                lemma_samples=LEMMA_SAMPLES) -> list[CheckResult]:
    results = [
        check_eta_equivalence(seed, instances, tol_scale),
        check_phi_equivalence(seed + 1, instances, tol_scale),
        check_policy_gradient_fd(seed + 2, instances, tol_scale),
        check_termination_gradient_fd(seed + 3, instances, tol_scale),
    ]
    results += check_fim_structure(seed + 4, max(instances, 100), tol_scale)
    results.append(check_alternate_form(seed + 5, 50, tol_scale))
    results += check_mc_fim("theta", seed + 6, mc_paths, tol_scale)
    results += check_mc_fim("vartheta", seed + 7, mc_paths, tol_scale)
    results.append(check_lemma_u(seed + 8, lemma_samples, tol_scale))
    results.append(check_lemma_omega(seed + 9, lemma_samples, tol_scale))
    results += check_value_residuals(seed + 10, instances, tol_scale)
    return results


def format_report(results: list[CheckResult]) -> str:
    lines = [r.line() for r in results]
    failed = sum(not r.passed for r in results)
    lines.append(f"{len(results) - failed}/{len(results)} checks passed")
    return "\n".join(lines) + "\n"
