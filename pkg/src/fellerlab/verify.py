"""Named verification checks and the acceptance suite.

Each check is a function ctx -> CheckResult exercising one of the
structural facts the package is built around: hermitian symmetry and
negative definiteness of symbols, the truncation-integrand and growth
estimates, the operator identity between the integro-differential and
Fourier forms, sampler/field consistency, martingale/Dynkin/compensator
identities, and agreement of the Monte Carlo symbol estimate with the
analytic symbol.

The ``acceptance-*`` checks run the full-size configurations; the
default suite uses lighter sample counts suitable for a CLI run.
"""

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import rng as rngmod
from ._kernels import available_backends, backend_name, get_backend
from .errors import FellerLabError
from .estimators import (
    compensator_test,
    compute_characteristics,
    dynkin_check,
    estimate_symbol,
    independence_of_K_check,
    martingale_test,
)
from .models import (
    builtin_models,
    make_killed_levy,
    make_levy,
    make_levy_sde,
    make_sign_drift,
    make_superdrift,
    phi_identity,
)
from .operators import (
    TestFunction,
    apply_Iq,
    build_test_function,
    integrand_estimate_two_samples,
    norm_estimate_check,
    operator_identity_check,
)
from .simulate import SimulationConfig, announcing_sequence, simulate_path
from .symbols import (
    CutoffKappa,
    JumpMeasure,
    LevyTriplet,
    evaluate_symbol,
    evaluate_triplet_symbol,
    growth_bound_check,
    growth_constant,
    integrand_bound_samples,
    negative_definiteness_check,
)

__all__ = [
    "VerifyContext",
    "CheckResult",
    "CHECKS",
    "DEFAULT_CHECKS",
    "ACCEPTANCE_CHECKS",
    "run_checks",
    "compare_report",
]


@dataclass
class VerifyContext:
    seed: int = 2024
    paths: Optional[int] = None  # override the per-check default
    dt: Optional[float] = None  # override the per-check default
    detail: dict = field(default_factory=dict)

    def n_paths(self, default):
        return int(self.paths) if self.paths else default

    def step(self, default):
        return float(self.dt) if self.dt else default


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: dict

    def __bool__(self):
        return self.passed


def _result(name, passed, **detail):
    clean = {}
    for k, v in detail.items():
        if isinstance(v, (np.floating, np.integer)):
            v = v.item()
        clean[k] = v
    return CheckResult(name, bool(passed), clean)


def _sample_states(model, n, rs):
    lo, hi = model.space.lo, model.space.hi
    out = []
    for _ in range(n):
        x = np.empty(model.dim)
        for j in range(model.dim):
            a, b = lo[j], hi[j]
            if np.isfinite(a) and np.isfinite(b):
                x[j] = rs.uniform(a + 0.1 * (b - a), b - 0.1 * (b - a))
            elif np.isfinite(a):
                x[j] = a + math.exp(rs.uniform(math.log(0.3), math.log(3.0)))
            elif np.isfinite(b):
                x[j] = b - math.exp(rs.uniform(math.log(0.3), math.log(3.0)))
            else:
                x[j] = 1.5 * rs.standard_normal()
        out.append(x)
    return out


# ---------------------------------------------------------------------------
# symbol structure checks
# ---------------------------------------------------------------------------


def check_philox_kat(ctx):
    """Pin the cipher against the Random123 philox4x32-10 vectors."""
    cases = [
        ((0, 0, 0, 0), (0, 0), (0x6627E8D5, 0xE169C58D, 0xBC57AC4C, 0x9B00DBD8)),
        (
            (0xFFFFFFFF,) * 4,
            (0xFFFFFFFF, 0xFFFFFFFF),
            (0x408F276D, 0x41C83B0E, 0xA20BC7C6, 0x6D5451FD),
        ),
        (
            (0x243F6A88, 0x85A308D3, 0x13198A2E, 0x03707344),
            (0xA4093822, 0x299F31D0),
            (0xD16CFE09, 0x94FDCCEB, 0x5001E420, 0x24126EA1),
        ),
    ]
    ok = True
    for ctr, key, want in cases:
        got = tuple(
            int(w[0]) for w in rngmod.philox4x32(*[np.uint32([c]) for c in ctr], *key)
        )
        ok &= got == want
    return _result("philox-kat", ok, vectors=len(cases))


def check_hermitian_symmetry(ctx, tol=1e-12):
    rs = np.random.default_rng(ctx.seed)
    worst = 0.0
    for model in builtin_models().values():
        for x in _sample_states(model, 6, rs):
            for _ in range(6):
                xi = 3.0 * rs.standard_normal(model.dim)
                a = evaluate_symbol(model.field, x, xi)
                b = evaluate_symbol(model.field, x, -xi)
                worst = max(worst, abs(b - np.conj(a)) / max(1.0, abs(a)))
    return _result("hermitian-symmetry", worst <= tol, worst=worst, tol=tol)


def check_vanishing_at_zero(ctx):
    rs = np.random.default_rng(ctx.seed + 1)
    ok = True
    worst = 0.0
    for model in builtin_models().values():
        for x in _sample_states(model, 5, rs):
            q0 = evaluate_symbol(model.field, x, np.zeros(model.dim))
            a = model.field.triplet(x).a
            gap = abs(q0 - a)
            worst = max(worst, gap)
            ok &= gap == 0.0
    return _result("vanishing-at-zero", ok, worst=worst)


def check_sqrt_subadditivity(ctx, tol=1e-9):
    rs = np.random.default_rng(ctx.seed + 2)
    worst = -np.inf
    for model in builtin_models().values():
        for x in _sample_states(model, 4, rs):
            for _ in range(8):
                xi = 4.0 * rs.standard_normal(model.dim)
                eta = 4.0 * rs.standard_normal(model.dim)
                lhs = math.sqrt(abs(evaluate_symbol(model.field, x, xi + eta)))
                rhs = math.sqrt(abs(evaluate_symbol(model.field, x, xi))) + math.sqrt(
                    abs(evaluate_symbol(model.field, x, eta))
                )
                worst = max(worst, lhs - rhs)
    return _result("sqrt-subadditivity", worst <= tol, worst_excess=worst, tol=tol)


def check_scaling_identity_fails(ctx):
    """|q(xi)| = k^2 |q(xi/k)| is NOT an identity (only the bound derived
    from subadditivity survives); demonstrate a violation."""
    model = builtin_models()["drift-poisson"]
    x = np.array([0.0])
    xi = np.array([4.0 * math.pi])
    k = 2
    lhs = abs(evaluate_symbol(model.field, x, xi))
    rhs = k * k * abs(evaluate_symbol(model.field, x, xi / k))
    rel = abs(lhs - rhs) / max(lhs, rhs)
    return _result("scaling-identity-fails", rel > 0.2, lhs=lhs, rhs=rhs, rel_gap=rel)


def check_cutoff_forms_agree(ctx, tol=1e-14):
    """Indicator and smooth-ramp cut-offs give identical symbols for
    atomic jumps supported off the annulus [R, 2R]."""
    trip = LevyTriplet.make(
        ell=[0.3], Q=[[0.5]],
        jumps=JumpMeasure.atomic([[0.5], [-0.9], [3.0]], [1.0, 0.7, 0.2]),
    )
    worst = 0.0
    x = np.array([0.0])
    for xi in (np.array([v]) for v in (-3.0, -1.0, 0.5, 2.0)):
        qi = evaluate_triplet_symbol(trip, xi, CutoffKappa(1.0, "indicator"))
        qr = evaluate_triplet_symbol(trip, xi, CutoffKappa(1.0, "smooth-ramp"))
        worst = max(worst, abs(qi - qr))
    return _result("cutoff-forms-agree", worst <= tol, worst=worst, tol=tol)


def check_growth_bound(ctx):
    rs = np.random.default_rng(ctx.seed + 3)
    xi_grid = [np.array([s * v]) for v in (1.0, 2.0, 4.0, 8.0) for s in (-1, 1)]
    ok = True
    worst = 0.0
    for model in builtin_models().values():
        K = _sample_states(model, 6, rs)
        ratio, holds, _ = growth_bound_check(model.field, K, xi_grid, rng=rs)
        ok &= holds
        worst = max(worst, ratio)
    # the closed-form example: superdrift c_K on [1, 2]
    sd = builtin_models()["superdrift"]
    c = growth_constant(sd.field, [np.array([v]) for v in np.linspace(1, 2, 9)], xi_grid)
    ok &= c <= 8.0 + 1e-12
    return _result("growth-bound", ok, worst_ratio=worst, superdrift_cK=c)


def check_integrand_bound(ctx, n=10**6):
    rs = np.random.default_rng(ctx.seed + 4)
    n = ctx.n_paths(n)
    ok = True
    worst = 0.0
    for form in ("indicator", "smooth-ramp"):
        kappa = CutoffKappa(1.0, form)
        xi = rs.uniform(-10, 10, size=(n, 1))
        y = rs.uniform(-6, 6, size=(n, 1))
        lhs, rhs, holds = integrand_bound_samples(xi, y, kappa)
        ok &= bool(np.all(holds))
        worst = max(worst, float(np.max(lhs / np.maximum(rhs, 1e-300))))
    return _result("integrand-bound", ok, samples=2 * n, worst_ratio=worst)


def check_integrand_estimate_two(ctx, n=10**5):
    rs = np.random.default_rng(ctx.seed + 5)
    n = ctx.n_paths(n)
    kappa = CutoffKappa(1.0)
    ok = True
    worst = 0.0
    for name in ("gaussian-bump", "cosine-bump", "cubic-spline-bump"):
        u = build_test_function(name)
        x = rs.uniform(-2, 2, size=n)
        y = rs.uniform(-5, 5, size=n)
        lhs, rhs, holds = integrand_estimate_two_samples(u, x, y, kappa, eps=0.5)
        ok &= bool(np.all(holds))
        worst = max(worst, float(np.max(lhs / np.maximum(rhs, 1e-300))))
    return _result("integrand-estimate-two", ok, samples=3 * n, worst_ratio=worst)


def check_negative_definiteness(ctx):
    rs = np.random.default_rng(ctx.seed + 6)
    ok = True
    for model in builtin_models().values():
        for x in _sample_states(model, 20, rs):
            xis = [3.0 * rs.standard_normal(model.dim) for _ in range(8)]
            res = negative_definiteness_check(model.field, x, xis)
            ok &= bool(res)
    # planted counterexample: xi^4 is not negative definite
    fake = lambda x, xi: complex(float(np.sum(xi**4)))
    planted = negative_definiteness_check(fake, np.array([0.0]), [np.array([1.0]), np.array([2.0])])
    gauss = negative_definiteness_check(
        lambda x, xi: complex(0.5 * float(xi @ xi)), np.array([0.0]),
        [np.array([v]) for v in (-2.0, 0.5, 1.0, 3.0)],
    )
    sd = builtin_models()["superdrift"]
    lin = negative_definiteness_check(
        sd.field, np.array([1.0]), [np.array([v]) for v in (-1.0, 0.0, 1.0)]
    )
    ok &= (not planted) and bool(gauss) and bool(lin)
    return _result(
        "negative-definiteness", ok,
        planted_min_eig=planted.min_eigenvalue,
    )


def check_norm_estimate(ctx):
    ok = True
    detail = {}
    field_ = builtin_models()["drift-poisson"].field
    K = np.linspace(-1, 1, 9)
    for name in ("gaussian-bump", "cubic-spline-bump"):
        u = build_test_function(name)
        lhs, rhs, holds = norm_estimate_check(u, field_, K, eps=0.5)
        ok &= holds
        detail[name] = [lhs, rhs]
    zero = TestFunction.from_1d(
        "zero", lambda y: 0.0 * y, lambda y: 0.0 * y, lambda y: 0.0 * y,
        support=(-1, 1),
    )
    lhs, rhs, holds = norm_estimate_check(zero, field_, K, eps=0.5)
    ok &= holds and lhs == 0.0
    return _result("norm-estimate", ok, **detail)


def _combine_tf(alpha, u, beta, v):
    lo = min(float(u.support[0][0]), float(v.support[0][0]))
    hi = max(float(u.support[1][0]), float(v.support[1][0]))
    return TestFunction(
        name=f"{alpha:g}*{u.name}+{beta:g}*{v.name}",
        dim=1,
        u=lambda X: alpha * u.u(X) + beta * v.u(X),
        grad=lambda X: alpha * u.grad(X) + beta * v.grad(X),
        hess=lambda X: alpha * u.hess(X) + beta * v.hess(X),
        support=(np.array([lo]), np.array([hi])),
        smoothness="C2_compact",
    )


def check_iq_linearity(ctx, tol=1e-10):
    rs = np.random.default_rng(ctx.seed + 7)
    u = build_test_function("gaussian-bump", width=0.8)
    v = build_test_function("cubic-spline-bump", center=0.5)
    kappa = CutoffKappa(1.0)
    trip = builtin_models()["drift-poisson"].field.triplet(np.array([0.0]))
    worst = 0.0
    for _ in range(12):
        alpha, beta = rs.uniform(-2, 2, size=2)
        x = np.array([rs.uniform(-1.5, 1.5)])
        w = _combine_tf(alpha, u, beta, v)
        lhs = apply_Iq(w, x, trip, kappa)
        rhs = alpha * apply_Iq(u, x, trip, kappa) + beta * apply_Iq(v, x, trip, kappa)
        worst = max(worst, abs(lhs - rhs))
    return _result("iq-linearity", worst <= tol, worst=worst, tol=tol)


def _plateau(center, plateau_radius, ramp, height=1.0):
    """C^2 function equal to height on |y - center| <= plateau_radius and
    0 beyond plateau_radius + ramp (quintic smoothstep transition)."""

    def parts(y):
        z = np.abs(y - center)
        r = np.clip((z - plateau_radius) / ramp, 0.0, 1.0)
        return z, r

    def s(r):
        return 10 * r**3 - 15 * r**4 + 6 * r**5

    def ds(r):
        return 30 * r**2 - 60 * r**3 + 30 * r**4

    def d2s(r):
        return 60 * r - 180 * r**2 + 120 * r**3

    def u(y):
        _, r = parts(y)
        return height * (1.0 - s(r))

    def du(y):
        z, r = parts(y)
        inside = (z > plateau_radius) & (z < plateau_radius + ramp)
        sgn = np.sign(y - center)
        return np.where(inside, -height * ds(r) * sgn / ramp, 0.0)

    def d2u(y):
        z, r = parts(y)
        inside = (z > plateau_radius) & (z < plateau_radius + ramp)
        return np.where(inside, -height * d2s(r) / ramp**2, 0.0)

    lo = center - plateau_radius - ramp
    hi = center + plateau_radius + ramp
    return TestFunction.from_1d("plateau", u, du, d2u, (lo, hi), "C2_compact")


def check_constant_annihilation(ctx, tol=1e-13):
    """For u constant on x + 3R-ball with all atoms in the R-ball, the
    killing-free operator annihilates u at x."""
    kappa = CutoffKappa(1.0)
    x = np.array([0.0])
    u = _plateau(0.0, 3.0 * kappa.R, 1.0, height=0.7)
    worst = 0.0
    for key in ("brownian", "drift-poisson"):
        trip = builtin_models()[key].field.triplet(x)
        worst = max(worst, abs(apply_Iq(u, x, trip, kappa)))
    return _result("constant-annihilation", worst <= tol, worst=worst, tol=tol)


def _identity_fields():
    models = builtin_models()
    cp = make_levy(
        LevyTriplet.make(jumps=JumpMeasure.atomic([[1.0]], [1.0])), name="compound-poisson"
    )
    return [
        (models["brownian"].field, np.linspace(-1.5, 1.5, 7), 0.0),
        (cp.field, np.linspace(-1.5, 1.5, 7), 0.0),
        (models["superdrift"].field, np.linspace(1.5, 3.5, 7), 2.5),
    ]


def check_operator_identity(ctx, grid_n=2**19):
    ok = True
    detail = {}
    for field_, xs, center in _identity_fields():
        for name in ("gaussian-bump", "cosine-bump", "cubic-spline-bump"):
            u = build_test_function(name, center=center)
            gap = operator_identity_check(u, field_, xs, grid_n=grid_n)
            tol = 1e-4 * (1.0 + u.c2_norm())
            ok &= gap <= tol
            detail[f"{field_.name}/{name}"] = [gap, tol]
    return _result("operator-identity", ok, **detail)


# ---------------------------------------------------------------------------
# engine checks
# ---------------------------------------------------------------------------


def check_backend_agreement(ctx):
    """Pure and compiled kernels produce the same ensembles."""
    if "compiled" not in available_backends():
        return _result("backend-agreement", True, skipped="compiled backend not built")
    from .simulate import build_plan

    models = builtin_models()
    worst_exact = 0.0
    worst_sin = 0.0
    for key, rtol_bucket in (("brownian", "exact"), ("drift-poisson", "exact"),
                             ("killed-brownian", "exact"), ("sde-sin", "sin")):
        model = models[key]
        cfg = SimulationConfig(horizon=0.25, dt=1e-2, n_paths=512, seed=ctx.seed,
                               k_radius=2.0)
        x0 = np.zeros(model.dim)
        plan = build_plan(model, x0, cfg)
        clock = None
        if model.killing == "exp-clock":
            ids = np.arange(512, dtype=np.uint32)
            clock = rngmod.exponential_kill_times(cfg.seed, ids, model.kill_rate)
        out_p = get_backend("pure").simulate_chunk(plan, cfg.seed, 0, 512, cfg.n_steps(), clock)
        out_c = get_backend("compiled").simulate_chunk(plan, cfg.seed, 0, 512, cfg.n_steps(), clock)
        sp, sc = out_p[0], out_c[0]
        mask = np.isfinite(sp)
        if not np.array_equal(mask, np.isfinite(sc)):
            return _result("backend-agreement", False, model=key, reason="alive masks differ")
        diff = float(np.max(np.abs(sp[mask] - sc[mask]) / np.maximum(np.abs(sp[mask]), 1.0))) \
            if mask.any() else 0.0
        if rtol_bucket == "exact":
            worst_exact = max(worst_exact, diff)
        else:
            worst_sin = max(worst_sin, diff)
        for a, b in zip(out_p[1:], out_c[1:]):
            if not np.array_equal(a, b):
                return _result("backend-agreement", False, model=key, reason="bookkeeping differs")
    ok = worst_exact == 0.0 and worst_sin <= 1e-12
    return _result("backend-agreement", ok, worst_exact=worst_exact, worst_sin=worst_sin)


def check_deterministic_exact(ctx):
    """Deterministic samplers reproduce their closed forms exactly."""
    cfg = SimulationConfig(horizon=1.0, dt=0.125, n_paths=1, seed=ctx.seed)
    sd = make_superdrift()
    p = simulate_path(sd, np.array([2.0]), cfg)
    times = p.times
    want = np.where(times < 0.5, 1.0 / np.maximum(0.5 - times, 1e-300), np.nan)
    ok = p.zeta == 0.5
    alive = times < 0.5
    ok &= bool(np.all(p.states[alive, 0] == want[alive]))
    ok &= bool(np.all(~np.isfinite(p.states[~alive, 0])))
    ok &= float(p.states[2, 0]) == 4.0  # t = 0.25 from x = 2
    sg = make_sign_drift()
    q = simulate_path(sg, np.array([-1.0]), cfg)
    ok &= bool(np.all(q.states[:, 0] == -1.0 - times))
    ok &= q.zeta == np.inf
    z = simulate_path(sg, np.array([0.0]), cfg)
    ok &= bool(np.all(z.states[:, 0] == 0.0))  # sgn(0) = 0: absorbing
    return _result("deterministic-exact", ok, superdrift_zeta=p.zeta)


def check_sampler_consistency(ctx):
    """One-step mean and covariance match the field triplet (4 sigma)."""
    rs = np.random.default_rng(ctx.seed + 8)
    n = ctx.n_paths(10**5)
    dt = 1e-3
    ok = True
    detail = {}
    for key in ("brownian", "drift-poisson", "killed-brownian", "sde-sin"):
        model = builtin_models()[key]
        x = _sample_states(model, 1, rs)[0]
        cfg = SimulationConfig(horizon=dt, dt=dt, n_paths=n, seed=ctx.seed + 9)
        from .simulate import iter_chunks

        incs = []
        for _, states, _, _, _ in iter_chunks(model, x, cfg):
            incs.append(states[:, 1, :] - x)
        dX = np.concatenate(incs)
        trip = model.field.triplet(x)
        mean_want = (trip.ell + trip.jumps.mean()) * dt
        cov_want = (trip.Q + trip.jumps.second_moment()) * dt
        mean_got = dX.mean(axis=0)
        se_mean = dX.std(axis=0, ddof=1) / math.sqrt(n)
        ok_m = np.all(np.abs(mean_got - mean_want) <= 4.0 * se_mean + 1e-12)
        var_got = dX.var(axis=0, ddof=1)
        se_var = var_got * math.sqrt(2.0 / (n - 1))
        ok_v = np.all(np.abs(var_got - np.diag(cov_want)) <= 4.0 * se_var + 1e-12)
        ok &= bool(ok_m and ok_v)
        detail[key] = [float(np.max(np.abs(mean_got - mean_want))), float(np.max(se_mean))]
    return _result("sampler-consistency", ok, **detail)


def check_euler_weak_error(ctx):
    """Brownian with drift: E X_T and Var X_T match ell T and Q T."""
    n = ctx.n_paths(10**5)
    dt = ctx.step(1e-3)
    T = 0.5
    model = make_levy(LevyTriplet.make(ell=[0.7], Q=[[1.3]]), name="drift-brownian")
    cfg = SimulationConfig(horizon=T, dt=dt, n_paths=n, seed=ctx.seed + 10)
    from .simulate import iter_chunks

    xs = []
    for _, states, _, _, _ in iter_chunks(model, np.array([0.0]), cfg):
        xs.append(states[:, -1, 0])
    xT = np.concatenate(xs)
    mean_got, var_got = xT.mean(), xT.var(ddof=1)
    se_mean = xT.std(ddof=1) / math.sqrt(n)
    se_var = var_got * math.sqrt(2.0 / (n - 1))
    ok = abs(mean_got - 0.7 * T) <= 4 * se_mean and abs(var_got - 1.3 * T) <= 4 * se_var
    return _result(
        "euler-weak-error", ok,
        mean=[float(mean_got), 0.7 * T, float(se_mean)],
        var=[float(var_got), 1.3 * T, float(se_var)],
    )


def check_levy_sde_ks(ctx):
    """make_levy and make_levy_sde with identity Phi have the same
    one-step law (two-sample KS below the 1 percent critical value)."""
    from scipy.stats import ks_2samp

    from .simulate import iter_chunks

    n = ctx.n_paths(10**4)
    dt = 1e-2
    trip = LevyTriplet.make(Q=[[1.0]])
    a = make_levy(trip, name="levy-a")
    b = make_levy_sde(phi_identity(), trip, name="sde-b")
    samples = []
    for model, seed in ((a, ctx.seed + 11), (b, ctx.seed + 12)):
        cfg = SimulationConfig(horizon=dt, dt=dt, n_paths=n, seed=seed)
        vals = []
        for _, states, _, _, _ in iter_chunks(model, np.array([0.0]), cfg):
            vals.append(states[:, 1, 0])
        samples.append(np.concatenate(vals))
    stat = float(ks_2samp(samples[0], samples[1]).statistic)
    crit = 1.628 * math.sqrt(2.0 / n)  # 1% critical value, equal sizes
    return _result("levy-sde-ks", stat < crit, statistic=stat, critical=crit)


def check_survival(ctx):
    """Pure-death model: empirical survival matches e^{-t}."""
    n = ctx.n_paths(10**5)
    model = make_killed_levy(LevyTriplet.make(a=1.0), name="pure-death")
    cfg = SimulationConfig(horizon=1.0, dt=0.05, n_paths=n, seed=ctx.seed + 13)
    from .simulate import iter_chunks

    alive = 0
    for _, states, _, _, _ in iter_chunks(model, np.array([0.0]), cfg):
        alive += int(np.isfinite(states[:, -1, 0]).sum())
    p_hat = alive / n
    want = math.exp(-1.0)
    se = math.sqrt(want * (1 - want) / n)
    ok = abs(p_hat - want) <= 3 * se
    return _result("survival", ok, p_hat=p_hat, want=want, se=se)


def check_announcing(ctx):
    ok = True
    cfg = SimulationConfig(horizon=1.0, dt=1e-3, n_paths=1, seed=ctx.seed)
    sd = make_superdrift()
    p = simulate_path(sd, np.array([1.0]), cfg)
    rho = announcing_sequence(sd, p, n_max=25)
    ok &= bool(np.all(np.diff(rho) >= -1e-15))
    ok &= bool(np.all(rho < p.zeta))
    ok &= p.zeta - rho[-1] <= 2 * cfg.dt + 1e-12
    bm = make_levy(LevyTriplet.make(Q=[[1.0]]), name="bm")
    q = simulate_path(bm, np.array([0.0]), SimulationConfig(1.0, 1e-2, 1, ctx.seed + 1))
    rho_bm = announcing_sequence(bm, q, n_max=6)
    ok &= bool(np.all(rho_bm[2:] == np.arange(3, 7)))  # no exit from K_n, n >= 3
    sg = make_sign_drift()
    r = simulate_path(sg, np.array([0.0]), SimulationConfig(1.0, 1e-2, 1, ctx.seed + 2))
    ok &= bool(np.all(announcing_sequence(sg, r, n_max=5) == np.arange(1, 6)))
    return _result("announcing", ok, superdrift_last=float(rho[-1]), zeta=p.zeta)


# ---------------------------------------------------------------------------
# estimator checks
# ---------------------------------------------------------------------------


def _estimate(model, x, xi, ctx, n=20000, t0=0.01, dt=1e-3, k_radius=1.0, seed_off=0):
    cfg = SimulationConfig(
        horizon=t0, dt=ctx.step(dt), n_paths=ctx.n_paths(n), seed=ctx.seed + seed_off
    )
    return estimate_symbol(
        model, np.asarray(x, dtype=float), np.asarray(xi, dtype=float), cfg,
        t_grid=[t0, t0 / 2, t0 / 4, t0 / 8], k_radius=k_radius,
    )


def check_estimate_hermitian(ctx):
    """p(x, -xi) equals conj p(x, xi) bitwise on common random numbers."""
    model = builtin_models()["brownian"]
    a = _estimate(model, [0.0], [1.5], ctx, n=4000)
    b = _estimate(model, [0.0], [-1.5], ctx, n=4000)
    ok = (
        b.p_extrapolated.real == a.p_extrapolated.real
        and b.p_extrapolated.imag == -a.p_extrapolated.imag
        and bool(np.all(b.m_hat == np.conj(a.m_hat)))
    )
    return _result("estimate-hermitian", ok,
                   p=[a.p_extrapolated.real, a.p_extrapolated.imag])


def check_estimate_negative_definite(ctx):
    """The H-matrix test applied to estimated symbols (tolerance widened
    to -5 stderr)."""
    model = builtin_models()["brownian"]
    base = [np.array([v]) for v in (-1.0, 0.5, 1.5)]
    freqs = {0.0}
    for xi in base:
        freqs.add(float(xi[0]))
        for eta in base:
            freqs.add(float(xi[0] - eta[0]))
    cache = {}
    worst_se = 0.0
    for f in sorted(freqs):
        est = _estimate(model, [0.0], [f], ctx, n=20000)
        cache[f] = est.p_extrapolated
        worst_se = max(worst_se, est.stderr)

    def sym(x, xi):
        return cache[float(xi[0])]

    res = negative_definiteness_check(sym, np.array([0.0]), base, eig_tol=-5.0 * worst_se)
    return _result("estimate-negative-definite", bool(res),
                   min_eig=res.min_eigenvalue, tol=-5.0 * worst_se)


def check_independence_of_k(ctx):
    ok = True
    detail = {}
    sd = builtin_models()["superdrift"]
    cfg = SimulationConfig(horizon=1e-6, dt=1.25e-7, n_paths=4, seed=ctx.seed)
    r = independence_of_K_check(sd, np.array([1.0]), np.array([1.0]), cfg,
                                radii=[0.25, 0.5], t_grid=[1e-6, 5e-7, 2.5e-7])
    ok &= r.passed and r.spread == 0.0
    detail["superdrift"] = r.spread
    bm = builtin_models()["brownian"]
    cfgb = SimulationConfig(horizon=0.01, dt=1e-3, n_paths=ctx.n_paths(20000), seed=ctx.seed + 3)
    rb = independence_of_K_check(bm, np.array([0.0]), np.array([2.0]), cfgb, radii=[2.0, 4.0])
    ok &= rb.passed
    detail["brownian"] = rb.spread
    sg = builtin_models()["sign-drift"]
    cfgs = SimulationConfig(horizon=1e-3, dt=1.25e-4, n_paths=4, seed=ctx.seed)
    rS = independence_of_K_check(sg, np.array([1.0]), np.array([1.0]), cfgs, radii=[0.5, 1.0])
    ok &= rS.passed and rS.spread == 0.0
    detail["sign-drift"] = rS.spread
    return _result("independence-of-k", ok, **detail)


def check_killed_offset(ctx):
    ok = True
    detail = {}
    for a in (0.5, 1.0):
        model = make_killed_levy(LevyTriplet.make(a=a, Q=[[1.0]]), name=f"killed-{a:g}")
        est = _estimate(model, [0.0], [0.0], ctx, n=10**5, k_radius=1.0, seed_off=17)
        gap = abs(est.p_extrapolated - a)
        ok &= gap <= 3.0 * est.stderr
        detail[f"a={a:g}"] = [float(est.p_extrapolated.real), gap, est.stderr]
    return _result("killed-offset", ok, **detail)


def _mc_suite_models():
    models = builtin_models()
    return {
        "brownian": (models["brownian"], [0.0], 0.5, 1e-3, 2.0),
        "drift-poisson": (models["drift-poisson"], [0.0], 0.5, 1e-3, 3.0),
        "superdrift": (models["superdrift"], [1.0], 0.3, 1e-4, 0.75),
        "sign-drift": (models["sign-drift"], [1.0], 0.3, 1e-4, 2.0),
    }


def _suite_u(center=0.0):
    return build_test_function("gaussian-bump", center=center, width=0.5)


def check_martingale(ctx):
    ok = True
    detail = {}
    for key, (model, x, t, dt, _) in _mc_suite_models().items():
        n = 4 if model.deterministic else ctx.n_paths(20000)
        cfg = SimulationConfig(horizon=t, dt=ctx.step(dt), n_paths=n, seed=ctx.seed + 21)
        center = 1.15 if key == "superdrift" else float(x[0])
        res = martingale_test(model, _suite_u(center), np.asarray(x), t, cfg)
        ok &= res.passed
        detail[key] = [res.mean, res.stderr]
    return _result("martingale", ok, **detail)


def check_dynkin(ctx):
    ok = True
    detail = {}
    for key, (model, x, t, dt, k_rad) in _mc_suite_models().items():
        n = 4 if model.deterministic else ctx.n_paths(20000)
        cfg = SimulationConfig(horizon=t, dt=ctx.step(dt), n_paths=n, seed=ctx.seed + 22)
        center = 1.15 if key == "superdrift" else float(x[0])
        res = dynkin_check(model, _suite_u(center), np.asarray(x), t, k_rad, cfg)
        ok &= res.passed
        detail[key] = [res.gap, res.stderr]
    return _result("dynkin", ok, **detail)


def check_compensator(ctx):
    ok = True
    detail = {}
    for key, (model, x, t, dt, k_rad) in _mc_suite_models().items():
        n = 4 if model.deterministic else ctx.n_paths(20000)
        cfg = SimulationConfig(horizon=t, dt=ctx.step(dt), n_paths=n, seed=ctx.seed + 23)
        center = 1.15 if key == "superdrift" else float(x[0])
        res = compensator_test(model, _suite_u(center), np.asarray(x), t, cfg, k_radius=k_rad)
        ok &= res.passed
        detail[key] = [res.mean, res.stderr]
    return _result("compensator", ok, **detail)


def check_characteristics_oracles(ctx):
    ok = True
    detail = {}
    # sign-drift: (B, C, nu) = (X - x, 0, 0) exactly
    sg = make_sign_drift()
    cfg = SimulationConfig(horizon=1.0, dt=1e-3, n_paths=1, seed=ctx.seed)
    p = simulate_path(sg, np.array([1.0]), cfg)
    rec = compute_characteristics(p, sg.field, test_kernels=[("y2", lambda y: float(y[0] ** 2))])
    gap_b = float(np.max(np.abs(rec.B[:, 0] - (p.states[:, 0] - 1.0))))
    ok &= gap_b == 0.0 and float(np.max(np.abs(rec.C))) == 0.0
    ok &= float(np.max(np.abs(rec.nu["y2"]))) == 0.0
    detail["sign-drift"] = gap_b
    # superdrift: B at t = 0.25 from x = 1 equals 1/3 (trapezoid, dt = 1e-4)
    sd = make_superdrift()
    cfg2 = SimulationConfig(horizon=0.25, dt=1e-4, n_paths=1, seed=ctx.seed)
    p2 = simulate_path(sd, np.array([1.0]), cfg2)
    rec2 = compute_characteristics(p2, sd.field)
    gap_sd = abs(float(rec2.B[-1, 0]) - 1.0 / 3.0)
    ok &= gap_sd <= 1e-8
    detail["superdrift"] = gap_sd
    # brownian: C_t = t to 1e-12
    bm = builtin_models()["brownian"]
    p3 = simulate_path(bm, np.array([0.0]), SimulationConfig(1.0, 1e-3, 1, ctx.seed + 1))
    rec3 = compute_characteristics(p3, bm.field)
    gap_bm = float(np.max(np.abs(rec3.C[:, 0, 0] - p3.times)))
    ok &= gap_bm <= 1e-12
    detail["brownian"] = gap_bm
    return _result("characteristics-oracles", ok, **detail)


# ---------------------------------------------------------------------------
# symbol-agreement comparisons (also the CLI `compare` implementation)
# ---------------------------------------------------------------------------


def compare_report(model, xs, xis, cfg, t_grid=None, k_radius=1.0, bias_frac=0.02):
    """Estimate-vs-analytic table over a (x, xi) grid.

    A point passes when |p_hat - q| <= 3 stderr + bias_frac |q|.  Returns
    (records, all_pass); records are JSON-ready dicts.
    """
    records = []
    all_pass = True
    for x in xs:
        for xi in xis:
            est = estimate_symbol(model, x, xi, cfg, t_grid=t_grid, k_radius=k_radius)
            q = model.symbol(x, xi)
            gap = est.gap_to(q)
            band = 3.0 * est.stderr + bias_frac * abs(q)
            passed = gap <= band
            all_pass &= passed
            rec = est.to_dict()
            rec.update(
                analytic=[q.real, q.imag], gap=gap, band=band, passed=bool(passed)
            )
            records.append(rec)
    return records, all_pass


def check_symbol_deterministic(ctx):
    """Superdrift and sign-drift estimates against the closed forms."""
    ok = True
    worst_sd = 0.0
    sd = make_superdrift()
    for x in (0.5, 1.0, 2.0):
        cfg = SimulationConfig(horizon=1e-6, dt=1.25e-7, n_paths=4, seed=ctx.seed)
        for xi in (-2.0, -1.0, 1.0, 2.0):
            est = estimate_symbol(sd, np.array([x]), np.array([xi]), cfg,
                                  t_grid=[1e-6, 5e-7, 2.5e-7, 1.25e-7], k_radius=x / 2)
            gap = est.gap_to(-1j * x * x * xi)
            worst_sd = max(worst_sd, gap)
            ok &= gap <= 1e-3
    worst_sg = 0.0
    sg = make_sign_drift()
    for x in (-1.0, 0.0, 1.0):
        cfg = SimulationConfig(horizon=1e-7, dt=1.25e-8, n_paths=4, seed=ctx.seed)
        for xi in (-2.0, -1.0, 1.0, 2.0):
            est = estimate_symbol(sg, np.array([x]), np.array([xi]), cfg,
                                  t_grid=[1e-7, 5e-8, 2.5e-8, 1.25e-8], k_radius=0.5)
            gap = est.gap_to(-1j * np.sign(x) * xi)
            worst_sg = max(worst_sg, gap)
            ok &= gap <= 1e-6
    return _result("symbol-deterministic", ok, superdrift_worst=worst_sd,
                   signdrift_worst=worst_sg)


def _stochastic_cases(n_paths, seed):
    models = builtin_models()
    cfg = lambda s: SimulationConfig(horizon=0.01, dt=1e-3, n_paths=n_paths, seed=s)
    return [
        (models["brownian"], [[-0.5], [0.0], [1.0]], [-2.0, -1.0, 1.0, 2.0], 1.0, cfg(seed)),
        (models["drift-poisson"], [[-0.5], [0.0], [1.0]], [-2.0, -1.0, 1.0, 2.0], 3.0, cfg(seed + 1)),
        (models["killed-brownian"], [[-0.5], [0.0], [1.0]], [-2.0, -1.0, 1.0, 2.0], 1.0, cfg(seed + 2)),
        (models["sde-sin"], [[0.0], [math.pi / 2], [2.0]], [-1.0, -0.5, 0.5, 1.0], 1.5, cfg(seed + 3)),
    ]


def check_symbol_stochastic(ctx):
    ok = True
    detail = {}
    for model, xs, xis, k_rad, cfg in _stochastic_cases(ctx.n_paths(20000), ctx.seed + 30):
        records, passed = compare_report(
            model, [np.asarray(x) for x in xs], [np.asarray([v]) for v in xis],
            cfg, k_radius=k_rad,
        )
        ok &= passed
        detail[model.name] = max(r["gap"] for r in records)
    return _result("symbol-stochastic", ok, **detail)


def check_reproducibility(ctx):
    """Identical seeds produce byte-identical reports."""
    import json

    model = builtin_models()["brownian"]
    cfg = SimulationConfig(horizon=0.01, dt=1e-3, n_paths=2000, seed=ctx.seed + 40)
    blobs = []
    for _ in range(2):
        records, _ = compare_report(
            model, [np.array([0.0])], [np.array([1.0]), np.array([2.0])], cfg
        )
        blobs.append(json.dumps(records, sort_keys=True))
    return _result("reproducibility", blobs[0] == blobs[1], bytes=len(blobs[0]))


# ---------------------------------------------------------------------------
# acceptance criteria (full-size configurations)
# ---------------------------------------------------------------------------


def acceptance_1(ctx):
    """Deterministic symbol agreement: superdrift 1e-3, sign-drift 1e-6."""
    res = check_symbol_deterministic(ctx)
    return _result("acceptance-1", res.passed, **res.detail)


def acceptance_2(ctx):
    """Stochastic symbol agreement at n = 1e5, dt = 1e-3, geometric t-grid."""
    ctx2 = replace(ctx, paths=ctx.paths or 10**5)
    res = check_symbol_stochastic(ctx2)
    return _result("acceptance-2", res.passed, **res.detail)


def acceptance_3(ctx):
    ctx2 = replace(ctx, paths=ctx.paths or 10**5)
    res = check_killed_offset(ctx2)
    return _result("acceptance-3", res.passed, **res.detail)


def acceptance_4(ctx):
    res = check_operator_identity(ctx)
    return _result("acceptance-4", res.passed, **res.detail)


def acceptance_5(ctx):
    ctx2 = replace(ctx, paths=ctx.paths or 10**5)
    m = check_martingale(ctx2)
    d = check_dynkin(ctx2)
    c = check_compensator(ctx2)
    return _result("acceptance-5", m.passed and d.passed and c.passed,
                   martingale=m.detail, dynkin=d.detail, compensator=c.detail)


def acceptance_6(ctx):
    res = check_characteristics_oracles(ctx)
    return _result("acceptance-6", res.passed, **res.detail)


def acceptance_7(ctx):
    a = check_integrand_bound(ctx)
    b = check_integrand_estimate_two(ctx)
    c = check_growth_bound(ctx)
    d = check_negative_definiteness(ctx)
    return _result("acceptance-7", a.passed and b.passed and c.passed and d.passed,
                   integrand=a.detail, estimate_two=b.detail, growth=c.detail,
                   negdef=d.detail)


def acceptance_8(ctx):
    res = check_reproducibility(ctx)
    return _result("acceptance-8", res.passed, **res.detail)


# ---------------------------------------------------------------------------
# registry
# ---------------------------------------------------------------------------

CHECKS = {
    "philox-kat": check_philox_kat,
    "hermitian-symmetry": check_hermitian_symmetry,
    "vanishing-at-zero": check_vanishing_at_zero,
    "sqrt-subadditivity": check_sqrt_subadditivity,
    "scaling-identity-fails": check_scaling_identity_fails,
    "cutoff-forms-agree": check_cutoff_forms_agree,
    "growth-bound": check_growth_bound,
    "integrand-bound": check_integrand_bound,
    "integrand-estimate-two": check_integrand_estimate_two,
    "negative-definiteness": check_negative_definiteness,
    "norm-estimate": check_norm_estimate,
    "iq-linearity": check_iq_linearity,
    "constant-annihilation": check_constant_annihilation,
    "operator-identity": check_operator_identity,
    "backend-agreement": check_backend_agreement,
    "deterministic-exact": check_deterministic_exact,
    "sampler-consistency": check_sampler_consistency,
    "euler-weak-error": check_euler_weak_error,
    "levy-sde-ks": check_levy_sde_ks,
    "survival": check_survival,
    "announcing": check_announcing,
    "estimate-hermitian": check_estimate_hermitian,
    "estimate-negative-definite": check_estimate_negative_definite,
    "independence-of-k": check_independence_of_k,
    "killed-offset": check_killed_offset,
    "martingale": check_martingale,
    "dynkin": check_dynkin,
    "compensator": check_compensator,
    "characteristics-oracles": check_characteristics_oracles,
    "symbol-deterministic": check_symbol_deterministic,
    "symbol-stochastic": check_symbol_stochastic,
    "reproducibility": check_reproducibility,
    "acceptance-1": acceptance_1,
    "acceptance-2": acceptance_2,
    "acceptance-3": acceptance_3,
    "acceptance-4": acceptance_4,
    "acceptance-5": acceptance_5,
    "acceptance-6": acceptance_6,
    "acceptance-7": acceptance_7,
    "acceptance-8": acceptance_8,
}

ACCEPTANCE_CHECKS = tuple(f"acceptance-{i}" for i in range(1, 9))
DEFAULT_CHECKS = tuple(n for n in CHECKS if not n.startswith("acceptance-"))


def run_checks(names=None, ctx=None):
    """Run named checks (default: the light suite); returns CheckResults."""
    ctx = ctx or VerifyContext()
    if names is None:
        names = DEFAULT_CHECKS
    results = []
    for name in names:
        if name not in CHECKS:
            raise FellerLabError(f"unknown check {name!r}")
        try:
            results.append(CHECKS[name](ctx))
        except FellerLabError as exc:
            results.append(CheckResult(name, False, {"error": str(exc)}))
    return results
