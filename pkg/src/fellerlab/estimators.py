"""Monte Carlo estimation of the probabilistic symbol and the
semimartingale identities.

The probabilistic symbol at x in direction xi is the small-time limit

    p(x, xi) = -lim_{t -> 0} ( E^x e^{i xi'(X^sigma_t - x)} - 1 ) / t

where sigma is the first exit time from a compact neighborhood K of x
and the cemetery contributes 0 to the expectation (no alive-conditioning
is needed).  The estimator computes m(t) = E e^{i xi'(X^sigma_t - x)} on
a small geometric time grid and extrapolates t -> 0 with a weighted
affine fit m(t) ~ 1 - t p; the fit residual is reported as a bias
diagnostic since the limit comes with no rate.

The martingale-type checks integrate the generator along paths:

    M_t = u(X_t) - u(x) - int_0^t I_q u(X_s) ds

is a martingale for compactly supported C^2 u, Dynkin's formula is the
stopped version, and the compensator test re-expresses the same
compensation through the semimartingale characteristics (B, C, nu).
Continuous parts use pathwise trapezoid rules; jump parts use left
endpoints (respecting predictability); both tests share the split, so
they agree pathwise to rounding for constant triplets.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ArgumentError, DegenerateSampleError, UnsupportedModelError
from .operators import _u_tilde, iq_on_states
from .simulate import iter_chunks
from .spaces import as_point

__all__ = [
    "SymbolEstimate",
    "estimate_symbol",
    "KIndependence",
    "independence_of_K_check",
    "CharacteristicsRecord",
    "compute_characteristics",
    "MCTestResult",
    "martingale_test",
    "DynkinResult",
    "dynkin_check",
    "compensator_test",
]


# ---------------------------------------------------------------------------
# small-time symbol estimation
# ---------------------------------------------------------------------------


@dataclass
class SymbolEstimate:
    """Estimate of p(x, xi) with per-time statistics and fit diagnostics."""

    x: np.ndarray
    xi: np.ndarray
    t_grid: np.ndarray  # snapped to grid multiples of dt
    t_requested: np.ndarray
    m_hat: np.ndarray  # complex mean of e_xi(X^sigma_t - x), cemetery -> 0
    se_re: np.ndarray
    se_im: np.ndarray
    n_alive: np.ndarray
    p_hat_per_t: np.ndarray
    p_extrapolated: complex
    slope_se_re: float
    slope_se_im: float
    fit_residual: float
    n_paths: int
    k_radius: float
    kappa_label: str
    model_name: str
    seed: int

    @property
    def stderr(self):
        """Combined standard error of the extrapolated value."""
        return math.hypot(self.slope_se_re, self.slope_se_im)

    def gap_to(self, analytic):
        return abs(self.p_extrapolated - complex(analytic))

    def to_dict(self):
        return {
            "model": self.model_name,
            "x": [float(v) for v in self.x],
            "xi": [float(v) for v in self.xi],
            "t_grid": [float(v) for v in self.t_grid],
            "m_hat": [[float(v.real), float(v.imag)] for v in self.m_hat],
            "stderr_per_t": [[float(a), float(b)] for a, b in zip(self.se_re, self.se_im)],
            "n_alive": [int(v) for v in self.n_alive],
            "p_hat_per_t": [[float(v.real), float(v.imag)] for v in self.p_hat_per_t],
            "p_extrapolated": [self.p_extrapolated.real, self.p_extrapolated.imag],
            "slope_stderr": [self.slope_se_re, self.slope_se_im],
            "fit_residual": self.fit_residual,
            "n_paths": self.n_paths,
            "k_radius": self.k_radius,
            "kappa": self.kappa_label,
            "seed": self.seed,
        }


def _wls_affine(t, y, se, floor=1e-15):
    """Weighted least squares fit y ~ a + b t; returns (b, a, se_b, resid)."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    w = 1.0 / (np.asarray(se, dtype=float) ** 2 + floor**2)
    S = w.sum()
    St = (w * t).sum()
    Stt = (w * t * t).sum()
    Sy = (w * y).sum()
    Sty = (w * t * y).sum()
    D = S * Stt - St * St
    if D <= 0:
        raise ArgumentError("degenerate time grid for the affine fit")
    slope = (S * Sty - St * Sy) / D
    intercept = (Stt * Sy - St * Sty) / D
    se_slope = math.sqrt(S / D)
    resid = math.sqrt(float((w * (y - intercept - slope * t) ** 2).sum() / S))
    return slope, intercept, se_slope, resid


def _snap_t_grid(t_grid, dt, horizon):
    t_req = np.asarray(sorted(float(t) for t in t_grid))
    if np.any(t_req <= 0):
        raise ArgumentError("t_grid must be strictly positive")
    if t_req[-1] > horizon * (1 + 1e-9):
        raise ArgumentError("max(t_grid) exceeds the simulation horizon")
    idx = np.maximum(1, np.round(t_req / dt).astype(int))
    idx = np.unique(idx)
    return idx, idx * dt, t_req


def default_t_grid(t0=0.01, n=4, ratio=0.5):
    """Geometric grid {t0, t0 r, ..., t0 r^(n-1)} used by the extrapolation."""
    return [t0 * ratio**k for k in range(n)]


def estimate_symbol(model, x, xi, cfg, t_grid=None, k_radius=None):
    """Monte Carlo estimate of the probabilistic symbol p(x, xi).

    Simulates ``cfg.n_paths`` paths stopped at the first exit from the
    closed ball of radius ``k_radius`` around x, computes the complex
    means m(t) on the snapped time grid and extrapolates t -> 0 by a
    weighted affine fit.  Requested times are snapped to the nearest
    positive grid multiple of dt (and deduplicated); the snapped values
    enter the regression.
    """
    x = model.space.require(x)
    xi = as_point(xi, model.dim)
    if k_radius is None:
        k_radius = cfg.k_radius
    if k_radius is None:
        raise ArgumentError("estimate_symbol needs a K radius")
    if t_grid is None:
        t_grid = default_t_grid(t0=cfg.horizon)
    cfg = replace(cfg, k_radius=float(k_radius))
    t_idx, t_snap, t_req = _snap_t_grid(t_grid, cfg.dt, cfg.horizon)
    nt = len(t_idx)

    parts = []
    for path0, states, sigma_idx, zeta, zeta_idx in iter_chunks(model, x, cfg):
        n = states.shape[0]
        acc = np.zeros((nt, 5))
        rows_idx = np.arange(n)
        for j, it in enumerate(t_idx):
            stop = np.minimum(sigma_idx, it)
            vals = states[rows_idx, stop, :]
            finite = np.all(np.isfinite(vals), axis=1)
            th = np.where(finite[:, None], vals, 0.0) @ xi - float(x @ xi)
            c = np.where(finite, np.cos(th), 0.0)
            s = np.where(finite, np.sin(th), 0.0)
            acc[j] = (c.sum(), s.sum(), (c * c).sum(), (s * s).sum(), finite.sum())
        parts.append(acc)
    totals = np.sum(np.stack(parts), axis=0)

    n = cfg.n_paths
    n_alive = totals[:, 4].astype(int)
    if n_alive[0] == 0:
        raise DegenerateSampleError(
            f"all {n} paths dead before the smallest estimation time {t_snap[0]}"
        )
    mean_c = totals[:, 0] / n
    mean_s = totals[:, 1] / n
    if n > 1:
        var_c = np.maximum(totals[:, 2] - n * mean_c**2, 0.0) / (n - 1)
        var_s = np.maximum(totals[:, 3] - n * mean_s**2, 0.0) / (n - 1)
    else:
        var_c = var_s = np.zeros(nt)
    se_re = np.sqrt(var_c / n)
    se_im = np.sqrt(var_s / n)
    m_hat = mean_c + 1j * mean_s
    p_per_t = -(m_hat - 1.0) / t_snap

    if nt >= 2:
        b_re, _, seb_re, r_re = _wls_affine(t_snap, mean_c, se_re)
        b_im, _, seb_im, r_im = _wls_affine(t_snap, mean_s, se_im)
        p_extrap = complex(-b_re, -b_im)
        fit_residual = math.hypot(r_re, r_im)
    else:
        p_extrap = complex(p_per_t[0])
        seb_re = float(se_re[0] / t_snap[0])
        seb_im = float(se_im[0] / t_snap[0])
        fit_residual = 0.0

    return SymbolEstimate(
        x=x,
        xi=xi,
        t_grid=t_snap,
        t_requested=t_req,
        m_hat=m_hat,
        se_re=se_re,
        se_im=se_im,
        n_alive=n_alive,
        p_hat_per_t=p_per_t,
        p_extrapolated=p_extrap,
        slope_se_re=float(seb_re),
        slope_se_im=float(seb_im),
        fit_residual=fit_residual,
        n_paths=n,
        k_radius=float(k_radius),
        kappa_label=model.field.kappa.label(),
        model_name=model.name,
        seed=cfg.seed,
    )


@dataclass
class KIndependence:
    spread: float
    tolerance: float
    passed: bool
    estimates: list


def independence_of_K_check(model, x, xi, cfg, radii, t_grid=None):
    """Spread of p estimates across stopping radii (same seed, same paths).

    The limit defining the symbol does not depend on the compact K; the
    check demands that estimates for different admissible radii agree
    within combined 3-standard-error bands.
    """
    radii = list(radii)
    if len(radii) < 2:
        raise ArgumentError("need at least two radii")
    ests = [estimate_symbol(model, x, xi, cfg, t_grid=t_grid, k_radius=r) for r in radii]
    spread = 0.0
    tol = 0.0
    for i in range(len(ests)):
        for j in range(i + 1, len(ests)):
            d = abs(ests[i].p_extrapolated - ests[j].p_extrapolated)
            band = 3.0 * math.hypot(ests[i].stderr, ests[j].stderr)
            spread = max(spread, d)
            if d > band:
                tol = max(tol, band)
                return KIndependence(spread, band, False, ests)
            tol = max(tol, band)
    return KIndependence(spread, tol, True, ests)


# ---------------------------------------------------------------------------
# pathwise characteristics
# ---------------------------------------------------------------------------


@dataclass
class CharacteristicsRecord:
    """Pathwise (B, C, nu) records against the killed clock F_s."""

    times: np.ndarray
    B: np.ndarray  # (m+1, d)
    C: np.ndarray  # (m+1, d, d)
    nu: dict  # kernel name -> (m+1,) values of (g * nu)_t
    zeta: float
    alive: np.ndarray
    kappa_label: str


def _cumtrap_frozen(values, dt, alive):
    """Cumulative trapezoid along axis 0, frozen once the path is dead."""
    v = np.where(alive[(...,) + (None,) * (values.ndim - 1)], values, 0.0)
    inc = 0.5 * dt * (v[1:] + v[:-1])
    both = alive[1:] & alive[:-1]
    inc = np.where(both[(...,) + (None,) * (values.ndim - 1)], inc, 0.0)
    out = np.zeros_like(values)
    np.cumsum(inc, axis=0, out=out[1:])
    return out


def compute_characteristics(path, field, test_kernels=(), kappa=None):
    """Integrate the triplet along one path: B, C and (g * nu) records.

    B and C are composite-trapezoid integrals of l(X_s) and Q(X_s) over
    the alive segment; the nu records integrate the exact atomic inner
    integrals with the same rule.  All three stop updating at zeta.
    """
    kappa = kappa or field.kappa
    if path.dim != field.dim:
        raise ArgumentError("field/path dimension mismatch")
    ops = field.vector_ops
    if ops is None:
        raise UnsupportedModelError("characteristics need vectorized field accessors")
    alive = path.alive
    X = np.where(alive[:, None], path.states, path.x0)
    dt = float(path.times[1] - path.times[0])

    ell = np.where(alive[:, None], ops.ell(X), 0.0)
    Q = np.where(alive[:, None, None], ops.Q(X), 0.0)
    B = _cumtrap_frozen(ell, dt, alive)
    C = _cumtrap_frozen(Q, dt, alive)

    nu = {}
    for name, g in test_kernels:
        if ops.const_jumps is not None:
            jm = ops.const_jumps
            if jm.kind == "density":
                raise UnsupportedModelError("nu records need atomic (or no) jumps")
            if jm.is_none:
                vals = np.zeros(len(path.times))
            else:
                gk = np.asarray([float(g(y)) for y in jm.atoms])
                vals = np.full(len(path.times), float(jm.weights @ gk))
        elif ops.jump_atoms is not None:
            atoms, weights = ops.jump_atoms(X)
            gv = np.zeros(weights.shape)
            for i in range(atoms.shape[1]):
                gv[:, i] = np.asarray([float(g(y)) for y in atoms[:, i, :]])
            vals = np.einsum("nm,nm->n", weights, gv)
        else:
            vals = np.zeros(len(path.times))
        nu[name] = _cumtrap_frozen(vals, dt, alive)

    return CharacteristicsRecord(
        times=path.times,
        B=B,
        C=C,
        nu=nu,
        zeta=path.zeta,
        alive=alive,
        kappa_label=kappa.label(),
    )


# ---------------------------------------------------------------------------
# martingale-type Monte Carlo tests
# ---------------------------------------------------------------------------


@dataclass
class MCTestResult:
    name: str
    mean: float
    stderr: float
    passed: bool
    n_paths: int
    abs_tol: float

    def __bool__(self):
        return self.passed


@dataclass
class DynkinResult:
    lhs: float
    rhs: float
    gap: float
    stderr: float
    passed: bool
    n_paths: int
    abs_tol: float

    def __bool__(self):
        return self.passed


def _time_index(cfg, t):
    it = int(round(t / cfg.dt))
    if it < 1 or abs(it * cfg.dt - t) > 1e-9 * max(1.0, t):
        raise ArgumentError("t must be a positive grid multiple of dt")
    if it > cfg.n_steps():
        raise ArgumentError("t exceeds the simulation horizon")
    return it


def _path_integrals(cont, jump, dt, stop):
    """Per-path trapezoid (continuous part) and left rule (jump part) on
    [0, t_stop]; integrand arrays are (n, m+1), already zeroed when dead."""
    n, _ = cont.shape
    rows = np.arange(n)
    mask = np.arange(cont.shape[1])[None, :] <= stop[:, None]
    csum = (cont * mask).sum(axis=1)
    trap = dt * (csum - 0.5 * cont[rows, 0] - 0.5 * cont[rows, stop])
    jsum = (jump * mask).sum(axis=1)
    left = dt * (jsum - jump[rows, stop])
    return trap + left


def _compensated_means(model, u, x, t, cfg, stop_at_sigma, k_radius, route):
    """Chunked E[f(X_stop) - f(x) - compensator] with pathwise quadrature.

    route "iq" evaluates the generator integrand as one function; route
    "characteristics" assembles it termwise from the (B, C, nu)
    integrands.  Both use the same trapezoid/left-endpoint split.
    """
    x = model.space.require(x)
    if not u.is_compact():
        raise ArgumentError("martingale-type tests need compactly supported test functions")
    if model.killing == "exp-clock":
        raise UnsupportedModelError(
            "martingale-type tests need predictable killing (no exponential clock)"
        )
    it = _time_index(cfg, t)
    if stop_at_sigma:
        cfg = replace(cfg, k_radius=k_radius if k_radius is not None else cfg.k_radius)
    u_at_x = u.value1(x)
    field = model.field
    kappa = field.kappa

    sums = []
    for path0, states, sigma_idx, zeta, zeta_idx in iter_chunks(model, x, cfg):
        n = states.shape[0]
        rows = np.arange(n)
        S = states[:, : it + 1, :]
        alive = np.all(np.isfinite(S), axis=2)
        Xs = np.where(alive[:, :, None], S, x)
        flat = Xs.reshape(-1, model.dim)
        if route == "iq":
            cont, jump = iq_on_states(field, u, flat, kappa=kappa, space=model.space, split=True)
        else:
            cont, jump = _characteristics_integrands(field, u, flat, kappa, model.space)
        cont = np.where(alive, cont.reshape(n, it + 1), 0.0)
        jump = np.where(alive, jump.reshape(n, it + 1), 0.0)

        value_idx = np.minimum(sigma_idx, it) if stop_at_sigma else np.full(n, it)
        # integration stops at the value time or the last alive index
        last_alive = np.where(zeta_idx <= it, np.maximum(zeta_idx - 1, 0), it)
        stop = np.minimum(value_idx, last_alive)
        integ = _path_integrals(cont, jump, cfg.dt, stop)

        vals = states[rows, value_idx, :]
        finite = np.all(np.isfinite(vals), axis=1)
        uX = np.where(finite, _u_tilde(u, np.where(finite[:, None], vals, 0.0), model.space), 0.0)

        m_term = uX - u_at_x
        comp = m_term - integ
        sums.append((comp.sum(), (comp * comp).sum(), m_term.sum(), integ.sum()))
    totals = np.sum(np.array(sums), axis=0)
    n = cfg.n_paths
    mean = totals[0] / n
    var = max(totals[1] - n * mean**2, 0.0) / max(n - 1, 1)
    se = math.sqrt(var / n)
    mean_m = totals[2] / n
    mean_i = totals[3] / n
    return mean, se, mean_m, mean_i, n


def _characteristics_integrands(field, u, X, kappa, space):
    """Generator integrand assembled termwise from the characteristics.

    Same mathematical content as I_q u but built from the (b, c, K)
    pieces of the canonical representation: sum_j d_j u b_j, then the
    (1/2) sum c^{jk} d_j d_k u term, then the nu-compensated jump term.
    """
    ops = field.vector_ops
    if ops is None:
        raise UnsupportedModelError("characteristics route needs vectorized accessors")
    X = np.asarray(X, dtype=float)
    n, d = X.shape
    g = u.grad(X)
    H = u.hess(X)
    b = ops.ell(X)
    c = ops.Q(X)
    cont = np.zeros(n)
    for j in range(d):
        cont += g[:, j] * b[:, j]
    for j in range(d):
        for k in range(d):
            cont += 0.5 * H[:, j, k] * c[:, j, k]
    jump = np.zeros(n)
    base = u.u(X)
    if ops.const_jumps is not None and not ops.const_jumps.is_none:
        jm = ops.const_jumps
        if jm.kind != "atomic":
            raise UnsupportedModelError("jump compensators need atomic jumps")
        for i in range(len(jm.weights)):
            y = jm.atoms[i]
            kap = kappa.of_norm(float(np.linalg.norm(y)))
            grad_term = np.zeros(n)
            for j in range(d):
                grad_term += g[:, j] * y[j]
            jump += jm.weights[i] * (_u_tilde(u, X + y, space) - base - grad_term * kap)
    elif ops.jump_atoms is not None:
        atoms, weights = ops.jump_atoms(X)
        for i in range(atoms.shape[1]):
            y = atoms[:, i, :]
            kap = kappa.of_norm(np.linalg.norm(y, axis=1))
            grad_term = np.zeros(n)
            for j in range(d):
                grad_term += g[:, j] * y[:, j]
            jump += weights[:, i] * (_u_tilde(u, X + y, space) - base - grad_term * kap)
    return cont, jump


def martingale_test(model, u, x, t, cfg, abs_tol=1e-6):
    """E[M_t] = 0 for M_t = u(X_t) - u(x) - int_0^t I_q u(X_s) ds.

    Passes when |mean| <= 3 stderr + abs_tol; the absolute term is the
    quadrature budget that makes the test meaningful for deterministic
    models (zero variance).
    """
    mean, se, _, _, n = _compensated_means(
        model, u, x, t, cfg, stop_at_sigma=False, k_radius=None, route="iq"
    )
    passed = abs(mean) <= 3.0 * se + abs_tol
    return MCTestResult("martingale", mean, se, passed, n, abs_tol)


def dynkin_check(model, u, x, t, k_radius, cfg, abs_tol=1e-6):
    """Dynkin's formula on the same paths (common random numbers):

        E int_0^{sigma and t} I_q u(X_s) ds  =  E u(X_{sigma and t}) - u(x).
    """
    mean, se, mean_m, mean_i, n = _compensated_means(
        model, u, x, t, cfg, stop_at_sigma=True, k_radius=k_radius, route="iq"
    )
    gap = mean_i - mean_m  # lhs - rhs, pathwise differenced
    passed = abs(gap) <= 3.0 * se + abs_tol
    return DynkinResult(mean_i, mean_m, gap, se, passed, n, abs_tol)


def compensator_test(model, f, x, t, cfg, k_radius=None, abs_tol=1e-6):
    """Characteristics form of the compensated process, stopped at a
    fixed compact exit (the stopped local martingale is a true one)."""
    mean, se, _, _, n = _compensated_means(
        model, f, x, t, cfg, stop_at_sigma=True, k_radius=k_radius, route="characteristics"
    )
    passed = abs(mean) <= 3.0 * se + abs_tol
    return MCTestResult("compensator", mean, se, passed, n, abs_tol)
