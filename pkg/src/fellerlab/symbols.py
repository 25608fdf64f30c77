"""State-dependent Levy-Khintchine symbols.

The central object is the symbol

    q(x, xi) = a(x) - i l(x)'xi + (1/2) xi'Q(x)xi
               - integral( e^{i y'xi} - 1 - i y'xi kappa(y) ) N(x, dy)

built from a killing rate a(x) >= 0, a drift vector l(x), a positive
semidefinite diffusion matrix Q(x) and a jump kernel N(x, dy) with no mass
at the origin.  The truncation uses a cut-off function kappa sandwiched
between the indicators of the R-ball and the 2R-ball.  For every fixed x
the map xi -> q(x, xi) is continuous negative definite; several routines
below check pieces of that structure numerically (hermitian symmetry,
growth bounds, the H-matrix positivity test).

Jump measures are restricted to finite activity: either a finite list of
atoms (evaluated exactly) or a one-dimensional density with finite total
rate (evaluated by adaptive quadrature).
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import quad

from .errors import ArgumentError, DomainError, QuadratureError, UnsupportedModelError
from .spaces import StateSpace, as_point

__all__ = [
    "CutoffKappa",
    "JumpMeasure",
    "LevyTriplet",
    "SymbolField",
    "FieldVectorOps",
    "evaluate_symbol",
    "evaluate_triplet_symbol",
    "symbol_on_grid",
    "b_epsilon",
    "b_epsilon_of_norm",
    "integrand_bound_check",
    "integrand_bound_samples",
    "growth_constant",
    "growth_bound_check",
    "negative_definiteness_check",
]


# ---------------------------------------------------------------------------
# cut-off functions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CutoffKappa:
    """Cut-off kappa_R with 1_{R ball} <= kappa <= 1_{2R ball}.

    Two forms are supported:

    * ``indicator``: kappa(y) = 1_{|y| <= R}.  Borel, exact sandwich,
      no extra quadrature break structure beyond |y| = R.
    * ``smooth-ramp``: equal to 1 for |y| <= R, 0 for |y| >= 2R, with a
      C-infinity ramp in between (the classical bump-quotient step).

    Both coincide on atoms lying off the annulus [R, 2R], so symbols of
    purely atomic jump measures supported there are independent of the
    choice.
    """

    R: float = 1.0
    form: str = "indicator"

    def __post_init__(self):
        if not (self.R > 0 and np.isfinite(self.R)):
            raise ArgumentError(f"cut-off radius must be positive, got {self.R}")
        if self.form not in ("indicator", "smooth-ramp"):
            raise ArgumentError(f"unknown cut-off form {self.form!r}")

    def of_norm(self, r):
        """Evaluate kappa on an array of norms |y|."""
        r = np.asarray(r, dtype=float)
        if self.form == "indicator":
            return np.where(r <= self.R, 1.0, 0.0)
        s = (r - self.R) / self.R
        s = np.clip(s, 0.0, 1.0)
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            f1 = np.where(s < 1.0, np.exp(-1.0 / np.maximum(1.0 - s, 1e-300)), 0.0)
            f0 = np.where(s > 0.0, np.exp(-1.0 / np.maximum(s, 1e-300)), 0.0)
        out = f1 / (f0 + f1)
        return np.where(s <= 0.0, 1.0, np.where(s >= 1.0, 0.0, out))

    def __call__(self, y):
        """Evaluate at a single point y in R^d."""
        y = np.atleast_1d(np.asarray(y, dtype=float))
        return float(self.of_norm(np.linalg.norm(y)))

    def label(self):
        return f"{self.form}(R={self.R!r})"


# ---------------------------------------------------------------------------
# jump measures
# ---------------------------------------------------------------------------


class JumpMeasure:
    """Finite-activity jump kernel value N(x, .) at a fixed state.

    Kinds:

    * ``none``      -- no jumps.
    * ``atomic``    -- finite list of atoms (y_i, w_i); w_i is the jump
                       rate per unit time of a jump of size y_i.
    * ``density``   -- one-dimensional: N(dy) = rate * pdf(y) dy with a
                       probability density pdf; optional quantile function
                       ``ppf`` enables exact sampling.
    """

    def __init__(self, kind, atoms=None, weights=None, rate=None, pdf=None,
                 support=(-np.inf, np.inf), ppf=None, dim=None):
        self.kind = kind
        if kind == "none":
            self.dim = int(dim) if dim else 1
            self.atoms = np.zeros((0, self.dim))
            self.weights = np.zeros(0)
        elif kind == "atomic":
            atoms = np.asarray(atoms, dtype=float)
            if atoms.ndim == 1:
                atoms = atoms[:, None]
            weights = np.asarray(weights, dtype=float)
            if atoms.shape[0] != weights.shape[0]:
                raise ArgumentError("atoms and weights must have equal length")
            if np.any(weights <= 0) or not np.all(np.isfinite(weights)):
                raise ArgumentError("atom weights must be positive and finite")
            if np.any(np.linalg.norm(atoms, axis=1) == 0.0):
                raise ArgumentError("jump measures carry no mass at 0")
            self.atoms = atoms
            self.weights = weights
            self.dim = atoms.shape[1]
        elif kind == "density":
            if rate is None or not (rate > 0 and np.isfinite(rate)):
                raise ArgumentError("density jump measures need a finite positive rate")
            if pdf is None:
                raise ArgumentError("density jump measures need a pdf")
            self.rate = float(rate)
            self.pdf = pdf
            self.support = (float(support[0]), float(support[1]))
            self.ppf = ppf
            self.dim = 1
            self.atoms = None
            self.weights = None
        else:
            raise ArgumentError(f"unknown jump measure kind {kind!r}")

    # -- constructors ----------------------------------------------------

    @classmethod
    def none(cls, dim=1):
        return cls("none", dim=dim)

    @classmethod
    def atomic(cls, atoms, weights):
        return cls("atomic", atoms=atoms, weights=weights)

    @classmethod
    def from_density(cls, rate, pdf, support=(-np.inf, np.inf), ppf=None):
        return cls("density", rate=rate, pdf=pdf, support=support, ppf=ppf)

    @classmethod
    def from_distribution(cls, rate, dist):
        """Build from a frozen scipy.stats distribution (pdf + ppf)."""
        a, b = dist.support()
        return cls("density", rate=rate, pdf=dist.pdf, support=(a, b), ppf=dist.ppf)

    # -- basic quantities --------------------------------------------------

    @property
    def is_none(self):
        return self.kind == "none"

    def total_mass(self):
        if self.kind == "none":
            return 0.0
        if self.kind == "atomic":
            return float(self.weights.sum())
        return self.rate

    def mean(self):
        """integral y N(dy), finite for finite activity."""
        if self.kind == "none":
            return np.zeros(self.dim)
        if self.kind == "atomic":
            return self.weights @ self.atoms
        val, _ = quad(lambda y: y * self.pdf(y), *self.support, limit=200)
        return np.array([self.rate * val])

    def second_moment(self):
        """integral y y' N(dy)."""
        if self.kind == "none":
            return np.zeros((self.dim, self.dim))
        if self.kind == "atomic":
            return (self.atoms * self.weights[:, None]).T @ self.atoms
        val, _ = quad(lambda y: y * y * self.pdf(y), *self.support, limit=200)
        return np.array([[self.rate * val]])

    def b_epsilon_integral(self, eps):
        """integral b_eps(y) N(dy); finite for every eps > 0."""
        if self.kind == "none":
            return 0.0
        if self.kind == "atomic":
            return float(self.weights @ b_epsilon_of_norm(np.linalg.norm(self.atoms, axis=1), eps))
        val, _ = quad(
            lambda y: b_epsilon_of_norm(abs(y), eps) * self.pdf(y),
            *self.support,
            points=self._finite_points([-eps, eps]),
            limit=200,
        )
        return self.rate * val

    def _finite_points(self, pts):
        lo, hi = self.support
        good = sorted(p for p in pts if lo < p < hi)
        if not (np.isfinite(lo) and np.isfinite(hi)):
            return None
        return good or None

    def label(self):
        if self.kind == "none":
            return "none"
        if self.kind == "atomic":
            return f"atomic(m={len(self.weights)}, mass={self.total_mass():g})"
        return f"density(rate={self.rate:g})"


# ---------------------------------------------------------------------------
# triplets and fields
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LevyTriplet:
    """Point value (a, l, Q, N) of a symbol: killing rate, drift,
    diffusion matrix and jump measure."""

    a: float
    ell: np.ndarray
    Q: np.ndarray
    jumps: JumpMeasure

    @classmethod
    def make(cls, a=0.0, ell=0.0, Q=0.0, jumps=None, dim=None):
        ell = np.atleast_1d(np.asarray(ell, dtype=float))
        if dim is None:
            dim = ell.shape[0]
        if ell.shape != (dim,):
            raise ArgumentError(f"drift must have shape ({dim},)")
        Q = np.asarray(Q, dtype=float)
        if Q.ndim == 0:
            Q = np.eye(dim) * float(Q)
        if Q.shape != (dim, dim):
            raise ArgumentError(f"diffusion matrix must have shape ({dim},{dim})")
        if not np.allclose(Q, Q.T, atol=1e-12):
            raise ArgumentError("diffusion matrix must be symmetric")
        if dim > 0 and np.linalg.eigvalsh(Q).min() < -1e-10 * max(1.0, np.abs(Q).max()):
            raise ArgumentError("diffusion matrix must be positive semidefinite")
        if jumps is None:
            jumps = JumpMeasure.none(dim=dim)
        if jumps.dim != dim:
            raise ArgumentError("jump measure dimension mismatch")
        a = float(a)
        if a < 0 or not np.isfinite(a):
            raise ArgumentError("killing rate must be a finite nonnegative real")
        return cls(a, ell, Q, jumps)

    @property
    def dim(self):
        return self.ell.shape[0]

    def diffusion_factor(self):
        """Lower-triangular L with L L' = Q (Cholesky of the PSD matrix)."""
        d = self.dim
        Q = self.Q
        if np.allclose(Q, 0.0):
            return np.zeros((d, d))
        try:
            return np.linalg.cholesky(Q)
        except np.linalg.LinAlgError:
            # semidefinite case: symmetric square root via eigendecomposition
            w, V = np.linalg.eigh(Q)
            w = np.clip(w, 0.0, None)
            return V * np.sqrt(w)


@dataclass
class FieldVectorOps:
    """Vectorized accessors for pathwise evaluation of a field.

    ``ell(X)`` maps (n, d) states to (n, d) drifts, ``Q(X)`` to (n, d, d)
    matrices.  ``jump_atoms(X)`` returns (atoms, weights) of shapes
    (n, m, d) and (n, m) for state-dependent atomic jumps; ``const_jumps``
    short-circuits the common state-independent case.
    """

    ell: Callable
    Q: Callable
    const_jumps: Optional[JumpMeasure] = None
    jump_atoms: Optional[Callable] = None


@dataclass
class SymbolField:
    """Map x -> LevyTriplet over a state space, with symbol evaluation.

    ``continuity_declared`` is a model author's assertion that
    x -> q(x, xi) is finely continuous (hypothesis of the symbol
    agreement theorem); it is recorded, never verified.
    """

    dim: int
    space: StateSpace
    triplet_at: Callable
    continuity_declared: bool = True
    kappa: CutoffKappa = field(default_factory=CutoffKappa)
    name: str = "field"
    vector_ops: Optional[FieldVectorOps] = None

    def triplet(self, x):
        x = self.space.require(x)
        return self.triplet_at(x)

    def symbol(self, x, xi, kappa=None, quad_tol=1e-10):
        return evaluate_symbol(self, x, xi, kappa=kappa, quad_tol=quad_tol)

    def symbol_grid(self, x, xi_array, kappa=None):
        return symbol_on_grid(self, x, xi_array, kappa=kappa)

    @classmethod
    def constant(cls, triplet, space=None, name="levy-field", kappa=None,
                 continuity_declared=True):
        """Field of a constant triplet (Levy case)."""
        space = space or StateSpace.rd(triplet.dim)
        kappa = kappa or CutoffKappa()
        d = triplet.dim
        ops = FieldVectorOps(
            ell=lambda X: np.broadcast_to(triplet.ell, (len(X), d)),
            Q=lambda X: np.broadcast_to(triplet.Q, (len(X), d, d)),
            const_jumps=triplet.jumps,
        )
        return cls(d, space, lambda x: triplet, continuity_declared, kappa, name, ops)


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------


def _atomic_jump_integral(jumps, xi, kappa):
    """integral (e^{i y'xi} - 1 - i y'xi kappa(y)) N(dy), exactly."""
    if jumps.kind == "none" or len(jumps.weights) == 0:
        return 0.0 + 0.0j
    th = jumps.atoms @ xi
    kap = kappa.of_norm(np.linalg.norm(jumps.atoms, axis=1))
    vals = np.cos(th) - 1.0 + 1j * (np.sin(th) - th * kap)
    return complex(jumps.weights @ vals)


def _density_jump_integral(jumps, xi, kappa, quad_tol):
    xi0 = float(np.atleast_1d(xi)[0])
    pdf = jumps.pdf
    R = kappa.R

    def f_re(y):
        return (np.cos(y * xi0) - 1.0) * pdf(y)

    def f_im(y):
        return (np.sin(y * xi0) - y * xi0 * kappa.of_norm(abs(y))) * pdf(y)

    lo, hi = jumps.support
    breaks = [-2 * R, -R, R, 2 * R]
    re, re_err = _quad_piecewise(f_re, lo, hi, breaks, quad_tol)
    im, im_err = _quad_piecewise(f_im, lo, hi, breaks, quad_tol)
    resid = re_err + im_err
    if resid > max(1e3 * quad_tol, 1e-8):
        raise QuadratureError(
            f"jump integral quadrature residual {resid:.3e} exceeds tolerance",
            residual=resid,
        )
    return jumps.rate * (re + 1j * im)


def _quad_piecewise(f, lo, hi, breaks, tol):
    """Adaptive quadrature on (lo, hi) split at interior breakpoints."""
    cuts = [lo] + sorted(b for b in breaks if lo < b < hi) + [hi]
    total, err = 0.0, 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        v, e = quad(f, a, b, epsabs=tol, epsrel=0.0, limit=200)
        total += v
        err += e
    return total, err


def evaluate_triplet_symbol(triplet, xi, kappa, quad_tol=1e-10):
    """q value of a fixed triplet at frequency xi."""
    xi = as_point(xi, triplet.dim)
    val = triplet.a - 1j * float(triplet.ell @ xi) + 0.5 * float(xi @ triplet.Q @ xi)
    jumps = triplet.jumps
    if jumps.kind == "atomic":
        val -= _atomic_jump_integral(jumps, xi, kappa)
    elif jumps.kind == "density":
        if triplet.dim != 1:
            raise UnsupportedModelError("density jump measures are one-dimensional")
        val -= _density_jump_integral(jumps, xi, kappa, quad_tol)
    return complex(val)


def evaluate_symbol(field, x, xi, kappa=None, quad_tol=1e-10):
    """Evaluate q(x, xi) for a symbol field.

    Atomic jump parts are summed exactly; density parts use adaptive
    quadrature with absolute tolerance ``quad_tol``.  Raises DomainError
    for x outside U and QuadratureError when the integrator cannot reach
    the tolerance.
    """
    kappa = kappa or field.kappa
    triplet = field.triplet(x)
    return evaluate_triplet_symbol(triplet, xi, kappa, quad_tol=quad_tol)


def symbol_on_grid(field, x, xi_array, kappa=None):
    """Vectorized q(x, .) on a 1-d frequency grid (atomic/none jumps only)."""
    if field.dim != 1:
        raise UnsupportedModelError("symbol_on_grid is one-dimensional")
    kappa = kappa or field.kappa
    triplet = field.triplet(x)
    xi = np.asarray(xi_array, dtype=float)
    ell = float(triplet.ell[0])
    Q = float(triplet.Q[0, 0])
    out = triplet.a - 1j * ell * xi + 0.5 * Q * xi * xi
    jumps = triplet.jumps
    if jumps.kind == "atomic":
        ys = jumps.atoms[:, 0]
        kap = kappa.of_norm(np.abs(ys))
        th = np.outer(ys, xi)
        vals = np.cos(th) - 1.0 + 1j * (np.sin(th) - th * kap[:, None])
        out = out - jumps.weights @ vals
    elif jumps.kind == "density":
        raise UnsupportedModelError("grid evaluation needs atomic or no jumps")
    return out


# ---------------------------------------------------------------------------
# estimate functions and structure checks
# ---------------------------------------------------------------------------


def b_epsilon_of_norm(r, eps):
    """b_eps on norms: r^2 for r <= eps, 1 otherwise."""
    if eps <= 0:
        raise ArgumentError("eps must be positive")
    r = np.asarray(r, dtype=float)
    return np.where(r <= eps, r * r, 1.0)


def b_epsilon(y, eps):
    """b_eps(y) = |y|^2 1_{|y| <= eps} + 1_{|y| > eps}."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    return float(b_epsilon_of_norm(np.linalg.norm(y), eps))


def integrand_bound_samples(xi, y, kappa):
    """Vectorized check of the truncation-integrand estimate.

    For rows xi_i, y_i returns (lhs, rhs, holds) with

        lhs = |e^{i y'xi} - 1 - i y'xi kappa(y)|
        rhs = 2 (R + 1)(1 + |xi|^2) b_{R and 1}(y).
    """
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    th = np.einsum("ij,ij->i", y, xi)
    kap = kappa.of_norm(np.linalg.norm(y, axis=1))
    lhs = np.abs(np.cos(th) - 1.0 + 1j * (np.sin(th) - th * kap))
    R = kappa.R
    beps = b_epsilon_of_norm(np.linalg.norm(y, axis=1), min(R, 1.0))
    rhs = 2.0 * (R + 1.0) * (1.0 + np.sum(xi * xi, axis=1)) * beps
    return lhs, rhs, lhs <= rhs


def integrand_bound_check(xi, y, kappa):
    """Scalar form of :func:`integrand_bound_samples`."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    lhs, rhs, holds = integrand_bound_samples(xi[None, :], y[None, :], kappa)
    return float(lhs[0]), float(rhs[0]), bool(holds[0])


def growth_constant(field, K_points, xi_grid, kappa=None):
    """max over samples of |q(x, xi)| / (1 + |xi|^2) on a compact grid."""
    K_points = list(K_points)
    xi_grid = list(xi_grid)
    if not K_points or not xi_grid:
        raise ArgumentError("growth_constant needs nonempty grids")
    best = 0.0
    for x in K_points:
        for xi in xi_grid:
            xi_v = np.atleast_1d(np.asarray(xi, dtype=float))
            q = evaluate_symbol(field, x, xi_v, kappa=kappa)
            best = max(best, abs(q) / (1.0 + float(xi_v @ xi_v)))
    return best


def growth_bound_check(field, K_points, xi_grid, kappa=None, n_eta=16, rng=None):
    """Check |q(x, xi)| <= 2 (1 + |xi|^2) sup_{|eta| <= 1} |q(x, eta)| on samples.

    The unit-ball sample always contains the rescaled points xi / k0 with
    k0 the integer in [|xi|, |xi| + 1), which is how the bound arises from
    square-root subadditivity; random unit-ball points are appended.
    Returns (max_ratio, holds, worst) where worst identifies the tightest
    sample.
    """
    rng = rng or np.random.default_rng(0)
    K_points = list(K_points)
    xi_grid = [np.atleast_1d(np.asarray(xi, dtype=float)) for xi in xi_grid]
    if not K_points or not xi_grid:
        raise ArgumentError("growth_bound_check needs nonempty grids")
    dim = xi_grid[0].shape[0]
    etas = [xi for xi in xi_grid if np.linalg.norm(xi) <= 1.0]
    for xi in xi_grid:
        nrm = np.linalg.norm(xi)
        if nrm > 1.0:
            # the integer k0 in [|xi|, |xi|+1), so that |xi/k0| <= 1
            k0 = int(math.ceil(nrm))
            etas.append(xi / k0)
    for _ in range(n_eta):
        v = rng.standard_normal(dim)
        v /= max(np.linalg.norm(v), 1e-12)
        etas.append(v * rng.uniform(0.2, 1.0))
    max_ratio, holds, worst = 0.0, True, None
    for x in K_points:
        sup_eta = max(abs(evaluate_symbol(field, x, eta, kappa=kappa)) for eta in etas)
        for xi in xi_grid:
            lhs = abs(evaluate_symbol(field, x, xi, kappa=kappa))
            rhs = 2.0 * (1.0 + float(xi @ xi)) * sup_eta
            ratio = lhs / rhs if rhs > 0 else (0.0 if lhs == 0 else np.inf)
            if ratio > max_ratio:
                max_ratio, worst = ratio, (np.asarray(x), xi)
            if lhs > rhs * (1 + 1e-12):
                holds = False
    return max_ratio, holds, worst


class NegativeDefiniteness:
    """Result of the H-matrix positivity test; truthy iff it passed."""

    def __init__(self, ok, min_eigenvalue, hermitian_ok, offending_xi=None):
        self.ok = bool(ok)
        self.min_eigenvalue = float(min_eigenvalue)
        self.hermitian_ok = bool(hermitian_ok)
        self.offending_xi = offending_xi

    def __bool__(self):
        return self.ok

    def __repr__(self):
        return (
            f"NegativeDefiniteness(ok={self.ok}, min_eig={self.min_eigenvalue:.3e}, "
            f"hermitian_ok={self.hermitian_ok})"
        )


def negative_definiteness_check(symbol, x, xi_samples, eig_tol=-1e-8, herm_tol=1e-9,
                                kappa=None):
    """Schoenberg-type test of negative definiteness at a fixed state.

    Builds H_{jk} = q(x, xi_j) + conj(q(x, xi_k)) - q(x, xi_j - xi_k) and
    requires its smallest eigenvalue to exceed ``eig_tol``.  Hermitian
    symmetry q(x, -xi) = conj q(x, xi) is asserted on the sample first;
    a violation is reported with the offending frequency.

    ``symbol`` is a SymbolField or a plain callable (x, xi) -> complex.
    """
    if isinstance(symbol, SymbolField):
        f = lambda xx, xi: evaluate_symbol(symbol, xx, xi, kappa=kappa)
    else:
        f = symbol
    xis = [np.atleast_1d(np.asarray(xi, dtype=float)) for xi in xi_samples]
    m = len(xis)
    if m < 2:
        raise ArgumentError("need at least two frequency samples")
    scale = 1.0
    for xi in xis:
        a = f(x, xi)
        b = f(x, -xi)
        scale = max(scale, abs(a))
        if abs(b - np.conj(a)) > herm_tol * max(1.0, abs(a)):
            return NegativeDefiniteness(False, -np.inf, False, offending_xi=xi)
    H = np.empty((m, m), dtype=complex)
    for j in range(m):
        for k in range(m):
            H[j, k] = f(x, xis[j]) + np.conj(f(x, xis[k])) - f(x, xis[j] - xis[k])
    H = 0.5 * (H + H.conj().T)
    min_eig = float(np.linalg.eigvalsh(H).min())
    ok = min_eig >= eig_tol * max(1.0, scale)
    return NegativeDefiniteness(ok, min_eig, True)
