"""Integro-differential and Fourier-multiplier forms of the generator.

The operator applied to a C^2 test function u at a point x is

    I_q u(x) = l(x)' grad u(x) + (1/2) sum_jk Q^{jk}(x) d_j d_k u(x)
             + integral( u(x+y) - u(x) - y' grad u(x) kappa(y) ) N(x, dy)

with u extended by zero outside the state space.  On test functions this
coincides with the pseudo-differential form

    A u(x) = - integral e^{i x xi} q(x, xi) uhat(xi) dxi,
    uhat(xi) = (2 pi)^-d integral e^{-i y xi} u(y) dy,

which is implemented in one dimension through an FFT of u and a
frequency-domain multiplication by -q(x, .) per evaluation point (the
symbol depends on x, so there is one inverse-quadrature sum per point).
``operator_identity_check`` measures the gap between the two routes.
"""

from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np
from scipy.integrate import quad

from .errors import ArgumentError, DomainError, NumericError, UnsupportedModelError
from .spaces import as_point
from .symbols import CutoffKappa, b_epsilon_of_norm, symbol_on_grid

__all__ = [
    "TestFunction",
    "GridFunction1D",
    "build_test_function",
    "TEST_FUNCTION_NAMES",
    "apply_Iq",
    "apply_pseudo_fourier",
    "operator_identity_check",
    "norm_estimate_check",
    "integrand_estimate_two_samples",
]


# ---------------------------------------------------------------------------
# test functions with analytic derivatives
# ---------------------------------------------------------------------------


@dataclass
class TestFunction:
    """Twice differentiable test function with analytic derivatives.

    ``u`` maps (..., d) arrays to (...) values; ``grad`` and ``hess``
    return (..., d) and (..., d, d).  ``support`` is None for
    bounded-only functions, otherwise a (lo, hi) box outside which u
    vanishes.  ``cemetery_value`` is the formal value at the cemetery
    state used by the killed-semimartingale identities; the canonical
    zero extension is the default.
    """

    name: str
    dim: int
    u: Callable
    grad: Callable
    hess: Callable
    support: Optional[Tuple[np.ndarray, np.ndarray]] = None
    smoothness: str = "C2_compact"
    cemetery_value: float = 0.0

    def __call__(self, X):
        return self.u(np.asarray(X, dtype=float))

    @classmethod
    def from_1d(cls, name, u, du, d2u, support=None, smoothness="C2_compact"):
        """Wrap scalar callables into the (..., d=1) convention."""
        if support is not None:
            support = (np.array([float(support[0])]), np.array([float(support[1])]))

        def u_nd(X):
            X = np.asarray(X, dtype=float)
            return u(X[..., 0])

        def grad_nd(X):
            X = np.asarray(X, dtype=float)
            return du(X[..., 0])[..., None]

        def hess_nd(X):
            X = np.asarray(X, dtype=float)
            return d2u(X[..., 0])[..., None, None]

        return cls(name, 1, u_nd, grad_nd, hess_nd, support, smoothness)

    # -- point evaluation -------------------------------------------------

    def value1(self, x):
        return float(self.u(as_point(x, self.dim)[None, :])[0])

    def grad1(self, x):
        return np.asarray(self.grad(as_point(x, self.dim)[None, :])[0], dtype=float)

    def hess1(self, x):
        return np.asarray(self.hess(as_point(x, self.dim)[None, :])[0], dtype=float)

    def is_compact(self):
        return self.smoothness in ("C2_compact", "Cinf_compact") and self.support is not None

    # -- norms (one-dimensional scan) --------------------------------------

    def _scan_grid(self, lo=None, hi=None, n=8193):
        if self.dim != 1:
            raise UnsupportedModelError("norm scans are implemented for d = 1")
        if self.support is not None:
            slo, shi = float(self.support[0][0]), float(self.support[1][0])
        else:
            slo, shi = -12.0, 12.0
        lo = slo if lo is None else max(lo, slo) if self.support is not None else lo
        hi = shi if hi is None else min(hi, shi) if self.support is not None else hi
        if not lo < hi:
            return None
        return np.linspace(lo, hi, n)[:, None]

    def sup_norms(self, lo=None, hi=None, n=8193):
        """Grid-scanned sup norms of u, u', u'' over [lo, hi] (d = 1)."""
        g = self._scan_grid(lo, hi, n)
        if g is None:
            return {"u": 0.0, "grad": 0.0, "hess": 0.0}
        return {
            "u": float(np.abs(self.u(g)).max()),
            "grad": float(np.abs(self.grad(g)[:, 0]).max()),
            "hess": float(np.abs(self.hess(g)[:, 0, 0]).max()),
        }

    def c2_norm(self):
        """||u|| + ||u'|| + ||u''|| over the support (d = 1)."""
        ns = self.sup_norms()
        return ns["u"] + ns["grad"] + ns["hess"]


def _u_tilde(u, X, space=None):
    """Zero-extended evaluation: 0 outside the state space and at NaN states."""
    X = np.asarray(X, dtype=float)
    vals = np.zeros(X.shape[:-1])
    finite = np.all(np.isfinite(X), axis=-1)
    if space is not None:
        finite = finite & space.contains_many(np.where(finite[..., None], X, 0.0))
    if np.any(finite):
        safe = np.where(finite[..., None], X, 0.0)
        vals = np.where(finite, u.u(safe), 0.0)
    return vals


# ---------------------------------------------------------------------------
# catalog
# ---------------------------------------------------------------------------


def _gaussian_bump(center, width, height):
    # exp(-z^2) truncated at |z| = 9 (tail below 1e-35, invisible in doubles)
    zmax = 9.0

    def u(y):
        z = (y - center) / width
        return np.where(np.abs(z) < zmax, height * np.exp(-(z * z)), 0.0)

    def du(y):
        z = (y - center) / width
        return np.where(np.abs(z) < zmax, height * (-2.0 * z / width) * np.exp(-(z * z)), 0.0)

    def d2u(y):
        z = (y - center) / width
        return np.where(
            np.abs(z) < zmax,
            height * ((4.0 * z * z - 2.0) / width**2) * np.exp(-(z * z)),
            0.0,
        )

    support = (center - zmax * width, center + zmax * width)
    return TestFunction.from_1d("gaussian-bump", u, du, d2u, support, "Cinf_compact")


def _cosine_bump(center, width, height):
    # cos^4 bump: C^3 with compact support [center - width, center + width]
    def s(y):
        return 0.5 * np.pi * (y - center) / width

    def u(y):
        inside = np.abs(y - center) < width
        c = np.cos(np.where(inside, s(y), 0.0))
        return np.where(inside, height * c**4, 0.0)

    def du(y):
        inside = np.abs(y - center) < width
        t = np.where(inside, s(y), 0.0)
        return np.where(
            inside, -height * 2.0 * np.pi / width * np.cos(t) ** 3 * np.sin(t), 0.0
        )

    def d2u(y):
        inside = np.abs(y - center) < width
        t = np.where(inside, s(y), 0.0)
        c, sn = np.cos(t), np.sin(t)
        return np.where(
            inside,
            height * (np.pi / width) ** 2 * (3.0 * c**2 * sn**2 - c**4),
            0.0,
        )

    return TestFunction.from_1d(
        "cosine-bump", u, du, d2u, (center - width, center + width), "C2_compact"
    )


def _cubic_spline_bump(center, width, height):
    # cubic B-spline: C^2, support [center - 2 width, center + 2 width]
    def pieces(y):
        z = (y - center) / width
        az = np.abs(z)
        return z, az

    def u(y):
        z, az = pieces(y)
        inner = 2.0 / 3.0 - z * z + 0.5 * az**3
        outer = (2.0 - az) ** 3 / 6.0
        return height * np.where(az <= 1.0, inner, np.where(az < 2.0, outer, 0.0))

    def du(y):
        z, az = pieces(y)
        inner = -2.0 * z + 1.5 * z * az
        outer = -np.sign(z) * 0.5 * (2.0 - az) ** 2
        return height / width * np.where(az <= 1.0, inner, np.where(az < 2.0, outer, 0.0))

    def d2u(y):
        z, az = pieces(y)
        inner = -2.0 + 3.0 * az
        outer = 2.0 - az
        return height / width**2 * np.where(az <= 1.0, inner, np.where(az < 2.0, outer, 0.0))

    return TestFunction.from_1d(
        "cubic-spline-bump", u, du, d2u, (center - 2 * width, center + 2 * width), "C2_compact"
    )


_CATALOG = {
    "gaussian-bump": _gaussian_bump,
    "cosine-bump": _cosine_bump,
    "cubic-spline-bump": _cubic_spline_bump,
}

TEST_FUNCTION_NAMES = tuple(_CATALOG)


def build_test_function(name, center=0.0, width=1.0, height=1.0):
    """Instantiate a catalog test function with parameter overrides."""
    if name not in _CATALOG:
        raise ArgumentError(f"unknown test function {name!r}; have {TEST_FUNCTION_NAMES}")
    if width <= 0:
        raise ArgumentError("width must be positive")
    return _CATALOG[name](float(center), float(width), float(height))


# ---------------------------------------------------------------------------
# integro-differential application
# ---------------------------------------------------------------------------


def apply_Iq(u, x, triplet, kappa, space=None, quad_tol=1e-9):
    """Apply the integro-differential operator of a triplet at a point.

    Requires a = 0 (no killing term in the operator).  ``space`` enables
    the zero extension of u outside the open state space when x + y can
    leave it.  Atomic jump parts are exact; density parts are integrated
    adaptively to absolute tolerance ``quad_tol``.
    """
    if space is not None:
        x = space.require(x)
    else:
        x = as_point(x, triplet.dim)
    if triplet.a != 0.0:
        raise ArgumentError("I_q is defined for triplets with zero killing rate")
    g = u.grad1(x)
    H = u.hess1(x)
    val = float(triplet.ell @ g) + 0.5 * float(np.sum(triplet.Q * H))
    jm = triplet.jumps
    if jm.kind == "atomic":
        Y = jm.atoms
        shifted = _u_tilde(u, x[None, :] + Y, space)
        kap = kappa.of_norm(np.linalg.norm(Y, axis=1))
        base = u.value1(x)
        val += float(jm.weights @ (shifted - base - (Y @ g) * kap))
    elif jm.kind == "density":
        if triplet.dim != 1:
            raise UnsupportedModelError("density jumps are one-dimensional")
        base = u.value1(x)
        g0 = float(g[0])
        x0 = float(x[0])
        R = kappa.R

        def integrand(y):
            shifted = _u_tilde(u, np.array([[x0 + y]]), space)[0]
            return (shifted - base - y * g0 * kappa.of_norm(abs(y))) * jm.pdf(y)

        pts = [-2 * R, -R, R, 2 * R]
        if u.support is not None:
            pts += [float(u.support[0][0] - x0), float(u.support[1][0] - x0)]
        lo, hi = jm.support
        cuts = [lo] + sorted(p for p in pts if lo < p < hi) + [hi]
        total = 0.0
        for a_, b_ in zip(cuts[:-1], cuts[1:]):
            v, _ = quad(integrand, a_, b_, epsabs=quad_tol, epsrel=0.0, limit=200)
            total += v
        val += jm.rate * total
    return val


def iq_on_states(field, u, X, kappa=None, space=None, split=False):
    """Vectorized I_q u over states X of shape (n, d).

    Returns the continuous part (drift + diffusion) and the jump part
    separately when ``split`` is true; their sum otherwise.  Requires the
    field to provide vectorized accessors and atomic (or no) jumps.
    """
    kappa = kappa or field.kappa
    ops = field.vector_ops
    if ops is None:
        raise UnsupportedModelError(f"field {field.name!r} has no vectorized accessors")
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    g = u.grad(X)
    H = u.hess(X)
    cont = np.einsum("nd,nd->n", ops.ell(X), g) + 0.5 * np.einsum("ndk,ndk->n", ops.Q(X), H)
    jump = np.zeros(n)
    base = u.u(X)
    if ops.const_jumps is not None and not ops.const_jumps.is_none:
        jm = ops.const_jumps
        if jm.kind != "atomic":
            raise UnsupportedModelError("pathwise I_q needs atomic (or no) jumps")
        for i in range(len(jm.weights)):
            y = jm.atoms[i]
            shifted = _u_tilde(u, X + y, space)
            jump += jm.weights[i] * (shifted - base - (g @ y) * kappa.of_norm(np.linalg.norm(y)))
    elif ops.jump_atoms is not None:
        atoms, weights = ops.jump_atoms(X)
        for i in range(atoms.shape[1]):
            y = atoms[:, i, :]
            shifted = _u_tilde(u, X + y, space)
            kap = kappa.of_norm(np.linalg.norm(y, axis=1))
            jump += weights[:, i] * (shifted - base - np.einsum("nd,nd->n", g, y) * kap)
    if split:
        return cont, jump
    return cont + jump


# ---------------------------------------------------------------------------
# Fourier side (d = 1)
# ---------------------------------------------------------------------------


@dataclass
class GridFunction1D:
    """Samples of a function on a uniform grid (endpoint excluded)."""

    grid: np.ndarray
    values: np.ndarray
    spacing: float

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        dg = np.diff(g)
        if len(g) < 2 or np.any(dg <= 0):
            raise ArgumentError("grid must be strictly increasing")
        if np.max(np.abs(dg - self.spacing)) > 1e-12 * max(1.0, abs(self.spacing)):
            raise ArgumentError("grid must be uniform to 1e-12 relative")

    @classmethod
    def from_callable(cls, f, lo, hi, n):
        h = (hi - lo) / n
        grid = lo + h * np.arange(n)
        vals = f(grid[:, None]) if isinstance(f, TestFunction) else f(grid)
        return cls(grid, np.asarray(vals, dtype=float), h)


def apply_pseudo_fourier(u_grid, field, x_eval, kappa=None, imag_tol=1e-6):
    """Apply the pseudo-differential operator by FFT (d = 1).

    The symbol is evaluated on the discrete frequency grid and multiplied
    pointwise per evaluation point, then the inverse transform is summed
    as a quadrature.  Raises NumericError when the imaginary residue
    exceeds ``imag_tol * ||u||`` (coarse grid or a non-hermitian symbol).
    """
    n = len(u_grid.values)
    if n & (n - 1):
        raise ArgumentError("grid length must be a power of two")
    h = u_grid.spacing
    y0 = float(u_grid.grid[0])
    xi = 2.0 * np.pi * np.fft.fftfreq(n, d=h)
    uhat = (h / (2.0 * np.pi)) * np.exp(-1j * y0 * xi) * np.fft.fft(u_grid.values)
    uhat[n // 2] = 0.0  # unpaired Nyquist bin breaks hermitian symmetry
    dxi = 2.0 * np.pi / (n * h)
    x_eval = np.atleast_1d(np.asarray(x_eval, dtype=float))
    out = np.empty(len(x_eval), dtype=complex)
    for i, x in enumerate(x_eval):
        q = symbol_on_grid(field, np.array([x]), xi, kappa=kappa)
        out[i] = -dxi * np.sum(np.exp(1j * x * xi) * q * uhat)
    scale = float(np.max(np.abs(u_grid.values)))
    resid = float(np.max(np.abs(out.imag)))
    if resid > imag_tol * max(scale, 1e-300):
        raise NumericError(
            f"imaginary residue {resid:.3e} exceeds {imag_tol:g} * ||u||: "
            "grid too coarse or symbol violates hermitian symmetry"
        )
    return out.real


def operator_identity_check(u, field, sample_x, kappa=None, grid_n=2**19,
                            halfwidth=None, quad_tol=1e-9):
    """Max gap between the integro-differential and Fourier routes.

    ``u`` must be compactly supported (d = 1).  The Fourier grid is sized
    so that the window contains the support, all evaluation points and
    every atom shift with a wide margin.
    """
    if field.dim != 1 or u.dim != 1:
        raise UnsupportedModelError("operator_identity_check is one-dimensional")
    if not u.is_compact():
        raise ArgumentError("operator identity requires a compactly supported u")
    kappa = kappa or field.kappa
    sample_x = np.atleast_1d(np.asarray(sample_x, dtype=float))
    if halfwidth is None:
        s = max(abs(float(u.support[0][0])), abs(float(u.support[1][0])))
        halfwidth = max(8.0, s + np.abs(sample_x).max() + 4.0 * kappa.R + 4.0)
    ugrid = GridFunction1D.from_callable(u, -halfwidth, halfwidth, grid_n)
    fourier = apply_pseudo_fourier(ugrid, field, sample_x, kappa=kappa)
    gaps = []
    for i, x in enumerate(sample_x):
        triplet = field.triplet(np.array([x]))
        iq = apply_Iq(u, np.array([x]), triplet, kappa, space=field.space, quad_tol=quad_tol)
        gaps.append(abs(iq - fourier[i]))
    return float(np.max(gaps))


# ---------------------------------------------------------------------------
# norm estimates
# ---------------------------------------------------------------------------


def norm_estimate_check(u, field, K_points, eps, kappa=None):
    """Check the compact-set bound on ||I_q u||_K (d = 1).

    lhs is the max of |I_q u| over the sampled K; rhs assembles the jump
    bound 2R * max_K(N b_eps) * (||u|| + ||u'||_K + ||u''||_{K+eps B})
    plus explicit drift and diffusion bounds.  Requires eps in (0, 1) and
    K + eps B inside the state space.
    """
    if field.dim != 1:
        raise UnsupportedModelError("norm_estimate_check is one-dimensional")
    if not 0 < eps < 1:
        raise ArgumentError("eps must lie in (0, 1)")
    kappa = kappa or field.kappa
    K_points = np.atleast_1d(np.asarray(K_points, dtype=float))
    klo, khi = float(K_points.min()), float(K_points.max())
    for edge in (klo - eps, khi + eps):
        if not field.space.contains(np.array([edge])):
            raise ArgumentError("K + eps B must stay inside the state space")

    lhs = 0.0
    max_ell = 0.0
    max_Q = 0.0
    max_Nb = 0.0
    for x in K_points:
        triplet = field.triplet(np.array([x]))
        lhs = max(lhs, abs(apply_Iq(u, np.array([x]), triplet, kappa, space=field.space)))
        max_ell = max(max_ell, float(np.linalg.norm(triplet.ell)))
        max_Q = max(max_Q, float(np.abs(triplet.Q).sum()))
        max_Nb = max(max_Nb, triplet.jumps.b_epsilon_integral(eps))

    norms_K = u.sup_norms(klo, khi)
    norms_Keps = u.sup_norms(klo - eps, khi + eps)
    norm_u = u.sup_norms()["u"]
    jump_rhs = 2.0 * kappa.R * max_Nb * (norm_u + norms_K["grad"] + norms_Keps["hess"])
    cont_rhs = max_ell * norms_K["grad"] + 0.5 * max_Q * norms_K["hess"]
    rhs = jump_rhs + cont_rhs
    return lhs, rhs, bool(lhs <= rhs * (1 + 1e-12) + 1e-300)


def integrand_estimate_two_samples(u, x, y, kappa, eps):
    """Vectorized check of the global integrand estimate (d = 1).

    lhs = |u(x+y) - u(x) - y u'(x) kappa(y)|,
    rhs = 2R b_eps(y) sum_{|alpha| <= 2} ||d^alpha u||.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    X = x[:, None]
    shifted = u.u(X + y[:, None])
    base = u.u(X)
    g = u.grad(X)[:, 0]
    kap = kappa.of_norm(np.abs(y))
    lhs = np.abs(shifted - base - y * g * kap)
    c2 = u.c2_norm()
    rhs = 2.0 * kappa.R * b_epsilon_of_norm(np.abs(y), eps) * c2
    return lhs, rhs, lhs <= rhs * (1 + 1e-12)
