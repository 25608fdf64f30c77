"""Concrete simulatable processes and their analytic symbols.

Each model bundles a state space, a symbol field, a transition sampler
and a killing law, plus a closed-form symbol used as the oracle in the
estimator comparisons:

* ``make_levy``        -- constant triplet, exact increments, symbol psi(xi).
* ``make_killed_levy`` -- Levy plus an independent Exp(a) killing clock,
                          symbol a + psi(xi); the clock is not predictable.
* ``make_superdrift``  -- deterministic blow-up X_t = 1/(1/x - t) on (0, inf),
                          killed at 1/x (predictable), symbol -i x^2 xi.
* ``make_sign_drift``  -- X_t = x + t sgn(x) on R (sgn(0) = 0, absorbing),
                          symbol -i sgn(x) xi; finely continuous, not Feller.
* ``make_levy_sde``    -- dX = Phi(X-) dZ driven by a Levy process,
                          Euler stepping, symbol psi(Phi(x)' xi).
"""

import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional

import numpy as np

from .errors import ArgumentError, DomainError, UnsupportedModelError
from .spaces import StateSpace, as_point
from .symbols import (
    CutoffKappa,
    FieldVectorOps,
    JumpMeasure,
    LevyTriplet,
    SymbolField,
    evaluate_triplet_symbol,
)

__all__ = [
    "ProcessModel",
    "PhiFunc",
    "phi_identity",
    "phi_linear",
    "phi_affine_sin",
    "make_levy",
    "make_killed_levy",
    "make_superdrift",
    "make_sign_drift",
    "make_levy_sde",
    "builtin_models",
    "MODEL_NAMES",
]


# ---------------------------------------------------------------------------
# samplers
# ---------------------------------------------------------------------------


@dataclass
class LevySampler:
    """Exact increments of a constant triplet."""

    driver: LevyTriplet


@dataclass
class SdeSampler:
    """Euler step X <- X + Phi(X) dZ with a Levy driver."""

    phi: "PhiFunc"
    driver: LevyTriplet


@dataclass
class EulerFieldSampler:
    """Generic Euler step from the field's state-dependent triplet (d = 1)."""


@dataclass
class DeterministicSampler:
    """Closed-form flow; stepping is bypassed entirely."""

    flow: Callable  # (x0 (d,), times (m,)) -> (m, d) states, NaN once dead
    zeta: Callable  # x0 -> killing time (inf if none)


@dataclass
class PhiFunc:
    """Coefficient map Phi: R^d -> R^(d x n) for Levy-driven SDEs.

    ``form`` is a coded description for the compiled kernel, one of
    ("identity",), ("linear", c), ("affine-sin", a, b, c) or None for a
    generic callable (the pure backend evaluates it vectorized).
    """

    point: Callable  # x (d,) -> (d, n)
    many: Callable  # X (k, d) -> (k, d, n)
    dim: int
    driver_dim: int
    form: Optional[tuple] = None
    bounded: Optional[bool] = None
    name: str = "phi"

    def __call__(self, x):
        return self.point(np.asarray(x, dtype=float))


def _phi_from_scalar(f, form=None, bounded=None, name="phi"):
    def point(x):
        return np.array([[float(f(float(x[0])))]])

    def many(X):
        return f(np.asarray(X, dtype=float)[:, 0])[:, None, None]

    return PhiFunc(point, many, 1, 1, form=form, bounded=bounded, name=name)


def phi_identity():
    return _phi_from_scalar(lambda x: x * 0.0 + 1.0, form=("identity",), bounded=True,
                            name="identity")


def phi_linear(c=1.0):
    c = float(c)
    return _phi_from_scalar(lambda x: c * x, form=("linear", c), bounded=False,
                            name=f"linear({c:g})")


def phi_affine_sin(a=1.0, b=1.0, c=2.0):
    a, b, c = float(a), float(b), float(c)
    return _phi_from_scalar(lambda x: a * np.sin(b * x) + c, form=("affine-sin", a, b, c),
                            bounded=True, name=f"{a:g}*sin({b:g} x)+{c:g}")


# ---------------------------------------------------------------------------
# the model record
# ---------------------------------------------------------------------------


@dataclass
class ProcessModel:
    name: str
    space: StateSpace
    field: SymbolField
    sampler: object
    killing: str = "none"  # none | exit | exp-clock
    kill_rate: float = 0.0
    deterministic: bool = False
    feller: Optional[bool] = None
    analytic: Optional[Callable] = None  # (x (d,), xi (d,)) -> complex
    notes: str = ""

    @property
    def dim(self):
        return self.space.dim

    def symbol(self, x, xi, kappa=None):
        """Closed-form symbol p(x, xi) (the comparison oracle)."""
        x = self.space.require(x)
        xi = as_point(xi, self.dim)
        if self.analytic is not None:
            return complex(self.analytic(x, xi))
        return self.field.symbol(x, xi, kappa=kappa)

    def has_predictable_killing(self):
        return self.killing in ("none", "exit")


def _check_simulable_jumps(jumps):
    if jumps.kind == "density" and jumps.ppf is None:
        raise UnsupportedModelError(
            "density jump laws need a quantile function (ppf) for sampling"
        )


# ---------------------------------------------------------------------------
# constructors
# ---------------------------------------------------------------------------


def make_levy(triplet, name="levy", kappa=None):
    """Levy process with exact increments; symbol psi(xi) = q(x, xi) for all x."""
    if triplet.a != 0.0:
        raise ArgumentError("make_levy needs a = 0; use make_killed_levy")
    if triplet.jumps.kind not in ("none", "atomic", "density"):
        raise UnsupportedModelError("unsupported jump measure")
    _check_simulable_jumps(triplet.jumps)
    kappa = kappa or CutoffKappa()
    space = StateSpace.rd(triplet.dim)
    field = SymbolField.constant(triplet, space=space, name=name, kappa=kappa)

    def analytic(x, xi, _t=triplet, _k=kappa):
        return evaluate_triplet_symbol(_t, xi, _k)

    return ProcessModel(
        name=name,
        space=space,
        field=field,
        sampler=LevySampler(triplet),
        killing="none",
        deterministic=False,
        feller=True,
        analytic=analytic,
    )


def make_killed_levy(triplet, name="killed-levy", kappa=None):
    """Levy process killed by an independent exponential clock of rate a > 0.

    The killing time is not predictable, so the semimartingale machinery
    does not apply, but the probabilistic symbol formula still does and
    returns a + psi(xi).
    """
    if not triplet.a > 0:
        raise ArgumentError("make_killed_levy needs a positive killing rate a")
    _check_simulable_jumps(triplet.jumps)
    kappa = kappa or CutoffKappa()
    space = StateSpace.rd(triplet.dim)
    field = SymbolField.constant(triplet, space=space, name=name, kappa=kappa)
    motion = LevyTriplet.make(a=0.0, ell=triplet.ell, Q=triplet.Q, jumps=triplet.jumps)

    def analytic(x, xi, _t=triplet, _k=kappa):
        return evaluate_triplet_symbol(_t, xi, _k)

    return ProcessModel(
        name=name,
        space=space,
        field=field,
        sampler=LevySampler(motion),
        killing="exp-clock",
        kill_rate=float(triplet.a),
        deterministic=False,
        feller=True,
        analytic=analytic,
    )


def make_superdrift(name="superdrift", kappa=None):
    """Deterministic blow-up on U = (0, inf): X_t = 1/(1/x - t), zeta = 1/x."""
    kappa = kappa or CutoffKappa()
    space = StateSpace.halfline()

    def triplet_at(x):
        return LevyTriplet.make(ell=[float(x[0]) ** 2])

    ops = FieldVectorOps(
        ell=lambda X: X * X,
        Q=lambda X: np.zeros((len(X), 1, 1)),
        const_jumps=JumpMeasure.none(),
    )
    field = SymbolField(1, space, triplet_at, True, kappa, name, ops)

    def flow(x0, times):
        x = float(x0[0])
        z = 1.0 / x
        vals = np.where(times < z, 1.0 / np.maximum(z - times, 1e-300), np.nan)
        return vals[:, None]

    def zeta(x0):
        return 1.0 / float(x0[0])

    return ProcessModel(
        name=name,
        space=space,
        field=field,
        sampler=DeterministicSampler(flow, zeta),
        killing="exit",
        deterministic=True,
        feller=True,
        analytic=lambda x, xi: complex(-1j * x[0] ** 2 * xi[0]),
    )


def make_sign_drift(name="sign-drift", kappa=None):
    """Unit drift away from 0 on R; x = 0 is absorbing (sgn(0) = 0).

    Not Feller (the semigroup is discontinuous at 0) but an Ito process;
    x -> q(x, xi) is finely continuous, which is what the declared flag
    records.
    """
    kappa = kappa or CutoffKappa()
    space = StateSpace.rd(1)

    def triplet_at(x):
        return LevyTriplet.make(ell=[math.copysign(1.0, x[0]) if x[0] != 0 else 0.0])

    ops = FieldVectorOps(
        ell=lambda X: np.sign(X),
        Q=lambda X: np.zeros((len(X), 1, 1)),
        const_jumps=JumpMeasure.none(),
    )
    field = SymbolField(1, space, triplet_at, True, kappa, name, ops)

    def flow(x0, times):
        x = float(x0[0])
        return (x + times * np.sign(x))[:, None]

    return ProcessModel(
        name=name,
        space=space,
        field=field,
        sampler=DeterministicSampler(flow, lambda x0: np.inf),
        killing="none",
        deterministic=True,
        feller=False,
        analytic=lambda x, xi: complex(-1j * np.sign(x[0]) * xi[0]),
    )


def _pushforward_field(phi, driver, space, kappa, name):
    """Symbol field of dX = Phi(X) dZ: q(x, xi) = psi(Phi(x)' xi).

    Expressed as an x-dependent triplet with the model's own cut-off:
    drift Phi l_Z plus the cut-off correction on pushed atoms, diffusion
    Phi Q_Z Phi', jumps the image of N_Z under y -> Phi(x) y.
    """
    d = space.dim
    if driver.jumps.kind == "density":
        raise UnsupportedModelError("SDE drivers need atomic (or no) jump measures")
    y_atoms = driver.jumps.atoms if driver.jumps.kind == "atomic" else np.zeros((0, driver.dim))
    w_atoms = driver.jumps.weights if driver.jumps.kind == "atomic" else np.zeros(0)
    kap_driver = kappa.of_norm(np.linalg.norm(y_atoms, axis=1)) if len(w_atoms) else np.zeros(0)

    def triplet_at(x):
        P = phi.point(x)
        ell = P @ driver.ell
        Q = P @ driver.Q @ P.T
        if len(w_atoms):
            Z = y_atoms @ P.T  # (m, d)
            zn = np.linalg.norm(Z, axis=1)
            ell = ell + ((kappa.of_norm(zn) - kap_driver) * w_atoms) @ Z
            keep = zn > 0
            jumps = (
                JumpMeasure.atomic(Z[keep], w_atoms[keep])
                if np.any(keep)
                else JumpMeasure.none(dim=d)
            )
        else:
            jumps = JumpMeasure.none(dim=d)
        return LevyTriplet.make(ell=ell, Q=Q, jumps=jumps, dim=d)

    def ell_many(X):
        P = phi.many(X)  # (k, d, n)
        ell = np.einsum("kdn,n->kd", P, driver.ell)
        if len(w_atoms):
            Z = np.einsum("kdn,mn->kmd", P, y_atoms)
            zn = np.linalg.norm(Z, axis=2)
            corr = (kappa.of_norm(zn) - kap_driver[None, :]) * w_atoms[None, :]
            ell = ell + np.einsum("km,kmd->kd", corr, Z)
        return ell

    def Q_many(X):
        P = phi.many(X)
        return np.einsum("kdn,nm,kem->kde", P, driver.Q, P)

    def jump_atoms(X):
        P = phi.many(X)
        Z = np.einsum("kdn,mn->kmd", P, y_atoms)
        W = np.broadcast_to(w_atoms, (len(X), len(w_atoms)))
        return Z, W

    ops = FieldVectorOps(
        ell=ell_many,
        Q=Q_many,
        const_jumps=None if len(w_atoms) else JumpMeasure.none(dim=d),
        jump_atoms=jump_atoms if len(w_atoms) else None,
    )
    return SymbolField(d, space, triplet_at, True, kappa, name, ops)


def make_levy_sde(phi, driver, name="levy-sde", kappa=None):
    """Euler model for dX = Phi(X-) dZ with Levy driver Z; symbol psi(Phi(x)' xi).

    For bounded Lipschitz Phi the solution is Feller; unbounded Phi still
    gives an Ito process and the symbol formula remains valid, which the
    ``feller`` flag records (None when boundedness was not declared).
    Explosion is detected through exit from the compact exhaustion.
    """
    if driver.a != 0.0:
        raise ArgumentError("SDE drivers carry no killing rate")
    if not isinstance(phi, PhiFunc):
        raise ArgumentError("phi must be a PhiFunc (see phi_identity/phi_linear/...)")
    kappa = kappa or CutoffKappa()
    space = StateSpace.rd(phi.dim)
    field = _pushforward_field(phi, driver, space, kappa, name)

    def analytic(x, xi, _phi=phi, _drv=driver, _k=kappa):
        eta = _phi.point(x).T @ xi
        return evaluate_triplet_symbol(_drv, eta, _k)

    return ProcessModel(
        name=name,
        space=space,
        field=field,
        sampler=SdeSampler(phi, driver),
        killing="exit",
        deterministic=False,
        feller=phi.bounded,
        analytic=analytic,
    )


# ---------------------------------------------------------------------------
# registry
# ---------------------------------------------------------------------------

MODEL_NAMES = ("levy", "killed-levy", "superdrift", "sign-drift", "levy-sde")


def builtin_models(kappa=None):
    """The fixed model zoo exercised by the verification suites."""
    kappa = kappa or CutoffKappa()
    return {
        "brownian": make_levy(LevyTriplet.make(Q=[[1.0]]), name="brownian", kappa=kappa),
        "drift-poisson": make_levy(
            LevyTriplet.make(
                ell=[0.2],
                jumps=JumpMeasure.atomic([[1.0], [-0.5]], [0.6, 0.4]),
            ),
            name="drift-poisson",
            kappa=kappa,
        ),
        "killed-brownian": make_killed_levy(
            LevyTriplet.make(a=0.5, Q=[[1.0]]), name="killed-brownian", kappa=kappa
        ),
        "superdrift": make_superdrift(kappa=kappa),
        "sign-drift": make_sign_drift(kappa=kappa),
        "sde-sin": make_levy_sde(
            phi_affine_sin(1.0, 1.0, 2.0),
            LevyTriplet.make(Q=[[1.0]]),
            name="sde-sin",
            kappa=kappa,
        ),
    }
