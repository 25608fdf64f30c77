"""Killed-path Monte Carlo engine.

Generates ensembles of paths on a uniform time grid with three pieces of
bookkeeping per path:

* ``sigma_K``: the first grid time at which the state leaves the compact
  K = (closed ball around the start) intersected with an exhaustion
  member; the cemetery counts as outside K.
* ``zeta``: the killing time.  Exit-type (predictable) killing is
  declared when the state leaves the exhaustion member K_{n_max} or a
  coordinate stops being finite; exponential clocks are drawn up front
  per path; deterministic models use their closed-form zeta.
* the alive mask: states are NaN from zeta onwards (the cemetery is
  absorbing).

Exit detection happens at grid times only; the O(sqrt(dt)) overshoot
for diffusive models is a documented bias that estimator tolerances
budget for.  Paths are keyed by (seed, path index) through counter-based
substreams, so chunked, serial and parallel execution all produce
identical ensembles.
"""

import math
import struct
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import rng
from ._kernels import plan as planmod
from ._kernels import simulate_chunk as kernel_simulate_chunk
from .errors import ArgumentError, NumericError, UnsupportedModelError
from .models import DeterministicSampler, EulerFieldSampler, LevySampler, SdeSampler

__all__ = [
    "SimulationConfig",
    "Path",
    "CEMETERY",
    "simulate_path",
    "simulate_paths",
    "iter_chunks",
    "stopped_state",
    "announcing_sequence",
    "write_path_csv",
    "write_path_binary",
    "read_path_binary",
]

#: sentinel returned by :func:`stopped_state` for the cemetery state
CEMETERY = "cemetery"

PATH_MAGIC = b"FSLPATH1"


@dataclass(frozen=True)
class SimulationConfig:
    """Monte Carlo run parameters.

    ``k_radius`` is the radius of the first-exit ball around the start
    (None disables the ball; the exhaustion box remains).  ``n_max`` is
    the exhaustion index whose exit declares explosion-type killing.
    """

    horizon: float
    dt: float
    n_paths: int
    seed: int
    k_radius: Optional[float] = None
    k_exhaustion_n: Optional[int] = None
    n_max: int = 10**6
    chunk_size: int = 16384

    def __post_init__(self):
        if not (self.dt > 0 and np.isfinite(self.dt)):
            raise ArgumentError("dt must be positive")
        if self.horizon < self.dt:
            raise ArgumentError("horizon must be at least one step")
        if self.n_paths < 1:
            raise ArgumentError("n_paths must be >= 1")
        if self.k_radius is not None and self.k_radius <= 0:
            raise ArgumentError("k_radius must be positive")

    def n_steps(self):
        m = int(round(self.horizon / self.dt))
        if abs(m * self.dt - self.horizon) > 1e-9 * max(1.0, self.horizon):
            raise ArgumentError("horizon must be an integer multiple of dt")
        return m

    def times(self):
        return np.arange(self.n_steps() + 1) * self.dt


@dataclass
class Path:
    """One sampled trajectory with killing and first-exit bookkeeping."""

    times: np.ndarray
    states: np.ndarray  # (m+1, d), NaN rows at the cemetery
    sigma_idx: int  # grid index of first exit from K (m+1 if none)
    zeta: float  # killing time, inf if never killed
    zeta_idx: int  # first grid index at the cemetery (m+1 if none)
    x0: np.ndarray
    model_name: str = ""
    path_index: int = 0
    seed: int = 0

    @property
    def dim(self):
        return self.states.shape[1]

    @property
    def sigma_K(self):
        n = len(self.times)
        return float(self.times[self.sigma_idx]) if self.sigma_idx < n else np.inf

    @property
    def alive(self):
        return np.all(np.isfinite(self.states), axis=1)

    def validate(self):
        """Assert the killed-path invariants; raises NumericError."""
        alive = self.alive
        n = len(self.times)
        if not np.allclose(self.states[0], self.x0, rtol=0, atol=0):
            raise NumericError("path does not start at x0")
        dead_before = False
        for i in range(n):
            want_alive = self.times[i] < self.zeta
            if bool(alive[i]) != bool(want_alive):
                raise NumericError(f"alive mask inconsistent with zeta at index {i}")
            if dead_before and alive[i]:
                raise NumericError("cemetery is not absorbing")
            dead_before = dead_before or not alive[i]
        if self.zeta_idx < n and self.times[self.zeta_idx] < self.zeta - 1e-12:
            raise NumericError("zeta index precedes zeta")
        return True


# ---------------------------------------------------------------------------
# plan construction
# ---------------------------------------------------------------------------


def _jump_plan_arrays(jumps, dt):
    if jumps.kind == "atomic":
        atoms = jumps.atoms
        mu = jumps.weights * dt
        exp_neg = np.array([math.exp(-float(v)) for v in mu])
        return atoms, mu, exp_neg, 0.0, 1.0, None
    if jumps.kind == "density":
        mu = jumps.rate * dt
        return (
            np.zeros((0, jumps.dim)),
            np.zeros(0),
            np.zeros(0),
            mu,
            math.exp(-mu),
            jumps.ppf,
        )
    return np.zeros((0, jumps.dim)), np.zeros(0), np.zeros(0), 0.0, 1.0, None


def build_plan(model, x0, cfg):
    """Compile (model, start, config) into the flat kernel description."""
    x0 = model.space.require(x0)
    d = model.dim
    dt = float(cfg.dt)

    k_n = cfg.k_exhaustion_n or cfg.n_max
    kbox = model.space.exhaustion(k_n)
    k_rad = np.inf if cfg.k_radius is None else float(cfg.k_radius)
    if np.isfinite(k_rad):
        margin = model.space.dist_to_complement(x0)
        if not margin > k_rad:
            raise ArgumentError(
                f"K_spec ball of radius {k_rad} around {x0} is not inside U "
                f"(distance to the boundary is {margin})"
            )

    ex = model.space.exhaustion(cfg.n_max)

    sampler = model.sampler
    common = dict(
        dim=d,
        dt=dt,
        sqdt=math.sqrt(dt),
        x0=x0,
        kill_kind={"none": planmod.KILL_NONE, "exit": planmod.KILL_EXIT,
                   "exp-clock": planmod.KILL_CLOCK}[model.killing],
        kill_rate=float(model.kill_rate),
        ex_lo=ex.lo, ex_hi=ex.hi, ex_center=ex.center, ex_rad=float(ex.radius),
        k_lo=kbox.lo, k_hi=kbox.hi, k_center=x0, k_rad=k_rad,
    )

    if isinstance(sampler, DeterministicSampler):
        raise ArgumentError("deterministic models bypass kernel plans")

    if isinstance(sampler, LevySampler):
        t = sampler.driver
        atoms, mu, enm, dmu, denm, ppf = _jump_plan_arrays(t.jumps, dt)
        return planmod.StepPlan(
            kind=planmod.KIND_LEVY,
            driver_dim=t.dim,
            drift_dt=t.ell * dt,
            chol=t.diffusion_factor(),
            has_gauss=bool(np.any(t.Q != 0.0)),
            atoms=atoms, mu=mu, exp_neg_mu=enm,
            density_mu=dmu, density_exp_neg_mu=denm, density_ppf=ppf,
            **common,
        )

    if isinstance(sampler, SdeSampler):
        t = sampler.driver
        atoms, mu, enm, dmu, denm, ppf = _jump_plan_arrays(t.jumps, dt)
        if ppf is not None:
            raise UnsupportedModelError("SDE drivers need atomic (or no) jumps")
        return planmod.StepPlan(
            kind=planmod.KIND_SDE1D,
            driver_dim=t.dim,
            drift_dt=t.ell * dt,
            chol=t.diffusion_factor(),
            has_gauss=bool(np.any(t.Q != 0.0)),
            atoms=atoms, mu=mu, exp_neg_mu=enm,
            phi_form=sampler.phi.form,
            phi_many=sampler.phi.many,
            **common,
        )

    if isinstance(sampler, EulerFieldSampler):
        if d != 1:
            raise UnsupportedModelError("generic Euler fields are one-dimensional")
        ops = model.field.vector_ops
        if ops is None:
            raise UnsupportedModelError("generic Euler fields need vectorized accessors")
        jumps = ops.const_jumps
        if jumps is None or jumps.kind == "density":
            raise UnsupportedModelError("generic Euler fields need atomic (or no) jumps")
        atoms, mu, enm, _, _, _ = _jump_plan_arrays(jumps, dt)

        def ef_ell(xcol, _ops=ops):
            return _ops.ell(xcol[:, None])[:, 0]

        def ef_sig(xcol, _ops=ops):
            return np.sqrt(_ops.Q(xcol[:, None])[:, 0, 0])

        return planmod.StepPlan(
            kind=planmod.KIND_EULER_FIELD,
            driver_dim=1,
            drift_dt=np.zeros(1),
            chol=np.zeros((1, 1)),
            has_gauss=False,
            atoms=atoms, mu=mu, exp_neg_mu=enm,
            ef_ell=ef_ell, ef_sig=ef_sig,
            **common,
        )

    raise UnsupportedModelError(f"unknown sampler {type(sampler).__name__}")


# ---------------------------------------------------------------------------
# ensembles
# ---------------------------------------------------------------------------


def _deterministic_chunk(model, x0, cfg, n_chunk):
    times = cfg.times()
    m = len(times) - 1
    sampler = model.sampler
    vals = sampler.flow(x0, times)  # (m+1, d)
    z = float(sampler.zeta(x0))
    dead = times >= z
    vals = np.where(dead[:, None], np.nan, vals)
    zeta_idx = int(np.searchsorted(times, z, side="left")) if z <= times[-1] else m + 1

    k_n = cfg.k_exhaustion_n or cfg.n_max
    kbox = model.space.exhaustion(k_n)
    in_k = kbox.contains_many(np.nan_to_num(vals, nan=np.inf)) & ~dead
    if cfg.k_radius is not None:
        margin = model.space.dist_to_complement(x0)
        if not margin > cfg.k_radius:
            raise ArgumentError("K_spec ball is not inside U with positive margin")
        in_k &= np.linalg.norm(vals - x0, axis=1) <= cfg.k_radius
    out = np.flatnonzero(~in_k)
    sigma_idx = int(out[0]) if len(out) else m + 1

    states = np.broadcast_to(vals, (n_chunk, m + 1, model.dim)).copy()
    return (
        states,
        np.full(n_chunk, sigma_idx, dtype=np.int64),
        np.full(n_chunk, z if np.isfinite(z) else np.inf),
        np.full(n_chunk, zeta_idx if np.isfinite(z) else m + 1, dtype=np.int64),
    )


def iter_chunks(model, x0, cfg):
    """Yield (path0, states, sigma_idx, zeta, zeta_idx) chunkwise.

    Chunk boundaries never change results: every path is a pure function
    of (model, x0, cfg.dt, seed, path index).
    """
    x0 = model.space.require(x0)
    m = cfg.n_steps()
    if model.deterministic:
        for start in range(0, cfg.n_paths, cfg.chunk_size):
            n = min(cfg.chunk_size, cfg.n_paths - start)
            yield (start, *_deterministic_chunk(model, x0, cfg, n))
        return
    plan = build_plan(model, x0, cfg)
    for start in range(0, cfg.n_paths, cfg.chunk_size):
        n = min(cfg.chunk_size, cfg.n_paths - start)
        clock = None
        if plan.kill_kind == planmod.KILL_CLOCK:
            ids = np.arange(start, start + n, dtype=np.uint32)
            clock = rng.exponential_kill_times(cfg.seed, ids, plan.kill_rate)
        states, sigma_idx, zeta, zeta_idx = kernel_simulate_chunk(
            plan, cfg.seed, start, n, m, clock
        )
        yield (start, states, sigma_idx, zeta, zeta_idx)


def simulate_path(model, x0, cfg, path_index=0):
    """Simulate the single path with the given absolute index."""
    x0 = model.space.require(x0)
    m = cfg.n_steps()
    if model.deterministic:
        states, sig, zet, zidx = _deterministic_chunk(model, x0, cfg, 1)
    else:
        plan = build_plan(model, x0, cfg)
        clock = None
        if plan.kill_kind == planmod.KILL_CLOCK:
            ids = np.array([path_index], dtype=np.uint32)
            clock = rng.exponential_kill_times(cfg.seed, ids, plan.kill_rate)
        states, sig, zet, zidx = kernel_simulate_chunk(
            plan, cfg.seed, path_index, 1, m, clock
        )
    path = Path(
        times=cfg.times(),
        states=states[0],
        sigma_idx=int(sig[0]),
        zeta=float(zet[0]),
        zeta_idx=int(zidx[0]),
        x0=x0,
        model_name=model.name,
        path_index=path_index,
        seed=cfg.seed,
    )
    if __debug__:
        path.validate()
    return path


def simulate_paths(model, x0, cfg):
    """All paths of the ensemble as Path objects (small runs, CLI export)."""
    return [simulate_path(model, x0, cfg, i) for i in range(cfg.n_paths)]


# ---------------------------------------------------------------------------
# stopped values and announcing sequences
# ---------------------------------------------------------------------------


def stopped_state(path, t):
    """X_{t and sigma_K} with previous-point (cadlag) grid interpolation.

    Returns the state vector, or the CEMETERY sentinel once killed.
    """
    if not 0 <= t <= path.times[-1] * (1 + 1e-12) + 1e-300:
        raise ArgumentError(f"t = {t} outside the simulated window")
    dt = float(path.times[1] - path.times[0]) if len(path.times) > 1 else 1.0
    it = min(len(path.times) - 1, int(math.floor(t / dt + 1e-9)))
    idx = min(it, path.sigma_idx)
    state = path.states[idx]
    if not np.all(np.isfinite(state)):
        return CEMETERY
    return state.copy()


def announcing_sequence(model, path, n_max=20):
    """rho_n = (first observed exit from K_n) and n and (last alive time).

    Only defined for predictable killing (exit/explosion type or no
    killing); exponential clocks are rejected.  Asserts monotonicity and
    rho_n < zeta on killed paths.
    """
    if model.killing == "exp-clock":
        raise UnsupportedModelError(
            "announcing sequences require predictable killing; the "
            "exponential clock is not predictable"
        )
    times = path.times
    finite = path.alive
    cap = np.inf
    if np.isfinite(path.zeta):
        last_alive = np.flatnonzero(finite)
        cap = float(times[last_alive[-1]]) if len(last_alive) else 0.0
    rho = np.empty(n_max)
    for n in range(1, n_max + 1):
        kn = model.space.exhaustion(n)
        safe = np.where(finite[:, None], path.states, np.inf)
        inside = kn.contains_many(safe) & finite
        out = np.flatnonzero(~inside)
        sigma_n = float(times[out[0]]) if len(out) else np.inf
        rho[n - 1] = min(sigma_n, float(n), cap)
    if np.any(np.diff(rho) < -1e-12):
        raise NumericError("announcing sequence is not monotone")
    if np.isfinite(path.zeta) and not np.all(rho < path.zeta):
        raise NumericError("announcing sequence does not stay below zeta")
    return rho


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------


def write_path_csv(path, fh):
    """CSV rows (time, x1..xd, alive); cemetery states are empty fields."""
    d = path.dim
    header = "time," + ",".join(f"x{j+1}" for j in range(d)) + ",alive\n"
    fh.write(header)
    alive = path.alive
    for i, t in enumerate(path.times):
        if alive[i]:
            cells = ",".join(repr(float(v)) for v in path.states[i])
            fh.write(f"{t!r},{cells},1\n")
        else:
            fh.write(f"{t!r},{',' * (d - 1)},0\n" if d > 1 else f"{t!r},,0\n")


def write_path_binary(path, fh):
    """Compact little-endian record.

    Layout: magic "FSLPATH1" (8 bytes), u32 d, u64 n_steps, then f64
    payload: times (n_steps + 1), states ((n_steps + 1) * d, row-major,
    NaN at the cemetery), sigma_K, zeta (inf when absent).
    """
    d = path.dim
    m = len(path.times) - 1
    fh.write(PATH_MAGIC)
    fh.write(struct.pack("<I", d))
    fh.write(struct.pack("<Q", m))
    fh.write(np.ascontiguousarray(path.times, dtype="<f8").tobytes())
    fh.write(np.ascontiguousarray(path.states, dtype="<f8").tobytes())
    fh.write(struct.pack("<d", path.sigma_K))
    fh.write(struct.pack("<d", path.zeta))


def read_path_binary(fh):
    """Inverse of :func:`write_path_binary` (sigma/zeta indices recomputed)."""
    magic = fh.read(8)
    if magic != PATH_MAGIC:
        raise ArgumentError(f"bad magic {magic!r}, expected {PATH_MAGIC!r}")
    d = struct.unpack("<I", fh.read(4))[0]
    m = struct.unpack("<Q", fh.read(8))[0]
    times = np.frombuffer(fh.read(8 * (m + 1)), dtype="<f8")
    states = np.frombuffer(fh.read(8 * (m + 1) * d), dtype="<f8").reshape(m + 1, d)
    sigma = struct.unpack("<d", fh.read(8))[0]
    zeta = struct.unpack("<d", fh.read(8))[0]
    sigma_idx = int(np.searchsorted(times, sigma, side="left")) if np.isfinite(sigma) else m + 1
    zeta_idx = int(np.searchsorted(times, zeta, side="left")) if np.isfinite(zeta) else m + 1
    alive = np.all(np.isfinite(states), axis=1)
    if np.isfinite(zeta):
        first_dead = np.flatnonzero(~alive)
        if len(first_dead):
            zeta_idx = int(first_dead[0])
    return Path(
        times=times.copy(),
        states=states.copy(),
        sigma_idx=sigma_idx,
        zeta=zeta,
        zeta_idx=zeta_idx,
        x0=states[0].copy(),
    )
