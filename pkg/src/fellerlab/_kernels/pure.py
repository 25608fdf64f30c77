"""Numpy path-simulation backend (step-major, vectorized across paths).

Produces bit-identical trajectories to the compiled backend: randomness
is a pure function of (seed, domain, path, step, slot) and the floating
point update uses the same expression order.
"""

import numpy as np

from .. import rng
from ..errors import UnsupportedModelError
from .plan import KILL_CLOCK, KILL_EXIT, KIND_EULER_FIELD, KIND_LEVY, KIND_SDE1D

BACKEND_NAME = "pure"


def supports(plan):
    return plan.kind in (KIND_LEVY, KIND_SDE1D, KIND_EULER_FIELD)


def _poisson_counts(u, mu, exp_neg_mu):
    """Inverse-CDF Poisson counts from uniforms; identical scan to the C loop."""
    counts = np.zeros(u.shape, dtype=np.int64)
    p = np.broadcast_to(exp_neg_mu, u.shape).astype(float).copy()
    F = p.copy()
    active = u > F
    k = 0
    while np.any(active):
        k += 1
        if k > 100000:
            raise RuntimeError("Poisson inversion failed to terminate")
        p = np.where(active, p * mu / k, p)
        F = np.where(active, F + p, F)
        counts = np.where(active, k, counts)
        active = active & (u > F)
    return counts


def _in_box_ball(X, lo, hi, center, rad):
    ok = np.all(X >= lo, axis=1) & np.all(X <= hi, axis=1)
    if np.isfinite(rad):
        ok &= np.einsum("nd,nd->n", X - center, X - center) <= rad * rad
    return ok


def _driver_increment(plan, seed, paths, step, serial_base):
    """One-step driver increment dZ for every path; (n, driver_dim)."""
    n = len(paths)
    nd = plan.driver_dim
    dz = np.tile(plan.drift_dt, (n, 1))
    if plan.has_gauss:
        z = rng.normals(seed, rng.DOMAIN_GAUSS, paths, step, nd)
        for i in range(nd):
            acc = np.zeros(n)
            for j in range(nd):
                c = plan.chol[i, j]
                if c != 0.0:
                    acc = acc + c * z[:, j]
            dz[:, i] = dz[:, i] + plan.sqdt * acc
    m = len(plan.mu)
    nch = plan.n_jump_channels
    if nch:
        u = rng.uniforms(seed, rng.DOMAIN_JUMP_COUNT, paths, step, nch)
        if m:
            counts = _poisson_counts(u[:, :m], plan.mu, plan.exp_neg_mu)
            for i in range(m):
                ci = counts[:, i].astype(float)
                for j in range(nd):
                    a = plan.atoms[i, j]
                    if a != 0.0:
                        dz[:, j] = dz[:, j] + ci * a
        if plan.density_ppf is not None:
            cd = _poisson_counts(
                u[:, m : m + 1], np.array([plan.density_mu]),
                np.array([plan.density_exp_neg_mu]),
            )[:, 0]
            total = int(cd.sum())
            if total:
                reps = np.repeat(np.arange(n), cd)
                offs = np.arange(total) - np.repeat(np.cumsum(cd) - cd, cd)
                serials = serial_base[reps] + offs
                us = rng.uniform_serial(seed, rng.DOMAIN_JUMP_SIZE, paths[reps], serials)
                sizes = np.asarray(plan.density_ppf(us), dtype=float)
                dz[:, 0] = dz[:, 0] + np.bincount(reps, weights=sizes, minlength=n)
            serial_base = serial_base + cd
    return dz, serial_base


def simulate_chunk(plan, seed, path0, n_paths, n_steps, kill_clock=None):
    """Simulate a chunk of paths; returns (states, sigma_idx, zeta, zeta_idx).

    states has shape (n_paths, n_steps + 1, dim) with NaN rows once a path
    is at the cemetery; sigma_idx/zeta_idx use n_steps + 1 as the
    "not in this window" sentinel.
    """
    d = plan.dim
    paths = np.arange(path0, path0 + n_paths, dtype=np.uint32)
    sentinel = n_steps + 1
    states = np.empty((n_paths, n_steps + 1, d))
    X = np.tile(plan.x0, (n_paths, 1))
    states[:, 0, :] = X
    sigma_idx = np.full(n_paths, sentinel, dtype=np.int64)
    zeta = np.full(n_paths, np.inf)
    zeta_idx = np.full(n_paths, sentinel, dtype=np.int64)
    dead = np.zeros(n_paths, dtype=bool)
    serial_base = np.zeros(n_paths, dtype=np.int64)

    sigma_idx[~_in_box_ball(X, plan.k_lo, plan.k_hi, plan.k_center, plan.k_rad)] = 0

    for k in range(1, n_steps + 1):
        step = k - 1
        t_k = k * plan.dt
        if plan.kind == KIND_LEVY:
            dz, serial_base = _driver_increment(plan, seed, paths, step, serial_base)
            Xn = X + dz
        elif plan.kind == KIND_SDE1D:
            dz, serial_base = _driver_increment(plan, seed, paths, step, serial_base)
            P = plan.phi_many(X)
            Xn = np.empty_like(X)
            for i in range(d):
                acc = np.zeros(n_paths)
                for j in range(plan.driver_dim):
                    acc = acc + P[:, i, j] * dz[:, j]
                Xn[:, i] = X[:, i] + acc
        elif plan.kind == KIND_EULER_FIELD:
            z = rng.normals(seed, rng.DOMAIN_GAUSS, paths, step, 1)[:, 0]
            dz = plan.ef_ell(X[:, 0]) * plan.dt + plan.ef_sig(X[:, 0]) * (plan.sqdt * z)
            m = len(plan.mu)
            if m:
                u = rng.uniforms(seed, rng.DOMAIN_JUMP_COUNT, paths, step, m)
                counts = _poisson_counts(u, plan.mu, plan.exp_neg_mu)
                for i in range(m):
                    dz = dz + counts[:, i].astype(float) * plan.atoms[i, 0]
            Xn = X + dz[:, None]
        else:
            raise UnsupportedModelError(f"unknown plan kind {plan.kind!r}")

        alive = ~dead
        X = np.where(alive[:, None], Xn, X)

        if plan.kill_kind == KILL_CLOCK:
            now = alive & (kill_clock <= t_k)
            if np.any(now):
                zeta[now] = kill_clock[now]
                zeta_idx[now] = k
                dead |= now
        elif plan.kill_kind == KILL_EXIT:
            inside = _in_box_ball(X, plan.ex_lo, plan.ex_hi, plan.ex_center, plan.ex_rad)
            now = alive & ~inside
            if np.any(now):
                zeta[now] = t_k
                zeta_idx[now] = k
                dead |= now

        states[:, k, :] = X
        if np.any(dead):
            states[dead, k, :] = np.nan
        not_in_k = dead | ~_in_box_ball(X, plan.k_lo, plan.k_hi, plan.k_center, plan.k_rad)
        newly = (sigma_idx == sentinel) & not_in_k
        sigma_idx[newly] = k

    return states, sigma_idx, zeta, zeta_idx
