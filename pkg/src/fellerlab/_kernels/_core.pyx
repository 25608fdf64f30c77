# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled path-simulation backend (path-major C loops).

Re-implements exactly the mapping of the numpy backend: the same
Philox4x32-10 counter scheme, the same inverse-CDF normal transform
(the identical cephes ndtri scipy exposes), and the same floating point
expression order (the extension is compiled with -ffp-contract=off).
"""

import numpy as np

from libc.math cimport INFINITY, NAN, sin
from scipy.special.cython_special cimport ndtri

from ..errors import UnsupportedModelError
from .plan import KILL_CLOCK, KILL_EXIT, KIND_LEVY, KIND_SDE1D

BACKEND_NAME = "compiled"

cdef double U53_SCALE = 2.0 ** -53

ctypedef unsigned int u32
ctypedef unsigned long long u64


cdef inline void _philox(u32 c0, u32 c1, u32 c2, u32 c3, u32 k0, u32 k1,
                         u32* out) nogil:
    cdef u64 p0, p1
    cdef u32 hi0, lo0, hi1, lo1, n0, n1, n2, n3
    cdef int r
    for r in range(10):
        p0 = (<u64> c0) * <u64> 0xD2511F53u
        p1 = (<u64> c2) * <u64> 0xCD9E8D57u
        hi0 = <u32> (p0 >> 32)
        lo0 = <u32> p0
        hi1 = <u32> (p1 >> 32)
        lo1 = <u32> p1
        n0 = hi1 ^ c1 ^ k0
        n1 = lo1
        n2 = hi0 ^ c3 ^ k1
        n3 = lo0
        c0 = n0
        c1 = n1
        c2 = n2
        c3 = n3
        k0 = k0 + <u32> 0x9E3779B9u
        k1 = k1 + <u32> 0xBB67AE85u
    out[0] = c0
    out[1] = c1
    out[2] = c2
    out[3] = c3


cdef inline double _u53(u32 wlo, u32 whi) nogil:
    cdef u64 v = (<u64> wlo) | ((<u64> (whi & <u32> 0xFFFFFu)) << 32)
    return (<double> ((v << 1) | <u64> 1)) * U53_SCALE


cdef inline void _block_uniforms(u32 path, u32 step, u32 block, u32 domain,
                                 u32 k0, u32 k1, double* u) nogil:
    cdef u32 w[4]
    _philox(path, step, block, domain, k0, k1, w)
    u[0] = _u53(w[0], w[1])
    u[1] = _u53(w[2], w[3])


cdef inline long long _poisson_scan(double u, double mu, double exp_neg_mu) nogil:
    cdef double p = exp_neg_mu
    cdef double F = p
    cdef long long k = 0
    while u > F:
        k += 1
        p = p * mu / k
        F = F + p
        if k > 100000:
            break
    return k


def philox_words(path, step, block, domain, seed):
    """Test hook: one Philox block as four uint32 words."""
    cdef u32 w[4]
    cdef u64 s = <u64> (int(seed) & 0xFFFFFFFFFFFFFFFF)
    _philox(<u32> path, <u32> step, <u32> block, <u32> domain,
            <u32> (s & 0xFFFFFFFFu), <u32> (s >> 32), w)
    return int(w[0]), int(w[1]), int(w[2]), int(w[3])


def supports(plan):
    if plan.density_ppf is not None:
        return False
    if plan.kind == KIND_LEVY:
        return True
    if plan.kind == KIND_SDE1D:
        return (
            plan.dim == 1
            and plan.driver_dim == 1
            and plan.phi_form is not None
            and plan.phi_form[0] in ("identity", "linear", "affine-sin")
        )
    return False


def simulate_chunk(plan, seed, path0, n_paths, n_steps, kill_clock=None):
    """Drop-in equivalent of the pure backend's simulate_chunk."""
    if not supports(plan):
        raise UnsupportedModelError("plan not supported by the compiled kernel")

    cdef int d = plan.dim
    cdef int nd = plan.driver_dim
    cdef int m = len(plan.mu)
    cdef int is_sde = 1 if plan.kind == KIND_SDE1D else 0
    cdef double dt = plan.dt
    cdef double sqdt = plan.sqdt
    cdef int has_gauss = 1 if plan.has_gauss else 0

    cdef double[::1] x0 = np.ascontiguousarray(plan.x0, dtype=np.float64)
    cdef double[::1] drift_dt = np.ascontiguousarray(plan.drift_dt, dtype=np.float64)
    cdef double[:, ::1] chol = np.ascontiguousarray(plan.chol, dtype=np.float64)
    cdef double[:, ::1] atoms = np.ascontiguousarray(
        plan.atoms.reshape(m, nd) if m else np.zeros((0, nd)), dtype=np.float64)
    cdef double[::1] mu = np.ascontiguousarray(plan.mu, dtype=np.float64)
    cdef double[::1] exp_neg_mu = np.ascontiguousarray(plan.exp_neg_mu, dtype=np.float64)

    # phi coding: 0 identity, 1 linear, 2 affine-sin
    cdef int phi_code = 0
    cdef double pa = 0.0, pb = 0.0, pc = 0.0
    if is_sde:
        form = plan.phi_form
        if form[0] == "identity":
            phi_code = 0
        elif form[0] == "linear":
            phi_code = 1
            pa = form[1]
        else:
            phi_code = 2
            pa, pb, pc = form[1], form[2], form[3]

    cdef int kill_kind = plan.kill_kind
    cdef double[::1] ex_lo = np.ascontiguousarray(plan.ex_lo, dtype=np.float64)
    cdef double[::1] ex_hi = np.ascontiguousarray(plan.ex_hi, dtype=np.float64)
    cdef double[::1] ex_center = np.ascontiguousarray(plan.ex_center, dtype=np.float64)
    cdef double ex_rad = plan.ex_rad
    cdef double[::1] k_lo = np.ascontiguousarray(plan.k_lo, dtype=np.float64)
    cdef double[::1] k_hi = np.ascontiguousarray(plan.k_hi, dtype=np.float64)
    cdef double[::1] k_center = np.ascontiguousarray(plan.k_center, dtype=np.float64)
    cdef double k_rad = plan.k_rad

    if kill_clock is None:
        kill_clock = np.full(n_paths, np.inf)
    cdef double[::1] clock = np.ascontiguousarray(kill_clock, dtype=np.float64)

    cdef u64 s = <u64> (int(seed) & 0xFFFFFFFFFFFFFFFF)
    cdef u32 key0 = <u32> (s & 0xFFFFFFFFu)
    cdef u32 key1 = <u32> (s >> 32)

    cdef long long N = n_paths
    cdef long long M = n_steps
    cdef long long sentinel = M + 1

    states_arr = np.empty((n_paths, n_steps + 1, d))
    sigma_arr = np.full(n_paths, sentinel, dtype=np.int64)
    zeta_arr = np.full(n_paths, np.inf)
    zidx_arr = np.full(n_paths, sentinel, dtype=np.int64)
    cdef double[:, :, ::1] states = states_arr
    cdef long long[::1] sigma_idx = sigma_arr
    cdef double[::1] zeta = zeta_arr
    cdef long long[::1] zeta_idx = zidx_arr

    cdef double[::1] x = np.zeros(d)
    cdef double[::1] dz = np.zeros(nd)
    cdef double[::1] z = np.zeros(nd)
    cdef double ubuf[2]
    cdef long long p, k, cnt
    cdef int i, j, blk, lane, nblocks, dead, have_sigma
    cdef u32 pid, stp
    cdef double acc, t_k, a, c, xn, phival, dz0, mu_i, r2, diff

    nblocks = (nd + 1) // 2

    for p in range(N):
        pid = <u32> (path0 + p)
        for i in range(d):
            x[i] = x0[i]
            states[p, 0, i] = x[i]
        dead = 0
        have_sigma = 0
        # sigma at time zero when the start is already outside K
        if not _inside(x, k_lo, k_hi, k_center, k_rad, d):
            sigma_idx[p] = 0
            have_sigma = 1

        for k in range(1, M + 1):
            stp = <u32> (k - 1)
            t_k = k * dt
            if not dead:
                # driver increment
                for j in range(nd):
                    dz[j] = drift_dt[j]
                if has_gauss:
                    for blk in range(nblocks):
                        _block_uniforms(pid, stp, <u32> blk, <u32> 0, key0, key1, ubuf)
                        for lane in range(2):
                            j = 2 * blk + lane
                            if j < nd:
                                z[j] = ndtri(ubuf[lane])
                    for i in range(nd):
                        acc = 0.0
                        for j in range(nd):
                            c = chol[i, j]
                            if c != 0.0:
                                acc = acc + c * z[j]
                        dz[i] = dz[i] + sqdt * acc
                if m:
                    for i in range(m):
                        blk = i // 2
                        lane = i % 2
                        if lane == 0:
                            _block_uniforms(pid, stp, <u32> blk, <u32> 1, key0, key1, ubuf)
                        cnt = _poisson_scan(ubuf[lane], mu[i], exp_neg_mu[i])
                        if cnt:
                            for j in range(nd):
                                a = atoms[i, j]
                                if a != 0.0:
                                    dz[j] = dz[j] + (<double> cnt) * a
                if is_sde:
                    if phi_code == 0:
                        phival = 1.0
                    elif phi_code == 1:
                        phival = pa * x[0]
                    else:
                        phival = pa * sin(pb * x[0]) + pc
                    dz0 = phival * dz[0]
                    x[0] = x[0] + dz0
                else:
                    for i in range(d):
                        x[i] = x[i] + dz[i]

                if kill_kind == 2:
                    if clock[p] <= t_k:
                        zeta[p] = clock[p]
                        zeta_idx[p] = k
                        dead = 1
                elif kill_kind == 1:
                    if not _inside(x, ex_lo, ex_hi, ex_center, ex_rad, d):
                        zeta[p] = t_k
                        zeta_idx[p] = k
                        dead = 1

            if dead:
                for i in range(d):
                    states[p, k, i] = NAN
            else:
                for i in range(d):
                    states[p, k, i] = x[i]
            if not have_sigma:
                if dead or not _inside(x, k_lo, k_hi, k_center, k_rad, d):
                    sigma_idx[p] = k
                    have_sigma = 1

    return states_arr, sigma_arr, zeta_arr, zidx_arr


cdef inline int _inside(double[::1] x, double[::1] lo, double[::1] hi,
                        double[::1] center, double rad, int d) nogil:
    cdef int i
    cdef double r2, diff
    for i in range(d):
        if not (x[i] >= lo[i]):
            return 0
        if not (x[i] <= hi[i]):
            return 0
    if rad != INFINITY:
        r2 = 0.0
        for i in range(d):
            diff = x[i] - center[i]
            r2 = r2 + diff * diff
        if not (r2 <= rad * rad):
            return 0
    return 1
