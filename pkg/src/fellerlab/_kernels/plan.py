"""Step plan: the flat, dt-specialized description a kernel consumes.

Built once per (model, config) by the simulation layer; both the numpy
backend and the compiled backend read the same object, so a plan fully
determines the ensemble given (seed, path indices).
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

KIND_LEVY = "levy"
KIND_SDE1D = "sde1d"
KIND_EULER_FIELD = "euler-field"

KILL_NONE = 0
KILL_EXIT = 1
KILL_CLOCK = 2


@dataclass
class StepPlan:
    kind: str
    dim: int
    driver_dim: int
    dt: float
    sqdt: float
    x0: np.ndarray  # (dim,)

    # driver increment pieces (levy / sde driver)
    drift_dt: np.ndarray  # (driver_dim,)
    chol: np.ndarray  # (driver_dim, driver_dim)
    has_gauss: bool
    atoms: np.ndarray  # (m, driver_dim)
    mu: np.ndarray  # (m,) per-step Poisson means
    exp_neg_mu: np.ndarray  # (m,) math.exp(-mu), fixed host-side

    # density jump law (pure backend only)
    density_mu: float = 0.0
    density_exp_neg_mu: float = 1.0
    density_ppf: Optional[Callable] = None

    # sde coefficient
    phi_form: Optional[tuple] = None
    phi_many: Optional[Callable] = None  # X (n, d) -> (n, d, driver_dim)

    # generic euler field (pure backend only, d = 1)
    ef_ell: Optional[Callable] = None  # (n,) -> (n,)
    ef_sig: Optional[Callable] = None  # (n,) -> (n,)

    # killing and exit detection
    kill_kind: int = KILL_NONE
    kill_rate: float = 0.0
    ex_lo: np.ndarray = None  # (dim,) exhaustion box
    ex_hi: np.ndarray = None
    ex_center: np.ndarray = None
    ex_rad: float = np.inf
    k_lo: np.ndarray = None  # (dim,) sigma_K detector
    k_hi: np.ndarray = None
    k_center: np.ndarray = None
    k_rad: float = np.inf

    @property
    def n_jump_channels(self):
        return len(self.mu) + (1 if self.density_ppf is not None else 0)
