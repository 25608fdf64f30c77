"""Declarative experiment configuration.

Models, triplets and coefficient functions are buildable from a
key-value tree (YAML or JSON).  Closed-form coefficients use a small
whitelisted expression grammar: numeric literals, the state variable x
(x1..xd in higher dimension), pi, the arithmetic operators + - * / **,
and the functions sgn, exp, sin.  Everything else is rejected before
evaluation.
"""

import ast
import math

import numpy as np
import yaml

from .errors import ArgumentError, UnsupportedModelError
from .models import (
    EulerFieldSampler,
    PhiFunc,
    ProcessModel,
    make_killed_levy,
    make_levy,
    make_levy_sde,
    make_sign_drift,
    make_superdrift,
    phi_affine_sin,
    phi_identity,
    phi_linear,
)
from .spaces import StateSpace
from .symbols import CutoffKappa, FieldVectorOps, JumpMeasure, LevyTriplet, SymbolField

__all__ = ["compile_expression", "load_config", "build_model", "build_cutoff"]

_ALLOWED_FUNCS = {"sgn": np.sign, "exp": np.exp, "sin": np.sin}
_ALLOWED_NODES = (
    ast.Expression, ast.BinOp, ast.UnaryOp, ast.Call, ast.Name, ast.Constant,
    ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.USub, ast.UAdd,
)


def compile_expression(src, variables=("x",)):
    """Compile a whitelisted closed-form expression to a vectorized callable.

    The callable takes one array per variable (broadcast as numpy does)
    and returns an array of the same shape.
    """
    try:
        tree = ast.parse(str(src), mode="eval")
    except SyntaxError as exc:
        raise ArgumentError(f"cannot parse expression {src!r}: {exc}") from exc
    names = set(variables) | {"pi"}
    for node in ast.walk(tree):
        if not isinstance(node, _ALLOWED_NODES):
            raise ArgumentError(
                f"expression {src!r} uses disallowed syntax {type(node).__name__}"
            )
        if isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in _ALLOWED_FUNCS:
                raise ArgumentError(f"expression {src!r} calls a non-whitelisted function")
            if len(node.args) != 1 or node.keywords:
                raise ArgumentError("whitelisted functions take exactly one argument")
        if isinstance(node, ast.Name) and node.id not in names and node.id not in _ALLOWED_FUNCS:
            raise ArgumentError(f"unknown name {node.id!r} in expression {src!r}")
        if isinstance(node, ast.Constant) and not isinstance(node.value, (int, float)):
            raise ArgumentError("only numeric literals are allowed")
    code = compile(tree, "<expr>", "eval")
    env = dict(_ALLOWED_FUNCS, pi=math.pi)

    def fn(*args):
        local = dict(zip(variables, args))
        out = eval(code, {"__builtins__": {}}, {**env, **local})
        # broadcast constants to the argument shape
        return np.asarray(out, dtype=float) * np.ones_like(np.asarray(args[0], dtype=float))

    fn.source = str(src)
    return fn


def load_config(path):
    with open(path, "r", encoding="utf-8") as fh:
        data = yaml.safe_load(fh)
    if not isinstance(data, dict):
        raise ArgumentError(f"config {path} must be a mapping")
    return data


def build_cutoff(spec):
    spec = spec or {}
    return CutoffKappa(R=float(spec.get("R", 1.0)), form=spec.get("form", "indicator"))


def _build_space(spec):
    spec = spec or {"kind": "rd", "dim": 1}
    kind = spec.get("kind", "rd")
    if kind in ("rd", "all-of-Rd"):
        return StateSpace.rd(int(spec.get("dim", 1)))
    if kind in ("interval", "open-interval"):
        return StateSpace.interval(float(spec["a"]), float(spec["b"]))
    if kind in ("halfline", "positive-halfline"):
        return StateSpace.halfline()
    if kind in ("box", "open-box"):
        return StateSpace.box(spec["lo"], spec["hi"])
    raise ArgumentError(f"unknown state space kind {kind!r}")


def _build_jumps(spec, dim=1):
    spec = spec or {"kind": "none"}
    kind = spec.get("kind", "none")
    if kind == "none":
        return JumpMeasure.none(dim=dim)
    if kind == "atomic":
        return JumpMeasure.atomic(spec["atoms"], spec["weights"])
    if kind == "density":
        dist = spec.get("dist", {})
        name = dist.get("name", "normal")
        rate = float(spec["rate"])
        if name == "normal":
            from scipy.stats import norm

            frozen = norm(loc=float(dist.get("loc", 0.0)), scale=float(dist.get("scale", 1.0)))
        elif name == "uniform":
            from scipy.stats import uniform

            lo, hi = float(dist["lo"]), float(dist["hi"])
            frozen = uniform(loc=lo, scale=hi - lo)
        else:
            raise ArgumentError(f"unknown density jump law {name!r}")
        return JumpMeasure.from_distribution(rate, frozen)
    raise ArgumentError(f"unknown jump kind {kind!r}")


def _build_triplet(params, dim=None):
    return LevyTriplet.make(
        a=float(params.get("a", 0.0)),
        ell=params.get("ell", np.zeros(dim or 1)),
        Q=np.asarray(params.get("Q", np.zeros((dim or 1, dim or 1))), dtype=float),
        jumps=_build_jumps(params.get("jumps"), dim=dim or 1),
        dim=dim,
    )


def _build_phi(spec):
    if spec is None:
        return phi_identity()
    if isinstance(spec, str):
        spec = {"expr": spec}
    form = spec.get("form")
    if form == "identity":
        return phi_identity()
    if form == "linear":
        return phi_linear(float(spec.get("c", 1.0)))
    if form == "affine-sin":
        return phi_affine_sin(
            float(spec.get("a", 1.0)), float(spec.get("b", 1.0)), float(spec.get("c", 2.0))
        )
    if "expr" in spec:
        f = compile_expression(spec["expr"], variables=("x",))

        def point(x):
            return np.array([[float(f(np.asarray([x[0]]))[0])]])

        def many(X):
            return f(np.asarray(X, dtype=float)[:, 0])[:, None, None]

        return PhiFunc(point, many, 1, 1, form=None, bounded=None, name=str(spec["expr"]))
    raise ArgumentError(f"cannot build phi from {spec!r}")


def _build_custom(params, kappa):
    """State-dependent field from expressions; simulated by Euler stepping."""
    space = _build_space(params.get("state_space"))
    if space.dim != 1:
        raise UnsupportedModelError("custom expression models are one-dimensional")
    a_fn = compile_expression(params.get("a", "0"), variables=("x",))
    ell_fn = compile_expression(params["ell"][0], variables=("x",))
    q_fn = compile_expression(params["Q"][0][0], variables=("x",))
    jumps = _build_jumps(params.get("jumps"), dim=1)
    killing = params.get("killing", "exit")
    if killing not in ("none", "exit", "exp-clock"):
        raise ArgumentError(f"unknown killing kind {killing!r}")

    probe = np.asarray([0.5, 1.5, 2.5])
    a_vals = a_fn(probe)
    if killing == "exp-clock":
        if np.ptp(a_vals) > 1e-12 or a_vals[0] <= 0:
            raise ArgumentError("exp-clock killing needs a constant positive rate a")
        rate = float(a_vals[0])
    else:
        if np.any(a_vals != 0.0):
            raise ArgumentError("a(x) must vanish unless killing is exp-clock")
        rate = 0.0

    def triplet_at(x):
        xv = np.asarray([float(x[0])])
        return LevyTriplet.make(
            a=rate, ell=[float(ell_fn(xv)[0])], Q=[[float(q_fn(xv)[0])]], jumps=jumps
        )

    ops = FieldVectorOps(
        ell=lambda X: ell_fn(X[:, 0])[:, None],
        Q=lambda X: q_fn(X[:, 0])[:, None, None],
        const_jumps=jumps,
    )
    field = SymbolField(
        1, space, triplet_at, bool(params.get("continuity", True)), kappa,
        params.get("name", "custom"), ops,
    )
    return ProcessModel(
        name=params.get("name", "custom"),
        space=space,
        field=field,
        sampler=EulerFieldSampler(),
        killing=killing,
        kill_rate=rate,
        deterministic=False,
        feller=None,
    )


def build_model(name, params=None, kappa=None):
    """Instantiate a registry model from a name and a parameter map."""
    params = params or {}
    kappa = kappa or build_cutoff(params.get("cutoff"))
    if name == "levy":
        return make_levy(_build_triplet(params, dim=params.get("dim")), kappa=kappa)
    if name == "killed-levy":
        return make_killed_levy(_build_triplet(params, dim=params.get("dim")), kappa=kappa)
    if name == "superdrift":
        return make_superdrift(kappa=kappa)
    if name == "sign-drift":
        return make_sign_drift(kappa=kappa)
    if name == "levy-sde":
        driver = _build_triplet(params.get("driver", {"Q": [[1.0]]}), dim=None)
        return make_levy_sde(_build_phi(params.get("phi")), driver, kappa=kappa)
    if name == "custom":
        return _build_custom(params, kappa)
    raise ArgumentError(
        f"unknown model {name!r}; known: levy, killed-levy, superdrift, "
        "sign-drift, levy-sde, custom"
    )
