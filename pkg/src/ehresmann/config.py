"""Run configurations: loading, validation, task execution and reports.

A configuration is a TOML file. Its tables describe one bundle setup
(``[bundle]``, ``[connection]``, ``[group]``, ``[gauge]``, ``[action]``,
``[section]``, ``[curve.NAME]``) and a numbered task list (``[task.N]``),
run in ascending N. Each task gets its own generator seeded with
``(seed, N)``, so reports are reproducible task by task.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path as FsPath
from typing import Any

import jsonschema
import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from ehresmann import samples as smp
from ehresmann.associate import (
    RepresentationMatrices,
    StarInfCandidate,
    check_association_candidate,
    induce_connection,
    induce_linear,
    product_preservation_check,
    reproducing_check,
    universality_residual,
)
from ehresmann.bundle import BaseMismatchError, BaseVectorField, BundleChart, SectionField
from ehresmann.connection import (
    ChristoffelField,
    LinearChristoffel,
    classical_curvature,
    curvature_coeffs,
    curvature_identity_residual,
    is_linear,
    nijenhuis_fd,
)
from ehresmann.exprdsl import Compiled, ExprDomainError, ExprError, parse_expr
from ehresmann.liegroup import (
    ActionGenerators,
    MatrixLieGroup,
    left_multiplication_action,
)
from ehresmann.principal import (
    GaugeField,
    check_principal_axiom,
    field_strength,
    gauge_covariance_residual,
)
from ehresmann.transport import (
    Curve,
    NumericAbortError,
    Path,
    flux,
    holonomy_loop,
    parallel_transport_fiber,
    u1_angle,
)

TASK_KINDS = (
    "curvature", "check-identity", "check-linear", "check-principal-axiom", "gauge-covariance",
    "induce", "universality", "product-check", "candidate-check", "transport", "holonomy",
    "flux", "reproduce",
)

DEFAULT_TOLERANCES = {
    "antisymmetry": 1e-12,
    "nijenhuis": 1e-5,
    "identity": 1e-10,
    "linear": 1e-12,
    "axiom": 1e-6,
    "covariance": 1e-10,
    "universality": 1e-10,
    "product": 1e-12,
    "candidate": 1e-8,
    "transport": 1e-6,
    "holonomy": 1e-5,
    "flux": 1e-6,
    "reproduce": 1e-6,
}

BUNDLED = ("monopole", "sphere", "so3")

_str_array = {"type": "array", "items": {"type": "string"}}
_scalar = {"type": ["number", "string"]}
_expr_nested = {"type": "array", "items": {"type": ["array", "string", "number"]}}

_action_schema = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["standard", "adjoint", "trivial", "left", "charge", "generators"]},
        "charge": {"type": "integer"},
        "n": {"type": "integer", "minimum": 1},
        "fiber": _str_array,
        "generators": _expr_nested,
    },
    "required": ["kind"],
    "additionalProperties": False,
}

# parameters understood by at least one task kind
TASK_KEYS = ("tol", "samples", "box", "x", "f", "expect", "sample_tol", "h", "transformations",
             "with", "candidate", "curve", "loop", "f0", "steps", "source", "periods", "stokes",
             "expect_angle", "rect", "grid", "coords", "point")


CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "properties": {
        "seed": {"type": "integer", "minimum": 0},
        "bundle": {
            "type": "object",
            "properties": {
                "m": {"type": "integer", "minimum": 1},
                "n": {"type": "integer", "minimum": 1},
                "base": {**_str_array, "minItems": 1},
                "fiber": {**_str_array, "minItems": 1},
            },
            "additionalProperties": False,
        },
        "connection": {
            "type": "object",
            "properties": {
                "gamma": _expr_nested,
                "linear": _expr_nested,
                "induced": {"type": "boolean"},
            },
            "additionalProperties": False,
        },
        "group": {
            "type": "object",
            "properties": {
                "name": {"type": "string"},
                "basis": {"type": "array", "items": {"type": "array"}},
                "kind": {"enum": ["u1", "so", "su2", "general"]},
            },
            "additionalProperties": False,
        },
        "gauge": {
            "type": "object",
            "properties": {"coeffs": _expr_nested, "matrices": _expr_nested},
            "additionalProperties": False,
        },
        "action": _action_schema,
        "section": {
            "type": "object",
            "properties": {"components": _str_array},
            "required": ["components"],
            "additionalProperties": False,
        },
        "curve": {
            "type": "object",
            "additionalProperties": {
                "type": "object",
                "properties": {
                    "x": _str_array,
                    "t0": _scalar,
                    "t1": _scalar,
                    "param": {"type": "string"},
                    "path": _str_array,
                },
                "additionalProperties": False,
            },
        },
        "tolerances": {
            "type": "object",
            "propertyNames": {"enum": list(DEFAULT_TOLERANCES)},
            "additionalProperties": {"type": "number", "exclusiveMinimum": 0},
        },
        "task": {
            "type": "object",
            "propertyNames": {"pattern": "^[0-9]+$"},
            "additionalProperties": {
                "type": "object",
                "properties": {"kind": {"enum": list(TASK_KINDS)},
                               **{k: {} for k in TASK_KEYS}},
                "required": ["kind"],
                "additionalProperties": False,
            },
        },
    },
    "additionalProperties": False,
}


class ConfigError(ValueError):
    """Schema, parse or consistency problem; maps to exit code 2."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path or '<root>'}: {message}")


# ---------------------------------------------------------------------------
# loading


def resolve_config(name: str) -> tuple[str, str]:
    """Return ``(label, text)`` for a file path or a bundled config name."""
    p = FsPath(name)
    if p.is_file():
        return str(p), p.read_text(encoding="utf-8")
    stem = name[:-5] if name.endswith(".toml") else name
    if stem in BUNDLED:
        res = resources.files("ehresmann").joinpath("configs", stem + ".toml")
        return f"<bundled:{stem}>", res.read_text(encoding="utf-8")
    raise ConfigError("", f"no such config file or bundled config: {name!r}")


def parse_config_text(text: str) -> dict:
    try:
        cfg = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("", f"TOML syntax error: {exc}") from exc
    validate_config(cfg)
    return cfg


def validate_config(cfg: dict) -> None:
    v = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(v.iter_errors(cfg), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        e = errors[0]
        path = "/" + "/".join(str(p) for p in e.absolute_path)
        raise ConfigError(path, e.message)


def _const(v, path: str) -> float:
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return float(v)
    try:
        return float(Compiled([parse_expr(str(v), [])], [])([])[0])
    except ExprError as exc:
        raise ConfigError(path, f"bad constant expression {v!r}: {exc}") from exc


def _consts(vs, path: str) -> list:
    return [_const(v, f"{path}/{i}") for i, v in enumerate(vs)]


# ---------------------------------------------------------------------------
# setup


@dataclass
class Setup:
    chart: BundleChart | None = None
    connection: ChristoffelField | None = None
    linear: LinearChristoffel | None = None
    group: MatrixLieGroup | None = None
    gauge: GaugeField | None = None
    action: ActionGenerators | None = None
    rep: RepresentationMatrices | None = None
    action_kind: str | None = None
    section: SectionField | None = None
    curves: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)


def _build_action(entry: dict, group: MatrixLieGroup, path: str):
    kind = entry["kind"]
    fiber = entry.get("fiber")
    rep = None
    if kind == "standard":
        rep = RepresentationMatrices.standard(group)
    elif kind == "adjoint":
        rep = RepresentationMatrices.adjoint(group)
    elif kind == "trivial":
        rep = RepresentationMatrices.trivial(group, int(entry.get("n", 1)))
    elif kind == "charge":
        try:
            rep = RepresentationMatrices.u1_charge(group, int(entry.get("charge", 1)))
        except ValueError as exc:
            raise ConfigError(path, str(exc)) from exc
    elif kind == "left":
        return left_multiplication_action(group), None
    elif kind == "generators":
        if fiber is None or "generators" not in entry:
            raise ConfigError(path, "generator actions need 'fiber' and 'generators'")
        try:
            return ActionGenerators(group, fiber, entry["generators"]), None
        except ExprError as exc:
            raise ConfigError(path + "/generators", str(exc)) from exc
        except ValueError as exc:
            raise ConfigError(path + "/generators", str(exc)) from exc
    if fiber is not None and len(fiber) != rep.n:
        raise ConfigError(path + "/fiber", f"expected {rep.n} fiber names")
    return rep.generators(fiber), rep


def build_setup(cfg: dict) -> Setup:
    """Turn a validated config into library objects; raises ConfigError."""
    S = Setup()
    S.tolerances = dict(DEFAULT_TOLERANCES)
    S.tolerances.update(cfg.get("tolerances", {}))
    try:
        g = cfg.get("group")
        if g is not None:
            if "basis" in g:
                S.group = MatrixLieGroup.from_basis(g.get("name", "custom"), g["basis"],
                                                    g.get("kind", "general"))
            elif "name" in g:
                S.group = MatrixLieGroup.by_name(g["name"])
            else:
                raise ConfigError("/group", "need 'name' or 'basis'")
    except (ValueError, TypeError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("/group", str(exc)) from exc

    b = cfg.get("bundle", {})
    base = b.get("base")
    fiber = b.get("fiber")
    if base is None and "m" in b:
        base = [f"x{i + 1}" for i in range(b["m"])]
    if "action" in cfg:
        if S.group is None:
            raise ConfigError("/action", "an action needs a [group]")
        S.action, S.rep = _build_action(cfg["action"], S.group, "/action")
        S.action_kind = cfg["action"]["kind"]
        if fiber is None:
            fiber = list(S.action.fiber_vars)
        elif tuple(fiber) != S.action.fiber_vars:
            if len(fiber) != S.action.n:
                raise ConfigError("/bundle/fiber", "fiber dimension disagrees with the action")
            S.action, S.rep = _build_action({**cfg["action"], "fiber": fiber}, S.group, "/action")
    if fiber is None and "n" in b:
        fiber = [f"f{i + 1}" for i in range(b["n"])]
    if base is not None and fiber is not None:
        try:
            S.chart = BundleChart(base, fiber)
        except ValueError as exc:
            raise ConfigError("/bundle", str(exc)) from exc

    if "gauge" in cfg:
        if S.group is None or base is None:
            raise ConfigError("/gauge", "a gauge field needs [group] and base variables")
        gsp = cfg["gauge"]
        try:
            if "coeffs" in gsp:
                S.gauge = GaugeField(S.group, base, gsp["coeffs"])
            elif "matrices" in gsp:
                S.gauge = GaugeField.from_matrices(S.group, base, gsp["matrices"])
            else:
                raise ConfigError("/gauge", "need 'coeffs' or 'matrices'")
        except ConfigError:
            raise
        except (ExprError, ValueError) as exc:
            raise ConfigError("/gauge", str(exc)) from exc

    con = cfg.get("connection")
    if con is not None:
        if sum(k in con for k in ("gamma", "linear", "induced")) != 1:
            raise ConfigError("/connection", "give exactly one of gamma, linear, induced")
        try:
            if "gamma" in con:
                S.connection = ChristoffelField(_need_chart(S, "/connection"), con["gamma"])
            elif "linear" in con:
                S.linear = LinearChristoffel(_need_chart(S, "/connection"), con["linear"])
                S.connection = S.linear.embed()
            elif con["induced"]:
                if S.gauge is None or S.action is None:
                    raise ConfigError("/connection", "induced connection needs [gauge] and [action]")
                S.connection = induce_connection(S.gauge, S.action)
                if S.rep is not None:
                    S.linear = induce_linear(S.gauge, S.rep, S.action.fiber_vars)
        except ConfigError:
            raise
        except (ExprError, ValueError) as exc:
            raise ConfigError("/connection", str(exc)) from exc

    if "section" in cfg:
        try:
            S.section = SectionField(_need_chart(S, "/section"), cfg["section"]["components"])
        except ConfigError:
            raise
        except (ExprError, ValueError) as exc:
            raise ConfigError("/section/components", str(exc)) from exc

    curves = cfg.get("curve", {})
    for name, entry in curves.items():
        if "x" in entry:
            try:
                S.curves[name] = Curve(entry["x"], _const(entry.get("t0", 0.0), f"/curve/{name}/t0"),
                                       _const(entry.get("t1", 1.0), f"/curve/{name}/t1"),
                                       entry.get("param", "t"))
            except (ExprError, ValueError) as exc:
                raise ConfigError(f"/curve/{name}", str(exc)) from exc
    for name, entry in curves.items():
        if "path" in entry:
            try:
                S.curves[name] = Path([S.curves[p] for p in entry["path"]])
            except KeyError as exc:
                raise ConfigError(f"/curve/{name}/path", f"unknown curve {exc.args[0]!r}") from exc
            except ValueError as exc:
                raise ConfigError(f"/curve/{name}/path", str(exc)) from exc
        elif "x" not in entry:
            raise ConfigError(f"/curve/{name}", "need 'x' or 'path'")
    for key, entry in cfg.get("task", {}).items():
        for ref_key in ("curve", "loop"):
            ref = entry.get(ref_key)
            if ref is not None and ref not in S.curves:
                raise ConfigError(f"/task/{key}/{ref_key}", f"no curve named {ref!r}")
    return S


def _need_chart(S: Setup, path: str) -> BundleChart:
    if S.chart is None:
        raise ConfigError(path, "needs a [bundle] with base and fiber variables")
    return S.chart


# ---------------------------------------------------------------------------
# tasks


class TaskError(Exception):
    """A task could not run with the given setup (recorded as a failure)."""


def _need(obj, what: str):
    if obj is None:
        raise TaskError(f"task needs {what}")
    return obj


def _curve(S: Setup, entry: dict, key: str = "curve"):
    name = entry.get(key)
    if name is None or name not in S.curves:
        raise TaskError(f"task needs '{key}' naming a defined curve")
    return S.curves[name]


def _maxabs(a) -> float:
    a = np.asarray(a, dtype=float)
    return float(np.max(np.abs(a))) if a.size else 0.0


def _rand_point(rng, m, n=None, box=1.0):
    x = [float(v) for v in rng.uniform(-box, box, m)]
    if n is None:
        return x
    return x, [float(v) for v in rng.uniform(-box, box, n)]


def task_curvature(S: Setup, entry: dict, rng, tol: dict) -> tuple[bool, dict]:
    G = _need(S.connection, "a [connection]")
    R = curvature_coeffs(G)
    m, n = G.chart.m, G.chart.n
    box = float(entry.get("box", 1.0))
    if "x" in entry:
        pts = [(_consts(entry["x"], "x"), _consts(entry.get("f", [0.0] * n), "f"))]
    else:
        pts = [_rand_point(rng, m, n, box) for _ in range(int(entry.get("samples", 5)))]
    anti = nij = 0.0
    first = None
    for x, f in pts:
        Rv = R(x, f)
        first = Rv if first is None else first
        anti = max(anti, _maxabs(Rv + np.transpose(Rv, (0, 2, 1))))
        nij = max(nij, _maxabs(Rv - nijenhuis_fd(G, x, f)))
    out = {"point": {"x": pts[0][0], "f": pts[0][1]}, "R": first,
           "antisymmetry_residual": anti, "nijenhuis_fd_diff": nij}
    ok = anti <= tol["antisymmetry"] and nij <= tol["nijenhuis"]
    if S.linear is not None:
        Rc = classical_curvature(S.linear)(pts[0][0])
        out["classical"] = Rc
        contracted = np.einsum("amnw,w->amn", Rc, pts[0][1])
        out["contraction_residual"] = _maxabs(contracted - first)
        ok = ok and out["contraction_residual"] <= tol["linear"]
    if "expect" in entry:
        diff = _maxabs(np.asarray(entry["expect"], dtype=float) - first)
        out["expect_diff"] = diff
        ok = ok and diff <= tol.get("task", tol["identity"])
    return ok, out


def task_check_identity(S: Setup, entry: dict, rng, tol: dict):
    G = _need(S.connection, "a [connection]")
    ch = G.chart
    m = ch.m
    s = S.section if S.section is not None else smp.random_section(rng, ch)
    fields = [(BaseVectorField.coordinate(ch, a), BaseVectorField.coordinate(ch, b))
              for a in range(m) for b in range(a + 1, m)]
    fields.append((smp.random_vector_field(rng, ch), smp.random_vector_field(rng, ch)))
    box = float(entry.get("box", 1.0))
    worst = 0.0
    npts = int(entry.get("samples", 20))
    for _ in range(npts):
        x = _rand_point(rng, m, box=box)
        for X, Y in fields:
            worst = max(worst, _maxabs(curvature_identity_residual(G, s, X, Y, x).v))
    t = tol.get("task", tol["identity"])
    return worst <= t, {"max_residual": worst, "samples": npts, "field_pairs": len(fields)}


def task_check_linear(S: Setup, entry: dict, rng, tol: dict):
    G = _need(S.connection, "a [connection]")
    lin, L = is_linear(G, samples=int(entry.get("samples", 50)),
                       tol=float(entry.get("sample_tol", 1e-10)), seed=int(rng.integers(2**31)))
    out = {"linear": lin}
    ok = True
    if lin:
        x, f = _rand_point(rng, G.chart.m, G.chart.n)
        contracted = np.einsum("amnw,w->amn", classical_curvature(L)(x), f)
        out["contraction_residual"] = _maxabs(contracted - curvature_coeffs(G)(x, f))
        ok = out["contraction_residual"] <= tol.get("task", tol["linear"])
    if "expect" in entry:
        ok = ok and lin == bool(entry["expect"])
        out["expected"] = bool(entry["expect"])
    return ok, out


def task_principal_axiom(S: Setup, entry: dict, rng, tol: dict):
    A = _need(S.gauge, "a [gauge] field")
    rep = check_principal_axiom(A, samples=int(entry.get("samples", 10)),
                                seed=int(rng.integers(2**31)), h=float(entry.get("h", 1e-5)),
                                tol=tol.get("task", tol["axiom"]))
    return rep.passed, rep.as_dict()


def task_gauge_covariance(S: Setup, entry: dict, rng, tol: dict):
    A = _need(S.gauge, "a [gauge] field")
    count = int(entry.get("transformations", 25))
    worst = 0.0
    for _ in range(count):
        gam = smp.random_gauge_transformation(rng, A.group, A.base_vars)
        x = _rand_point(rng, A.m)
        worst = max(worst, gauge_covariance_residual(A, gam, x))
    t = tol.get("task", tol["covariance"])
    return worst <= t, {"max_residual": worst, "transformations": count}


def task_induce(S: Setup, entry: dict, rng, tol: dict):
    A = _need(S.gauge, "a [gauge] field")
    K = _need(S.action, "an [action]")
    G = induce_connection(A, K)
    x, f = _rand_point(rng, A.m, K.n)
    out = {"point": {"x": x, "f": f}, "gamma": G(x, f)}
    ok = True
    if S.action_kind == "trivial":
        out["max_abs"] = _maxabs(G(x, f))
        ok = out["max_abs"] == 0.0
    if S.rep is not None:
        lin, _ = is_linear(G, seed=int(rng.integers(2**31)))
        out["linear"] = lin
        ok = ok and lin
    return ok, out


def task_universality(S: Setup, entry: dict, rng, tol: dict):
    A = _need(S.gauge, "a [gauge] field")
    K = _need(S.action, "an [action]")
    G = induce_connection(A, K)
    ch = G.chart
    s = S.section if S.section is not None and S.section.chart == ch else smp.random_section(rng, ch)
    npts = int(entry.get("samples", 100))
    box = float(entry.get("box", 1.0))
    worst = 0.0
    for _ in range(npts):
        x = _rand_point(rng, A.m, box=box)
        X = smp.random_vector_field(rng, ch, depth=1)
        Y = smp.random_vector_field(rng, ch, depth=1)
        worst = max(worst, _maxabs(universality_residual(A, K, s, X, Y, x).v))
    t = tol.get("task", tol["universality"])
    return worst <= t, {"max_residual": worst, "samples": npts}


def task_product(S: Setup, entry: dict, rng, tol: dict):
    A = _need(S.gauge, "a [gauge] field")
    K1 = _need(S.action, "an [action]")
    other = entry.get("with", {"kind": "adjoint"})
    try:
        jsonschema.validate(other, _action_schema)
    except jsonschema.ValidationError as exc:
        raise TaskError(f"bad 'with' action: {exc.message}") from exc
    K2, _ = _build_action(other, A.group, "with")
    rep = product_preservation_check(A, K1, K2, samples=int(entry.get("samples", 20)),
                                     seed=int(rng.integers(2**31)),
                                     tol=tol.get("task", tol["product"]))
    return rep.passed, rep.as_dict()


def task_candidate(S: Setup, entry: dict, rng, tol: dict):
    A = _need(S.gauge, "a [gauge] field")
    L = S.linear
    if L is None:
        rep = _need(S.rep, "a linear connection or a representation action")
        L = induce_linear(A, rep, S.action.fiber_vars)
    cand = entry.get("candidate", {"kind": "rho"})
    if cand.get("kind", "rho") == "rho":
        rep = _need(S.rep, "a representation action for candidate kind 'rho'")
        Sc = StarInfCandidate.constant(A.base_vars, rep)
    else:
        try:
            Sc = StarInfCandidate(A.base_vars, L.chart.n, A.group.d, cand["S"])
        except (KeyError, ExprError, ValueError) as exc:
            raise TaskError(f"bad candidate: {exc}") from exc
    r = check_association_candidate(L, A, Sc, samples=int(entry.get("samples", 20)),
                                    seed=int(rng.integers(2**31)),
                                    tol=tol.get("task", tol["candidate"]))
    expect = {"parallel": True, "representation": True, "curvature": True}
    expect.update(entry.get("expect", {}))
    ok = all(r.verdicts[k] == bool(expect[k]) for k in r.verdicts)
    return ok, {"parallel": r.parallel.as_dict(), "representation": r.representation.as_dict(),
                "curvature": r.curvature.as_dict(), "expected": expect}


def task_transport(S: Setup, entry: dict, rng, tol: dict):
    G = _need(S.connection, "a [connection]")
    c = _curve(S, entry)
    f0 = _consts(entry.get("f0", [1.0] + [0.0] * (G.chart.n - 1)), "f0")
    res = parallel_transport_fiber(G, c, f0, int(entry.get("steps", 1000)))
    out = {"final": res.value, "steps": res.steps, "step_size": res.step_size,
           "error_estimate": res.error_estimate}
    ok = bool(np.all(np.isfinite(res.value)))
    if "expect" in entry:
        out["expect_diff"] = _maxabs(res.value - np.array(_consts(entry["expect"], "expect")))
        ok = ok and out["expect_diff"] <= tol.get("task", tol["transport"])
    return ok, out


def _wrap(a: float) -> float:
    return (a + math.pi) % (2 * math.pi) - math.pi


def task_holonomy(S: Setup, entry: dict, rng, tol: dict):
    loop = _curve(S, entry, "loop")
    source = entry.get("source", "gauge" if S.gauge is not None else "connection")
    steps = int(entry.get("steps", 1000))
    t = tol.get("task", tol["holonomy"])
    periods = _consts(entry["periods"], "periods") if "periods" in entry else None
    if source == "gauge":
        A = _need(S.gauge, "a [gauge] field")
        res = holonomy_loop(A, loop, steps, periods=periods)
    else:
        G = _need(S.connection, "a [connection]")
        f0 = entry.get("f0")
        res = holonomy_loop(G, loop, steps, f0=None if f0 is None else _consts(f0, "f0"),
                            periods=periods)
    H = res.value
    out = {"value": H, "steps": res.steps, "error_estimate": res.error_estimate}
    ok = bool(np.all(np.isfinite(H)))
    if H.ndim == 2 and H.shape == (2, 2):
        out["angle"] = u1_angle(H)
    if "stokes" in entry:
        A = _need(S.gauge, "a [gauge] field for the Stokes comparison")
        if not A.group.is_abelian:
            raise TaskError("Stokes comparison needs an abelian group")
        sp = entry["stokes"]
        fl = flux(field_strength(A), _consts(sp["rect"], "stokes/rect"), int(sp.get("grid", 200)),
                  tuple(sp.get("coords", (0, 1))))
        predicted = -float(fl.value[0])
        out["stokes_angle"] = predicted
        out["stokes_diff"] = abs(_wrap(out["angle"] - predicted))
        ok = ok and out["stokes_diff"] <= t
    if "expect_angle" in entry:
        out["expect_angle_diff"] = abs(_wrap(out["angle"] - _const(entry["expect_angle"], "expect_angle")))
        ok = ok and out["expect_angle_diff"] <= t
    return ok, out


def task_flux(S: Setup, entry: dict, rng, tol: dict):
    A = _need(S.gauge, "a [gauge] field")
    if "rect" not in entry:
        raise TaskError("flux needs 'rect'")
    fl = flux(field_strength(A), _consts(entry["rect"], "rect"), int(entry.get("grid", 200)),
              tuple(entry.get("coords", (0, 1))), entry.get("point"))
    out = {"value": fl.value, "gauge_invariant": fl.gauge_invariant}
    ok = True
    if "expect" in entry:
        exp = np.atleast_1d(np.array(_consts(np.atleast_1d(entry["expect"]).tolist(), "expect")))
        out["expect_diff"] = _maxabs(fl.value - exp)
        ok = out["expect_diff"] <= tol.get("task", tol["flux"])
    return ok, out


def task_reproduce(S: Setup, entry: dict, rng, tol: dict):
    A = _need(S.gauge, "a [gauge] field")
    c = _curve(S, entry)
    rep = reproducing_check(A, c, int(entry.get("steps", 1000)),
                            tol=tol.get("task", tol["reproduce"]))
    return rep.passed, rep.as_dict()


TASKS = {
    "curvature": task_curvature,
    "check-identity": task_check_identity,
    "check-linear": task_check_linear,
    "check-principal-axiom": task_principal_axiom,
    "gauge-covariance": task_gauge_covariance,
    "induce": task_induce,
    "universality": task_universality,
    "product-check": task_product,
    "candidate-check": task_candidate,
    "transport": task_transport,
    "holonomy": task_holonomy,
    "flux": task_flux,
    "reproduce": task_reproduce,
}


@dataclass
class Report:
    seed: int
    tasks: list
    aborted: bool = False

    @property
    def passed(self) -> bool:
        return all(t["passed"] for t in self.tasks)

    @property
    def exit_code(self) -> int:
        if self.aborted:
            return 3
        return 0 if self.passed else 1

    def as_tree(self) -> dict:
        return {"seed": self.seed, "passed": self.passed, "exit_code": self.exit_code,
                "tasks": self.tasks}


def run_config(cfg: dict, seed: int | None = None, tol: float | None = None,
               steps: int | None = None) -> Report:
    """Execute the task list. Task failures are recorded in the report, not raised."""
    S = build_setup(cfg)
    seed = int(cfg.get("seed", 0) if seed is None else seed)
    tasks = cfg.get("task", {})
    entries = []
    aborted = False
    for key in sorted(tasks, key=int):
        task = dict(tasks[key])
        kind = task["kind"]
        if steps is not None and kind in ("transport", "holonomy", "reproduce"):
            task["steps"] = steps
        tol_map = dict(S.tolerances)
        if "tol" in task:
            tol_map["task"] = float(task["tol"])
        if tol is not None:
            tol_map = {k: tol for k in tol_map}
            tol_map["task"] = tol
        rng = np.random.default_rng([seed, int(key)])
        entry = {"index": int(key), "kind": kind}
        try:
            ok, results = TASKS[kind](S, task, rng, tol_map)
            entry["passed"] = bool(ok)
            entry["results"] = results
        except (NumericAbortError, ExprDomainError, FloatingPointError, OverflowError) as exc:
            aborted = True
            entry["passed"] = False
            entry["error"] = f"numeric abort: {exc}"
        except (TaskError, BaseMismatchError, ValueError, ArithmeticError) as exc:
            entry["passed"] = False
            entry["error"] = f"{type(exc).__name__}: {exc}"
        entries.append(entry)
    return Report(seed, entries, aborted)


# ---------------------------------------------------------------------------
# serialization


def _fmt_float(v: float) -> str:
    if math.isnan(v):
        return '"nan"'
    if math.isinf(v):
        return '"inf"' if v > 0 else '"-inf"'
    return format(v, ".17g")


def _canon(obj: Any, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, (np.floating,)):
        obj = float(obj)
    if isinstance(obj, (np.integer,)):
        obj = int(obj)
    if isinstance(obj, (np.bool_,)):
        obj = bool(obj)
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return _fmt_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{_canon(str(k), indent, 0)}: {_canon(obj[k], indent, level + 1)}"
                 for k in sorted(obj, key=str)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj):
            return "[" + ", ".join(_canon(v, indent, level + 1) for v in obj) + "]"
        items = [pad + _canon(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def canonical_json(obj: Any, indent: int = 2) -> str:
    """Deterministic JSON: sorted keys, 17 significant digits, fixed layout."""
    return _canon(obj, indent, 0) + "\n"


def _short(v) -> str:
    if isinstance(v, float):
        return f"{v:.3e}"
    return str(v)


def text_report(report: Report, label: str = "") -> str:
    lines = []
    if label:
        lines.append(f"config: {label}")
    lines.append(f"seed: {report.seed}")
    lines.append(f"{'#':>3}  {'task':<22} {'verdict':<8} details")
    for t in report.tasks:
        verdict = "PASS" if t["passed"] else "FAIL"
        if "error" in t:
            detail = t["error"]
        else:
            res = t["results"]
            keys = [k for k in sorted(res) if isinstance(res[k], (float, int, bool))
                    and not isinstance(res[k], np.ndarray)]
            detail = ", ".join(f"{k}={_short(res[k])}" for k in keys[:5])
        lines.append(f"{t['index']:>3}  {t['kind']:<22} {verdict:<8} {detail}")
    lines.append(f"overall: {'PASS' if report.passed else 'FAIL'} (exit {report.exit_code})")
    return "\n".join(lines) + "\n"
