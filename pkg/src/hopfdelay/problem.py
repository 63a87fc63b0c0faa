"""Problem-file schema (JSON, schema_version 1) and loading.

Matrices are row-major arrays of arrays; lags are always nonnegative numbers
(the negative-axis convention of the internal math never leaks into files).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .exceptions import SchemaError
from .fde import LinearFDE, PerturbationSpec
from .measures import (
    DensityPiece,
    MatrixDelayMeasure,
    MatrixPiece,
    ScalarDelayDistribution,
    dirac,
    triangular,
    truncated_gamma,
    uniform,
)

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class SimConfig:
    t_end: float
    dt: float
    history: tuple


@dataclass(frozen=True)
class Problem:
    n: int
    linear: LinearFDE
    pert: PerturbationSpec
    nonlinearity: str
    sim: SimConfig | None
    path: str


def _require(obj, key, kind, where):
    if key not in obj:
        raise SchemaError(f"{where}.{key}", "missing required field")
    val = obj[key]
    if kind is float and isinstance(val, (int, float)) and not isinstance(val, bool):
        return float(val)
    if kind is int and isinstance(val, int) and not isinstance(val, bool):
        return val
    if not isinstance(val, kind):
        raise SchemaError(
            f"{where}.{key}", f"expected {kind.__name__}, got {type(val).__name__}"
        )
    return val


def _matrix(obj, n, where):
    arr = np.array(obj, dtype=float)
    if arr.shape != (n, n):
        raise SchemaError(where, f"expected {n}x{n} matrix, got shape {arr.shape}")
    return arr


def distribution_from_json(obj, where, probability=True):
    kind = _require(obj, "type", str, where)
    if kind == "discrete":
        atoms = _require(obj, "atoms", list, where)
        parsed = tuple(
            (
                _require(a, "lag", float, f"{where}.atoms[{i}]"),
                _require(a, "weight", float, f"{where}.atoms[{i}]"),
            )
            for i, a in enumerate(atoms)
        )
        if len(parsed) == 1 and parsed[0][1] == 1.0 and probability:
            return dirac(parsed[0][0])
        tau_max = max((s for s, _ in parsed), default=0.0)
        return ScalarDelayDistribution(
            atoms=parsed, tau_max=tau_max, probability=probability
        )
    if kind == "uniform":
        return uniform(
            _require(obj, "mean", float, where),
            _require(obj, "halfwidth", float, where),
        )
    if kind == "triangular":
        return triangular(
            _require(obj, "mean", float, where),
            _require(obj, "halfwidth", float, where),
        )
    if kind == "truncated_gamma":
        support = _require(obj, "support", list, where)
        if len(support) != 2:
            raise SchemaError(f"{where}.support", "expected [a, b]")
        return truncated_gamma(
            _require(obj, "shape", float, where),
            _require(obj, "rate", float, where),
            (support[0], support[1]),
        )
    if kind == "custom":
        atoms = tuple(
            (
                _require(a, "lag", float, f"{where}.atoms[{i}]"),
                _require(a, "weight", float, f"{where}.atoms[{i}]"),
            )
            for i, a in enumerate(obj.get("atoms", []))
        )
        pieces = []
        for i, d in enumerate(obj.get("densities", [])):
            iv = _require(d, "interval", list, f"{where}.densities[{i}]")
            coeffs = _require(d, "coeffs", list, f"{where}.densities[{i}]")
            pieces.append(DensityPiece(iv[0], iv[1], tuple(coeffs)))
        support = [s for s, _ in atoms] + [pc.b for pc in pieces]
        return ScalarDelayDistribution(
            atoms=atoms,
            pieces=tuple(pieces),
            tau_max=max(support, default=0.0),
            probability=probability,
        )
    raise SchemaError(f"{where}.type", f"unknown distribution type {kind!r}")


def measure_from_json(obj, n, where):
    atoms = []
    for i, a in enumerate(obj.get("atoms", [])):
        lag = _require(a, "lag", float, f"{where}.atoms[{i}]")
        if lag < 0:
            raise SchemaError(f"{where}.atoms[{i}].lag", "lag must be nonnegative")
        atoms.append((lag, _matrix(a.get("matrix"), n, f"{where}.atoms[{i}].matrix")))
    pieces = []
    for i, d in enumerate(obj.get("densities", [])):
        iv = _require(d, "interval", list, f"{where}.densities[{i}]")
        if len(iv) != 2 or iv[0] < 0:
            raise SchemaError(
                f"{where}.densities[{i}].interval", "expected [a, b] with a >= 0"
            )
        mat = _matrix(d.get("matrix"), n, f"{where}.densities[{i}].matrix")
        coeffs = _require(d, "density_coeffs", list, f"{where}.densities[{i}]")
        pieces.append(MatrixPiece(iv[0], iv[1], mat, tuple(coeffs)))
    support = [s for s, _ in atoms] + [pc.b for pc in pieces]
    return MatrixDelayMeasure(
        dim=n,
        atoms=tuple(atoms),
        pieces=tuple(pieces),
        tau_max=max(support, default=0.0),
    )


def load_problem(path):
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(str(path), f"invalid JSON: {exc}") from exc

    version = _require(raw, "schema_version", int, "$")
    if version != SCHEMA_VERSION:
        raise SchemaError("$.schema_version", f"unsupported version {version}")
    n = _require(raw, "n", int, "$")
    if n < 1:
        raise SchemaError("$.n", "dimension must be >= 1")

    eta = measure_from_json(
        _require(raw, "linear_terms", dict, "$"), n, "$.linear_terms"
    )
    g_lin = measure_from_json(
        _require(raw, "g_linearization", dict, "$"), n, "$.g_linearization"
    )

    fb = _require(raw, "feedback", dict, "$")
    kappa = _require(fb, "kappa", float, "$.feedback")
    epsilon = _require(raw, "epsilon", float, "$")
    if epsilon <= 0:
        raise SchemaError("$.epsilon", "epsilon must be positive")

    kwargs = dict(g_lin=g_lin, kappa=kappa, epsilon=epsilon)
    if "measure" in fb:
        kwargs["f_general"] = measure_from_json(
            fb["measure"], n, "$.feedback.measure"
        )
    else:
        kwargs["structure_matrix"] = _matrix(
            fb.get("structure_matrix"), n, "$.feedback.structure_matrix"
        )
        kwargs["distribution"] = distribution_from_json(
            _require(fb, "distribution", dict, "$.feedback"),
            "$.feedback.distribution",
        )
    pert = PerturbationSpec(**kwargs)

    nonlinearity = "none"
    if "nonlinearity" in raw:
        nl = _require(raw, "nonlinearity", dict, "$")
        nonlinearity = _require(nl, "builtin", str, "$.nonlinearity")
        if nonlinearity not in ("van_der_pol", "none"):
            raise SchemaError("$.nonlinearity.builtin", f"unknown {nonlinearity!r}")

    sim = None
    if "simulation" in raw:
        sb = _require(raw, "simulation", dict, "$")
        history = _require(sb, "history", list, "$.simulation")
        if len(history) != n:
            raise SchemaError(
                "$.simulation.history", f"expected {n} components"
            )
        sim = SimConfig(
            t_end=_require(sb, "t_end", float, "$.simulation"),
            dt=_require(sb, "dt", float, "$.simulation"),
            history=tuple(float(x) for x in history),
        )

    fm = pert.feedback_measure()
    tau_max = max(eta.tau_max, g_lin.tau_max, fm.tau_max if fm else 0.0)
    linear = LinearFDE(dim=n, eta=eta, tau_max=tau_max)
    return Problem(
        n=n,
        linear=linear,
        pert=pert,
        nonlinearity=nonlinearity,
        sim=sim,
        path=str(path),
    )
