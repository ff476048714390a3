"""Instance files and reports: canonical JSON that round-trips byte-exactly.

Floats are printed with 17 significant digits, which is enough to recover
the exact binary64 value, so serialize -> parse -> serialize is the
identity on the text.  Keys are emitted sorted and nested lists of scalars
stay on one line, keeping files diffable.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass

import numpy as np

from .model import FlowMatrix, QuadraticCost, TransportationInstance, default_support_tolerance


class InstanceFormatError(ValueError):
    """The document is not a well-formed instance file."""


_REQUIRED_KEYS = {"n", "m", "supplies", "demands", "c"}
_Q_KEYS = {"Q_dense", "Q_diagonal"}
_OPTIONAL_KEYS = {"x0"}


def _format_scalar(value) -> str:
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v) or math.isinf(v):
            raise ValueError("non-finite numbers cannot be serialized")
        return f"{v:.17g}"
    if isinstance(value, str):
        return json.dumps(value)
    raise TypeError(f"unsupported scalar {type(value)!r}")


def _is_scalar(value) -> bool:
    return value is None or isinstance(value, (bool, int, float, str, np.integer, np.floating))


def _emit(value, indent: int) -> str:
    pad = " " * indent
    inner = " " * (indent + 2)
    if _is_scalar(value):
        return _format_scalar(value)
    if isinstance(value, np.ndarray):
        value = value.tolist()
    if isinstance(value, (list, tuple)):
        items = list(value)
        if all(_is_scalar(v) for v in items):
            return "[" + ", ".join(_format_scalar(v) for v in items) + "]"
        body = ",\n".join(inner + _emit(v, indent + 2) for v in items)
        return "[\n" + body + "\n" + pad + "]"
    if isinstance(value, dict):
        if not value:
            return "{}"
        parts = []
        for key in sorted(value):
            if not isinstance(key, str):
                raise TypeError("object keys must be strings")
            parts.append(f'{inner}{json.dumps(key)}: {_emit(value[key], indent + 2)}')
        return "{\n" + ",\n".join(parts) + "\n" + pad + "}"
    raise TypeError(f"unsupported value {type(value)!r}")


def canonical_json(value) -> str:
    """Deterministic JSON text: sorted keys, 17-significant-digit floats."""
    return _emit(value, 0) + "\n"


def content_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class InstanceDocument:
    """Parsed instance file, still close to the wire format."""

    n: int
    m: int
    supplies: np.ndarray
    demands: np.ndarray
    c: np.ndarray
    q_dense: np.ndarray | None
    q_diagonal: np.ndarray | None
    x0: np.ndarray | None

    def instance(self) -> TransportationInstance:
        return TransportationInstance(self.supplies, self.demands)

    def cost(self) -> QuadraticCost:
        if self.q_diagonal is not None:
            return QuadraticCost.from_diagonal(self.q_diagonal, self.c)
        return QuadraticCost(self.q_dense, self.c)

    def flow(self, support_tolerance: float | None = None) -> FlowMatrix | None:
        if self.x0 is None:
            return None
        tol = default_support_tolerance() if support_tolerance is None else support_tolerance
        return FlowMatrix(self.x0, tol)

    def as_dict(self) -> dict:
        doc: dict = {
            "n": self.n,
            "m": self.m,
            "supplies": [float(v) for v in self.supplies],
            "demands": [float(v) for v in self.demands],
            "c": [float(v) for v in self.c],
        }
        if self.q_diagonal is not None:
            doc["Q_diagonal"] = [float(v) for v in self.q_diagonal]
        else:
            doc["Q_dense"] = [[float(v) for v in row] for row in self.q_dense]
        if self.x0 is not None:
            doc["x0"] = [float(v) for v in self.x0]
        return doc

    def serialize(self) -> str:
        return canonical_json(self.as_dict())


def _number_vector(raw, key: str, length: int) -> np.ndarray:
    if not isinstance(raw, list) or len(raw) != length:
        raise InstanceFormatError(f"'{key}' must be an array of {length} numbers")
    out = np.empty(length)
    for k, v in enumerate(raw):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise InstanceFormatError(f"'{key}[{k}]' is not a number")
        if math.isnan(v) or math.isinf(v):
            raise InstanceFormatError(f"'{key}[{k}]' is not finite")
        out[k] = float(v)
    return out


def parse_instance_text(text: str) -> InstanceDocument:
    """Parse and structurally validate an instance document.

    Unknown keys, wrong lengths, a missing or doubled Q key, and exact
    asymmetry of Q_dense are all rejected here; value-level problems such
    as an unbalanced instance are left to ``validate_instance``.
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceFormatError(f"not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise InstanceFormatError("top level must be an object")
    keys = set(raw)
    unknown = keys - _REQUIRED_KEYS - _Q_KEYS - _OPTIONAL_KEYS
    if unknown:
        raise InstanceFormatError(f"unknown keys: {sorted(unknown)}")
    missing = _REQUIRED_KEYS - keys
    if missing:
        raise InstanceFormatError(f"missing keys: {sorted(missing)}")
    q_given = keys & _Q_KEYS
    if len(q_given) != 1:
        raise InstanceFormatError("exactly one of 'Q_dense' or 'Q_diagonal' is required")

    for key in ("n", "m"):
        if isinstance(raw[key], bool) or not isinstance(raw[key], int) or raw[key] < 1:
            raise InstanceFormatError(f"'{key}' must be a positive integer")
    n, m = raw["n"], raw["m"]
    cells = n * m
    supplies = _number_vector(raw["supplies"], "supplies", n)
    demands = _number_vector(raw["demands"], "demands", m)
    c = _number_vector(raw["c"], "c", cells)

    q_dense = q_diagonal = None
    if "Q_diagonal" in raw:
        q_diagonal = _number_vector(raw["Q_diagonal"], "Q_diagonal", cells)
    else:
        rows = raw["Q_dense"]
        if not isinstance(rows, list) or len(rows) != cells:
            raise InstanceFormatError(f"'Q_dense' must be an array of {cells} rows")
        q_dense = np.vstack([_number_vector(row, f"Q_dense[{k}]", cells) for k, row in enumerate(rows)])
        if not np.array_equal(q_dense, q_dense.T):
            raise InstanceFormatError("'Q_dense' must be exactly symmetric")

    x0 = _number_vector(raw["x0"], "x0", cells) if "x0" in raw else None
    return InstanceDocument(n, m, supplies, demands, c, q_dense, q_diagonal, x0)


def document_from_parts(
    inst: TransportationInstance,
    cost: QuadraticCost,
    x0: np.ndarray | None,
) -> InstanceDocument:
    return InstanceDocument(
        n=inst.n,
        m=inst.m,
        supplies=inst.supplies,
        demands=inst.demands,
        c=cost.c,
        q_dense=None if cost.diagonal else cost.Q,
        q_diagonal=np.diag(cost.Q) if cost.diagonal else None,
        x0=None if x0 is None else np.asarray(x0, dtype=float),
    )
