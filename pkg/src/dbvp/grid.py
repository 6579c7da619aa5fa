"""Mesh functions on the integer grid {0, ..., T+1} and forward differences."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import numpy as np

from .exceptions import GridError


@dataclass(frozen=True, eq=False)
class MeshFunction:
    """Real values at t = 0, ..., T+1, boundary entries stored explicitly.

    The backing array is copied and made read-only on construction.
    """

    T: int
    values: np.ndarray

    def __post_init__(self):
        T = self.T
        if isinstance(T, bool) or not isinstance(T, (int, np.integer)) or T < 1:
            raise GridError(f"grid parameter T must be a positive integer, got {T!r}")
        vals = np.array(self.values, dtype=float)
        if vals.shape != (T + 2,):
            raise GridError(
                f"mesh function on T={T} needs {T + 2} values, got shape {vals.shape}"
            )
        if not np.all(np.isfinite(vals)):
            raise GridError("mesh function values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "T", int(T))
        object.__setattr__(self, "values", vals)

    @classmethod
    def zeros(cls, T):
        return cls(T, np.zeros(T + 2))

    @classmethod
    def from_interior(cls, interior, left=0.0, right=0.0):
        interior = np.asarray(interior, dtype=float)
        return cls(interior.size, np.concatenate(([left], interior, [right])))

    @classmethod
    def from_function(cls, T, func):
        """Tabulate ``func(t)`` at every grid point."""
        return cls(T, [func(t) for t in range(T + 2)])

    @property
    def grid(self):
        return np.arange(self.T + 2)

    @property
    def interior(self):
        return self.values[1:-1]

    def __len__(self):
        return self.T + 2

    def __getitem__(self, t):
        return float(self.values[_check_index(self, t, 0, self.T + 1)])

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)

    def __eq__(self, other):
        if not isinstance(other, MeshFunction):
            return NotImplemented
        return self.T == other.T and np.array_equal(self.values, other.values)

    def __hash__(self):
        return hash((self.T, self.values.tobytes()))

    def __repr__(self):
        return f"MeshFunction(T={self.T}, values={self.values.tolist()!r})"

    def sup_distance(self, other):
        _same_grid(self, other)
        return float(np.max(np.abs(self.values - other.values)))

    def to_json(self):
        return json.dumps(self.values.tolist())

    @classmethod
    def from_json(cls, text):
        data = json.loads(text)
        if not isinstance(data, list) or len(data) < 3:
            raise GridError("expected a JSON array of T+2 >= 3 numbers")
        return cls(len(data) - 2, data)

    def to_csv(self, header=True):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        if header:
            writer.writerow(["t", "value"])
        for t, v in enumerate(self.values):
            writer.writerow([t, repr(float(v))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text):
        rows = [r for r in csv.reader(io.StringIO(text)) if r]
        if rows and rows[0][0].strip() == "t":
            rows = rows[1:]
        ts = [int(r[0]) for r in rows]
        if ts != list(range(len(ts))):
            raise GridError("CSV rows must list t = 0, 1, ..., T+1 in order")
        return cls(len(ts) - 2, [float(r[1]) for r in rows])


def _check_index(y, t, lo, hi):
    if isinstance(t, bool) or not isinstance(t, (int, np.integer)):
        raise GridError(f"grid index must be an integer, got {t!r}")
    if not lo <= t <= hi:
        raise GridError(f"index t={t} outside [{lo}, {hi}] for T={y.T}")
    return int(t)


def _same_grid(a, b):
    if a.T != b.T:
        raise GridError(f"grid mismatch: T={a.T} vs T={b.T}")


def delta(y: MeshFunction, t: int) -> float:
    """Forward difference y(t+1) - y(t), for 0 <= t <= T."""
    t = _check_index(y, t, 0, y.T)
    return float(y.values[t + 1] - y.values[t])


def delta2(y: MeshFunction, t: int) -> float:
    """Second difference centred at t: y(t+1) - 2 y(t) + y(t-1), for 1 <= t <= T.

    This is the quantity written ``Δ²y(t-1)`` in the boundary value problem.
    """
    t = _check_index(y, t, 1, y.T)
    v = y.values
    return float(v[t + 1] - 2.0 * v[t] + v[t - 1])


def second_difference(values):
    """Vectorized interior second differences of a (T+2,) or (T+2, k) array."""
    v = np.asarray(values, dtype=float)
    return v[2:] - 2.0 * v[1:-1] + v[:-2]
