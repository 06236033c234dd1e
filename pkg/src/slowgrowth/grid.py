"""Nodal functions on the uniform grid of the unit square, and their text I/O."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class GridFunction:
    """Nodal values ``values[i, j] = u(i h, j h)`` with ``h = 1/N``.

    ``valid`` optionally marks the nodes where the values are meaningful
    (for example after a convolution that cannot reach the boundary).
    """

    values: np.ndarray
    valid: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1] or v.shape[0] < 2:
            raise ValueError(f"expected an (N+1, N+1) array with N >= 1, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("grid values must be finite")
        v = np.ascontiguousarray(v)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if self.valid is not None:
            m = np.asarray(self.valid, dtype=bool)
            if m.shape != v.shape:
                raise ValueError("valid mask shape mismatch")
            m = m.copy()
            m.setflags(write=False)
            object.__setattr__(self, "valid", m)

    @property
    def N(self) -> int:
        return self.values.shape[0] - 1

    @property
    def h(self) -> float:
        return 1.0 / self.N

    def coords(self):
        """Node coordinate arrays (X, Y) with ``X[i, j] = i h``."""
        x = np.linspace(0.0, 1.0, self.N + 1)
        return np.meshgrid(x, x, indexing="ij")

    @classmethod
    def from_function(cls, func, N: int) -> "GridFunction":
        x = np.linspace(0.0, 1.0, N + 1)
        X, Y = np.meshgrid(x, x, indexing="ij")
        return cls(np.asarray(func(X, Y), dtype=float) * np.ones_like(X))

    def scaled(self, s: float) -> "GridFunction":
        return GridFunction(s * self.values, self.valid)


def boundary_mask(N: int) -> np.ndarray:
    m = np.zeros((N + 1, N + 1), dtype=bool)
    m[0, :] = m[-1, :] = m[:, 0] = m[:, -1] = True
    return m


def cell_centers(N: int):
    c = (np.arange(N) + 0.5) / N
    return np.meshgrid(c, c, indexing="ij")


def quadrature_points(N: int):
    """Physical coordinates of the 2x2 Gauss points, shape (N, N, 4, 2)."""
    from .kernels import GAUSS_ST

    h = 1.0 / N
    i = np.arange(N)[:, None, None]
    j = np.arange(N)[None, :, None]
    x = (i + GAUSS_ST[None, None, :, 0]) * h
    y = (j + GAUSS_ST[None, None, :, 1]) * h
    return np.stack(np.broadcast_arrays(x, y), axis=-1)


def write_grid(path, u: GridFunction, metadata: dict | None = None) -> None:
    """Write values row-major with 17 significant digits plus a JSON sidecar."""
    path = Path(path)
    np.savetxt(path, u.values, fmt="%.16e")
    meta = {"N": u.N, "domain": [[0.0, 1.0], [0.0, 1.0]], "layout": "row-major, values[i,j]=u(i/N,j/N)"}
    if metadata:
        meta.update(metadata)
    path.with_name(path.name + ".meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def read_grid(path) -> tuple[GridFunction, dict]:
    path = Path(path)
    values = np.loadtxt(path, ndmin=2)
    meta_path = path.with_name(path.name + ".meta.json")
    meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
    u = GridFunction(values)
    if "N" in meta and meta["N"] != u.N:
        raise ValueError(f"sidecar N={meta['N']} does not match data N={u.N}")
    return u, meta
