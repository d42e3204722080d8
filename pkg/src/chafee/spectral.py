"""Sine-basis representation of Dirichlet functions on (0, pi).

A field is stored as coefficients ``a_1..a_N`` of ``u(x) = sum a_k sin(kx)``
with ``a_k = (2/pi) * int_0^pi u(x) sin(kx) dx``. Grids are the DST-I nodes
``x_i = i*pi/(M+1)``, ``i = 1..M``, so that transforms are exact on the
first ``M`` modes.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import fft

from .errors import TruncationError

EPS = np.finfo(float).eps


@dataclass(frozen=True, eq=False)
class SpectralField:
    coeffs: np.ndarray

    def __post_init__(self):
        a = np.array(self.coeffs, dtype=float).reshape(-1)
        if a.size < 1:
            raise ValueError("a field needs at least one mode")
        if not np.all(np.isfinite(a)):
            raise ValueError("field coefficients must be finite")
        a.setflags(write=False)
        object.__setattr__(self, "coeffs", a)

    @property
    def truncation(self) -> int:
        return self.coeffs.size

    @property
    def modes(self) -> np.ndarray:
        """Wavenumbers 1..N matching ``coeffs``."""
        return np.arange(1, self.truncation + 1)

    @classmethod
    def zeros(cls, N: int) -> "SpectralField":
        return cls(np.zeros(N))

    @classmethod
    def from_modes(cls, modes: dict, N: int) -> "SpectralField":
        """Build a field from ``{k: a_k}``; unspecified modes are zero."""
        a = np.zeros(N)
        for k, v in modes.items():
            if not 1 <= k <= N:
                raise ValueError(f"mode {k} outside 1..{N}")
            a[k - 1] = v
        return cls(a)

    def coeff(self, k: int) -> float:
        return float(self.coeffs[k - 1]) if 1 <= k <= self.truncation else 0.0

    def resized(self, N: int) -> "SpectralField":
        """Zero-pad or truncate to ``N`` modes."""
        if N == self.truncation:
            return self
        a = np.zeros(N)
        n = min(N, self.truncation)
        a[:n] = self.coeffs[:n]
        return SpectralField(a)

    def _aligned(self, other):
        N = max(self.truncation, other.truncation)
        return self.resized(N).coeffs, other.resized(N).coeffs

    def __add__(self, other):
        a, b = self._aligned(other)
        return SpectralField(a + b)

    def __sub__(self, other):
        a, b = self._aligned(other)
        return SpectralField(a - b)

    def __neg__(self):
        return SpectralField(-self.coeffs)

    def __mul__(self, scalar):
        return SpectralField(self.coeffs * float(scalar))

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, SpectralField):
            return NotImplemented
        a, b = self._aligned(other)
        return bool(np.array_equal(a, b))

    def __repr__(self):
        return f"SpectralField(N={self.truncation}, coeffs={np.array2string(self.coeffs[:6], precision=4)}...)"


@dataclass(frozen=True)
class GridSamples:
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).reshape(-1)
        object.__setattr__(self, "values", v)

    @property
    def M(self) -> int:
        return self.values.size

    @property
    def grid(self) -> np.ndarray:
        return grid_points(self.M)


def grid_points(M: int) -> np.ndarray:
    return np.arange(1, M + 1) * np.pi / (M + 1)


def _synthesize_coeffs(a: np.ndarray, M: int) -> np.ndarray:
    N = a.size
    if N <= M:
        padded = np.zeros(M)
        padded[:N] = a
        return fft.dst(padded, type=1) / 2.0
    # more modes than nodes: evaluate the sum directly
    x = grid_points(M)
    return np.sin(np.outer(x, np.arange(1, N + 1))) @ a


def _analyze_values(v: np.ndarray, N: int) -> np.ndarray:
    M = v.size
    if N > M:
        raise TruncationError(f"cannot resolve {N} modes from {M} grid points")
    return fft.dst(v, type=1)[:N] / (M + 1)


def synthesize(field: SpectralField, M: int) -> GridSamples:
    """Evaluate ``sum a_k sin(k x_i)`` on the ``M`` interior DST-I nodes."""
    if M < 1:
        raise ValueError("M must be >= 1")
    return GridSamples(_synthesize_coeffs(field.coeffs, M))


def analyze(samples: GridSamples, N: int) -> SpectralField:
    """Discrete sine coefficients of grid samples.

    This is the trapezoid rule for ``(2/pi) int v sin(kx) dx`` on the DST-I
    nodes; it is exact for any sine polynomial of degree <= M.
    """
    return SpectralField(_analyze_values(samples.values, N))


def sobolev_norm(field: SpectralField, s: float = 0.0) -> float:
    k = field.modes
    return float(np.sqrt(np.sum((1.0 + k * k) ** s * field.coeffs**2)))


def _cube_coeffs(a: np.ndarray) -> np.ndarray:
    # all 4N - 1 alias-free coefficients of u**3
    M = 4 * a.size - 1
    padded = np.zeros(M)
    padded[: a.size] = a
    u = fft.dst(padded, type=1) / 2.0
    return fft.dst(u**3, type=1) / (M + 1)


def cube(field: SpectralField, return_tail: bool = False):
    """Sine coefficients of ``u**3`` truncated to the field's ``N`` modes.

    ``u**3`` carries modes up to ``3N``; evaluating on ``4N - 1`` nodes keeps
    every one of them alias-free. With ``return_tail=True`` the discarded
    energy ``sum_{k>N} c_k**2`` is returned alongside the field.
    """
    N = field.truncation
    c = _cube_coeffs(field.coeffs)
    out = SpectralField(c[:N])
    if return_tail:
        return out, float(np.sum(c[N : 3 * N] ** 2))
    return out


def reflect(field: SpectralField) -> SpectralField:
    """``u(x) -> u(pi - x)``, i.e. ``a_k -> (-1)**(k+1) a_k``."""
    sign = np.where(field.modes % 2 == 1, 1.0, -1.0)
    return SpectralField(sign * field.coeffs)


def vertex_mask(N: int, j: int) -> np.ndarray:
    """Boolean mask of modes ``k = j*l`` with ``l`` odd."""
    if j < 1:
        raise ValueError("vertex index j must be >= 1")
    k = np.arange(1, N + 1)
    return (k % j == 0) & ((k // j) % 2 == 1)


def project_vertex(field: SpectralField, j: int) -> SpectralField:
    return SpectralField(np.where(vertex_mask(field.truncation, j), field.coeffs, 0.0))


def vertex_residual(field: SpectralField, j: int) -> float:
    off = field.coeffs[~vertex_mask(field.truncation, j)]
    return float(np.sqrt(np.sum(off**2))) / max(sobolev_norm(field, 0), EPS)


def sup_norm(field: SpectralField, M: int | None = None) -> float:
    """Grid maximum of ``|u|`` (default grid: ``4N`` nodes)."""
    M = M or 4 * field.truncation
    return float(np.max(np.abs(_synthesize_coeffs(field.coeffs, M))))


def write_field_csv(path, field: SpectralField) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "a_k"])
        for k, a in zip(field.modes, field.coeffs):
            w.writerow([int(k), format(float(a), ".17g")])


def read_field_csv(path) -> SpectralField:
    with open(Path(path), newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path}: no modes")
    N = max(int(r["k"]) for r in rows)
    return SpectralField.from_modes({int(r["k"]): float(r["a_k"]) for r in rows}, N)


def count_zeros(field: SpectralField, M: int | None = None) -> int:
    """Strict sign changes of ``u`` over the interior grid (default ``16N`` nodes).

    Samples with ``|u| <= 1e-14 * max|u|`` are treated as zeros and skipped.
    """
    M = M or 16 * field.truncation
    u = _synthesize_coeffs(field.coeffs, M)
    scale = np.max(np.abs(u))
    if scale == 0.0:
        return 0
    s = np.sign(u[np.abs(u) > 1e-14 * scale])
    return int(np.count_nonzero(s[1:] != s[:-1]))
