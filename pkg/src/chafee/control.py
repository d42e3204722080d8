"""Convolution controls as diagonal sine-mode filters.

A kernel ``h(z) = (1/pi) sum_m h_m cos(mz)`` acts on ``v = sum a_k sin(kx)``
through the antisymmetrised convolution as ``a_k -> h_k a_k``. The constant
mode ``h_0`` cancels in that antisymmetrisation and is not stored. Modes past
the stored length use ``tail_value`` (``+1``: uncontrolled).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .spectral import SpectralField, vertex_mask

KERNEL_NAMES = ("identity", "reflection+", "reflection-", "theorem", "selective")


@dataclass(frozen=True, eq=False)
class FilterKernel:
    h: np.ndarray
    tail_value: float = 1.0

    def __post_init__(self):
        h = np.array(self.h, dtype=float).reshape(-1)
        if not np.all(np.isfinite(h)) or not math.isfinite(self.tail_value):
            raise ValueError("kernel coefficients must be finite")
        h.setflags(write=False)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "tail_value", float(self.tail_value))

    @property
    def truncation(self) -> int:
        return self.h.size

    @property
    def unit_modulus(self) -> bool:
        return bool(np.all(np.abs(self.h) == 1.0) and abs(self.tail_value) == 1.0)

    def coefficients(self, N: int) -> np.ndarray:
        """``h_1..h_N``, extended by ``tail_value`` if needed."""
        if N <= self.truncation:
            return self.h[:N]
        return np.concatenate([self.h, np.full(N - self.truncation, self.tail_value)])

    def __eq__(self, other):
        if not isinstance(other, FilterKernel):
            return NotImplemented
        N = max(self.truncation, other.truncation)
        return bool(
            np.array_equal(self.coefficients(N), other.coefficients(N))
            and self.tail_value == other.tail_value
        )

    def __repr__(self):
        return f"FilterKernel(N={self.truncation}, h={self.h[:6]}..., tail={self.tail_value:g})"


@dataclass(frozen=True)
class ControlParams:
    b: float = 0.0
    kernel: FilterKernel = dc_field(default_factory=lambda: identity_kernel(1))
    tau: float = 0.0

    def __post_init__(self):
        if self.tau != 0.0:
            raise ValueError("delayed control (tau != 0) is not supported")

    def symbol(self, N: int) -> np.ndarray:
        """Diagonal control contribution ``b * (1 - h_k)`` for k = 1..N."""
        return self.b * (1.0 - self.kernel.coefficients(N))


def identity_kernel(N: int) -> FilterKernel:
    return FilterKernel(np.ones(N))


def apply_filter(h: FilterKernel, f: SpectralField) -> SpectralField:
    return SpectralField(h.coefficients(f.truncation) * f.coeffs)


def control_term(p: ControlParams, f: SpectralField) -> SpectralField:
    return SpectralField(p.symbol(f.truncation) * f.coeffs)


def is_member_H(h: FilterKernel, j: int, tilde: bool = False) -> bool:
    """Membership in the vertex isotropy group of ``X_j``.

    ``tilde=True`` tests the smaller group that fixes every multiple of ``j``
    rather than only the odd multiples.
    """
    if j < 1:
        raise ValueError("j must be >= 1")
    if h.tail_value != 1.0:
        return False
    if tilde:
        k = np.arange(1, h.truncation + 1)
        mask = k % j == 0
    else:
        mask = vertex_mask(h.truncation, j)
    return bool(np.all(h.h[mask] == 1.0))


def controlled_mode_count(lam: float) -> int:
    """Largest ``k`` with ``k**2 <= lam``."""
    if lam <= 0:
        raise ValueError("lambda must be positive")
    return math.isqrt(math.floor(lam))


def theorem_kernel(lam: float, N: int) -> FilterKernel:
    """``h_m = -1`` for ``m <= k`` and ``+1`` beyond, with ``k = floor(sqrt(lam))``."""
    k = controlled_mode_count(lam)
    h = np.ones(max(N, k))
    h[:k] = -1.0
    return FilterKernel(h)


def selective_kernel(j: int, lam: float, N: int) -> FilterKernel:
    """Theorem kernel with the odd multiples of ``j`` released to ``+1``.

    The result lies in the isotropy group of ``X_j`` and so leaves ``u_j``
    untouched while still acting on every other low mode.
    """
    if j < 1:
        raise ValueError("j must be >= 1")
    base = theorem_kernel(lam, N)
    h = np.array(base.h)
    h[vertex_mask(h.size, j)] = 1.0
    return FilterKernel(h)


def reflection_kernel(sign: int, N: int) -> FilterKernel:
    """``h_k = sign * (-1)**(k+1)``: the filter form of ``u -> sign * u(pi - x)``.

    The pattern alternates, so it is exact only on the stored ``N`` modes;
    size ``N`` to at least the fields it will filter.
    """
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    k = np.arange(1, N + 1)
    return FilterKernel(sign * np.where(k % 2 == 1, 1.0, -1.0))


def compose(h1: FilterKernel, h2: FilterKernel) -> FilterKernel:
    N = max(h1.truncation, h2.truncation)
    return FilterKernel(h1.coefficients(N) * h2.coefficients(N), h1.tail_value * h2.tail_value)


def kernel_by_name(name: str, N: int, lam: float | None = None, j: int | None = None) -> FilterKernel:
    """Resolve a configuration name to a kernel of length ``N``."""
    if name == "identity":
        return identity_kernel(N)
    if name == "reflection+":
        return reflection_kernel(+1, N)
    if name == "reflection-":
        return reflection_kernel(-1, N)
    if name == "theorem":
        if lam is None:
            raise ValueError("'theorem' kernel needs lambda")
        return theorem_kernel(lam, N)
    if name == "selective":
        if lam is None or j is None:
            raise ValueError("'selective' kernel needs lambda and j")
        return selective_kernel(j, lam, N)
    if name.startswith("file:"):
        return read_kernel_csv(name[5:])
    raise ValueError(f"unknown kernel {name!r}; expected one of {KERNEL_NAMES} or file:<path>")


def write_kernel_csv(path, h: FilterKernel) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["m", "h_m"])
        for m, v in enumerate(h.h, start=1):
            w.writerow([m, format(float(v), ".17g")])
        w.writerow(["tail_value", format(h.tail_value, ".17g")])


def read_kernel_csv(path) -> FilterKernel:
    values = {}
    tail = 1.0
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if [c.strip() for c in header] != ["m", "h_m"]:
            raise ValueError(f"{path}: expected header 'm,h_m'")
        for row in reader:
            if not row:
                continue
            if row[0].strip() == "tail_value":
                tail = float(row[1])
            else:
                values[int(row[0])] = float(row[1])
    N = max(values) if values else 0
    h = np.full(N, tail)
    for m, v in values.items():
        h[m - 1] = v
    return FilterKernel(h, tail)
