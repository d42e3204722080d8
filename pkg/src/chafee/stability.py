"""Linearisation of the controlled equation about an equilibrium.

In the sine basis the operator ``v -> v_xx + lam(1 - 3u*^2)v + b(v - C_h v)``
is the symmetric matrix

    A[k, m] = (-k^2 + lam + b(1 - h_k)) delta_km - 3 lam W[k, m],
    W[k, m] = (2/pi) int_0^pi u*^2 sin(kx) sin(mx) dx,

and ``W`` follows from the cosine coefficients ``c_n`` of ``u*^2`` as
``W[k, m] = (c_|k-m| - c_{k+m}) / 2``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy import fft

from .control import ControlParams, control_term, identity_kernel
from .errors import InvasiveControl
from .spectral import SpectralField, _synthesize_coeffs, count_zeros, sobolev_norm

TOL_ZERO = 1e-9
INVASIVE_TOL = 1e-8


def recommended_modes(lam: float) -> int:
    """Truncation that resolves every near-marginal mode at this lambda."""
    return 4 * int(np.ceil(np.sqrt(max(lam, 0.0)))) + 32


def square_cosine_coeffs(u: SpectralField, n_max: int) -> np.ndarray:
    """``c_n = (2/pi) int u^2 cos(nx) dx`` for ``n = 0..n_max`` (alias-free)."""
    N = u.truncation
    P = max(4 * N, n_max + 1)
    inner = _synthesize_coeffs(u.coeffs, P - 1)
    sq = np.concatenate([[0.0], inner**2, [0.0]])
    return fft.dct(sq, type=1)[: n_max + 1] / P


def potential_matrix(u: SpectralField, N: int) -> np.ndarray:
    c = square_cosine_coeffs(u, 2 * N)
    k = np.arange(1, N + 1)
    return 0.5 * (c[np.abs(k[:, None] - k[None, :])] - c[k[:, None] + k[None, :]])


def assemble(u_star: SpectralField, lam: float, p: ControlParams | None = None, N: int | None = None) -> np.ndarray:
    N = N or u_star.truncation
    p = p or ControlParams(0.0, identity_kernel(N))
    u = u_star.resized(N)
    k = np.arange(1, N + 1)
    A = np.diag(-(k**2.0) + lam + p.symbol(N))
    if np.any(u.coeffs):
        A -= 3.0 * lam * potential_matrix(u, N)
    return A


@dataclass(frozen=True)
class LinearizationReport:
    eigenvalues: np.ndarray
    eigenvectors: tuple
    morse_index: int
    margin: float
    zero_counts: tuple

    def to_json(self) -> dict:
        return {
            "eigenvalues": [float(x) for x in self.eigenvalues],
            "morse_index": self.morse_index,
            "margin": self.margin,
            "zero_counts": list(self.zero_counts),
        }

    def write(self, json_path=None, csv_path=None):
        if json_path is not None:
            with open(json_path, "w") as fh:
                json.dump(self.to_json(), fh, indent=2)
                fh.write("\n")
        if csv_path is not None:
            with open(csv_path, "w") as fh:
                fh.write("n,mu_n\n")
                for n, mu in enumerate(self.eigenvalues, start=1):
                    fh.write(f"{n},{float(mu):.17g}\n")


def spectrum(matrix: np.ndarray, with_zero_counts: bool = True) -> LinearizationReport:
    """Symmetric eigendecomposition, eigenvalues in descending order.

    Each eigenvector is unit-normalised with its first nonzero coefficient
    positive.
    """
    A = np.asarray(matrix, dtype=float)
    if not np.allclose(A, A.T, rtol=0, atol=1e-12 * max(1.0, np.abs(A).max())):
        raise ValueError("matrix is not symmetric")
    mu, V = np.linalg.eigh(0.5 * (A + A.T))
    order = np.argsort(mu)[::-1]
    mu, V = mu[order], V[:, order]
    vectors = []
    for n in range(V.shape[1]):
        v = V[:, n]
        nz = np.flatnonzero(np.abs(v) > 1e-12)
        if nz.size and v[nz[0]] < 0:
            v = -v
        vectors.append(SpectralField(v))
    zc = tuple(count_zeros(v) for v in vectors) if with_zero_counts else ()
    return LinearizationReport(
        eigenvalues=mu,
        eigenvectors=tuple(vectors),
        morse_index=int(np.count_nonzero(mu > TOL_ZERO)),
        margin=float(mu[0]),
        zero_counts=zc,
    )


def theorem_spectrum(lam_j: float, b: float, h, N: int) -> np.ndarray:
    """Eigenvalues ``-k^2 + lam_j + b(1 - h_k)`` of the control-linearised trivial state."""
    k = np.arange(1, N + 1)
    return -(k**2.0) + lam_j + b * (1.0 - h.coefficients(N))


@dataclass(frozen=True)
class Verdict:
    stable: bool
    margin: float
    morse_index: int
    report: LinearizationReport | None = None

    def __str__(self):
        if self.stable:
            return f"Stable(margin={self.margin:.6g})"
        return f"Unstable({self.morse_index}, margin={self.margin:.6g})"


def verdict(u_star: SpectralField, lam: float, p: ControlParams | None = None, N: int | None = None) -> Verdict:
    """Stability of ``u_star`` under the controlled dynamics.

    Raises :class:`InvasiveControl` when the control term does not vanish on
    ``u_star``: then ``u_star`` is no equilibrium of the controlled system and
    its linearisation says nothing.
    """
    N = N or u_star.truncation
    p = p or ControlParams(0.0, identity_kernel(N))
    if np.any(u_star.coeffs):
        cn = sobolev_norm(control_term(p, u_star), 0)
        if cn >= INVASIVE_TOL:
            raise InvasiveControl(f"control term has norm {cn:.3g} on the target", cn)
    rep = spectrum(assemble(u_star, lam, p, N), with_zero_counts=False)
    stable = bool(rep.eigenvalues[0] < -TOL_ZERO)
    return Verdict(stable, rep.margin, rep.morse_index, rep)
