"""Why b = 2 with the Helmholtz operator is the special case.

The family m_t = -grad(m).u - (grad u)^T m - (b-1) m div(u), m = Au admits a
metric (least-action) formulation only when the momentum equation agrees with
the Euler equation of the energy 1/2 integral(u . Au).  On complex exponential
modes u_n = e^{i n.z} (1,1) the comparison collapses to finite-dimensional
linear algebra: a pair of diagonal matrices alpha_n, beta_n and the residual
of (i(n1+n2) I - i alpha_n) c = -i beta_n (1,1) over candidate amplitudes c.

This module evaluates those residuals exactly (to rounding) for any b and any
diagonal Fourier-multiplier inertia operator normalized to fix constants.
Only b = 2 with the Helmholtz multiplier zeroes every residual; each other b
is caught by at least one mode.  The operator family checked here is the
diagonal-multiplier one; the full symmetric-isomorphism class is out of
numerical reach and the restriction is deliberate.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .dynamics import validate_b
from .spectral import (
    DEFAULT_PAD_FACTOR,
    ScalarField,
    TorusGrid,
    VectorField,
    divergence,
    gradient,
    helmholtz,
    helmholtz_inverse,
    make_grid,
    scale_field,
)

__all__ = [
    "ModeIndex",
    "DiagonalPair",
    "MultiplierOperator",
    "HELMHOLTZ_OPERATOR",
    "ModeResidual",
    "VerificationReport",
    "build_diagonals",
    "gl3_residual",
    "gl1_residual",
    "verify_theorem",
    "mode_velocity",
]

TWO_PI = 2.0 * np.pi

DEFAULT_TOLERANCE = 1e-11


@dataclass(frozen=True)
class ModeIndex:
    """Nonzero integer lattice mode; physical wavenumber is 2*pi*(n1, n2)."""

    n1: int
    n2: int

    def __post_init__(self):
        if self.n1 != int(self.n1) or self.n2 != int(self.n2):
            raise ValueError("mode indices must be integers")
        if self.n1 == 0 and self.n2 == 0:
            raise ValueError("the zero mode is excluded")

    @property
    def n(self) -> tuple[float, float]:
        return (TWO_PI * self.n1, TWO_PI * self.n2)

    @property
    def n_sq(self) -> float:
        w1, w2 = self.n
        return w1 * w1 + w2 * w2


@dataclass(frozen=True)
class DiagonalPair:
    """Diagonals of the 2x2 matrices entering the mode-wise linear system."""

    alpha: tuple[float, float]
    beta: tuple[float, float]


def build_diagonals(mode: ModeIndex, b) -> DiagonalPair:
    """alpha_n and beta_n for one mode.

    beta never depends on b; alpha is affine in b.  Both are in physical
    (2*pi-scaled) wavenumber units.
    """
    b = validate_b(b)
    w1, w2 = mode.n
    denom = 1.0 + mode.n_sq
    adv = w1 + w2
    alpha = (
        (w1 * (b + 1.0) + (b - 1.0) * w2) / denom + adv,
        (w2 * (b + 1.0) + (b - 1.0) * w1) / denom + adv,
    )
    beta = (3.0 * w1 + w2, 3.0 * w2 + w1)
    return DiagonalPair(alpha=alpha, beta=beta)


def gl3_residual(mode: ModeIndex, b, v_candidate) -> float:
    """Max modulus of (i(n1+n2) I - i alpha_n) c + i beta_n (1,1) componentwise.

    Candidate c = (1 + n^2)(1,1) solves the system iff b = 2; the alternative
    c = (2/b)(1 + n^2)(1,1) solves it for every b but only on the diagonal
    modes n1 = n2.
    """
    c = np.asarray(v_candidate, dtype=complex)
    if c.shape != (2,):
        raise ValueError("candidate must be a pair of complex amplitudes")
    d = build_diagonals(mode, b)
    w1, w2 = mode.n
    adv = w1 + w2
    r0 = (adv - d.alpha[0]) * c[0] + d.beta[0]
    r1 = (adv - d.alpha[1]) * c[1] + d.beta[1]
    return float(max(abs(r0), abs(r1)))


@dataclass(frozen=True)
class MultiplierOperator:
    """Inertia operator acting componentwise as a diagonal Fourier multiplier.

    The symbol maps |k|^2 to a real multiplier; it must be finite, bounded
    away from zero, and equal to 1 at k = 0 so that constants are fixed.
    """

    name: str
    symbol: Callable[[np.ndarray], np.ndarray]

    def values(self, grid: TorusGrid) -> np.ndarray:
        vals = np.asarray(self.symbol(grid.ksq), dtype=float)
        if vals.shape != grid.shape:
            vals = np.broadcast_to(vals, grid.shape).copy()
        if not np.all(np.isfinite(vals)):
            raise ValueError(f"operator {self.name!r} has a non-finite symbol")
        if np.any(np.abs(vals) < 1e-12):
            raise ValueError(f"operator {self.name!r} is not invertible")
        zero = vals[0, 0]
        if abs(zero - 1.0) > 1e-12:
            raise ValueError(
                f"operator {self.name!r} must fix constants (symbol(0) = {zero})"
            )
        return vals

    def apply(self, u: VectorField, inverse: bool = False) -> VectorField:
        vals = self.values(u.grid)
        if inverse:
            vals = 1.0 / vals
        return VectorField(
            ScalarField.from_spectrum(u.grid, u.u1.spectrum * vals),
            ScalarField.from_spectrum(u.grid, u.u2.spectrum * vals),
        )


HELMHOLTZ_OPERATOR = MultiplierOperator("helmholtz", lambda ksq: 1.0 + ksq)


def _momentum_transport(u: VectorField, m: VectorField, div_coeff: float,
                        pad_factor: int) -> VectorField:
    du = divergence(u)
    out = gradient(m).dot(u, pad_factor) + gradient(u).tdot(m, pad_factor)
    if div_coeff != 0.0:
        out = out + div_coeff * scale_field(m, du, pad_factor)
    return out


def gl1_residual(u: VectorField, b, a_spec: MultiplierOperator = HELMHOLTZ_OPERATOR,
                 pad_factor: int = DEFAULT_PAD_FACTOR) -> float:
    """Sup-norm gap between the metric Euler equation for the operator a_spec
    and the b-family momentum equation for the Helmholtz operator.

    With a_spec the Helmholtz multiplier the gap collapses to
    (2 - b) L^{-1}{(Lu) div u}, so it vanishes for every u exactly when b = 2.
    """
    b = validate_b(b)
    if not isinstance(a_spec, MultiplierOperator):
        raise TypeError("unsupported operator descriptor")
    au = a_spec.apply(u)
    metric_side = a_spec.apply(
        _momentum_transport(u, au, 1.0, pad_factor), inverse=True
    )
    lu = helmholtz(u)
    family_side = helmholtz_inverse(
        _momentum_transport(u, lu, b - 1.0, pad_factor)
    )
    return (metric_side - family_side).sup_norm()


def mode_velocity(grid: TorusGrid, mode: ModeIndex, amplitude: float = 1.0) -> VectorField:
    """Real part of amplitude * e^{i n.z} (1,1) sampled on the grid."""
    X, Y = grid.mesh
    vals = amplitude * np.cos(TWO_PI * (mode.n1 * X + mode.n2 * Y))
    f = ScalarField(grid, vals)
    return VectorField(f, f)


@dataclass(frozen=True)
class ModeResidual:
    b: float
    n1: int
    n2: int
    gl3_residual: float
    gl1_residual: float
    tolerance: float = DEFAULT_TOLERANCE

    @property
    def passed(self) -> bool:
        return max(self.gl3_residual, self.gl1_residual) <= self.tolerance

    def as_row(self) -> dict:
        return {
            "b": self.b,
            "n1": self.n1,
            "n2": self.n2,
            "gl3_residual": self.gl3_residual,
            "gl1_residual": self.gl1_residual,
            "pass": self.passed,
        }


@dataclass(frozen=True)
class VerificationReport:
    rows: tuple[ModeResidual, ...]
    tolerance: float = DEFAULT_TOLERANCE

    @property
    def b_values(self) -> tuple[float, ...]:
        seen: list[float] = []
        for row in self.rows:
            if row.b not in seen:
                seen.append(row.b)
        return tuple(seen)

    def passes_for(self, b: float) -> bool:
        rows = [r for r in self.rows if r.b == b]
        return bool(rows) and all(r.passed for r in rows)

    @property
    def consistent_b(self) -> tuple[float, ...]:
        """The b values whose every tested mode has vanishing residuals."""
        return tuple(b for b in self.b_values if self.passes_for(b))

    def as_rows(self) -> list[dict]:
        return [r.as_row() for r in self.rows]


def _grid_for_modes(modes: Sequence[ModeIndex]) -> TorusGrid:
    nmax = max(max(abs(m.n1), abs(m.n2)) for m in modes)
    n = max(16, 4 * nmax)
    if n % 2:
        n += 1
    return make_grid(n, n)


def verify_theorem(b_list: Sequence[float], mode_list: Sequence[tuple[int, int]],
                   grid: TorusGrid | None = None,
                   tolerance: float = DEFAULT_TOLERANCE) -> VerificationReport:
    """Residual table over a b sweep and a mode sweep.

    For each (b, n): the mode-wise linear-system residual with candidate
    (1 + n^2)(1,1), and the operator-level gap on the mode's real part.
    The report's consistent_b lists the b values with an all-zero row; over
    b_list containing {2, 3, 4} that is exactly (2.0,).
    """
    modes = [ModeIndex(n1, n2) for (n1, n2) in mode_list]
    if not modes:
        return VerificationReport(rows=(), tolerance=tolerance)
    if grid is None:
        grid = _grid_for_modes(modes)
    rows = []
    for b in b_list:
        b = validate_b(b)
        for mode in modes:
            candidate = (1.0 + mode.n_sq) * np.ones(2, dtype=complex)
            g3 = gl3_residual(mode, b, candidate)
            g1 = gl1_residual(mode_velocity(grid, mode), b)
            rows.append(ModeResidual(
                b=b, n1=mode.n1, n2=mode.n2,
                gl3_residual=g3, gl1_residual=g1, tolerance=tolerance,
            ))
    return VerificationReport(rows=tuple(rows), tolerance=tolerance)
