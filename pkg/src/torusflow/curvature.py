"""Sectional curvature of the right-invariant metric at the identity (b = 2).

Two independent routes to the same number:

* the direct route pairs the local curvature tensor
  R(u,v)w = D1Gamma(w,u)v - D1Gamma(w,v)u + Gamma(Gamma(w,v),u) - Gamma(Gamma(w,u),v)
  against u,
* the formula route evaluates S(u,v) = <Gamma(u,v),Gamma(u,v)>
  - <Gamma(u,u),Gamma(v,v)> + R(u,v), where R(u,v) is a fixed twelve-term
  expression in gradients of u and v.

Their agreement on random band-limited data is the main correctness oracle;
closed-form positive values on span{e_i, sin(k1 x) sin(k2 y) (1,1)} pin the
absolute normalization.  All pairings default to the metric (A-weighted)
inner product; a plain L^2 switch is kept for exploration since the
twelve-term expression is reported with a single pairing symbol.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import christoffel, validate_b
from .flow import DiffeoMap, christoffel_conjugated
from .spectral import (
    DEFAULT_PAD_FACTOR,
    ScalarField,
    TorusGrid,
    VectorField,
    gradient,
    h1_inner,
    l2_inner,
)

__all__ = [
    "CurvatureReport",
    "d1_gamma",
    "curvature_tensor",
    "sectional_direct",
    "gamma_terms",
    "r_term",
    "sectional_formula",
    "closed_form_S",
    "mode_field",
    "basis_field",
]

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class CurvatureReport:
    """Both curvature routes for one plane plus their decomposition."""

    s_formula: float
    s_direct: float
    gamma_terms: float
    r_term: float

    @property
    def agreement(self) -> float:
        return abs(self.s_formula - self.s_direct)


def _pairing(name: str):
    if name == "metric":
        return h1_inner
    if name == "plain":
        return l2_inner
    raise ValueError(f"unknown pairing {name!r}; use 'metric' or 'plain'")


def d1_gamma(w: VectorField, u: VectorField, v: VectorField, b=2.0,
             pad_factor: int = DEFAULT_PAD_FACTOR) -> VectorField:
    """Derivative of the conjugated connection with respect to the
    configuration, in direction v, at the identity:

        D1Gamma(w, u)v = -Gamma(grad w . v, u) - Gamma(grad u . v, w)
                         + grad(Gamma(w, u)) . v
    """
    b = validate_b(b)
    gam = christoffel(w, u, b, pad_factor)
    return (
        gradient(gam).dot(v, pad_factor)
        - christoffel(gradient(w).dot(v, pad_factor), u, b, pad_factor)
        - christoffel(gradient(u).dot(v, pad_factor), w, b, pad_factor)
    )


def d1_gamma_fd(w: VectorField, u: VectorField, v: VectorField, b=2.0,
                eps: float = 1e-4, pad_factor: int = DEFAULT_PAD_FACTOR) -> VectorField:
    """Central finite difference of eps -> Gamma_{id + eps v}(w, u); oracle for d1_gamma."""
    plus = christoffel_conjugated(DiffeoMap(eps * v), w, u, b, pad_factor)
    minus = christoffel_conjugated(DiffeoMap((-eps) * v), w, u, b, pad_factor)
    return (1.0 / (2.0 * eps)) * (plus - minus)


def curvature_tensor(u: VectorField, v: VectorField, w: VectorField, b=2.0,
                     pad_factor: int = DEFAULT_PAD_FACTOR) -> VectorField:
    """Local curvature tensor R(u, v)w at the identity; antisymmetric in (u, v)."""
    b = validate_b(b)
    return (
        d1_gamma(w, u, v, b, pad_factor)
        - d1_gamma(w, v, u, b, pad_factor)
        + christoffel(christoffel(w, v, b, pad_factor), u, b, pad_factor)
        - christoffel(christoffel(w, u, b, pad_factor), v, b, pad_factor)
    )


def sectional_direct(u: VectorField, v: VectorField, b=2.0,
                     pad_factor: int = DEFAULT_PAD_FACTOR) -> float:
    """Unnormalized sectional curvature <R(u,v)v, u> through the tensor route."""
    return h1_inner(curvature_tensor(u, v, v, b, pad_factor), u)


def gamma_terms(u: VectorField, v: VectorField, b=2.0, pairing: str = "metric",
                pad_factor: int = DEFAULT_PAD_FACTOR) -> float:
    """<Gamma(u,v), Gamma(u,v)> - <Gamma(u,u), Gamma(v,v)>."""
    inner = _pairing(pairing)
    guv = christoffel(u, v, b, pad_factor)
    return inner(guv, guv) - inner(
        christoffel(u, u, b, pad_factor), christoffel(v, v, b, pad_factor)
    )


def r_term(u: VectorField, v: VectorField, pairing: str = "metric",
           pad_factor: int = DEFAULT_PAD_FACTOR) -> float:
    """The twelve-term residual part of the curvature formula.

    Vanishes identically when either argument is a constant field; whether
    it vanishes for all pairs is an open question, so nothing beyond the
    constant-slot case is asserted about its value.
    """
    inner = _pairing(pairing)
    ju, jv = gradient(u), gradient(v)
    uu = ju.dot(u, pad_factor)
    uv = ju.dot(v, pad_factor)
    vu = jv.dot(u, pad_factor)
    vv = jv.dot(v, pad_factor)
    return (
        inner(uu, vv)
        - inner(uv, uv)
        + inner(vu, uv)
        - inner(vu, vu)
        + inner(gradient(uu).dot(v, pad_factor), v)
        - inner(gradient(uv).dot(v, pad_factor), u)
        + inner(gradient(vu).dot(v, pad_factor), u)
        - inner(gradient(vu).dot(u, pad_factor), v)
        - inner(jv.dot(uu, pad_factor), v)
        - inner(ju.dot(vv, pad_factor), u)
        + inner(jv.dot(vu, pad_factor), u)
        + inner(ju.dot(vu, pad_factor), v)
    )


def sectional_formula(u: VectorField, v: VectorField, pairing: str = "metric",
                      pad_factor: int = DEFAULT_PAD_FACTOR) -> CurvatureReport:
    """Both curvature routes for the plane span{u, v}.

    s_formula is gamma_terms + r_term by construction; s_direct comes from
    the tensor route, so the report's agreement field measures how well the
    two independent computations coincide.
    """
    g = gamma_terms(u, v, 2.0, pairing, pad_factor)
    r = r_term(u, v, pairing, pad_factor)
    return CurvatureReport(
        s_formula=g + r,
        s_direct=sectional_direct(u, v, 2.0, pad_factor),
        gamma_terms=g,
        r_term=r,
    )


def _mode_index(k: float) -> int:
    j = k / TWO_PI
    ji = int(round(j))
    if ji < 1 or abs(j - ji) > 1e-9:
        raise ValueError(f"wavenumber {k} is not a positive multiple of 2*pi")
    return ji


def closed_form_S(i: int, k1: float, k2: float) -> float:
    """Closed-form sectional curvature on span{e_i, sin(k1 x) sin(k2 y) (1,1)}.

    S(e1, v) = (1/8)(2 k1^2 + k2^2)/(1 + k1^2 + k2^2) and S(e2, v) swaps the
    roles of k1 and k2; positive for every admissible wavenumber pair.
    """
    _mode_index(k1), _mode_index(k2)
    if i == 2:
        k1, k2 = k2, k1
    elif i != 1:
        raise ValueError("basis index must be 1 or 2")
    return 0.125 * (2.0 * k1**2 + k2**2) / (1.0 + k1**2 + k2**2)


def basis_field(grid: TorusGrid, i: int) -> VectorField:
    """Constant basis vector field e_i."""
    if i == 1:
        return VectorField.constant(grid, 1.0, 0.0)
    if i == 2:
        return VectorField.constant(grid, 0.0, 1.0)
    raise ValueError("basis index must be 1 or 2")


def mode_field(grid: TorusGrid, k1: float, k2: float) -> VectorField:
    """The product mode sin(k1 x) sin(k2 y) in both components."""
    j1, j2 = _mode_index(k1), _mode_index(k2)
    if j1 >= grid.nx // 2 or j2 >= grid.ny // 2:
        raise ValueError(f"mode ({j1}, {j2}) is not resolvable on grid {grid.shape}")
    X, Y = grid.mesh
    vals = np.sin(TWO_PI * j1 * X) * np.sin(TWO_PI * j2 * Y)
    f = ScalarField(grid, vals)
    return VectorField(f, f)
