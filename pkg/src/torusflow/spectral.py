"""Spectral fields on the flat torus (R/Z)^2.

Everything downstream (dynamics, flows, curvature) is built on the small
set of primitives in this module: uniform grids, real scalar/vector fields
with cached Fourier spectra, exact differentiation, the Helmholtz operator
1 - Laplacian and its inverse, Parseval inner products, dealiased pointwise
products, and direct trigonometric evaluation at off-grid points.

Conventions
-----------
* The period is 1 in each direction; mode (j1, j2) has physical wavenumber
  (2*pi*j1, 2*pi*j2).
* Spectra are normalized so the (0, 0) coefficient is the field mean:
  spectrum = fft2(values) / (nx * ny).
* First derivatives zero the unpaired Nyquist mode so real fields stay
  real; the Helmholtz symbol 1 + |k|^2 is kept on all modes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

__all__ = [
    "TorusGrid",
    "ScalarField",
    "VectorField",
    "JacobianField",
    "make_grid",
    "transform",
    "inverse_transform",
    "partial_x",
    "partial_y",
    "gradient",
    "divergence",
    "laplacian",
    "helmholtz",
    "helmholtz_inverse",
    "l2_inner",
    "h1_inner",
    "pointwise_product",
    "eval_offgrid",
    "random_bandlimited",
]

DEFAULT_PAD_FACTOR = 2


@dataclass(frozen=True)
class TorusGrid:
    """Uniform nx-by-ny sampling of [0,1)^2 with samples x_j = j/nx, y_k = k/ny."""

    nx: int
    ny: int

    def __post_init__(self):
        for name, n in (("nx", self.nx), ("ny", self.ny)):
            if n < 4 or n % 2 != 0:
                raise ValueError(f"{name}={n}: grid dimensions must be even and >= 4")

    @cached_property
    def x(self) -> np.ndarray:
        return np.arange(self.nx) / self.nx

    @cached_property
    def y(self) -> np.ndarray:
        return np.arange(self.ny) / self.ny

    @cached_property
    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """(X, Y) coordinate arrays of shape (nx, ny)."""
        return np.meshgrid(self.x, self.y, indexing="ij")

    @cached_property
    def points(self) -> np.ndarray:
        """All grid points as an (nx*ny, 2) array, row-major in (x, y)."""
        X, Y = self.mesh
        return np.column_stack([X.ravel(), Y.ravel()])

    @cached_property
    def modes_x(self) -> np.ndarray:
        """Integer modes j1 in [-nx/2, nx/2), FFT ordering."""
        return np.fft.fftfreq(self.nx, d=1.0 / self.nx)

    @cached_property
    def modes_y(self) -> np.ndarray:
        return np.fft.fftfreq(self.ny, d=1.0 / self.ny)

    @cached_property
    def kx(self) -> np.ndarray:
        """Physical wavenumbers 2*pi*j1 as an (nx, 1) column."""
        return (2.0 * np.pi * self.modes_x)[:, None]

    @cached_property
    def ky(self) -> np.ndarray:
        return (2.0 * np.pi * self.modes_y)[None, :]

    @cached_property
    def ksq(self) -> np.ndarray:
        return self.kx**2 + self.ky**2

    @cached_property
    def dx_symbol(self) -> np.ndarray:
        """Multiplier of d/dx; the Nyquist column is zeroed."""
        jx = self.modes_x.copy()
        jx[self.nx // 2] = 0.0
        return (2j * np.pi * jx)[:, None]

    @cached_property
    def dy_symbol(self) -> np.ndarray:
        jy = self.modes_y.copy()
        jy[self.ny // 2] = 0.0
        return (2j * np.pi * jy)[None, :]

    @cached_property
    def helmholtz_symbol(self) -> np.ndarray:
        return 1.0 + self.ksq

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)


def make_grid(nx: int, ny: int) -> TorusGrid:
    """Build a TorusGrid; rejects odd or undersized dimensions."""
    return TorusGrid(int(nx), int(ny))


def _as_values(grid: TorusGrid, values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    if values.shape != grid.shape:
        raise ValueError(f"field shape {values.shape} does not match grid {grid.shape}")
    out = values.copy()
    out.flags.writeable = False
    return out


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Real periodic scalar field given by point samples on a TorusGrid."""

    grid: TorusGrid
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _as_values(self.grid, self.values))

    @classmethod
    def from_spectrum(cls, grid: TorusGrid, spectrum: np.ndarray) -> "ScalarField":
        values = np.fft.ifft2(spectrum * (grid.nx * grid.ny)).real
        f = cls(grid, values)
        spec = np.asarray(spectrum, dtype=np.complex128).copy()
        spec.flags.writeable = False
        f.__dict__["spectrum"] = spec
        return f

    @cached_property
    def spectrum(self) -> np.ndarray:
        spec = np.fft.fft2(self.values) / (self.grid.nx * self.grid.ny)
        spec.flags.writeable = False
        return spec

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def mean(self) -> float:
        return float(np.mean(self.values))

    def _check_same_grid(self, other: "ScalarField"):
        if self.grid != other.grid:
            raise ValueError("fields live on different grids")

    def __add__(self, other):
        if isinstance(other, ScalarField):
            self._check_same_grid(other)
            return ScalarField(self.grid, self.values + other.values)
        return ScalarField(self.grid, self.values + float(other))

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, ScalarField):
            self._check_same_grid(other)
            return ScalarField(self.grid, self.values - other.values)
        return ScalarField(self.grid, self.values - float(other))

    def __mul__(self, c):
        return ScalarField(self.grid, self.values * float(c))

    __rmul__ = __mul__

    def __neg__(self):
        return ScalarField(self.grid, -self.values)


@dataclass(frozen=True, eq=False)
class VectorField:
    """Pair of scalar fields (u1, u2) on a common grid."""

    u1: ScalarField
    u2: ScalarField

    def __post_init__(self):
        if self.u1.grid != self.u2.grid:
            raise ValueError("vector field components live on different grids")

    @classmethod
    def from_values(cls, grid: TorusGrid, v1: np.ndarray, v2: np.ndarray) -> "VectorField":
        return cls(ScalarField(grid, v1), ScalarField(grid, v2))

    @classmethod
    def constant(cls, grid: TorusGrid, c1: float, c2: float) -> "VectorField":
        return cls.from_values(grid, np.full(grid.shape, float(c1)), np.full(grid.shape, float(c2)))

    @classmethod
    def zero(cls, grid: TorusGrid) -> "VectorField":
        return cls.constant(grid, 0.0, 0.0)

    @property
    def grid(self) -> TorusGrid:
        return self.u1.grid

    @property
    def components(self) -> tuple[ScalarField, ScalarField]:
        return (self.u1, self.u2)

    def sup_norm(self) -> float:
        return max(self.u1.sup_norm(), self.u2.sup_norm())

    def __add__(self, other: "VectorField") -> "VectorField":
        return VectorField(self.u1 + other.u1, self.u2 + other.u2)

    def __sub__(self, other: "VectorField") -> "VectorField":
        return VectorField(self.u1 - other.u1, self.u2 - other.u2)

    def __mul__(self, c) -> "VectorField":
        return VectorField(self.u1 * c, self.u2 * c)

    __rmul__ = __mul__

    def __neg__(self) -> "VectorField":
        return VectorField(-self.u1, -self.u2)


@dataclass(frozen=True)
class JacobianField:
    """Matrix field with entry (i, j) = d u_i / d x_j."""

    d11: ScalarField
    d12: ScalarField
    d21: ScalarField
    d22: ScalarField

    @property
    def grid(self) -> TorusGrid:
        return self.d11.grid

    def dot(self, v: VectorField, pad_factor: int = DEFAULT_PAD_FACTOR) -> VectorField:
        """Matrix-vector product (J v)_i = sum_j J_ij v_j with dealiased products."""
        return VectorField(
            pointwise_product(self.d11, v.u1, pad_factor) + pointwise_product(self.d12, v.u2, pad_factor),
            pointwise_product(self.d21, v.u1, pad_factor) + pointwise_product(self.d22, v.u2, pad_factor),
        )

    def tdot(self, w: VectorField, pad_factor: int = DEFAULT_PAD_FACTOR) -> VectorField:
        """Transposed product (J^T w)_i = sum_j J_ji w_j with dealiased products."""
        return VectorField(
            pointwise_product(self.d11, w.u1, pad_factor) + pointwise_product(self.d21, w.u2, pad_factor),
            pointwise_product(self.d12, w.u1, pad_factor) + pointwise_product(self.d22, w.u2, pad_factor),
        )

    def dot_pointwise(self, v: VectorField) -> VectorField:
        """Plain grid-sample matrix-vector product (no dealiasing)."""
        g = self.grid
        return VectorField.from_values(
            g,
            self.d11.values * v.u1.values + self.d12.values * v.u2.values,
            self.d21.values * v.u1.values + self.d22.values * v.u2.values,
        )

    def tdot_pointwise(self, w: VectorField) -> VectorField:
        g = self.grid
        return VectorField.from_values(
            g,
            self.d11.values * w.u1.values + self.d21.values * w.u2.values,
            self.d12.values * w.u1.values + self.d22.values * w.u2.values,
        )

    def det(self) -> ScalarField:
        return ScalarField(
            self.grid,
            self.d11.values * self.d22.values - self.d12.values * self.d21.values,
        )


def transform(f: ScalarField) -> np.ndarray:
    """Fourier coefficients of f, normalized so mode (0,0) is the mean."""
    return f.spectrum


def inverse_transform(grid: TorusGrid, spectrum: np.ndarray) -> ScalarField:
    """Synthesize a real field from coefficients (imaginary residue discarded)."""
    spectrum = np.asarray(spectrum, dtype=np.complex128)
    if spectrum.shape != grid.shape:
        raise ValueError(f"spectrum shape {spectrum.shape} does not match grid {grid.shape}")
    return ScalarField.from_spectrum(grid, spectrum)


def _multiply_symbol(f: ScalarField, symbol: np.ndarray) -> ScalarField:
    return ScalarField.from_spectrum(f.grid, f.spectrum * symbol)


def partial_x(f: ScalarField) -> ScalarField:
    return _multiply_symbol(f, f.grid.dx_symbol)


def partial_y(f: ScalarField) -> ScalarField:
    return _multiply_symbol(f, f.grid.dy_symbol)


def gradient(u: VectorField) -> JacobianField:
    return JacobianField(
        partial_x(u.u1), partial_y(u.u1),
        partial_x(u.u2), partial_y(u.u2),
    )


def gradient_scalar(f: ScalarField) -> VectorField:
    return VectorField(partial_x(f), partial_y(f))


def divergence(u: VectorField) -> ScalarField:
    return partial_x(u.u1) + partial_y(u.u2)


def laplacian(f: ScalarField) -> ScalarField:
    return _multiply_symbol(f, -f.grid.ksq)


def helmholtz_scalar(f: ScalarField) -> ScalarField:
    return _multiply_symbol(f, f.grid.helmholtz_symbol)


def helmholtz_inverse_scalar(f: ScalarField) -> ScalarField:
    return _multiply_symbol(f, 1.0 / f.grid.helmholtz_symbol)


def helmholtz(u: VectorField) -> VectorField:
    """Momentum map m = (1 - Laplacian) u, applied componentwise."""
    return VectorField(helmholtz_scalar(u.u1), helmholtz_scalar(u.u2))


def helmholtz_inverse(m: VectorField) -> VectorField:
    """Velocity u with (1 - Laplacian) u = m, applied componentwise."""
    return VectorField(helmholtz_inverse_scalar(m.u1), helmholtz_inverse_scalar(m.u2))


def _l2_inner_scalar(f: ScalarField, g: ScalarField) -> float:
    if f.grid != g.grid:
        raise ValueError("fields live on different grids")
    return float(np.real(np.sum(f.spectrum * np.conj(g.spectrum))))


def l2_inner(u: VectorField, v: VectorField) -> float:
    """L^2 pairing sum_i integral(u_i v_i), computed via Parseval."""
    return _l2_inner_scalar(u.u1, v.u1) + _l2_inner_scalar(u.u2, v.u2)


def _h1_inner_scalar(f: ScalarField, g: ScalarField) -> float:
    if f.grid != g.grid:
        raise ValueError("fields live on different grids")
    w = f.grid.helmholtz_symbol
    return float(np.real(np.sum(w * f.spectrum * np.conj(g.spectrum))))


def h1_inner(u: VectorField, v: VectorField) -> float:
    """Metric pairing integral(u . (1 - Laplacian) v), computed via Parseval."""
    return _h1_inner_scalar(u.u1, v.u1) + _h1_inner_scalar(u.u2, v.u2)


def _pad_spectrum(spec: np.ndarray, px: int, py: int) -> np.ndarray:
    nx, ny = spec.shape
    out = np.zeros((px, py), dtype=np.complex128)
    sx, sy = px // 2 - nx // 2, py // 2 - ny // 2
    shifted = np.fft.fftshift(spec)
    out[sx:sx + nx, sy:sy + ny] = shifted
    return np.fft.ifftshift(out)


def _truncate_spectrum(spec: np.ndarray, nx: int, ny: int) -> np.ndarray:
    px, py = spec.shape
    sx, sy = px // 2 - nx // 2, py // 2 - ny // 2
    shifted = np.fft.fftshift(spec)
    return np.fft.ifftshift(shifted[sx:sx + nx, sy:sy + ny])


def pointwise_product(f: ScalarField, g: ScalarField, pad_factor: int = DEFAULT_PAD_FACTOR) -> ScalarField:
    """Product fg evaluated on a pad_factor-times finer grid, then truncated.

    Exact whenever the combined bandwidth of f and g fits the padded grid;
    pad_factor=1 is the plain aliased grid product.
    """
    if f.grid != g.grid:
        raise ValueError("fields live on different grids")
    if pad_factor < 1:
        raise ValueError("pad_factor must be >= 1")
    grid = f.grid
    if pad_factor == 1:
        return ScalarField(grid, f.values * g.values)
    px, py = pad_factor * grid.nx, pad_factor * grid.ny
    scale = px * py
    fv = np.fft.ifft2(_pad_spectrum(f.spectrum, px, py) * scale).real
    gv = np.fft.ifft2(_pad_spectrum(g.spectrum, px, py) * scale).real
    prod_spec = np.fft.fft2(fv * gv) / scale
    return ScalarField.from_spectrum(grid, _truncate_spectrum(prod_spec, grid.nx, grid.ny))


def scale_field(w: VectorField, s: ScalarField, pad_factor: int = DEFAULT_PAD_FACTOR) -> VectorField:
    """Vector field scaled by a scalar field, components dealiased."""
    return VectorField(
        pointwise_product(w.u1, s, pad_factor),
        pointwise_product(w.u2, s, pad_factor),
    )


def eval_spectra(grid: TorusGrid, spectra: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Direct trigonometric summation of stacked spectra at arbitrary points.

    spectra has shape (nf, nx, ny); returns real values of shape (nf, npoints).
    The basis matrices are shared across the stack, so evaluating several
    fields at one point set costs little more than evaluating one.
    """
    spectra = np.atleast_3d(np.asarray(spectra, dtype=np.complex128))
    xs = np.asarray(xs, dtype=np.float64).ravel()
    ys = np.asarray(ys, dtype=np.float64).ravel()
    ex = np.exp((2j * np.pi) * np.outer(xs, grid.modes_x))
    ey = np.exp((2j * np.pi) * np.outer(ys, grid.modes_y))
    partial = np.tensordot(ex, spectra, axes=([1], [1]))  # (npts, nf, ny)
    return np.einsum("pfy,py->fp", partial, ey).real


def eval_offgrid(f: ScalarField, points: np.ndarray) -> np.ndarray:
    """Evaluate the trigonometric interpolant of f at (x, y) points."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    return eval_spectra(f.grid, f.spectrum[None, :, :], pts[:, 0], pts[:, 1])[0]


def eval_vector_offgrid(u: VectorField, xs: np.ndarray, ys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Evaluate both components of u at the given coordinates (shared basis)."""
    spectra = np.stack([u.u1.spectrum, u.u2.spectrum])
    shape = np.asarray(xs).shape
    vals = eval_spectra(u.grid, spectra, xs, ys)
    return vals[0].reshape(shape), vals[1].reshape(shape)


def random_bandlimited(grid: TorusGrid, seed: int, kmax: int, amplitude: float) -> VectorField:
    """Reproducible random real field with modes |j1|, |j2| <= kmax.

    The sup-norm over both components is scaled to `amplitude`.
    """
    if kmax >= min(grid.nx, grid.ny) // 2:
        raise ValueError(f"kmax={kmax} too large for grid {grid.shape}")
    rng = np.random.default_rng(seed)
    mask = (np.abs(grid.modes_x)[:, None] <= kmax) & (np.abs(grid.modes_y)[None, :] <= kmax)
    comps = []
    for _ in range(2):
        raw = rng.standard_normal(grid.shape)
        spec = np.fft.fft2(raw) / (grid.nx * grid.ny)
        comps.append(ScalarField.from_spectrum(grid, np.where(mask, spec, 0.0)))
    u = VectorField(comps[0], comps[1])
    sup = u.sup_norm()
    if sup == 0.0 or amplitude == 0.0:
        return VectorField.zero(grid)
    return u * (float(amplitude) / sup)
