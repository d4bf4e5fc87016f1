"""Rectangular staggered (MAC) grid with cell-centered scalars and
face-centered velocity components.

Scalars (concentration, pressure) live at cell centers, shape ``n``.
Velocity component ``a`` lives on the faces normal to axis ``a``, so its
array has ``n[a]+1`` entries along axis ``a`` and ``n[b]`` along the others.

Boundary conditions are realized through ghost values:

* ``neumann_zero`` scalars reflect (ghost = adjacent interior value), which
  makes the normal gradient vanish exactly on boundary faces.
* ``dirichlet_zero`` velocities have zero normal faces; tangential ghosts are
  antisymmetric (ghost = -interior), placing the wall value at zero.

With these ghosts the discrete gradient and (minus) divergence are exact
adjoints under midpoint quadrature, and divergence(gradient(q)) equals the
2*dim+1 point Laplacian entrywise. Every energy/entropy identity computed
downstream leans on those two facts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

NEUMANN_ZERO = "neumann_zero"
DIRICHLET_ZERO = "dirichlet_zero"
NO_BC = "none"


@dataclass(frozen=True)
class Grid:
    """Axis-aligned box discretized into a uniform rectangular cell grid."""

    dim: int
    n: tuple[int, ...]
    length: tuple[float, ...]
    h: tuple[float, ...]

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.h))

    @property
    def num_cells(self) -> int:
        return int(np.prod(self.n))

    def face_shape(self, axis: int) -> tuple[int, ...]:
        shape = list(self.n)
        shape[axis] += 1
        return tuple(shape)

    def cell_centers(self, axis: int) -> np.ndarray:
        """Coordinates of cell centers along one axis."""
        h = self.h[axis]
        return (np.arange(self.n[axis]) + 0.5) * h

    def face_coords(self, axis: int) -> np.ndarray:
        """Coordinates of the faces normal to ``axis`` along that axis."""
        return np.arange(self.n[axis] + 1) * self.h[axis]


def make_grid(dim: int, n, length) -> Grid:
    """Build a grid, validating counts and extents."""
    if dim not in (2, 3):
        raise ValueError(f"dim must be 2 or 3, got {dim}")
    n = tuple(int(v) for v in n)
    length = tuple(float(v) for v in length)
    if len(n) != dim or len(length) != dim:
        raise ValueError(
            f"n and length must each have {dim} entries, got {len(n)} and {len(length)}"
        )
    for v in n:
        if v < 4:
            raise ValueError(f"cell counts must be >= 4, got {n}")
    for v in length:
        if not (v > 0):
            raise ValueError(f"extents must be positive, got {length}")
    h = tuple(length[i] / n[i] for i in range(dim))
    return Grid(dim=dim, n=n, length=length, h=h)


@dataclass
class ScalarField:
    """Cell-centered scalar field."""

    grid: Grid
    values: np.ndarray
    bc: str = NO_BC

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.n:
            raise ValueError(
                f"scalar values shape {self.values.shape} != grid cells {self.grid.n}"
            )
        if self.bc not in (NEUMANN_ZERO, NO_BC):
            raise ValueError(f"unsupported scalar bc {self.bc!r}")

    def copy(self) -> "ScalarField":
        return ScalarField(self.grid, self.values.copy(), self.bc)


@dataclass
class FaceVectorField:
    """Velocity-like field with one face-centered array per axis."""

    grid: Grid
    components: list[np.ndarray] = field(default_factory=list)
    bc: str = NO_BC

    def __post_init__(self):
        if len(self.components) != self.grid.dim:
            raise ValueError(
                f"need {self.grid.dim} components, got {len(self.components)}"
            )
        self.components = [np.asarray(c, dtype=float) for c in self.components]
        for a, comp in enumerate(self.components):
            want = self.grid.face_shape(a)
            if comp.shape != want:
                raise ValueError(
                    f"component {a} has shape {comp.shape}, expected {want}"
                )
        if self.bc not in (DIRICHLET_ZERO, NO_BC):
            raise ValueError(f"unsupported vector bc {self.bc!r}")
        if self.bc == DIRICHLET_ZERO:
            enforce_dirichlet(self)

    def copy(self) -> "FaceVectorField":
        return FaceVectorField(self.grid, [c.copy() for c in self.components], self.bc)


def zero_scalar(grid: Grid, bc: str = NO_BC) -> ScalarField:
    return ScalarField(grid, np.zeros(grid.n), bc)


def zero_vector(grid: Grid, bc: str = NO_BC) -> FaceVectorField:
    return FaceVectorField(grid, [np.zeros(grid.face_shape(a)) for a in range(grid.dim)], bc)


def enforce_dirichlet(v: FaceVectorField) -> None:
    """Zero out the boundary normal faces in place."""
    for a, comp in enumerate(v.components):
        sl = [slice(None)] * v.grid.dim
        sl[a] = 0
        comp[tuple(sl)] = 0.0
        sl[a] = -1
        comp[tuple(sl)] = 0.0


def _axslice(dim: int, axis: int, s) -> tuple:
    sl = [slice(None)] * dim
    sl[axis] = s
    return tuple(sl)


def gradient(c: ScalarField) -> FaceVectorField:
    """Face-centered gradient of a Neumann scalar; zero on boundary faces."""
    grid = c.grid
    out = []
    for a in range(grid.dim):
        g = np.zeros(grid.face_shape(a))
        interior = _axslice(grid.dim, a, slice(1, -1))
        lo = _axslice(grid.dim, a, slice(None, -1))
        hi = _axslice(grid.dim, a, slice(1, None))
        g[interior] = (c.values[hi] - c.values[lo]) / grid.h[a]
        out.append(g)
    return FaceVectorField(grid, out, DIRICHLET_ZERO)


def divergence(v: FaceVectorField) -> ScalarField:
    """Cell-centered divergence of a face field."""
    grid = v.grid
    div = np.zeros(grid.n)
    for a in range(grid.dim):
        div += np.diff(v.components[a], axis=a) / grid.h[a]
    return ScalarField(grid, div, NO_BC)


def laplacian(c: ScalarField) -> ScalarField:
    """Neumann Laplacian; equals divergence(gradient(c)) entrywise."""
    grid = c.grid
    out = np.zeros(grid.n)
    vals = c.values
    for a in range(grid.dim):
        h2 = grid.h[a] ** 2
        mid = _axslice(grid.dim, a, slice(1, -1))
        lo = _axslice(grid.dim, a, slice(None, -2))
        hi = _axslice(grid.dim, a, slice(2, None))
        first = _axslice(grid.dim, a, slice(0, 1))
        second = _axslice(grid.dim, a, slice(1, 2))
        last = _axslice(grid.dim, a, slice(-1, None))
        penult = _axslice(grid.dim, a, slice(-2, -1))
        out[mid] += (vals[hi] - 2.0 * vals[mid] + vals[lo]) / h2
        # reflected ghosts: one-sided second difference at the walls
        out[first] += (vals[second] - vals[first]) / h2
        out[last] += (vals[penult] - vals[last]) / h2
    return ScalarField(grid, out, NO_BC)


def integrate(f: ScalarField) -> float:
    """Midpoint-rule integral over the box."""
    return float(f.values.sum() * f.grid.cell_volume)


def face_inner(v: FaceVectorField, w: FaceVectorField) -> float:
    """Inner product of two face fields with cell-volume face weights.

    Pairs with ``integrate`` so that for Neumann q and Dirichlet v:
    integrate(q * divergence(v)) + face_inner(v, gradient(q)) == 0.
    """
    vol = v.grid.cell_volume
    total = 0.0
    for a in range(v.grid.dim):
        total += float(np.sum(v.components[a] * w.components[a]))
    return total * vol


def avg_to_cells(v: FaceVectorField) -> list[np.ndarray]:
    """Arithmetic average of each face component to cell centers."""
    grid = v.grid
    out = []
    for a in range(grid.dim):
        lo = _axslice(grid.dim, a, slice(None, -1))
        hi = _axslice(grid.dim, a, slice(1, None))
        out.append(0.5 * (v.components[a][lo] + v.components[a][hi]))
    return out


def avg_to_faces(c: ScalarField, axis: int, boundary: float = 0.0) -> np.ndarray:
    """Average a cell scalar to the faces normal to ``axis``.

    Boundary faces receive ``boundary`` (forces vanish there for Dirichlet
    velocities, so 0 is the useful default).
    """
    grid = c.grid
    out = np.full(grid.face_shape(axis), float(boundary))
    interior = _axslice(grid.dim, axis, slice(1, -1))
    lo = _axslice(grid.dim, axis, slice(None, -1))
    hi = _axslice(grid.dim, axis, slice(1, None))
    out[interior] = 0.5 * (c.values[lo] + c.values[hi])
    return out


def cell_speed_squared(v: FaceVectorField) -> np.ndarray:
    """|v|^2 at cell centers: per-axis average of squared face values."""
    grid = v.grid
    out = np.zeros(grid.n)
    for a in range(grid.dim):
        lo = _axslice(grid.dim, a, slice(None, -1))
        hi = _axslice(grid.dim, a, slice(1, None))
        sq = v.components[a] ** 2
        out += 0.5 * (sq[lo] + sq[hi])
    return out
