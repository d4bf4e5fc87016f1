"""Time integration of the coupled Navier-Stokes/Allen-Cahn system.

One step = stabilized semi-implicit Allen-Cahn update with the current
velocity, then a momentum step with the fresh concentration: explicit
skew-symmetric advection, implicit viscosity, capillary forcing, and a
pressure projection that restores discrete incompressibility.

The capillary force uses the "lap(c) grad(c)" form; the gradient part of the
stress tensor identity is absorbed into the pressure, so the stored p is the
modified pressure.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft

from .grid import (
    DIRICHLET_ZERO,
    NEUMANN_ZERO,
    FaceVectorField,
    Grid,
    ScalarField,
    _axslice,
    avg_to_faces,
    divergence,
    gradient,
    laplacian,
)
from .potential import DoubleWell

CFL_LIMIT = 0.9
CG_TOL = 1e-10


class SolverError(RuntimeError):
    """Linear solver failed to converge."""


class CFLError(RuntimeError):
    """Advective CFL guard tripped; the step was rejected."""

    def __init__(self, cfl: float):
        super().__init__(f"advective CFL {cfl:.3f} exceeds limit {CFL_LIMIT}")
        self.cfl = cfl


@dataclass(frozen=True)
class FluidParams:
    """Viscosity and interface width."""

    nu: float
    eps: float

    def __post_init__(self):
        if not (self.nu > 0):
            raise ValueError(f"nu must be positive, got {self.nu}")
        if not (self.eps > 0):
            raise ValueError(f"eps must be positive, got {self.eps}")


@dataclass
class State:
    """Discrete (u, c, p) at one instant."""

    t: float
    u: FaceVectorField
    c: ScalarField
    p: ScalarField

    @property
    def grid(self) -> Grid:
        return self.c.grid

    def copy(self) -> "State":
        return State(self.t, self.u.copy(), self.c.copy(), self.p.copy())


@dataclass
class StepReport:
    """Per-step bookkeeping; carries the discrete material derivative."""

    dt: float
    material_derivative: ScalarField
    poisson_iterations: int
    cfl: float


def make_state(grid: Grid, t: float = 0.0, u=None, c=None, p=None) -> State:
    if u is None:
        u = FaceVectorField(grid, [np.zeros(grid.face_shape(a)) for a in range(grid.dim)], DIRICHLET_ZERO)
    if c is None:
        c = ScalarField(grid, np.zeros(grid.n), NEUMANN_ZERO)
    if p is None:
        p = ScalarField(grid, np.zeros(grid.n), "none")
    return State(t=t, u=u, c=c, p=p)


def conjugate_gradient(apply_op, b, x0, tol=CG_TOL, max_iter=None):
    """Matrix-free CG; converges to relative residual ``tol``.

    Returns (x, iterations). Raises SolverError on non-convergence.
    """
    if max_iter is None:
        max_iter = 10 * b.size
    x = x0.copy()
    r = b - apply_op(x)
    bnorm = float(np.sqrt(np.sum(b * b)))
    if bnorm == 0.0:
        return np.zeros_like(b), 0
    target = tol * bnorm
    rr = float(np.sum(r * r))
    if np.sqrt(rr) <= target:
        return x, 0
    p = r.copy()
    for it in range(1, max_iter + 1):
        ap = apply_op(p)
        alpha = rr / float(np.sum(p * ap))
        x += alpha * p
        r -= alpha * ap
        rr_new = float(np.sum(r * r))
        if np.sqrt(rr_new) <= target:
            return x, it
        p = r + (rr_new / rr) * p
        rr = rr_new
    raise SolverError(
        f"CG failed to reach relative residual {tol} in {max_iter} iterations "
        f"(residual {np.sqrt(rr) / bnorm:.3e})"
    )


def advect_scalar(u: FaceVectorField, c: ScalarField) -> ScalarField:
    """Centered u . grad(c) at cell centers.

    Face-gradient values are multiplied by face velocities and averaged back
    to cells; boundary faces contribute nothing (both factors vanish there).
    """
    grid = c.grid
    g = gradient(c)
    out = np.zeros(grid.n)
    for a in range(grid.dim):
        prod = u.components[a] * g.components[a]
        lo = _axslice(grid.dim, a, slice(None, -1))
        hi = _axslice(grid.dim, a, slice(1, None))
        out += 0.5 * (prod[lo] + prod[hi])
    return ScalarField(grid, out, "none")


@lru_cache(maxsize=8)
def _neumann_eigenvalues(grid: Grid) -> tuple[np.ndarray, ...]:
    """Per-axis eigenvalues of the Neumann laplacian in the DCT-II basis."""
    out = []
    for a in range(grid.dim):
        k = np.arange(grid.n[a])
        out.append((2.0 * np.cos(np.pi * k / grid.n[a]) - 2.0) / grid.h[a] ** 2)
    return tuple(out)


def solve_neumann_poisson(grid: Grid, rhs: np.ndarray) -> np.ndarray:
    """Direct solve of lap(p) = rhs with homogeneous Neumann walls.

    The reflection-ghost laplacian is diagonal in the DCT-II basis, so the
    solve is exact up to roundoff. The rhs must have zero mean (solvability);
    the returned p has zero mean.
    """
    eig = _neumann_eigenvalues(grid)
    lam = eig[0].reshape([-1] + [1] * (grid.dim - 1)).copy()
    for a in range(1, grid.dim):
        shape = [1] * grid.dim
        shape[a] = -1
        lam = lam + eig[a].reshape(shape)
    hat = scipy.fft.dctn(rhs, type=2, norm="ortho")
    flat = lam.ravel()
    flat[0] = 1.0  # constant mode: pinned to zero below
    hat = hat / lam
    hat[(0,) * grid.dim] = 0.0
    p = scipy.fft.idctn(hat, type=2, norm="ortho")
    return p - p.mean()


def capillary_force(c: ScalarField, eps: float) -> FaceVectorField:
    """Face-centered -eps * lap(c) * grad(c).

    Equivalent to -eps div(grad c x grad c) with the grad(|grad c|^2 / 2)
    part absorbed into the pressure.
    """
    grid = c.grid
    lapc = ScalarField(grid, laplacian(c).values, "none")
    g = gradient(c)
    comps = []
    for a in range(grid.dim):
        face_lap = avg_to_faces(lapc, a)
        comps.append(-eps * face_lap * g.components[a])
    return FaceVectorField(grid, comps, DIRICHLET_ZERO)


def _component_laplacian(comp: np.ndarray, grid: Grid, axis: int) -> np.ndarray:
    """Laplacian of velocity component ``axis`` with homogeneous Dirichlet.

    Along the component's own axis the boundary faces carry the (zero)
    Dirichlet value directly; along transverse axes the wall sits half a cell
    outside and ghosts are antisymmetric, giving (v[1] - 3 v[0]) / h^2 rows.
    Output is zero on the boundary faces of ``axis``.
    """
    dim = grid.dim
    out = np.zeros_like(comp)
    for b in range(dim):
        h2 = grid.h[b] ** 2
        mid = _axslice(dim, b, slice(1, -1))
        lo = _axslice(dim, b, slice(None, -2))
        hi = _axslice(dim, b, slice(2, None))
        out[mid] += (comp[hi] - 2.0 * comp[mid] + comp[lo]) / h2
        if b != axis:
            first = _axslice(dim, b, slice(0, 1))
            second = _axslice(dim, b, slice(1, 2))
            last = _axslice(dim, b, slice(-1, None))
            penult = _axslice(dim, b, slice(-2, -1))
            out[first] += (comp[second] - 3.0 * comp[first]) / h2
            out[last] += (comp[penult] - 3.0 * comp[last]) / h2
    # pin the normal boundary faces
    out[_axslice(dim, axis, 0)] = 0.0
    out[_axslice(dim, axis, -1)] = 0.0
    return out


def _avg_along(arr: np.ndarray, axis: int) -> np.ndarray:
    lo = _axslice(arr.ndim, axis, slice(None, -1))
    hi = _axslice(arr.ndim, axis, slice(1, None))
    return 0.5 * (arr[lo] + arr[hi])


def _tangential_to_nodes(comp: np.ndarray, grid: Grid, comp_axis: int, node_axis: int) -> np.ndarray:
    """Average component ``comp_axis`` to the face/node grid of ``node_axis``.

    The result lives where both the ``comp_axis`` faces and ``node_axis``
    faces intersect (edge/corner points). Wall planes normal to ``node_axis``
    get the Dirichlet wall value 0.
    """
    dim = grid.dim
    shape = list(comp.shape)
    shape[node_axis] += 1
    out = np.zeros(shape)
    interior = _axslice(dim, node_axis, slice(1, -1))
    out[interior] = _avg_along(comp, node_axis)
    return out


def _dcomp_dnode(comp: np.ndarray, grid: Grid, node_axis: int) -> np.ndarray:
    """d(comp)/d(node_axis) at the node grid, with antisymmetric wall ghosts."""
    dim = grid.dim
    h = grid.h[node_axis]
    shape = list(comp.shape)
    shape[node_axis] += 1
    out = np.zeros(shape)
    interior = _axslice(dim, node_axis, slice(1, -1))
    out[interior] = np.diff(comp, axis=node_axis) / h
    first = _axslice(dim, node_axis, slice(0, 1))
    last = _axslice(dim, node_axis, slice(-1, None))
    out[first] = 2.0 * comp[_axslice(dim, node_axis, slice(0, 1))] / h
    out[last] = -2.0 * comp[_axslice(dim, node_axis, slice(-1, None))] / h
    return out


def advection_term(u: FaceVectorField) -> FaceVectorField:
    """Skew-symmetric (divergence/advective average) centered advection.

    Returns A(u) approximating div(u x u) at the velocity faces; boundary
    faces are zero (velocity is pinned there).
    """
    grid = u.grid
    dim = grid.dim
    comps = []
    for a in range(dim):
        ua = u.components[a]
        acc = np.zeros_like(ua)
        for b in range(dim):
            hb = grid.h[b]
            if b == a:
                # own-axis part built from cell-centered averages
                uc = _avg_along(ua, a)  # u_a at cells
                flux_cells = uc * uc
                dadv_cells = uc * (np.diff(ua, axis=a) / hb)
                interior = _axslice(dim, a, slice(1, -1))
                acc[interior] += 0.5 * (np.diff(flux_cells, axis=a) / hb)
                acc[interior] += 0.5 * _avg_along(dadv_cells, a)
            else:
                # transverse part built on the a/b edge grid
                ub_nodes = _tangential_to_nodes(u.components[b], grid, b, a)
                ua_nodes = _tangential_to_nodes(ua, grid, a, b)
                dua_nodes = _dcomp_dnode(ua, grid, b)
                flux_nodes = ub_nodes * ua_nodes
                acc += 0.5 * (np.diff(flux_nodes, axis=b) / hb)
                acc += 0.5 * _avg_along(ub_nodes * dua_nodes, b)
        acc[_axslice(dim, a, 0)] = 0.0
        acc[_axslice(dim, a, -1)] = 0.0
        comps.append(acc)
    return FaceVectorField(grid, comps, DIRICHLET_ZERO)


def advective_cfl(u: FaceVectorField, dt: float) -> float:
    total = 0.0
    for a in range(u.grid.dim):
        total += float(np.max(np.abs(u.components[a]))) / u.grid.h[a]
    return dt * total


def allen_cahn_step(
    state: State,
    well: DoubleWell,
    params: FluidParams,
    dt: float,
    source: ScalarField | None = None,
) -> tuple[ScalarField, ScalarField]:
    """One stabilized semi-implicit Allen-Cahn update.

    Solves (1/dt + sigma - eps lap) c_new = c/dt - u.grad c - F'(c)/eps
    + sigma c with sigma = L / (2 eps), then reports the material derivative
    (c_new - c)/dt + u.grad c. ``source`` adds an explicit forcing term
    (manufactured-solution runs).
    """
    if not (dt > 0):
        raise ValueError(f"dt must be positive, got {dt}")
    grid = state.grid
    c = state.c
    eps = params.eps
    sigma = well.lipschitz_constant() / (2.0 * eps)
    adv = advect_scalar(state.u, c)
    rhs = (
        c.values / dt
        - adv.values
        - well.eval_Fprime(c.values) / eps
        + sigma * c.values
    )
    if source is not None:
        rhs = rhs + source.values

    def apply_helmholtz(x):
        xf = ScalarField(grid, x, NEUMANN_ZERO)
        return (1.0 / dt + sigma) * x - eps * laplacian(xf).values

    c_new_vals, _ = conjugate_gradient(apply_helmholtz, rhs, c.values)
    c_new = ScalarField(grid, c_new_vals, NEUMANN_ZERO)
    material = ScalarField(grid, (c_new_vals - c.values) / dt + adv.values, "none")
    return c_new, material


def momentum_step(
    state: State,
    c_new: ScalarField,
    params: FluidParams,
    dt: float,
    source: FaceVectorField | None = None,
) -> tuple[State, int, float]:
    """Advection + implicit viscosity + capillary force, then projection.

    Returns the new state (with t unchanged; ``step`` advances it), the
    pressure-solve iteration count, and the realized advective CFL.
    """
    if not (dt > 0):
        raise ValueError(f"dt must be positive, got {dt}")
    grid = state.grid
    dim = grid.dim
    cfl = advective_cfl(state.u, dt)
    if cfl > CFL_LIMIT:
        raise CFLError(cfl)

    adv = advection_term(state.u)
    force = capillary_force(c_new, params.eps)
    half_nu = 0.5 * params.nu

    star_comps = []
    for a in range(dim):
        rhs = state.u.components[a] / dt - adv.components[a] + force.components[a]
        if source is not None:
            rhs = rhs + source.components[a]
        rhs[_axslice(dim, a, 0)] = 0.0
        rhs[_axslice(dim, a, -1)] = 0.0

        def apply_visc(x, _a=a):
            out = x / dt - half_nu * _component_laplacian(x, grid, _a)
            out[_axslice(dim, _a, 0)] = 0.0
            out[_axslice(dim, _a, -1)] = 0.0
            return out

        sol, _ = conjugate_gradient(apply_visc, rhs, state.u.components[a])
        star_comps.append(sol)
    u_star = FaceVectorField(grid, star_comps, DIRICHLET_ZERO)

    # pressure projection: lap(p) = div(u*)/dt with Neumann, zero mean
    div_star = divergence(u_star).values
    rhs_p = div_star / dt
    rhs_p = rhs_p - rhs_p.mean()
    p_vals = solve_neumann_poisson(grid, rhs_p)
    pits = 0
    p = ScalarField(grid, p_vals, "none")

    gp = gradient(ScalarField(grid, p_vals, NEUMANN_ZERO))
    new_comps = [u_star.components[a] - dt * gp.components[a] for a in range(dim)]
    u_new = FaceVectorField(grid, new_comps, DIRICHLET_ZERO)
    return State(t=state.t, u=u_new, c=c_new, p=p), pits, cfl


def step(
    state: State,
    well: DoubleWell,
    params: FluidParams,
    dt: float,
    source_c: ScalarField | None = None,
    source_u: FaceVectorField | None = None,
) -> tuple[State, StepReport]:
    """Advance the coupled system by one time step."""
    c_new, material = allen_cahn_step(state, well, params, dt, source=source_c)
    new_state, pits, cfl = momentum_step(state, c_new, params, dt, source=source_u)
    new_state.t = state.t + dt
    report = StepReport(dt=dt, material_derivative=material, poisson_iterations=pits, cfl=cfl)
    return new_state, report
