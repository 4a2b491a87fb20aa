"""Reference solvers for Delta u = (U0/r) f on slit domains.

Three backends:

* an exact half-angle cosine series for the 2D problem with the slit on
  the negative x_1-axis,
* a finite-volume discretization on tensor grids of the half space
  x_{n+1} >= 0 (even symmetry gives the Neumann plane for free), with
  optional singularity splitting that subtracts a fitted multiple of the
  edge profile so the remainder is smooth enough for second-order
  stencils,
* a Shortley-Weller disc solver used as an independent oracle by the
  free boundary pipeline.

Plus the barrier and energy utilities used by the compactness arguments.
"""

from __future__ import annotations

import io
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.integrate
import scipy.sparse as sparse
import scipy.sparse.linalg as spla

from .errors import MaskDegenerate, NonConvergence, TruncationWarning
from .geometry import SlitGeometry, frame_fields

# ----------------------------------------------------------------------
# Half-angle series (2D, slit on the negative x1-axis)
# ----------------------------------------------------------------------

@dataclass
class HalfAngleSeries:
    """u(r, theta) = sum_q c_q r^q cos(q theta), q = 1/2, 3/2, ...

    Even in x_2, harmonic off the slit, vanishing on theta = +-pi.
    """

    coefficients: np.ndarray  # c_q for q = (2j+1)/2, j = 0..N-1
    N: int

    @property
    def orders(self) -> np.ndarray:
        return (2 * np.arange(self.N) + 1) / 2.0

    def tail_bound(self, rho: float) -> float:
        """Crude evaluation-error bound inside radius rho from the last
        retained coefficient, assuming the recorded decay continues."""
        if self.N < 2:
            return abs(self.coefficients[-1]) * rho ** self.orders[-1]
        cN = abs(self.coefficients[-1])
        q = self.orders[-1]
        # geometric tail with ratio rho
        return cN * rho**q / max(1.0 - rho, 1e-12)

    def evaluate_polar(self, r, theta):
        r = np.asarray(r, dtype=float)
        theta = np.asarray(theta, dtype=float)
        q = self.orders
        rq = np.power(r[..., None], q)
        return np.sum(self.coefficients * rq * np.cos(q * theta[..., None]), axis=-1)

    def evaluate(self, x1, x2):
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        return self.evaluate_polar(np.hypot(x1, x2), np.arctan2(x2, x1))


def solve_series_2d(phi: Callable[[np.ndarray], np.ndarray], N: int,
                    tol: float = 1e-8, method: str = "quad") -> HalfAngleSeries:
    """Dirichlet solve on the slit disc by half-integer cosine projection.

    c_q = (1/pi) * integral_{-pi}^{pi} phi(theta) cos(q theta) dtheta;
    the half-integer cosines are orthogonal on the circle with the slit
    on the negative axis, so these are the exact coefficients.

    ``method="quad"`` uses adaptive quadrature per coefficient at 1e-13;
    ``method="fixed"`` evaluates all projections on one composite
    Gauss-Legendre grid (64 panels x 24 nodes), accurate to ~1e-12 for
    smooth data and two orders of magnitude faster for root-finding
    sweeps.
    """
    qs = (2 * np.arange(N) + 1) / 2.0
    c = np.empty(N)
    if method == "fixed":
        xg, wg = np.polynomial.legendre.leggauss(24)
        edges = np.linspace(-math.pi, math.pi, 65)
        mid = 0.5 * (edges[:-1] + edges[1:])
        half = 0.5 * np.diff(edges)
        t = (mid[:, None] + half[:, None] * xg[None, :]).ravel()
        w = (half[:, None] * wg[None, :]).ravel()
        ph = np.asarray(phi(t), dtype=float)
        c[:] = (np.cos(qs[:, None] * t[None, :]) * (ph * w)[None, :]).sum(axis=1) / math.pi
    elif method == "quad":
        for j, q in enumerate(qs):
            val, _ = scipy.integrate.quad(
                lambda t: phi(t) * math.cos(q * t), -math.pi, math.pi,
                epsabs=1e-13, epsrel=1e-13, limit=400,
            )
            c[j] = val / math.pi
    else:
        raise ValueError(f"unknown method {method!r}")
    if abs(c[-1]) > tol:
        warnings.warn(
            f"series not resolved: |c_{qs[-1]}| = {abs(c[-1]):.3e} > {tol}",
            TruncationWarning,
        )
    return HalfAngleSeries(coefficients=c, N=N)


# ----------------------------------------------------------------------
# Smooth cutoff for singularity splitting (C^5 polynomial smoothstep)
# ----------------------------------------------------------------------

_CHI_A, _CHI_B = 0.125, 0.25


def _smoothstep5(s):
    return s**6 * (462 + s * (-1980 + s * (3465 + s * (-3080 + s * (1386 - 252 * s)))))


def _smoothstep5_d1(s):
    return s**5 * (2772 + s * (-13860 + s * (27720 + s * (-27720 + s * (13860 - 2772 * s)))))


def _smoothstep5_d2(s):
    return s**4 * (13860 + s * (-83160 + s * (194040 + s * (-221760 + s * (124740 - 27720 * s)))))


def cutoff(r, a: float = _CHI_A, b: float = _CHI_B):
    """chi(r): 1 for r <= a, 0 for r >= b, C^5 in between."""
    s = np.clip((np.asarray(r, dtype=float) - a) / (b - a), 0.0, 1.0)
    return 1.0 - _smoothstep5(s)


def cutoff_d1(r, a: float = _CHI_A, b: float = _CHI_B):
    r = np.asarray(r, dtype=float)
    s = np.clip((r - a) / (b - a), 0.0, 1.0)
    out = -_smoothstep5_d1(s) / (b - a)
    return np.where((r > a) & (r < b), out, 0.0)


def cutoff_d2(r, a: float = _CHI_A, b: float = _CHI_B):
    r = np.asarray(r, dtype=float)
    s = np.clip((r - a) / (b - a), 0.0, 1.0)
    out = -_smoothstep5_d2(s) / (b - a) ** 2
    return np.where((r > a) & (r < b), out, 0.0)


# ----------------------------------------------------------------------
# Tensor grids on the half space
# ----------------------------------------------------------------------

def make_axes(n: int, h: float, grading: dict | None = None) -> list[np.ndarray]:
    """Coordinate arrays for the half-space box [-1,1]^n x [0,1].

    ``grading = {"type": "power", "p": p}`` maps the uniform parameter s
    through sign(s)|s|^p, clustering nodes near the coordinate planes
    (hence near the slit edge through the origin).
    """
    nx = int(round(2.0 / h)) + 1
    nz = int(round(1.0 / h)) + 1
    sx = np.linspace(-1.0, 1.0, nx)
    sz = np.linspace(0.0, 1.0, nz)
    if grading:
        if grading.get("type") != "power":
            raise ValueError(f"unknown grading {grading!r}")
        p = float(grading["p"])
        sx = np.sign(sx) * np.abs(sx) ** p
        sz = sz**p
    axes = [sx.copy() for _ in range(n)] + [sz]
    return axes


def _cell_widths(c: np.ndarray, half_start: bool) -> np.ndarray:
    """Node-centered cell widths; ``half_start`` marks a symmetry wall
    at c[0] (cell [c0, (c0+c1)/2])."""
    w = np.empty_like(c)
    w[1:-1] = (c[2:] - c[:-2]) / 2.0
    w[0] = (c[1] - c[0]) / (2.0 if half_start else 1.0)
    w[-1] = (c[-1] - c[-2]) / 2.0 if half_start else (c[-1] - c[-2])
    # outer x-cells: use one-sided half width on both ends
    if not half_start:
        w[0] = (c[1] - c[0]) / 2.0
        w[-1] = (c[-1] - c[-2]) / 2.0
    return w


@dataclass
class GridSolution:
    """Finite-difference solution on a half-space tensor grid.

    ``values`` has shape ``dims`` = (len(axis_0), ..., len(axis_n));
    the last axis is the vertical coordinate (>= 0, even symmetry).
    """

    geom: SlitGeometry
    axes: list
    values: np.ndarray
    slit_mask: np.ndarray
    dirichlet_mask: np.ndarray
    h: float
    grading: dict | None = None
    phi_descriptor: str = ""
    f_descriptor: str = ""
    frames: dict = field(default_factory=dict, repr=False)

    @property
    def n(self) -> int:
        return len(self.axes) - 1

    @property
    def dims(self) -> tuple:
        return tuple(len(a) for a in self.axes)

    def node_frames(self) -> dict:
        """Frame arrays (d, r, u0, nu, foot) at every node, cached."""
        if not self.frames:
            self.frames = _grid_frames(self.geom, self.axes)
        return self.frames

    def local_h(self, Z=None) -> float:
        """Representative spacing near the edge (max axis step at the
        first few cells), used for the r >= 4h sampling exclusions."""
        steps = []
        for a in self.axes:
            i0 = int(np.argmin(np.abs(a)))
            i0 = min(max(i0, 0), len(a) - 2)
            steps.append(a[i0 + 1] - a[i0])
            if i0 + 4 < len(a):
                steps.append((a[i0 + 4] - a[i0]) / 4.0)
        return float(max(steps))

    def evaluate(self, X) -> np.ndarray:
        """Multilinear interpolation; even in the vertical coordinate."""
        X = np.atleast_2d(np.asarray(X, dtype=float)).copy()
        X[:, -1] = np.abs(X[:, -1])
        out = np.zeros(X.shape[0])
        idx = []
        lam = []
        for a_i, a in enumerate(self.axes):
            i = np.clip(np.searchsorted(a, X[:, a_i]) - 1, 0, len(a) - 2)
            t = (X[:, a_i] - a[i]) / (a[i + 1] - a[i])
            idx.append(i)
            lam.append(np.clip(t, 0.0, 1.0))
        dim = len(self.axes)
        for corner in range(2**dim):
            w = np.ones(X.shape[0])
            ii = []
            for a_i in range(dim):
                bit = (corner >> a_i) & 1
                w = w * (lam[a_i] if bit else 1.0 - lam[a_i])
                ii.append(idx[a_i] + bit)
            out += w * self.values[tuple(ii)]
        return out

    def save_csv(self, path: str) -> None:
        with open(path, "w") as fh:
            grading = "uniform" if not self.grading else f"power:{self.grading['p']}"
            dims = "x".join(str(d) for d in self.dims)
            fh.write(f"n={self.n},h={self.h!r},dims={dims},grading={grading}\n")
            np.savetxt(fh, self.values.reshape(-1, self.dims[-1]), delimiter=",", fmt="%.17g")


def load_csv(path: str, geom: SlitGeometry) -> GridSolution:
    with open(path) as fh:
        header = fh.readline().strip()
        body = fh.read()
    meta = dict(kv.split("=") for kv in header.split(","))
    n = int(meta["n"])
    h = float(meta["h"])
    grading = None
    if meta["grading"].startswith("power:"):
        grading = {"type": "power", "p": float(meta["grading"].split(":")[1])}
    axes = make_axes(n, h, grading)
    dims = tuple(len(a) for a in axes)
    values = np.loadtxt(io.StringIO(body), delimiter=",").reshape(dims)
    slit, diri, _ = _classify(geom, axes, h)
    return GridSolution(geom=geom, axes=axes, values=values, slit_mask=slit,
                        dirichlet_mask=diri, h=h, grading=grading)


def _grid_frames(geom: SlitGeometry, axes: list) -> dict:
    n = len(axes) - 1
    grids = np.meshgrid(*axes, indexing="ij")
    Xh = np.stack([g.ravel() for g in grids[:n]], axis=1)
    Z = grids[n].ravel()
    fr = frame_fields(geom, Xh, Z)
    fr["x"] = Xh
    fr["z"] = Z
    return fr


def _classify(geom: SlitGeometry, axes: list, h: float):
    """Node classification: slit mask, outer Dirichlet, interior."""
    n = len(axes) - 1
    grids = np.meshgrid(*axes, indexing="ij")
    R2 = sum(g**2 for g in grids)
    outer = R2 >= 1.0

    xn = grids[n - 1]
    z = grids[n]
    if geom.flat:
        g_of = np.zeros_like(xn)
    elif n == 2:
        g_of = np.asarray(geom.g(grids[0]), dtype=float) * np.ones_like(xn)
    else:
        g_of = np.zeros_like(xn)
    # local x_n spacing for the half-cell mask shift
    a_n = axes[n - 1]
    dxn = np.empty_like(a_n)
    dxn[:-1] = np.diff(a_n)
    dxn[-1] = dxn[-2]
    shape = [1] * (n + 1)
    shape[n - 1] = len(a_n)
    dxn = dxn.reshape(shape)
    slit = (z == 0.0) & (xn <= g_of - dxn / 2.0) & ~outer
    if not slit.any():
        raise MaskDegenerate("slit mask is empty at this resolution")
    if slit.all() or not (~slit & ~outer & (z == 0.0)).any():
        raise MaskDegenerate("slit mask fills the symmetry plane")
    interior = ~outer & ~slit
    return slit, outer, interior


class _FVSystem:
    """Finite-volume operator on a half-space tensor grid, assembled
    once per grid and reused across solves (the matrix depends only on
    the node classification, not on the data).

    Fluxes between node-centered cells; the z = 0 face is a natural
    (homogeneous Neumann) wall by the half-cell construction.  SPD.
    """

    def __init__(self, axes: list, interior: np.ndarray):
        dims = tuple(len(a) for a in axes)
        ndim = len(dims)
        self.axes = axes
        self.dims = dims
        self.interior = interior
        widths = [_cell_widths(a, half_start=(i == ndim - 1)) for i, a in enumerate(axes)]

        vol = np.ones(dims)
        for i, w in enumerate(widths):
            shape = [1] * ndim
            shape[i] = dims[i]
            vol = vol * w.reshape(shape)
        self.vol = vol

        idx = np.full(dims, -1, dtype=np.int64)
        ii = np.nonzero(interior)
        nun = len(ii[0])
        idx[ii] = np.arange(nun)
        self.idx = idx
        self.ii = ii
        self.nun = nun

        diag = np.zeros(dims)
        rows, cols, vals = [], [], []
        # boundary coupling stored as (interior flat index, boundary
        # flat node index, transmissibility) for rhs assembly
        b_rows, b_nodes, b_T = [], [], []
        flat_index = np.arange(int(np.prod(dims))).reshape(dims)

        for a_i in range(ndim):
            c = axes[a_i]
            dist = np.diff(c)
            area = vol / widths[a_i].reshape([dims[a_i] if j == a_i else 1 for j in range(ndim)])
            sl_lo = [slice(None)] * ndim
            sl_hi = [slice(None)] * ndim
            sl_lo[a_i] = slice(0, dims[a_i] - 1)
            sl_hi[a_i] = slice(1, dims[a_i])
            T = area[tuple(sl_lo)] / dist.reshape(
                [dims[a_i] - 1 if j == a_i else 1 for j in range(ndim)]
            )
            lo_int = interior[tuple(sl_lo)]
            hi_int = interior[tuple(sl_hi)]
            lo_idx = idx[tuple(sl_lo)]
            hi_idx = idx[tuple(sl_hi)]
            both = lo_int & hi_int
            diag[tuple(sl_lo)] += T * lo_int
            diag[tuple(sl_hi)] += T * hi_int
            lo_only = lo_int & ~hi_int
            hi_only = hi_int & ~lo_int
            b_rows.append(lo_idx[lo_only])
            b_nodes.append(flat_index[tuple(sl_hi)][lo_only])
            b_T.append(T[lo_only])
            b_rows.append(hi_idx[hi_only])
            b_nodes.append(flat_index[tuple(sl_lo)][hi_only])
            b_T.append(T[hi_only])
            rows.append(lo_idx[both].astype(np.int32))
            cols.append(hi_idx[both].astype(np.int32))
            vals.append(-T[both])

        r = np.concatenate(rows)
        cm = np.concatenate(cols)
        v = np.concatenate(vals)
        dr = np.arange(nun, dtype=np.int32)
        self.A = sparse.coo_matrix(
            (np.concatenate([v, v, diag[ii]]),
             (np.concatenate([r, cm, dr]), np.concatenate([cm, r, dr]))),
            shape=(nun, nun),
        ).tocsr()
        self.b_rows = np.concatenate(b_rows)
        self.b_nodes = np.concatenate(b_nodes)
        self.b_T = np.concatenate(b_T)
        self._ml = None
        self._lu = None

    def rhs(self, dirichlet_values: np.ndarray, rhs_field: np.ndarray) -> np.ndarray:
        b = (rhs_field * self.vol)[self.ii].copy()
        np.add.at(b, self.b_rows, self.b_T * dirichlet_values.ravel()[self.b_nodes])
        return b

    def solve(self, b: np.ndarray, tol: float = 1e-11, x0=None) -> np.ndarray:
        ndim = len(self.dims)
        if self.nun <= (150_000 if ndim <= 2 else 25_000):
            # sparse direct stays cheap for planar problems; 3D fill-in
            # is prohibitive beyond small systems
            if self._lu is None:
                self._lu = spla.splu(self.A.tocsc())
            return self._lu.solve(b)
        if self._ml is None:
            try:
                import pyamg

                self._ml = pyamg.smoothed_aggregation_solver(self.A, max_coarse=500)
            except Exception:
                self._ml = "diag"
        M = (sparse.diags(1.0 / self.A.diagonal()) if self._ml == "diag"
             else self._ml.aspreconditioner())
        bnorm = np.linalg.norm(b)
        x, info = spla.cg(self.A, b, rtol=tol, atol=tol * max(bnorm, 1.0),
                          maxiter=2000, M=M, x0=x0)
        if info != 0:
            raise NonConvergence(f"conjugate gradients stalled (info={info})")
        return x


# ----------------------------------------------------------------------
# Singularity splitting
# ----------------------------------------------------------------------

def _split_keys(n: int, degree: int):
    keys = []
    for deg in range(degree + 1):
        for m in range(deg + 1):
            rem = deg - m
            if n == 1:
                keys.append(((rem,), m))
            else:
                for a in range(rem + 1):
                    keys.append(((a, rem - a), m))
    return keys


def _fit_split_coefficients(sol: GridSolution, r_lo: float, r_hi: float,
                            degree: int = 3):
    """Weighted LSQ of u/U0 on an annulus around the edge against the
    monomials x^mu r^m of total degree <= degree.

    Weights U0^2 make the normal equations the plain least squares of u
    against U0 times the monomial columns.
    """
    fr = sol.node_frames()
    r = fr["r"]
    u0 = fr["u0"]
    u = sol.values.ravel()
    sel = (r >= r_lo) & (r <= r_hi) & (u0 > 0) & ~sol.dirichlet_mask.ravel()
    if sel.sum() < 30:
        raise MaskDegenerate("too few annulus nodes for the splitting fit")
    keys = _split_keys(sol.n, degree)
    x = fr["x"][sel]
    rs = r[sel]
    cols = []
    for mu, m in keys:
        c = np.ones_like(rs)
        for i, e in enumerate(mu):
            if e:
                c = c * x[:, i] ** e
        if m:
            c = c * rs**m
        cols.append(c)
    Bm = np.stack(cols, axis=1) * u0[sel][:, None]
    coef, *_ = np.linalg.lstsq(Bm, u[sel], rcond=None)
    return keys, coef


def _laplacian_d(sol: GridSolution):
    """Delta d at the nodes: curvature of the parallel curves through
    the foot point, zero for flat geometry."""
    fr = sol.node_frames()
    geom = sol.geom
    if geom.flat or sol.n == 1:
        return np.zeros_like(fr["r"])
    t = fr["foot"]
    gp = np.asarray(geom.dg(t), dtype=float)
    gpp = np.asarray(geom.d2g(t), dtype=float)
    kap0 = gpp / (1.0 + gp**2) ** 1.5
    return -kap0 / (1.0 - kap0 * fr["d"])


def _split_field_and_laplacian(sol: GridSolution, keys, coef):
    """S = chi(r) U0 P(x, r) for a polynomial P, with the exact
    continuous Laplacian of S evaluated from the frame fields.

    Rests on the pointwise identities |grad r| = 1,
    grad r . grad U0 = U0/(2r), Delta r = (1 + d Delta d)/r,
    Delta U0 = (Delta d / 2) U0/r, grad_x U0 = nu U0/(2r), and
    grad x^mu . grad r = sum_i mu_i x^(mu-i) d nu^i / r.
    """
    fr = sol.node_frames()
    r = fr["r"]
    d = fr["d"]
    u0 = fr["u0"]
    nu = fr["nu"]
    x = fr["x"]
    n = sol.n
    lap_d = _laplacian_d(sol)

    inv_r = np.where(r > 0, 1.0 / np.where(r > 0, r, 1.0), 0.0)

    P = np.zeros_like(r)
    bracket = np.zeros_like(r)       # Delta(U0 P) = (U0/r) * bracket
    radial = np.zeros_like(r)        # grad r . grad(U0 P) = U0 * radial
    for (mu, m), a in zip(keys, coef):
        if a == 0.0:
            continue
        xmu = np.ones_like(r)
        for i, e in enumerate(mu):
            if e:
                xmu = xmu * x[:, i] ** e
        rm = r**m
        rm1 = r ** (m - 1) if m >= 1 else inv_r
        P += a * xmu * rm

        term = np.zeros_like(r)
        for i, e in enumerate(mu):
            if e >= 2:
                xr = np.ones_like(r)
                for i2, e2 in enumerate(mu):
                    ee = e2 - (2 if i2 == i else 0)
                    if ee:
                        xr = xr * x[:, i2] ** ee
                term += e * (e - 1) * xr * r ** (m + 1)
        if m >= 1:
            term += m * (m + 1) * xmu * rm1
        term += xmu * (0.5 * rm + (m * d * rm1 if m >= 1 else 0.0)) * lap_d
        grad_mu_nu = np.zeros_like(r)
        for i, e in enumerate(mu):
            if e >= 1:
                xr = np.ones_like(r)
                for i2, e2 in enumerate(mu):
                    ee = e2 - (1 if i2 == i else 0)
                    if ee:
                        xr = xr * x[:, i2] ** ee
                grad_mu_nu += e * xr * nu[:, i]
        term += (rm + (2 * m * d * rm1 if m >= 1 else 0.0)) * grad_mu_nu
        bracket += a * term

        rad = xmu * (m + 0.5) * rm1 + rm1 * d * grad_mu_nu
        radial += a * rad

    chi = cutoff(r)
    chi1 = cutoff_d1(r)
    chi2 = cutoff_d2(r)
    lap_r = (1.0 + d * lap_d) * inv_r

    S = chi * u0 * P
    lap_S = (chi * u0 * inv_r * bracket
             + 2.0 * chi1 * u0 * radial
             + (chi2 + chi1 * lap_r) * u0 * P)
    lap_S = np.where(r == 0.0, 0.0, lap_S)
    return S, lap_S


# ----------------------------------------------------------------------
# Main FD entry point
# ----------------------------------------------------------------------

def solve_fd(geom: SlitGeometry, phi: Callable, f: Callable | None = None,
             h: float = 2**-6, grading: dict | None = None, split: bool = False,
             raw_rhs: Callable | None = None, tol: float = 1e-11,
             phi_descriptor: str = "", f_descriptor: str = "") -> GridSolution:
    """Solve Delta u = (U0/r) f (or a raw right-hand side) on the slit
    half-space grid: Dirichlet phi outside the unit sphere, zero on the
    slit mask, natural Neumann on the symmetry plane.

    ``phi(x..., z)`` and ``f(x..., z)`` take coordinate arrays.  With
    ``split=True`` a fitted multiple of the edge profile is subtracted
    and re-added, restoring near-second-order convergence.
    """
    axes = make_axes(geom.n, h, grading)
    dims = tuple(len(a) for a in axes)
    slit, outer, interior = _classify(geom, axes, h)

    sol = GridSolution(geom=geom, axes=axes, values=np.zeros(dims), slit_mask=slit,
                       dirichlet_mask=outer, h=h, grading=grading,
                       phi_descriptor=phi_descriptor, f_descriptor=f_descriptor)
    fr = sol.node_frames()

    grids = np.meshgrid(*axes, indexing="ij")
    coords = [g.ravel() for g in grids]
    phi_vals = np.asarray(phi(*coords), dtype=float) * np.ones(len(coords[0]))
    diri_vals = np.where(outer.ravel(), phi_vals, 0.0).reshape(dims)

    rhs = np.zeros(dims)
    if f is not None:
        inv_r = np.where(fr["r"] > 0, 1.0 / np.where(fr["r"] > 0, fr["r"], 1.0), 0.0)
        rhs += (np.asarray(f(*coords), dtype=float) * fr["u0"] * inv_r).reshape(dims)
    if raw_rhs is not None:
        rhs += np.asarray(raw_rhs(*coords), dtype=float).reshape(dims)

    system = _FVSystem(axes, interior)
    last_u = None

    def run(dirichlet, rhs_field):
        nonlocal last_u
        b = system.rhs(dirichlet, -rhs_field)
        u = system.solve(b, tol, x0=last_u)
        last_u = u
        out = dirichlet.copy()
        out[interior] = u[system.idx[interior]]
        out[slit] = 0.0
        return out

    sol.values = run(diri_vals, rhs)
    if not split:
        return sol

    # iterate fit -> resolve: the first fit inherits the unsplit
    # O(h^(1/2)) error, the second works from a much better solution
    r_lo = max(0.02, 6 * sol.local_h())
    r_hi = max(0.12, 2.5 * r_lo)
    degree = 3 if geom.n == 2 else 3
    for _ in range(2):
        keys, coef = _fit_split_coefficients(sol, r_lo, r_hi, degree)
        S, lap_S = _split_field_and_laplacian(sol, keys, coef)
        S = S.reshape(dims)
        lap_S = lap_S.reshape(dims)
        v_diri = np.where(outer, diri_vals - S, 0.0)
        v = run(v_diri, rhs - lap_S)
        sol.values = v + S
        sol.values[slit] = 0.0
        sol.values[outer] = diri_vals[outer]
    return sol


# ----------------------------------------------------------------------
# Barrier and energy
# ----------------------------------------------------------------------

def check_barrier(geom: SlitGeometry, h: float = 2**-6, core: float | None = None) -> float:
    """min over off-slit nodes of r * Delta_h(-U0 + U0^2).

    The continuum object satisfies Delta(-U0 + U0^2) = 2|grad U0|^2
    = (1/2) r^{-1} for flat geometry, so the minimum should be a
    positive constant, stably in h.  Nodes with r < ``core`` (default
    4h) are excluded: within O(h) of the edge the discrete Laplacian of
    the r^{1/2} profile is dominated by an O(h^{-1/2}) stencil artifact
    of either sign, which the continuum estimate does not control.
    """
    if core is None:
        core = 4 * h
    axes = make_axes(geom.n, h, None)
    dims = tuple(len(a) for a in axes)
    sol = GridSolution(geom=geom, axes=axes, values=np.zeros(dims),
                       slit_mask=np.zeros(dims, bool), dirichlet_mask=np.zeros(dims, bool),
                       h=h)
    fr = sol.node_frames()
    u0 = fr["u0"].reshape(dims)
    r = fr["r"].reshape(dims)
    w = -u0 + u0**2

    lap = np.zeros(dims)
    ndim = len(dims)
    interior = np.ones(dims, bool)
    for a_i in range(ndim):
        sl_c = [slice(None)] * ndim
        sl_c[a_i] = slice(1, dims[a_i] - 1)
        sl_m = list(sl_c); sl_m[a_i] = slice(0, dims[a_i] - 2)
        sl_p = list(sl_c); sl_p[a_i] = slice(2, dims[a_i])
        add = np.zeros(dims)
        add[tuple(sl_c)] = (w[tuple(sl_p)] - 2 * w[tuple(sl_c)] + w[tuple(sl_m)]) / h**2
        if a_i == ndim - 1:
            # even reflection across z = 0
            sl0 = [slice(None)] * ndim; sl0[a_i] = 0
            sl1 = [slice(None)] * ndim; sl1[a_i] = 1
            add[tuple(sl0)] = 2.0 * (w[tuple(sl1)] - w[tuple(sl0)]) / h**2
        else:
            edge = np.zeros(dims, bool)
            sl0 = [slice(None)] * ndim; sl0[a_i] = [0, dims[a_i] - 1]
            edge[tuple(sl0)] = True
            interior &= ~edge
        lap += add

    grids = np.meshgrid(*axes, indexing="ij")
    R2 = sum(g**2 for g in grids)
    sel = interior & (R2 < 0.81) & (r >= core) & ~((grids[-1] == 0) & (fr["d"].reshape(dims) < 0))
    # drop the row adjacent to the slit plane as well: the stencil there
    # reaches across the jump at z = 0
    if not sel.any():
        raise MaskDegenerate("no admissible nodes for the barrier check")
    return float(np.min(r[sel] * lap[sel]))


def compute_energy(sol: GridSolution) -> float:
    """Dirichlet energy over the reflected ball plus the plate term.

    E = sum |grad_h u|^2 * cell volume over {|X| < 1} (even reflection
    doubles the half-space sum) + (pi/2) * measure({u > 0, z = 0}),
    with one-sided differences at the slit.
    """
    axes = sol.axes
    dims = sol.dims
    u = sol.values
    ndim = len(dims)
    widths = [_cell_widths(a, half_start=(i == ndim - 1)) for i, a in enumerate(axes)]
    grids = np.meshgrid(*axes, indexing="ij")

    E = 0.0
    for a_i in range(ndim):
        c = axes[a_i]
        dist = np.diff(c)
        sl_lo = [slice(None)] * ndim
        sl_hi = [slice(None)] * ndim
        sl_lo[a_i] = slice(0, dims[a_i] - 1)
        sl_hi[a_i] = slice(1, dims[a_i])
        du = (u[tuple(sl_hi)] - u[tuple(sl_lo)]) / dist.reshape(
            [dims[a_i] - 1 if j == a_i else 1 for j in range(ndim)]
        )
        # edge measure: product of transverse widths times the distance
        measure = np.ones(du.shape)
        for j in range(ndim):
            wj = dist if j == a_i else widths[j]
            shape = [1] * ndim
            shape[j] = du.shape[j]
            measure = measure * wj.reshape(shape)
        mid_in = sum(
            ((g[tuple(sl_lo)] + g[tuple(sl_hi)]) / 2.0) ** 2 for g in grids
        ) < 1.0
        E += 2.0 * np.sum(du[mid_in] ** 2 * measure[mid_in])

    # plate measure {u > 0} on z = 0 inside the ball
    sl0 = [slice(None)] * ndim
    sl0[-1] = 0
    plate_u = u[tuple(sl0)]
    inside = sum(g[tuple(sl0)] ** 2 for g in grids[:-1]) < 1.0
    pos = (plate_u > 0) & inside
    if ndim == 2:
        wx = _cell_widths(axes[0], half_start=False)
        measure_plate = float(np.sum(wx[pos]))
    else:
        wx1 = _cell_widths(axes[0], half_start=False)
        wx2 = _cell_widths(axes[1], half_start=False)
        measure_plate = float(np.sum(np.outer(wx1, wx2)[pos]))
    return float(E + (math.pi / 2.0) * measure_plate)


# ----------------------------------------------------------------------
# Shortley-Weller disc solver (independent oracle for the tip problem)
# ----------------------------------------------------------------------

def solve_disc_2d(gamma: float, phi: Callable[[float], float], h: float = 2**-8,
                  split: bool = True):
    """Dirichlet solve on the unit disc minus the slit {y = 0, x <= gamma}.

    ``phi(theta)`` is the circle data (even in theta).  Returns
    (tip coefficient a, callable solution samples) where a is the fitted
    coefficient of sqrt(distance to tip) along the edge direction.  The
    discretization is the classical irregular-arm stencil at the circle,
    second order, with optional tip splitting.
    """
    nx = int(round(2.0 / h)) + 1
    ny = int(round(1.0 / h)) + 1
    xs = np.linspace(-1.0, 1.0, nx)
    ys = np.linspace(0.0, 1.0, ny)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    R2 = X**2 + Y**2
    inside = R2 < 1.0
    slit = (Y == 0.0) & (X <= gamma - h / 2.0)
    unknown = inside & ~slit
    idx = -np.ones((nx, ny), dtype=np.int64)
    ii = np.nonzero(unknown)
    nun = len(ii[0])
    idx[ii] = np.arange(nun)

    def circle_value(x, y):
        return phi(math.atan2(y, x))

    dgt = X - gamma
    rgt = np.hypot(dgt, Y)
    with np.errstate(invalid="ignore"):
        u0g = np.sqrt(np.maximum((dgt + rgt) / 2.0, 0.0))

    def assemble(boundary_shift=None, rhs_field=None):
        # A approximates -Delta, so Delta v = -rhs gives A v = +rhs
        rows, cols, vals = [], [], []
        b = np.zeros(nun)
        if rhs_field is not None:
            b += rhs_field[ii]
        for k in range(nun):
            i, j = ii[0][k], ii[1][k]
            x, y = xs[i], ys[j]
            diag = 0.0
            rhs = 0.0
            # neighbor list: (di, dj, reflect)
            for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                i2, j2 = i + di, j + dj
                if j2 < 0:
                    # even reflection across y = 0
                    j2 = 1
                if i2 < 0 or i2 >= nx or j2 >= ny or not inside[i2, j2]:
                    # arm to the circle: fractional length alpha*h
                    xa, ya = x, y
                    lo, hi = 0.0, 1.0
                    for _ in range(60):
                        mid = (lo + hi) / 2.0
                        if (x + di * mid * h) ** 2 + (y + dj * mid * h) ** 2 < 1.0:
                            lo = mid
                        else:
                            hi = mid
                    alpha = max(hi, 1e-6)
                    xb, yb = x + di * alpha * h, y + dj * alpha * h
                    gval = circle_value(xb, yb)
                    if boundary_shift is not None:
                        gval -= boundary_shift(xb, yb)
                    diag += 2.0 / (alpha * (1.0 + alpha) * h**2)
                    rhs += 2.0 * gval / (alpha * (1.0 + alpha) * h**2)
                elif slit[i2, j2]:
                    diag += 1.0 / h**2
                else:
                    w = 1.0 / h**2
                    diag += w
                    rows.append(k)
                    cols.append(idx[i2, j2])
                    vals.append(-w)
            rows.append(k)
            cols.append(k)
            vals.append(diag)
            b[k] += rhs
        A = sparse.coo_matrix((vals, (rows, cols)), shape=(nun, nun)).tocsr()
        return A, b

    def fit_tip(uflat, r_lo, r_hi, basis_rich=True):
        r = rgt[ii]
        d = dgt[ii]
        w0 = u0g[ii]
        sel = (r >= r_lo) & (r <= r_hi) & (w0 > 0)
        cols_ = [np.ones(sel.sum())]
        if basis_rich:
            cols_ += [d[sel], r[sel]]
        B = np.stack(cols_, axis=1) * w0[sel][:, None]
        coefs, *_ = np.linalg.lstsq(B, uflat[sel], rcond=None)
        return coefs

    A, b = assemble()
    u = spla.spsolve(A.tocsc(), b)
    if not split:
        coefs = fit_tip(u, 4 * h, 32 * h)
        return float(coefs[0]), (xs, ys, _scatter(u, idx, nx, ny))

    r_lo, r_hi = max(0.02, 6 * h), 0.08
    c = float(fit_tip(u, r_lo, max(r_hi, 2.5 * r_lo))[0])
    a_cut = min(0.125, (1.0 - abs(gamma)) / 3.0)
    b_cut = 2.0 * a_cut

    chi = cutoff(rgt, a_cut, b_cut)
    chi1 = cutoff_d1(rgt, a_cut, b_cut)
    chi2 = cutoff_d2(rgt, a_cut, b_cut)
    with np.errstate(divide="ignore", invalid="ignore"):
        lap_S = c * u0g * (chi2 + 2.0 * chi1 / np.where(rgt > 0, rgt, 1.0))
    lap_S = np.where(rgt == 0, 0.0, lap_S)
    S = c * chi * u0g

    def S_at(xb, yb):
        dg = xb - gamma
        rg = math.hypot(dg, yb)
        return c * float(cutoff(rg, a_cut, b_cut)) * math.sqrt(max((dg + rg) / 2.0, 0.0))

    A2, b2 = assemble(boundary_shift=S_at, rhs_field=lap_S)
    v = spla.spsolve(A2.tocsc(), b2)
    uf = v + S[ii]
    coefs = fit_tip(uf, 4 * h, 24 * h)
    return float(coefs[0]), (xs, ys, _scatter(uf, idx, nx, ny))


def _scatter(u, idx, nx, ny):
    out = np.zeros((nx, ny))
    sel = idx >= 0
    out[sel] = u[idx[sel]]
    return out
