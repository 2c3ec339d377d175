"""Spectral differential geometry on periodic grids.

All derivatives are exact on the resolved Fourier modes.  The mixed Wirtinger
second derivative acting on a single complex coordinate z = x + iy is one
quarter of the real Laplacian; on the unit torus the lowest cosine mode maps
to minus pi^2 times itself, which pins every sign convention used here.
"""

from __future__ import annotations

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra

from .grids import GridSpec, HermitianField, PositivityError, ScalarField

# graphs up to this many nodes get the exhaustive all-sources diameter
_ALL_SOURCES_LIMIT = 4096
_FPS_SOURCES = 16


def _grid_axes(grid):
    return tuple(range(2 * grid.complex_dim))


def _dz_symbol(grid, j):
    """Fourier multiplier of d/dz_j (holomorphic Wirtinger derivative)."""
    kx = grid.wavenumbers(2 * j)
    ky = grid.wavenumbers(2 * j + 1)
    return (1j * kx + ky) / 2.0


def _dzbar_symbol(grid, j):
    kx = grid.wavenumbers(2 * j)
    ky = grid.wavenumbers(2 * j + 1)
    return (1j * kx - ky) / 2.0


def _require_spectral(grid):
    if not grid.periodic:
        raise ValueError("spectral operator called on a non-periodic patch grid")


def ddbar(f: ScalarField) -> HermitianField:
    """Mixed complex Hessian of a real potential, computed spectrally.

    Returns the Hermitian coefficient field of i*ddbar(f).  Every component
    is grid-mean-free because the zero mode carries no derivative.
    """
    grid = f.grid
    _require_spectral(grid)
    m = grid.complex_dim
    spec = np.fft.fftn(f.values, axes=_grid_axes(grid))
    out = np.empty(grid.shape + (m, m), dtype=np.complex128)
    for j in range(m):
        sj = _dz_symbol(grid, j)
        for k in range(j, m):
            comp = np.fft.ifftn(sj * _dzbar_symbol(grid, k) * spec, axes=_grid_axes(grid))
            if j == k:
                out[..., j, j] = comp.real
            else:
                out[..., j, k] = comp
                out[..., k, j] = np.conj(comp)
    return HermitianField(grid, out)


def ma_density(omega: HermitianField) -> ScalarField:
    """Pointwise determinant of the coefficient matrix (top wedge density).

    May be non-positive for indefinite input; callers decide what that means.
    """
    if omega.complex_dim == 1:
        det = omega.values[..., 0, 0].real.copy()
    else:
        det = np.linalg.det(omega.values).real
    return ScalarField(omega.grid, det)


def trace_wrt(omega: HermitianField, eta: HermitianField) -> ScalarField:
    """Trace of eta against the metric omega, pointwise g^{jk} eta_{jk}."""
    omega.require_positive("trace_wrt")
    x = np.linalg.solve(omega.values, eta.values)
    tr = np.einsum("...kk->...", x).real
    return ScalarField(omega.grid, tr)


def ricci_form(omega: HermitianField) -> HermitianField:
    """Ricci form -ddbar log det(g), spectral, scale invariant."""
    dens = ma_density(omega)
    worst = np.unravel_index(np.argmin(dens.values), dens.values.shape)
    if dens.values[worst] <= 0.0:
        raise PositivityError(
            f"ricci_form needs positive density: {dens.values[worst]:.6e} "
            f"at grid point {tuple(int(i) for i in worst)}",
            point=tuple(int(i) for i in worst), value=float(dens.values[worst]))
    return ddbar(ScalarField(omega.grid, -np.log(dens.values)))


def riemann_norm(omega: HermitianField) -> ScalarField:
    """Pointwise norm of the curvature tensor of a Kaehler metric.

    Components R[j,a,l,m] = -d_a dbar_l g_{jm} + g^{pq} (d_a g_{jq})(dbar_l g_{pm})
    are contracted in an orthonormal frame on every slot (Frobenius norm), so
    scaling the metric by c scales the result by 1/c.
    """
    grid = omega.grid
    _require_spectral(grid)
    omega.require_positive("riemann_norm")
    m = grid.complex_dim
    axes = _grid_axes(grid)
    g = omega.values
    spec = np.fft.fftn(g, axes=axes)
    sz = [_dz_symbol(grid, j)[..., None, None] for j in range(m)]
    szb = [_dzbar_symbol(grid, j)[..., None, None] for j in range(m)]

    dg = np.stack([np.fft.ifftn(sz[a] * spec, axes=axes) for a in range(m)], axis=-3)
    # dbar_l g_{jq} = conj(d_l g_{qj}) by Hermitian symmetry of the metric
    dbg = np.conj(np.swapaxes(dg, -1, -2))
    ddg = np.stack([
        np.stack([np.fft.ifftn(sz[a] * szb[l] * spec, axes=axes) for l in range(m)], axis=-3)
        for a in range(m)], axis=-4)

    gup = np.conj(np.linalg.inv(g))  # gup[p,q] = g^{pq}
    second = np.einsum("...pq,...ajq,...lpm->...jalm", gup, dg, dbg)
    riem = -np.einsum("...aljm->...jalm", ddg) + second

    chol = np.linalg.cholesky(g)
    frame = np.conj(np.swapaxes(np.linalg.inv(chol), -1, -2))
    s = np.einsum("...jalm,...jA,...aB,...lC,...mD->...ABCD",
                  riem, frame, frame, np.conj(frame), np.conj(frame))
    norm = np.sqrt(np.sum(np.abs(s) ** 2, axis=(-4, -3, -2, -1)))
    return ScalarField(grid, norm)


def _edge_offsets(m):
    """All nonzero king-move offsets on the 2m-dimensional lattice."""
    ranges = [(-1, 0, 1)] * (2 * m)
    grids = np.meshgrid(*ranges, indexing="ij")
    offs = np.stack([a.ravel() for a in grids], axis=1)
    return [tuple(int(v) for v in o) for o in offs if any(o)]


def _metric_graph(omega: HermitianField):
    """Sparse edge-weight matrix of the 8-neighbour (king move) lattice graph."""
    grid = omega.grid
    m = grid.complex_dim
    h = grid.spacings
    n = int(np.prod(grid.shape))
    idx = np.arange(n).reshape(grid.shape)
    rows, cols, data = [], [], []
    for off in _edge_offsets(m):
        w = np.array([off[2 * j] * h[2 * j] + 1j * off[2 * j + 1] * h[2 * j + 1]
                      for j in range(m)])
        q = np.einsum("...jk,j,k->...", omega.values, w, np.conj(w)).real
        q_nb = np.roll(q, shift=[-o for o in off], axis=_grid_axes(grid))
        weight = np.sqrt(0.5 * (q + q_nb))
        rows.append(idx.ravel())
        cols.append(np.roll(idx, shift=[-o for o in off], axis=_grid_axes(grid)).ravel())
        data.append(weight.ravel())
    mat = coo_matrix((np.concatenate(data),
                      (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
    return mat.tocsr()


def _farthest_point_sources(graph, count):
    """Deterministic farthest-point sampling in the graph metric itself."""
    sources = [0]
    dist = dijkstra(graph, directed=True, indices=0)
    while len(sources) < count:
        nxt = int(np.argmax(dist))
        if nxt in sources:
            break
        sources.append(nxt)
        dist = np.minimum(dist, dijkstra(graph, directed=True, indices=nxt))
    return sources


def fiber_diameter(omega: HermitianField) -> float:
    """Graph-metric diameter of the torus under the given metric field.

    Edge lengths average the quadratic form of the two endpoints; the source
    set is exhaustive on small grids and farthest-point sampled on large
    ones.  Scaling the metric by c scales the result by sqrt(c) exactly.
    """
    omega.require_positive("fiber_diameter")
    graph = _metric_graph(omega)
    n = graph.shape[0]
    if n <= _ALL_SOURCES_LIMIT:
        dist = dijkstra(graph, directed=True)
    else:
        sources = _farthest_point_sources(graph, _FPS_SOURCES)
        dist = dijkstra(graph, directed=True, indices=sources)
    return float(np.max(dist))
