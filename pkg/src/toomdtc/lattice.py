"""Lattice geometries and adjacency queries.

All engines consume the same topology object: a flat site indexing
(row-major, index = row * n_cols + col), a North/East/South/West neighbor
table, an A/B sublattice labelling, and the bond sets used by the NEC and
majority-vote feedback rules.

Three kinds are supported:

* ``square_periodic`` -- torus, every site has 4 neighbors.
* ``square_open``     -- open boundaries, 2-4 neighbors per site.
* ``annular_triangular`` -- two triangular system sublattices stitched into
  an annulus; after discarding the two diagonal bonds per site (sweep
  direction along the polar/toroidal coordinate) the remaining bond graph
  is a square lattice on a torus, so the NEC rule applies verbatim.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SQUARE_PERIODIC = "square_periodic"
SQUARE_OPEN = "square_open"
ANNULAR_TRIANGULAR = "annular_triangular"

KINDS = (SQUARE_PERIODIC, SQUARE_OPEN, ANNULAR_TRIANGULAR)

# neighbor table column order; deterministic everywhere
N_, E_, S_, W_ = 0, 1, 2, 3


def bond(a: int, b: int) -> tuple[int, int]:
    """Canonical (sorted) unordered site pair."""
    return (a, b) if a < b else (b, a)


@dataclass
class LatticeTopology:
    kind: str
    n_rows: int
    n_cols: int
    # neighbors[j, d] for d in (N, E, S, W); -1 where absent
    neighbors: np.ndarray = field(repr=False)
    # 0 for sublattice A, 1 for sublattice B
    sublattice: np.ndarray = field(repr=False)
    # annular only: full 6-neighbor triangular adjacency, else None
    tri_neighbors: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_sites(self) -> int:
        return self.n_rows * self.n_cols

    def site(self, row: int, col: int) -> int:
        return (row % self.n_rows) * self.n_cols + (col % self.n_cols)

    def coords(self, j: int) -> tuple[int, int]:
        return divmod(j, self.n_cols)

    def sublattice_sites(self, label: int) -> np.ndarray:
        """Ascending site indices with the given sublattice label (0=A, 1=B)."""
        return np.nonzero(self.sublattice == label)[0]

    def nec_targets(self, j: int):
        """(north-bond, east-bond) for site j, or None if either is missing.

        On the annular lattice these are the images of the North/East bonds
        under the torus reduction, i.e. the two bonds the sweep rule keeps.
        """
        jn = self.neighbors[j, N_]
        je = self.neighbors[j, E_]
        if jn < 0 or je < 0:
            return None
        return bond(j, int(jn)), bond(j, int(je))

    def majority_bonds(self, j: int) -> list[tuple[int, int]]:
        """All bonds incident to j, in N, E, S, W order (present ones only)."""
        out = []
        for d in (N_, E_, S_, W_):
            k = self.neighbors[j, d]
            if k >= 0:
                out.append(bond(j, int(k)))
        return out

    def bonds(self) -> list[tuple[int, int]]:
        """All measurable bonds, deduplicated, in ascending (site, dir) order."""
        seen = set()
        out = []
        for j in range(self.n_sites):
            for d in (N_, E_, S_, W_):
                k = self.neighbors[j, d]
                if k >= 0:
                    b = bond(j, int(k))
                    if b not in seen:
                        seen.add(b)
                        out.append(b)
        return out

    def to_text(self) -> str:
        """Structured-text dump: kind, dims, explicit bond list."""
        lines = [f"kind {self.kind}", f"dims {self.n_rows} {self.n_cols}"]
        for a, b in self.bonds():
            lines.append(f"bond {a} {b}")
        return "\n".join(lines) + "\n"


def _build_square(rows: int, cols: int, periodic: bool) -> LatticeTopology:
    n = rows * cols
    nbrs = np.full((n, 4), -1, dtype=np.int64)
    for r in range(rows):
        for c in range(cols):
            j = r * cols + c
            # North = (row+1, col), East = (row, col+1)
            if periodic or r + 1 < rows:
                nbrs[j, N_] = ((r + 1) % rows) * cols + c
            if periodic or c + 1 < cols:
                nbrs[j, E_] = r * cols + (c + 1) % cols
            if periodic or r - 1 >= 0:
                nbrs[j, S_] = ((r - 1) % rows) * cols + c
            if periodic or c - 1 >= 0:
                nbrs[j, W_] = r * cols + (c - 1) % cols
    sub = np.fromiter(
        ((r + c) % 2 for r in range(rows) for c in range(cols)),
        dtype=np.int64,
        count=n,
    )
    kind = SQUARE_PERIODIC if periodic else SQUARE_OPEN
    return LatticeTopology(kind, rows, cols, nbrs, sub)


def _build_annular(n_rings: int, ring_length: int) -> LatticeTopology:
    """Annulus of two stitched triangular sublattices.

    Torus parametrization: row u in [0, n_rings) is the poloidal index
    (rows u < n_rings/2 are the 'red' sublattice, the rest 'green', with the
    stitching at the inner/outer annulus boundaries realised by the periodic
    wrap in u), col v in [0, ring_length) is the toroidal/polar index.
    The triangular adjacency adds the (u+1, v+1)/(u-1, v-1) diagonals; the
    sweep rule (sweep along the toroidal direction) ignores exactly those
    two, leaving a periodic square lattice.
    """
    if n_rings % 2 != 0:
        raise ValueError(
            f"annular stitching cannot close with odd n_rings={n_rings}"
        )
    base = _build_square(n_rings, ring_length, periodic=True)
    n = base.n_sites
    tri = np.full((n, 6), -1, dtype=np.int64)
    tri[:, :4] = base.neighbors
    for u in range(n_rings):
        for v in range(ring_length):
            j = u * ring_length + v
            tri[j, 4] = base.site(u + 1, v + 1)  # NE diagonal (dropped by sweep)
            tri[j, 5] = base.site(u - 1, v - 1)  # SW diagonal (dropped by sweep)
    return LatticeTopology(
        ANNULAR_TRIANGULAR, n_rings, ring_length, base.neighbors,
        base.sublattice, tri_neighbors=tri,
    )


def build_lattice(kind: str, dims: tuple[int, int]) -> LatticeTopology:
    """Build a topology.  dims = (rows, cols), or (n_rings, ring_length)."""
    rows, cols = dims
    if rows < 1 or cols < 1:
        raise ValueError(f"dims must be positive, got {dims}")
    if kind == SQUARE_PERIODIC:
        # Minimum 2 so the NEC triple {j, j+n, j+e} never collapses onto j.
        if rows < 2 or cols < 2:
            raise ValueError(f"square_periodic needs both dims >= 2, got {dims}")
        return _build_square(rows, cols, periodic=True)
    if kind == SQUARE_OPEN:
        if rows < 2 or cols < 2:
            raise ValueError(f"square_open needs both dims >= 2, got {dims}")
        return _build_square(rows, cols, periodic=False)
    if kind == ANNULAR_TRIANGULAR:
        if rows < 4 or cols < 3:
            raise ValueError(
                f"annular lattice needs n_rings >= 4 and ring_length >= 3, got {dims}"
            )
        return _build_annular(rows, cols)
    raise ValueError(f"unknown lattice kind {kind!r}")


def torus_relabeling(annular: LatticeTopology) -> np.ndarray:
    """Canonical relabeling annular site -> square-periodic site.

    Under the torus parametrization used by the builder this is the
    identity; it is exposed separately so the isomorphism check in the
    tests stays an explicit map rather than an artifact of construction.
    """
    if annular.kind != ANNULAR_TRIANGULAR:
        raise ValueError("relabeling defined for annular lattices only")
    return np.arange(annular.n_sites, dtype=np.int64)
