"""Classical probabilistic cellular automata on the package lattices.

The synchronous NEC rule is the textbook Toom automaton; a sublattice-
sequenced mode mirrors the A-then-B ordering of the quantum protocol's
correction step, which is what the classical-limit equivalence tests
compare against.  Grids are flat int8 arrays (+1/-1) indexed like the
lattice sites, so the same code runs on periodic, open, and annular
topologies via the neighbor tables.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lattice import LatticeTopology, N_, E_, S_, W_


@dataclass
class SpinGrid:
    lattice: LatticeTopology
    values: np.ndarray  # int8, +-1, shape (n_sites,)

    @classmethod
    def uniform(cls, lattice: LatticeTopology, value: int = +1) -> "SpinGrid":
        return cls(lattice, np.full(lattice.n_sites, value, dtype=np.int8))

    @classmethod
    def random(cls, lattice: LatticeTopology, m0: float, rng) -> "SpinGrid":
        vals = np.where(rng.random(lattice.n_sites) < (1 + m0) / 2, 1, -1)
        return cls(lattice, vals.astype(np.int8))

    def magnetization(self) -> float:
        return float(self.values.mean())

    def to_raster(self) -> str:
        """0/1 text raster (1 marks spin -1), one lattice row per line."""
        rows = []
        for r in range(self.lattice.n_rows):
            row = self.values[r * self.lattice.n_cols:(r + 1) * self.lattice.n_cols]
            rows.append("".join("1" if v < 0 else "0" for v in row))
        return "\n".join(rows) + "\n"

    def copy(self) -> "SpinGrid":
        return SpinGrid(self.lattice, self.values.copy())


def _neighbor_diff(values, lattice, direction, p_me=0.0, rng=None):
    """Boolean wall indicator per site in one direction; False where absent.

    With p_me > 0 each comparison outcome is independently inverted."""
    idx = lattice.neighbors[:, direction]
    present = idx >= 0
    diff = np.zeros(lattice.n_sites, dtype=bool)
    diff[present] = values[idx[present]] != values[present]
    if p_me > 0.0:
        flip = rng.random(lattice.n_sites) < p_me
        diff[present] ^= flip[present]
    return diff, present


def nec_step(grid: SpinGrid) -> SpinGrid:
    """Synchronous Toom update: flip sites whose N and E neighbors both differ."""
    v = grid.values
    diff_n, has_n = _neighbor_diff(v, grid.lattice, N_)
    diff_e, has_e = _neighbor_diff(v, grid.lattice, E_)
    flip = diff_n & diff_e & has_n & has_e
    out = v.copy()
    out[flip] *= -1
    return SpinGrid(grid.lattice, out)


def _correction_decisions(values, lattice, selected, p_me, rule, rng):
    """Flip decisions for the selected sites under the given rule."""
    if rule == "nec":
        diff_n, has_n = _neighbor_diff(values, lattice, N_, p_me, rng)
        diff_e, has_e = _neighbor_diff(values, lattice, E_, p_me, rng)
        return selected & diff_n & diff_e & has_n & has_e
    if rule == "majority":
        count = np.zeros(lattice.n_sites, dtype=np.int64)
        n_bonds = np.zeros(lattice.n_sites, dtype=np.int64)
        for d in (N_, E_, S_, W_):
            diff, present = _neighbor_diff(values, lattice, d, p_me, rng)
            count += diff & present
            n_bonds += present
        threshold = np.where(n_bonds == 4, 2, n_bonds // 2 + 1)
        return selected & (count >= threshold)
    raise ValueError(f"unknown rule {rule!r}")


def noisy_automaton_step(grid: SpinGrid, p_flip: float, p_nec: float,
                         p_me: float, sublattice_mode: bool, rng,
                         rule: str = "nec") -> SpinGrid:
    """One noisy period: random flips, then the probabilistic correction.

    sublattice_mode applies the correction to sublattice A with the current
    grid, commits, then does the same for B (matching the quantum
    protocol); otherwise the update is fully synchronous.
    """
    lattice = grid.lattice
    n = lattice.n_sites
    values = grid.values.copy()
    flips = rng.random(n) < p_flip
    values[flips] *= -1
    if sublattice_mode:
        for label in (0, 1):
            in_pass = lattice.sublattice == label
            selected = (rng.random(n) < p_nec) & in_pass
            flip = _correction_decisions(values, lattice, selected, p_me, rule, rng)
            values[flip] *= -1
    else:
        selected = rng.random(n) < p_nec
        flip = _correction_decisions(values, lattice, selected, p_me, rule, rng)
        values[flip] *= -1
    return SpinGrid(lattice, values)


@dataclass
class MarginalsReport:
    max_deviation_se: float   # worst per-site/per-time deviation, in SE units
    tolerance_se: float
    passed: bool


def marginals_match(quantum_records: np.ndarray, classical_records: np.ndarray,
                    tolerance_se: float = 4.0) -> MarginalsReport:
    """Compare per-site, per-time <X_j> means of two sample sets.

    Both inputs have shape (samples, times, sites); sample counts may
    differ.  Deviations are scaled by the combined standard error.
    """
    if quantum_records.shape[1:] != classical_records.shape[1:]:
        raise ValueError("record shapes do not match")
    q = quantum_records.astype(float)
    c = classical_records.astype(float)
    mq, mc = q.mean(axis=0), c.mean(axis=0)
    vq = q.var(axis=0, ddof=1) / q.shape[0]
    vc = c.var(axis=0, ddof=1) / c.shape[0]
    se = np.sqrt(vq + vc)
    floor = 1e-12
    dev = np.abs(mq - mc) / np.maximum(se, floor)
    # exact agreement with zero variance is a pass, not a 0/0
    dev[(np.abs(mq - mc) < floor) & (se < floor)] = 0.0
    worst = float(dev.max())
    return MarginalsReport(worst, tolerance_se, worst <= tolerance_se)
