"""One Floquet period of the noisy Clifford dynamics and trajectory running.

Period structure: N = N2 . N1 with

* N1 (pulse step), sweeping sites in ascending index order per sub-step:
  (a) pi-pulse with probability p_flip, (b) ZZHalf with a uniformly random
  neighbor with probability p_unit, (c) reset to |+> with probability
  p_reset, (d) single-qubit depolarizing with probability p_dep.
* N2 (correction step): for each sublattice-A site in ascending order,
  with probability p_nec apply the rule's measurement-feedback sequence;
  then the same for sublattice B.

The NEC rule measures W_{j,n} then W_{j,e} (fixed order), independently
inverts each recorded outcome with probability p_me (the projection always
uses the true outcome), and fires e^{-i pi Z_j/2} iff both recorded
outcomes are -1.  The p_nec selection coins are drawn as one array per
sublattice pass, so draw counts are data-independent.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .lattice import LatticeTopology, N_, E_, S_, W_
from .seeding import spawn_rng
from .stabilizer import PauliString, StabilizerState

RULE_NEC = "nec"
RULE_MAJORITY = "majority"

_PROBS = ("p_flip", "p_nec", "p_unit", "p_reset", "p_me", "p_dep")


@dataclass
class ProtocolParams:
    lattice: LatticeTopology
    p_flip: float
    p_nec: float
    p_unit: float = 0.0
    p_reset: float = 0.0
    p_me: float = 0.0
    p_dep: float = 0.0
    rule: str = RULE_NEC
    steps: int = 100

    def __post_init__(self):
        for name in _PROBS:
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        if self.rule not in (RULE_NEC, RULE_MAJORITY):
            raise ValueError(f"unknown rule {self.rule!r}")
        if self.steps < 0:
            raise ValueError("steps must be non-negative")


@dataclass
class TrajectoryRecord:
    magnetization: np.ndarray                 # M(0..steps), in [-1, 1]
    feedback_triggers: np.ndarray | None = None  # pulses fired per period
    site_values: np.ndarray | None = None     # (steps+1, n) per-site <X_j>


class FloquetRunner:
    """Per-lattice precomputation for running trajectories efficiently."""

    def __init__(self, params: ProtocolParams):
        self.params = params
        lat = params.lattice
        self.lattice = lat
        n = lat.n_sites
        self.n = n
        self._site_neighbors = [
            [int(k) for k in lat.neighbors[j] if k >= 0] for j in range(n)
        ]
        self._sub_sites = (lat.sublattice_sites(0), lat.sublattice_sites(1))
        self._bond_pauli: dict[tuple[int, int], PauliString] = {}
        self._x_pauli = [PauliString.x_string(n, [j]) for j in range(n)]
        if params.rule == RULE_NEC:
            self._rule_bonds = [lat.nec_targets(j) for j in range(n)]
            self._thresholds = [2] * n
        else:
            self._rule_bonds = [tuple(lat.majority_bonds(j)) for j in range(n)]
            self._thresholds = [
                2 if len(b) == 4 else len(b) // 2 + 1 for b in self._rule_bonds
            ]

    def _wop(self, b: tuple[int, int]) -> PauliString:
        p = self._bond_pauli.get(b)
        if p is None:
            p = PauliString.x_string(self.n, list(b))
            self._bond_pauli[b] = p
        return p

    # -- N1 ----------------------------------------------------------------

    def step_pulse(self, state: StabilizerState, rng):
        p = self.params
        n = self.n
        if p.p_flip > 0:
            flips = np.nonzero(rng.random(n) < p.p_flip)[0]
            state.apply_z_sites(flips)
        if p.p_unit > 0:
            hits = np.nonzero(rng.random(n) < p.p_unit)[0]
            for j in hits:
                nbrs = self._site_neighbors[j]
                k = nbrs[rng.integers(len(nbrs))]
                state.apply_gate("ZZHalf", int(j), k)
        if p.p_reset > 0:
            hits = np.nonzero(rng.random(n) < p.p_reset)[0]
            for j in hits:
                out = state.measure_pauli(self._x_pauli[j], rng)
                if out.value < 0:
                    state.apply_gate("ZPulse", int(j))
        if p.p_dep > 0:
            hits = np.nonzero(rng.random(n) < p.p_dep)[0]
            for j in hits:
                state.apply_gate(("X", "Y", "Z")[rng.integers(3)], int(j))

    # -- N2 ----------------------------------------------------------------

    def correct_site(self, state: StabilizerState, j: int, rng) -> tuple | None:
        """One measurement-feedback application; returns recorded outcomes."""
        bonds = self._rule_bonds[j]
        if bonds is None:
            return None
        p_me = self.params.p_me
        recorded = []
        for b in bonds:
            out = state.measure_pauli(self._wop(b), rng)
            w = out.value
            if p_me > 0 and rng.random() < p_me:
                w = -w
            recorded.append(w)
        n_minus = sum(1 for w in recorded if w < 0)
        fired = n_minus >= self._thresholds[j]
        if fired:
            state.apply_gate("ZPulse", j)
        return tuple(recorded) + (fired,)

    def step_correct(self, state: StabilizerState, rng) -> int:
        """Returns the number of feedback pulses fired this period."""
        p_nec = self.params.p_nec
        fired = 0
        for sites in self._sub_sites:
            coins = rng.random(len(sites))
            for idx in np.nonzero(coins < p_nec)[0]:
                res = self.correct_site(state, int(sites[idx]), rng)
                if res is not None and res[-1]:
                    fired += 1
        return fired

    # -- trajectories -------------------------------------------------------

    def initial_state(self, init, rng) -> StabilizerState:
        if isinstance(init, str) and init.startswith("random:"):
            m0 = float(init.split(":", 1)[1])
            signs = np.where(rng.random(self.n) < (1 + m0) / 2, 1, -1)
            return StabilizerState.new_state(self.n, signs)
        return StabilizerState.new_state(self.n, init)

    def run_trajectory(self, init, seed_or_rng, record_triggers=False,
                       record_sites=False) -> TrajectoryRecord:
        rng = (
            seed_or_rng
            if isinstance(seed_or_rng, np.random.Generator)
            else spawn_rng(int(seed_or_rng))
        )
        state = self.initial_state(init, rng)
        steps = self.params.steps
        mags = np.empty(steps + 1)
        trig = np.zeros(steps, dtype=np.int64) if record_triggers else None
        sites = np.empty((steps + 1, self.n), dtype=np.int8) if record_sites else None
        vals = state.expect_x_all()
        mags[0] = vals.mean()
        if sites is not None:
            sites[0] = vals
        for t in range(1, steps + 1):
            self.step_pulse(state, rng)
            fired = self.step_correct(state, rng)
            if trig is not None:
                trig[t - 1] = fired
            vals = state.expect_x_all()
            mags[t] = vals.mean()
            if sites is not None:
                sites[t] = vals
        return TrajectoryRecord(mags, trig, sites)


def run_trajectory(params: ProtocolParams, init, seed) -> TrajectoryRecord:
    return FloquetRunner(params).run_trajectory(init, seed)


def _ensemble_task(args):
    params, init, master_seed, point_index, lo, hi = args
    runner = FloquetRunner(params)
    out = np.empty((hi - lo, params.steps + 1))
    for i, traj in enumerate(range(lo, hi)):
        rng = spawn_rng(master_seed, point_index, traj)
        out[i] = runner.run_trajectory(init, rng).magnetization
    return lo, out


def run_ensemble(params: ProtocolParams, init, n_traj: int, master_seed: int,
                 point_index: int = 0, workers: int = 1) -> np.ndarray:
    """(n_traj, steps+1) magnetization matrix; bit-reproducible and
    independent of the worker count."""
    if workers <= 1:
        _, out = _ensemble_task((params, init, master_seed, point_index, 0, n_traj))
        return out
    chunk = max(1, -(-n_traj // (workers * 4)))
    tasks = [
        (params, init, master_seed, point_index, lo, min(lo + chunk, n_traj))
        for lo in range(0, n_traj, chunk)
    ]
    out = np.empty((n_traj, params.steps + 1))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for lo, block in pool.map(_ensemble_task, tasks):
            out[lo:lo + block.shape[0]] = block
    return out


def ensemble_mean(mags: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(mean_M(t), stderr_M(t)) over the trajectory axis."""
    mean = mags.mean(axis=0)
    se = mags.std(axis=0, ddof=1) / np.sqrt(mags.shape[0])
    return mean, se
