"""Exact dense-state simulation: statevectors, density matrices, channels.

Everything the Clifford engine cannot express lives here: the non-Clifford
trajectory model with arbitrary pulse angles, the continuum-time jump
unraveling, the exact single-period mixture channel used as the oracle for
the stabilizer sampler, and cat-state coherence diagnostics.

Qubit ordering is little-endian: site j is bit j of the basis index, so
site 0 is the fastest-varying bit.  Density matrices are plain complex
ndarrays of shape (2^N, 2^N).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .lattice import LatticeTopology, N_, E_

MAX_STATEVEC_QUBITS = 20
MAX_DENSITY_QUBITS = 9

_SQ = 1.0 / np.sqrt(2.0)

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
H = _SQ * np.array([[1, 1], [1, -1]], dtype=complex)
S = np.array([[1, 0], [0, 1j]], dtype=complex)
S_DAG = S.conj().T
ZPULSE = np.array([[-1j, 0], [0, 1j]], dtype=complex)  # e^{-i pi Z/2}

CX4 = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)
CZ4 = np.diag([1, 1, 1, -1]).astype(complex)
XX4 = np.kron(X, X)
ZZHALF4 = np.diag(np.exp(-1j * np.pi / 4 * np.array([1, -1, -1, 1]))).astype(complex)

GATE_1Q = {"X": X, "Y": Y, "Z": Z, "H": H, "S": S, "S_dag": S_DAG, "ZPulse": ZPULSE}
GATE_2Q = {"CX": CX4, "CZ": CZ4, "ZZHalf": ZZHALF4}


def rot_z(theta: float) -> np.ndarray:
    return np.diag([np.exp(-1j * theta / 2), np.exp(1j * theta / 2)])


def rot_xx(theta: float) -> np.ndarray:
    """exp(-i theta X (x) X / 2)."""
    return np.cos(theta / 2) * np.eye(4) - 1j * np.sin(theta / 2) * XX4


# ---------------------------------------------------------------------------
# statevector primitives
# ---------------------------------------------------------------------------

def apply_1q(psi: np.ndarray, u: np.ndarray, j: int) -> np.ndarray:
    n = psi.size
    lo = 1 << j
    v = psi.reshape(n // (2 * lo), 2, lo)
    a = v[:, 0, :].copy()
    b = v[:, 1, :].copy()
    v[:, 0, :] = u[0, 0] * a + u[0, 1] * b
    v[:, 1, :] = u[1, 0] * a + u[1, 1] * b
    return psi


def apply_2q(psi: np.ndarray, u4: np.ndarray, a: int, b: int) -> np.ndarray:
    """u4 indexed by 2*bit_a + bit_b."""
    nq = psi.size.bit_length() - 1
    t = psi.reshape([2] * nq)
    # C order: axis for bit j is nq-1-j
    t = np.moveaxis(t, (nq - 1 - a, nq - 1 - b), (0, 1))
    shp = t.shape
    t2 = (u4 @ t.reshape(4, -1)).reshape(shp)
    t2 = np.moveaxis(t2, (0, 1), (nq - 1 - a, nq - 1 - b))
    psi[:] = t2.reshape(-1)
    return psi


def apply_gate_vec(psi: np.ndarray, gate: str, *targets: int) -> np.ndarray:
    if gate in GATE_1Q:
        return apply_1q(psi, GATE_1Q[gate], targets[0])
    if gate in GATE_2Q:
        return apply_2q(psi, GATE_2Q[gate], targets[0], targets[1])
    raise ValueError(f"unknown gate {gate!r}")


@lru_cache(maxsize=64)
def _x_signs(n: int, j: int) -> np.ndarray:
    """<basis| transformed under X_j -> index with bit j flipped (as index map)."""
    idx = np.arange(1 << n)
    return idx ^ (1 << j)


@lru_cache(maxsize=64)
def _z_signs(n: int, j: int) -> np.ndarray:
    """Z_j eigenvalue per basis index (+1 for bit 0, -1 for bit 1)."""
    idx = np.arange(1 << n)
    return 1 - 2 * ((idx >> j) & 1)


def apply_xx(psi: np.ndarray, a: int, b: int) -> np.ndarray:
    nq = psi.size.bit_length() - 1
    return psi[_x_signs(nq, a)][_x_signs(nq, b)]


def measure_xx(psi: np.ndarray, a: int, b: int, rng, forced: int | None = None):
    """Projective Born-rule measurement of X_a X_b on a statevector.

    Returns (outcome, probability_of_that_outcome); psi is replaced by the
    normalized projected state (returned as a new array).
    """
    phi = apply_xx(psi, a, b)
    plus = 0.5 * (psi + phi)
    p_plus = float(np.vdot(plus, plus).real)
    if forced is None:
        outcome = +1 if rng.random() < p_plus else -1
    else:
        outcome = forced
    if outcome > 0:
        proj, p = plus, p_plus
    else:
        proj, p = 0.5 * (psi - phi), 1.0 - p_plus
    if p <= 1e-14:
        raise ValueError("projected onto a zero-probability branch")
    return outcome, p, proj / np.sqrt(p)


def measure_x(psi: np.ndarray, j: int, rng, forced: int | None = None):
    nq = psi.size.bit_length() - 1
    phi = psi[_x_signs(nq, j)]
    plus = 0.5 * (psi + phi)
    p_plus = float(np.vdot(plus, plus).real)
    if forced is None:
        outcome = +1 if rng.random() < p_plus else -1
    else:
        outcome = forced
    proj = plus if outcome > 0 else 0.5 * (psi - phi)
    p = p_plus if outcome > 0 else 1.0 - p_plus
    if p <= 1e-14:
        raise ValueError("projected onto a zero-probability branch")
    return outcome, p, proj / np.sqrt(p)


def expect_x_vec(psi: np.ndarray, j: int) -> float:
    nq = psi.size.bit_length() - 1
    return float(np.vdot(psi, psi[_x_signs(nq, j)]).real)


def magnetization_vec(psi: np.ndarray) -> float:
    nq = psi.size.bit_length() - 1
    return float(np.mean([expect_x_vec(psi, j) for j in range(nq)]))


def plus_state(n: int) -> np.ndarray:
    return np.full(1 << n, 2.0 ** (-n / 2), dtype=complex)


def minus_state(n: int) -> np.ndarray:
    idx = np.arange(1 << n)
    signs = (-1.0) ** np.array([bin(i).count("1") for i in idx])
    return signs * 2.0 ** (-n / 2)


def zero_state(n: int) -> np.ndarray:
    psi = np.zeros(1 << n, dtype=complex)
    psi[0] = 1.0
    return psi


def x_product_state(signs) -> np.ndarray:
    psi = np.array([1.0], dtype=complex)
    for s in reversed(list(signs)):
        q = np.array([_SQ, s * _SQ], dtype=complex)
        psi = np.kron(psi, q)
    return psi


class DenseState:
    """Statevector wrapper with the same gate vocabulary as StabilizerState."""

    def __init__(self, n: int, psi: np.ndarray | None = None):
        if n > MAX_STATEVEC_QUBITS:
            raise ValueError(f"{n} qubits exceeds statevector cap {MAX_STATEVEC_QUBITS}")
        self.n = n
        self.psi = plus_state(n) if psi is None else np.asarray(psi, dtype=complex)

    @classmethod
    def new_state(cls, n: int, init="all_plus") -> "DenseState":
        if isinstance(init, str):
            if init == "all_plus":
                return cls(n, plus_state(n))
            if init == "all_zero":
                return cls(n, zero_state(n))
            raise ValueError(f"unknown init {init!r}")
        return cls(n, x_product_state(init))

    def apply_gate(self, gate: str, *targets: int):
        apply_gate_vec(self.psi, gate, *targets)

    def pulse_unitary(self, thetas):
        """Apply prod_j e^{-i theta_j Z_j / 2}."""
        thetas = np.asarray(thetas, dtype=float)
        if thetas.size != self.n:
            raise ValueError("need one angle per site")
        angle = np.zeros(1 << self.n)
        for j in range(self.n):
            angle = angle + 0.5 * thetas[j] * _z_signs(self.n, j)
        self.psi = self.psi * np.exp(-1j * angle)

    def measure_xx(self, a: int, b: int, rng, forced=None):
        outcome, p, self.psi = measure_xx(self.psi, a, b, rng, forced)
        return outcome, p

    def measure_x(self, j: int, rng, forced=None):
        outcome, p, self.psi = measure_x(self.psi, j, rng, forced)
        return outcome, p

    def expect_x(self, j: int) -> float:
        return expect_x_vec(self.psi, j)

    def magnetization(self) -> float:
        return magnetization_vec(self.psi)

    def norm(self) -> float:
        return float(np.linalg.norm(self.psi))

    def density_matrix(self) -> np.ndarray:
        return np.outer(self.psi, self.psi.conj())


# ---------------------------------------------------------------------------
# operator embedding (density-matrix side)
# ---------------------------------------------------------------------------

def embed_1q(u: np.ndarray, j: int, n: int) -> np.ndarray:
    return np.kron(np.eye(1 << (n - 1 - j)), np.kron(u, np.eye(1 << j)))


def embed_2q(u4: np.ndarray, a: int, b: int, n: int) -> np.ndarray:
    """Embed u4 (indexed 2*bit_a + bit_b) on qubits a != b of an n-qubit register."""
    u = u4.reshape(2, 2, 2, 2)  # [a_out, b_out, a_in, b_in]
    out = np.zeros((1 << n, 1 << n), dtype=complex)
    for p in range(2):
        for q in range(2):
            e_pq = np.zeros((2, 2), dtype=complex)
            e_pq[p, q] = 1.0
            out += embed_1q(e_pq, a, n) @ embed_1q(u[p, :, q, :], b, n)
    return out


class OperatorCache:
    """Per-lattice cache of embedded operators used by the channel oracle."""

    def __init__(self, lattice: LatticeTopology):
        if lattice.n_sites > MAX_DENSITY_QUBITS:
            raise ValueError(
                f"{lattice.n_sites} qubits exceeds density-matrix cap {MAX_DENSITY_QUBITS}"
            )
        self.lattice = lattice
        self.n = lattice.n_sites
        dim = 1 << self.n
        self.eye = np.eye(dim, dtype=complex)
        self.z_ops = [embed_1q(Z, j, self.n) for j in range(self.n)]
        self.x_ops = [embed_1q(X, j, self.n) for j in range(self.n)]
        self.y_ops = [embed_1q(Y, j, self.n) for j in range(self.n)]
        self._w: dict[tuple[int, int], np.ndarray] = {}
        self._zz: dict[tuple[int, int], np.ndarray] = {}

    def w_op(self, a: int, b: int) -> np.ndarray:
        key = (min(a, b), max(a, b))
        if key not in self._w:
            self._w[key] = self.x_ops[a] @ self.x_ops[b]
        return self._w[key]

    def wall_projector(self, a: int, b: int, w: int) -> np.ndarray:
        return 0.5 * (self.eye + w * self.w_op(a, b))

    def zzhalf(self, a: int, b: int) -> np.ndarray:
        key = (min(a, b), max(a, b))
        if key not in self._zz:
            self._zz[key] = embed_2q(ZZHALF4, a, b, self.n)
        return self._zz[key]


# ---------------------------------------------------------------------------
# exact mixture channels (the sampling oracle)
# ---------------------------------------------------------------------------

def chan_flip(rho, ops: OperatorCache, j: int, p: float):
    if p == 0.0:
        return rho
    zj = ops.z_ops[j]
    return (1 - p) * rho + p * (zj @ rho @ zj)


def chan_entangle(rho, ops: OperatorCache, j: int, p: float):
    if p == 0.0:
        return rho
    nbrs = [int(k) for k in ops.lattice.neighbors[j] if k >= 0]
    acc = np.zeros_like(rho)
    for k in nbrs:
        u = ops.zzhalf(j, k)
        acc += u @ rho @ u.conj().T
    return (1 - p) * rho + (p / len(nbrs)) * acc


def chan_reset_plus(rho, ops: OperatorCache, j: int, p: float):
    if p == 0.0:
        return rho
    pp = 0.5 * (ops.eye + ops.x_ops[j])
    pm = 0.5 * (ops.eye - ops.x_ops[j])
    zj = ops.z_ops[j]
    reset = pp @ rho @ pp + zj @ (pm @ rho @ pm) @ zj
    return (1 - p) * rho + p * reset


def chan_depolarize(rho, ops: OperatorCache, j: int, p: float):
    if p == 0.0:
        return rho
    acc = (
        ops.x_ops[j] @ rho @ ops.x_ops[j]
        + ops.y_ops[j] @ rho @ ops.y_ops[j]
        + ops.z_ops[j] @ rho @ ops.z_ops[j]
    )
    return (1 - p) * rho + (p / 3) * acc


def _correct_kraus(ops: OperatorCache, bonds, threshold: int, j: int, p_me: float):
    """Weighted Kraus list for one measurement-feedback application at site j.

    bonds are measured in the given order; each recorded outcome is
    independently inverted with probability p_me; the pi-pulse fires when
    the number of recorded -1 outcomes reaches the threshold.
    """
    k = len(bonds)
    zj = ops.z_ops[j]
    kraus = []
    for w_bits in range(1 << k):
        ws = [1 - 2 * ((w_bits >> i) & 1) for i in range(k)]
        proj = ops.eye
        for (a, b), w in zip(bonds, ws):
            proj = ops.wall_projector(a, b, w) @ proj
        for e_bits in range(1 << k):
            weight = 1.0
            rec_minus = 0
            for i in range(k):
                err = (e_bits >> i) & 1
                weight *= p_me if err else (1 - p_me)
                rec = -ws[i] if err else ws[i]
                if rec < 0:
                    rec_minus += 1
            if weight == 0.0:
                continue
            op = (zj @ proj) if rec_minus >= threshold else proj
            kraus.append((weight, op))
    return kraus


def chan_correct_site(rho, ops: OperatorCache, j: int, p_nec: float,
                      p_me: float, rule: str = "nec"):
    if p_nec == 0.0:
        return rho
    lat = ops.lattice
    if rule == "nec":
        targets = lat.nec_targets(j)
        if targets is None:
            return rho
        bonds, threshold = list(targets), 2
    elif rule == "majority":
        bonds = lat.majority_bonds(j)
        threshold = 2 if len(bonds) == 4 else len(bonds) // 2 + 1
    else:
        raise ValueError(f"unknown rule {rule!r}")
    acc = np.zeros_like(rho)
    for weight, op in _correct_kraus(ops, bonds, threshold, j, p_me):
        acc += weight * (op @ rho @ op.conj().T)
    return (1 - p_nec) * rho + p_nec * acc


def chan_correct_step(rho, ops: OperatorCache, p_nec: float, p_me: float,
                      rule: str = "nec"):
    """Full correction step: sublattice A in ascending order, then B."""
    for label in (0, 1):
        for j in ops.lattice.sublattice_sites(label):
            rho = chan_correct_site(rho, ops, int(j), p_nec, p_me, rule)
    return rho


def chan_x_dephase(rho, ops: OperatorCache, sites):
    """Project each listed qubit onto X eigenstates (incoherent variant)."""
    for j in sites:
        pp = 0.5 * (ops.eye + ops.x_ops[j])
        pm = 0.5 * (ops.eye - ops.x_ops[j])
        rho = pp @ rho @ pp + pm @ rho @ pm
    return rho


def oracle_apply_period(rho: np.ndarray, params, ops: OperatorCache | None = None):
    """Exact one-period mixture channel N = N2 . N1 for ProtocolParams.

    Every probabilistic branch (flips, gate placements, resets, feedback
    selections, measurement outcomes, record errors) is summed with its
    weight; no sampling.
    """
    lat = params.lattice
    if ops is None:
        ops = OperatorCache(lat)
    n = lat.n_sites
    for j in range(n):
        rho = chan_flip(rho, ops, j, params.p_flip)
    for j in range(n):
        rho = chan_entangle(rho, ops, j, params.p_unit)
    for j in range(n):
        rho = chan_reset_plus(rho, ops, j, params.p_reset)
    for j in range(n):
        rho = chan_depolarize(rho, ops, j, params.p_dep)
    rho = chan_correct_step(rho, ops, params.p_nec, params.p_me, params.rule)
    return rho


def magnetization_dm(rho: np.ndarray, ops: OperatorCache) -> float:
    return float(np.mean([np.trace(ops.x_ops[j] @ rho).real for j in range(ops.n)]))


def cat_coherence(rho_or_states) -> tuple[float, float, float]:
    """(<+..+|rho|+..+>, <-..-|rho|-..->, |<+..+|rho|-..->|).

    Accepts a density matrix or an iterable of statevectors (averaged as an
    ensemble of pure states).
    """
    if isinstance(rho_or_states, np.ndarray) and rho_or_states.ndim == 2:
        rho = rho_or_states
        n = rho.shape[0].bit_length() - 1
        vp, vm = plus_state(n), minus_state(n)
        dp = float((vp.conj() @ rho @ vp).real)
        dm = float((vm.conj() @ rho @ vm).real)
        od = abs(vp.conj() @ rho @ vm)
        return dp, dm, float(od)
    states = list(rho_or_states)
    n = states[0].size.bit_length() - 1
    vp, vm = plus_state(n), minus_state(n)
    dp = np.mean([abs(np.vdot(vp, s)) ** 2 for s in states])
    dm = np.mean([abs(np.vdot(vm, s)) ** 2 for s in states])
    od = abs(np.mean([np.vdot(vp, s) * np.vdot(s, vm) for s in states]))
    return float(dp), float(dm), float(od)


# ---------------------------------------------------------------------------
# non-Clifford trajectory model
# ---------------------------------------------------------------------------

@dataclass
class NonCliffordParams:
    lattice: LatticeTopology
    h: float
    p_nec: float
    delta_h: float = 0.2
    j_coupling: float = 1.0
    delta_j: float = 0.2
    steps: int = 100

    def __post_init__(self):
        if self.delta_h < 0 or self.delta_j < 0:
            raise ValueError("disorder half-widths must be non-negative")


class NonCliffordModel:
    """Disordered Z-pulse + XX-coupling + Born-sampled NEC feedback.

    Couplings J_ij are drawn once at construction (static disorder); the
    fields h_{j,t} are redrawn every step.
    """

    def __init__(self, params: NonCliffordParams, rng):
        self.params = params
        lat = params.lattice
        self.n = lat.n_sites
        if self.n > MAX_STATEVEC_QUBITS:
            raise ValueError("lattice too large for the dense engine")
        self.bonds = lat.bonds()
        self.couplings = params.j_coupling + params.delta_j * (
            2 * rng.random(len(self.bonds)) - 1
        )
        self._zsigns = np.stack(
            [_z_signs(self.n, j) for j in range(self.n)]
        ).astype(float)

    def step(self, psi: np.ndarray, rng) -> np.ndarray:
        p = self.params
        # U^(Z)_t = exp[-i sum_j h_{j,t} Z_j], h redrawn each step
        hs = p.h + p.delta_h * (2 * rng.random(self.n) - 1)
        psi = psi * np.exp(-1j * (hs @ self._zsigns))
        # U^(X) = exp[-i sum_<ij> J_ij X_i X_j]; terms commute
        for (a, b), jj in zip(self.bonds, self.couplings):
            psi = apply_2q(psi, rot_xx(2 * jj), a, b)
        # measurement-feedback sweep, Born-sampled
        for j in range(self.n):
            if rng.random() >= p.p_nec:
                continue
            targets = p.lattice.nec_targets(j)
            if targets is None:
                continue
            (a1, b1), (a2, b2) = targets
            w_n, _, psi = measure_xx(psi, a1, b1, rng)
            w_e, _, psi = measure_xx(psi, a2, b2, rng)
            if w_n < 0 and w_e < 0:
                psi = apply_1q(psi, ZPULSE, j)
        return psi

    def run(self, rng, init="all_plus") -> np.ndarray:
        """Magnetization series M(0..steps)."""
        psi = DenseState.new_state(self.n, init).psi
        out = [magnetization_vec(psi)]
        for _ in range(self.params.steps):
            psi = self.step(psi, rng)
            out.append(magnetization_vec(psi))
        return np.array(out)


# ---------------------------------------------------------------------------
# continuum-time jump unraveling
# ---------------------------------------------------------------------------

COHERENT_NEC = "coherent_nec"
INCOHERENT_NEC = "incoherent_nec"
MAJORITY_VOTE5 = "majority_vote5"


@dataclass
class JumpParams:
    lattice: LatticeTopology
    gamma: float
    t_max: float
    variant: str = COHERENT_NEC
    drive_h: float = 0.0   # optional uniform Z-field angular rate

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")
        if self.variant not in (COHERENT_NEC, INCOHERENT_NEC, MAJORITY_VOTE5):
            raise ValueError(f"unknown jump variant {self.variant!r}")


def _jump_event(psi, lat: LatticeTopology, j: int, variant: str, rng):
    targets = lat.nec_targets(j)
    if variant == MAJORITY_VOTE5:
        sites = [j] + [int(k) for k in lat.neighbors[j] if k >= 0]
        signs = []
        for q in sites:
            m, _, psi = measure_x(psi, q, rng)
            signs.append(m)
        total = sum(signs)
        # ties (possible only at boundaries) leave the center untouched
        if total != 0 and signs[0] * total < 0:
            psi = apply_1q(psi, ZPULSE, j)
        return psi
    if targets is None:
        return psi
    (a1, b1), (a2, b2) = targets
    w_n, _, psi = measure_xx(psi, a1, b1, rng)
    w_e, _, psi = measure_xx(psi, a2, b2, rng)
    if w_n < 0 and w_e < 0:
        psi = apply_1q(psi, ZPULSE, j)
    if variant == INCOHERENT_NEC:
        for q in (j, b1 if a1 == j else a1, b2 if a2 == j else a2):
            _, _, psi = measure_x(psi, q, rng)
    return psi


def jump_trajectory(psi0: np.ndarray, params: JumpParams, rng, observable=None):
    """Poisson-event trajectory; returns [(t, obs)] including t=0 and t_max.

    observable defaults to magnetization; pass any callable psi -> value.
    """
    lat = params.lattice
    n = lat.n_sites
    if observable is None:
        observable = magnetization_vec
    psi = np.asarray(psi0, dtype=complex).copy()
    out = [(0.0, observable(psi))]
    if params.gamma == 0.0:
        if params.drive_h:
            psi = _apply_drive(psi, n, params.drive_h * params.t_max)
        out.append((params.t_max, observable(psi)))
        return out
    t = 0.0
    total_rate = n * params.gamma
    while True:
        dt = rng.exponential(1.0 / total_rate)
        if t + dt > params.t_max:
            if params.drive_h:
                psi = _apply_drive(psi, n, params.drive_h * (params.t_max - t))
            out.append((params.t_max, observable(psi)))
            return out
        t += dt
        if params.drive_h:
            psi = _apply_drive(psi, n, params.drive_h * dt)
        j = int(rng.integers(n))
        psi = _jump_event(psi, lat, j, params.variant, rng)
        out.append((t, observable(psi)))


def _apply_drive(psi, n, angle):
    for j in range(n):
        psi = apply_1q(psi, rot_z(2 * angle), j)
    return psi


def jump_bernoulli_step(psi, params: JumpParams, dt: float, rng):
    """Fixed-dt Bernoulli discretization (used for the Lindblad-limit check)."""
    for j in range(params.lattice.n_sites):
        if rng.random() < params.gamma * dt:
            psi = _jump_event(psi, params.lattice, j, params.variant, rng)
    return psi
