"""Bit-packed stabilizer tableau engine.

Tableau layout: rows 0..n-1 are destabilizers, rows n..2n-1 stabilizers.
X/Z bit matrices are packed into uint64 words (column-major qubit blocks:
word w holds qubits 64*w .. 64*w+63).  Phases are tracked modulo 4 as
powers of i; rows of a valid tableau always carry a real sign, so exposed
phases are 0 (+1) or 2 (-1).

Conventions: a row with both x and z bits set at qubit q encodes Y_q (the
usual CHP convention); the i-power bookkeeping during row multiplication
is handled by the g-function inside the numba kernels.

Random measurement outcomes consume exactly one rng draw each
(``rng.integers(2)``), in operation order; deterministic outcomes consume
none.  This makes trajectories bit-reproducible from a seed.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_U1 = np.uint64(1)
_U6 = np.uint64(6)
_U63 = np.uint64(63)


def _nwords(n: int) -> int:
    return (n + 63) // 64


# ---------------------------------------------------------------------------
# numba kernels
# ---------------------------------------------------------------------------

@njit(cache=True, inline="always")
def _popcount(v):
    v = v - ((v >> np.uint64(1)) & np.uint64(0x5555555555555555))
    v = (v & np.uint64(0x3333333333333333)) + (
        (v >> np.uint64(2)) & np.uint64(0x3333333333333333)
    )
    v = (v + (v >> np.uint64(4))) & np.uint64(0x0F0F0F0F0F0F0F0F)
    return (v * np.uint64(0x0101010101010101)) >> np.uint64(56)


@njit(cache=True, inline="always")
def _row_anticommutes(x, z, row, px, pz):
    acc = np.uint64(0)
    for w in range(px.shape[0]):
        acc ^= _popcount((px[w] & z[row, w]) ^ (pz[w] & x[row, w]))
    return (acc & _U1) == _U1


@njit(cache=True)
def _g_sum(x1, z1, x2, z2, nw):
    """Sum of i-power exponents when multiplying Pauli row 1 onto row 2."""
    pos = 0
    neg = 0
    for w in range(nw):
        a, b, c, d = x1[w], z1[w], x2[w], z2[w]
        pos_mask = (a & b & d & ~c) | (a & ~b & c & d) | (~a & b & c & ~d)
        neg_mask = (a & b & c & ~d) | (a & ~b & d & ~c) | (~a & b & c & d)
        pos += _popcount(pos_mask)
        neg += _popcount(neg_mask)
    return pos - neg


@njit(cache=True)
def _rowmul(x, z, r, h, i):
    """Row h <- row i * row h (phases mod 4)."""
    nw = x.shape[1]
    g = _g_sum(x[i], z[i], x[h], z[h], nw)
    r[h] = (r[h] + r[i] + g) % 4
    for w in range(nw):
        x[h, w] ^= x[i, w]
        z[h, w] ^= z[i, w]


@njit(cache=True)
def _first_anticommuting_stabilizer(x, z, px, pz):
    n = x.shape[0] // 2
    for row in range(n, 2 * n):
        if _row_anticommutes(x, z, row, px, pz):
            return row
    return -1


@njit(cache=True)
def _project(x, z, r, px, pz, rp, p, outcome_neg):
    """Post-measurement update given anticommuting stabilizer row p."""
    n = x.shape[0] // 2
    nw = x.shape[1]
    for row in range(2 * n):
        if row != p and _row_anticommutes(x, z, row, px, pz):
            _rowmul(x, z, r, row, p)
    d = p - n
    for w in range(nw):
        x[d, w] = x[p, w]
        z[d, w] = z[p, w]
        x[p, w] = px[w]
        z[p, w] = pz[w]
    r[d] = r[p]
    r[p] = (rp + 2 * outcome_neg) % 4


@njit(cache=True)
def _deterministic_sign(x, z, r, px, pz, rp):
    """Outcome of measuring Pauli (px, pz, i^rp) already in the group.

    Accumulates the stabilizer rows flagged by anticommuting destabilizers
    into a scratch row, which must equal +-(the measured Pauli); returns +1
    or -1 accordingly.
    """
    n = x.shape[0] // 2
    nw = x.shape[1]
    ax = np.zeros(nw, dtype=np.uint64)
    az = np.zeros(nw, dtype=np.uint64)
    ar = 0
    for i in range(n):
        if _row_anticommutes(x, z, i, px, pz):
            g = _g_sum(x[n + i], z[n + i], ax, az, nw)
            ar = (ar + r[n + i] + g) % 4
            for w in range(nw):
                ax[w] ^= x[n + i, w]
                az[w] ^= z[n + i, w]
    return 1 if ar == rp else -1


@njit(cache=True)
def _apply_z_mask(x, r, mask):
    """Apply the product of Z over the masked sites to every row's phase."""
    for row in range(x.shape[0]):
        acc = np.uint64(0)
        for w in range(mask.shape[0]):
            acc ^= _popcount(x[row, w] & mask[w])
        if acc & _U1:
            r[row] = (r[row] + 2) % 4


@njit(cache=True)
def _expect_x_all(x, z, r, out):
    n = x.shape[0] // 2
    nw = x.shape[1]
    px = np.zeros(nw, dtype=np.uint64)
    pz = np.zeros(nw, dtype=np.uint64)
    # columns where some stabilizer has a z bit -> X_j anticommutes -> 0
    zor = np.zeros(nw, dtype=np.uint64)
    for row in range(n, 2 * n):
        for w in range(nw):
            zor[w] |= z[row, w]
    for j in range(n):
        w = j >> 6
        b = _U1 << (np.uint64(j) & _U63)
        if zor[w] & b:
            out[j] = 0
        else:
            px[w] = b
            out[j] = _deterministic_sign(x, z, r, px, pz, 0)
            px[w] = np.uint64(0)


# ---------------------------------------------------------------------------
# Pauli strings
# ---------------------------------------------------------------------------

class PauliString:
    """Packed N-qubit Pauli with phase i^r (r mod 4)."""

    __slots__ = ("n", "x", "z", "r")

    def __init__(self, n: int, x=None, z=None, r: int = 0):
        self.n = n
        nw = _nwords(n)
        self.x = np.zeros(nw, dtype=np.uint64) if x is None else x
        self.z = np.zeros(nw, dtype=np.uint64) if z is None else z
        self.r = r % 4

    @classmethod
    def x_string(cls, n: int, sites, sign: int = +1) -> "PauliString":
        """Product of X on the given sites, with overall sign +-1."""
        p = cls(n, r=0 if sign > 0 else 2)
        for j in sites:
            p.x[j >> 6] |= _U1 << (np.uint64(j) & _U63)
        return p

    @classmethod
    def z_string(cls, n: int, sites, sign: int = +1) -> "PauliString":
        p = cls(n, r=0 if sign > 0 else 2)
        for j in sites:
            p.z[j >> 6] |= _U1 << (np.uint64(j) & _U63)
        return p

    @classmethod
    def from_label(cls, label: str) -> "PauliString":
        """Parse e.g. '+XXI' or '-IZZ' (qubit 0 first)."""
        sign = +1
        if label[0] in "+-":
            sign = -1 if label[0] == "-" else +1
            label = label[1:]
        p = cls(len(label), r=0 if sign > 0 else 2)
        for j, ch in enumerate(label):
            b = _U1 << (np.uint64(j) & _U63)
            if ch in "XY":
                p.x[j >> 6] |= b
            if ch in "ZY":
                p.z[j >> 6] |= b
            if ch not in "IXYZ":
                raise ValueError(f"bad Pauli letter {ch!r}")
        return p

    def label(self) -> str:
        out = ["+" if self.r == 0 else "-" if self.r == 2 else f"i^{self.r}"]
        for j in range(self.n):
            b = _U1 << (np.uint64(j) & _U63)
            xb = bool(self.x[j >> 6] & b)
            zb = bool(self.z[j >> 6] & b)
            out.append("IXZY"[xb + 2 * zb] if not (xb and zb) else "Y")
        return "".join(out)

    def __repr__(self):
        return f"PauliString({self.label()!r})"


# ---------------------------------------------------------------------------
# states
# ---------------------------------------------------------------------------

ALL_PLUS = "all_plus"
ALL_ZERO = "all_zero"

GATES = ("X", "Y", "Z", "H", "S", "S_dag", "CX", "CZ", "ZPulse", "ZZHalf")


class MeasurementOutcome:
    __slots__ = ("value", "was_deterministic")

    def __init__(self, value: int, was_deterministic: bool):
        self.value = value
        self.was_deterministic = was_deterministic

    def __repr__(self):
        tag = "det" if self.was_deterministic else "rnd"
        return f"MeasurementOutcome({self.value:+d}, {tag})"


class StabilizerState:
    """Stabilizer state of n qubits, destabilizer+stabilizer tableau."""

    def __init__(self, n: int):
        if n < 1:
            raise ValueError("need at least one qubit")
        self.n = n
        nw = _nwords(n)
        self.x = np.zeros((2 * n, nw), dtype=np.uint64)
        self.z = np.zeros((2 * n, nw), dtype=np.uint64)
        self.r = np.zeros(2 * n, dtype=np.int64)

    # -- construction -----------------------------------------------------

    @classmethod
    def new_state(cls, n: int, init=ALL_PLUS) -> "StabilizerState":
        """init: 'all_plus', 'all_zero', or a +-1 sequence (X-basis pattern)."""
        s = cls(n)
        zero_basis = isinstance(init, str) and init == ALL_ZERO
        pattern = None if isinstance(init, str) else np.asarray(init)
        if pattern is not None and len(pattern) != n:
            raise ValueError("X-pattern length must equal qubit count")
        for j in range(n):
            w = j >> 6
            b = _U1 << (np.uint64(j) & _U63)
            if zero_basis:
                s.x[j, w] |= b          # destabilizer X_j
                s.z[n + j, w] |= b      # stabilizer Z_j
            else:
                s.z[j, w] |= b          # destabilizer Z_j
                s.x[n + j, w] |= b      # stabilizer s_j X_j
                if pattern is not None and pattern[j] < 0:
                    s.r[n + j] = 2
        return s

    def copy(self) -> "StabilizerState":
        c = StabilizerState.__new__(StabilizerState)
        c.n = self.n
        c.x = self.x.copy()
        c.z = self.z.copy()
        c.r = self.r.copy()
        return c

    # -- gates ------------------------------------------------------------

    def _col(self, j: int):
        return j >> 6, _U1 << (np.uint64(j) & _U63)

    def apply_gate(self, gate: str, *targets: int):
        if len(set(targets)) != len(targets):
            raise ValueError(f"repeated targets {targets}")
        for t in targets:
            if not (0 <= t < self.n):
                raise ValueError(f"target {t} out of range")
        if gate == "H":
            (j,) = targets
            w, b = self._col(j)
            xs = self.x[:, w] & b
            zs = self.z[:, w] & b
            self.r += 2 * ((xs != 0) & (zs != 0))
            diff = xs ^ zs
            self.x[:, w] ^= diff
            self.z[:, w] ^= diff
        elif gate == "S":
            (j,) = targets
            w, b = self._col(j)
            xs = self.x[:, w] & b
            zs = self.z[:, w] & b
            self.r += 2 * ((xs != 0) & (zs != 0))
            self.z[:, w] ^= xs
        elif gate == "S_dag":
            self.apply_gate("S", *targets)
            self.apply_gate("Z", *targets)
        elif gate in ("Z", "ZPulse"):
            # ZPulse = e^{-i pi Z/2} acts as Z up to the dropped -i phase
            (j,) = targets
            w, b = self._col(j)
            self.r += 2 * ((self.x[:, w] & b) != 0)
        elif gate == "X":
            (j,) = targets
            w, b = self._col(j)
            self.r += 2 * ((self.z[:, w] & b) != 0)
        elif gate == "Y":
            (j,) = targets
            w, b = self._col(j)
            self.r += 2 * (((self.x[:, w] ^ self.z[:, w]) & b) != 0)
        elif gate == "CX":
            a, t = targets
            wa, ba = self._col(a)
            wt, bt = self._col(t)
            xa = (self.x[:, wa] & ba) != 0
            za = (self.z[:, wa] & ba) != 0
            xt = (self.x[:, wt] & bt) != 0
            zt = (self.z[:, wt] & bt) != 0
            self.r += 2 * (xa & zt & ~(xt ^ za))
            np.bitwise_xor(self.x[:, wt], np.where(xa, bt, 0).astype(np.uint64),
                           out=self.x[:, wt])
            np.bitwise_xor(self.z[:, wa], np.where(zt, ba, 0).astype(np.uint64),
                           out=self.z[:, wa])
        elif gate == "CZ":
            a, t = targets
            self.apply_gate("H", t)
            self.apply_gate("CX", a, t)
            self.apply_gate("H", t)
        elif gate == "ZZHalf":
            # e^{-i pi Z_a Z_b / 4} = CX(a,b) S(b) CX(a,b) up to global phase
            a, t = targets
            self.apply_gate("CX", a, t)
            self.apply_gate("S", t)
            self.apply_gate("CX", a, t)
        else:
            raise ValueError(f"unknown gate {gate!r}")
        self.r %= 4

    def apply_z_sites(self, sites):
        """Apply Z (= ZPulse up to phase) on every listed site in one pass."""
        mask = np.zeros(self.x.shape[1], dtype=np.uint64)
        for j in sites:
            mask[j >> 6] |= _U1 << (np.uint64(j) & _U63)
        _apply_z_mask(self.x, self.r, mask)

    # -- measurement ------------------------------------------------------

    def measure_pauli(self, p: PauliString, rng) -> MeasurementOutcome:
        if p.r % 2 != 0:
            raise ValueError("cannot measure a Pauli with imaginary phase")
        row = _first_anticommuting_stabilizer(self.x, self.z, p.x, p.z)
        if row < 0:
            v = _deterministic_sign(self.x, self.z, self.r, p.x, p.z, p.r)
            return MeasurementOutcome(int(v), True)
        outcome_neg = int(rng.integers(2))
        _project(self.x, self.z, self.r, p.x, p.z, p.r, row, outcome_neg)
        return MeasurementOutcome(-1 if outcome_neg else +1, False)

    def reset_plus(self, j: int, rng):
        """Reset qubit j to |+>: measure X_j, flip with Z if the outcome was -1."""
        out = self.measure_pauli(PauliString.x_string(self.n, [j]), rng)
        if out.value < 0:
            self.apply_gate("ZPulse", j)

    def depolarize(self, j: int, p_dep: float, rng):
        """With probability p_dep apply a uniformly random Pauli on j."""
        if not 0.0 <= p_dep <= 1.0:
            raise ValueError(f"p_dep out of range: {p_dep}")
        if p_dep > 0.0 and rng.random() < p_dep:
            self.apply_gate(("X", "Y", "Z")[rng.integers(3)], j)

    # -- observables ------------------------------------------------------

    def expect_x(self, j: int) -> int:
        """<X_j> in {-1, 0, +1}; never mutates state or consumes randomness."""
        w, b = self._col(j)
        if np.any(self.z[self.n:, w] & b):
            return 0
        p = PauliString.x_string(self.n, [j])
        return int(_deterministic_sign(self.x, self.z, self.r, p.x, p.z, 0))

    def expect_x_all(self) -> np.ndarray:
        out = np.empty(self.n, dtype=np.int8)
        _expect_x_all(self.x, self.z, self.r, out)
        return out

    def magnetization(self) -> float:
        return float(self.expect_x_all().mean())

    # -- diagnostics ------------------------------------------------------

    def dump(self, destabilizers: bool = False) -> str:
        """One generator per line, stabilizers only by default."""
        rows = range(2 * self.n) if destabilizers else range(self.n, 2 * self.n)
        return "\n".join(self._row_label(i) for i in rows)

    def _row_label(self, i: int) -> str:
        p = PauliString(self.n, self.x[i].copy(), self.z[i].copy(), int(self.r[i]))
        return p.label()

    def audit(self):
        """Raise if the tableau violates the symplectic structure."""
        n = self.n
        for i in range(2 * n):
            for k in range(i, 2 * n):
                anti = self._rows_anticommute(i, k)
                want = (k == i + n) and i < n
                if anti != want:
                    raise AssertionError(
                        f"rows {i},{k}: anticommute={anti}, expected {want}"
                    )
            if self.r[i] % 2 != 0:
                raise AssertionError(f"row {i} has imaginary phase {self.r[i]}")

    def _rows_anticommute(self, i: int, k: int) -> bool:
        acc = 0
        for w in range(self.x.shape[1]):
            acc ^= int(_popcount(
                (self.x[i, w] & self.z[k, w]) ^ (self.z[i, w] & self.x[k, w])
            ))
        return acc % 2 == 1
