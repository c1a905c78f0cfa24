"""Hardware-level circuit generation for the measurement-feedback round.

The feedback rule acts on domain-wall parities W = X_a X_b.  Two gadgets
extract W onto an ancilla:

* ``cr`` gateset: ancilla in |+>, one cross-resonance interaction
  exp(-i pi X Z / 4) per bond endpoint, then an X-basis ancilla readout.
  Outcome +1 flags a wall; the -1 branch carries an e^{-i pi X/2}
  byproduct on the bond, undone by a classically conditioned X.
* ``cphase`` gateset: basis-change H on both endpoints, one CPHASE(pi)
  per endpoint, H back, X-basis readout.  No byproduct; outcome -1
  flags a wall (the mapping is inverted relative to ``cr``).

Feedback comes in two flavors: ``measure_feedback`` applies the pi-pulse
as a Z conditioned on both wall records, while ``toffoli_reset`` undoes
the ``cr`` byproduct coherently, leaves the wall bit in the ancilla pair,
applies a doubly controlled Z (decomposed into T gates), and discards the
ancillas with an unconditional reset.

Circuits serialize to a line-oriented text form (``TOOMDTC-CIRCUIT v1``)
and can be executed exactly as a quantum channel by summing over all
measurement branches of a density matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dense import (CX4, CZ4, H, I2, S, S_DAG, X, Z, embed_1q, embed_2q)
from .lattice import LatticeTopology

HEADER = "TOOMDTC-CIRCUIT v1"

GATESET_CR = "cr"
GATESET_CPHASE = "cphase"

MEASURE_FEEDBACK = "measure_feedback"
TOFFOLI_RESET = "toffoli_reset"

# single-operand ops (PREP_PLUS/RESET are non-unitary reinitializations)
OPS_1Q = ("PREP_PLUS", "RESET", "H", "X", "Z", "S", "SDG", "T", "TDG")
OPS_2Q = ("CX", "CZ")       # CX is (control, target)
OPS_ANGLE = ("CR", "CPHASE")  # (system, ancilla, angle in units of pi)

MAX_INTERP_QUBITS = 10

T_GATE = np.diag([1.0, np.exp(1j * np.pi / 4)]).astype(complex)


@dataclass(frozen=True)
class Instruction:
    op: str
    targets: tuple[str, ...] = ()
    angle: float | None = None                  # units of pi
    record: int | None = None                   # MX destination register
    condition: tuple[tuple[int, int], ...] = ()  # AND of (record, +-1) tests

    def __post_init__(self):
        if self.op == "MX":
            if len(self.targets) != 1 or self.record is None:
                raise ValueError("MX takes one qubit and a record")
        elif self.op in OPS_1Q:
            if len(self.targets) != 1:
                raise ValueError(f"{self.op} takes one qubit")
        elif self.op in OPS_2Q:
            if len(self.targets) != 2:
                raise ValueError(f"{self.op} takes two qubits")
        elif self.op in OPS_ANGLE:
            if len(self.targets) != 2 or self.angle is None:
                raise ValueError(f"{self.op} takes two qubits and an angle")
        else:
            raise ValueError(f"unknown op {self.op!r}")
        if len(self.condition) > 2:
            raise ValueError("conditions are conjunctions of at most 2 tests")
        for rec, val in self.condition:
            if val not in (-1, +1):
                raise ValueError("condition values must be +-1")


@dataclass
class Circuit:
    n_system: int
    n_ancilla: int
    instructions: list[Instruction] = field(default_factory=list)

    @property
    def n_records(self) -> int:
        recs = [i.record for i in self.instructions if i.record is not None]
        return max(recs) + 1 if recs else 0

    def append(self, *instructions: Instruction):
        self.instructions.extend(instructions)


# ---------------------------------------------------------------------------
# hardware layouts
# ---------------------------------------------------------------------------

@dataclass
class HardwareLayout:
    """Ancilla connectivity: couplings[a] lists reachable system qubits
    (None means the ancilla couples to every system qubit)."""

    n_system: int
    n_ancilla: int
    couplings: tuple[frozenset[int] | None, ...]

    def can_host(self, ancilla: int, bond: tuple[int, int]) -> bool:
        c = self.couplings[ancilla]
        return c is None or (bond[0] in c and bond[1] in c)

    def pick(self, bond: tuple[int, int], in_use=frozenset()) -> int:
        """Lowest free ancilla coupled to both bond endpoints."""
        for a in range(self.n_ancilla):
            if a not in in_use and self.can_host(a, bond):
                return a
        raise ValueError(f"no free ancilla can reach bond {bond}")


def pooled_layout(n_system: int, n_ancilla: int = 2) -> HardwareLayout:
    """Small reusable ancilla pool with all-to-all coupling."""
    return HardwareLayout(n_system, n_ancilla, (None,) * n_ancilla)


def dedicated_layout(lattice: LatticeTopology) -> HardwareLayout:
    """One ancilla per lattice bond, coupled only to its two endpoints."""
    bonds = lattice.bonds()
    return HardwareLayout(
        lattice.n_sites, len(bonds), tuple(frozenset(b) for b in bonds)
    )


# ---------------------------------------------------------------------------
# gadgets
# ---------------------------------------------------------------------------

def compile_dw_measurement(bond: tuple[int, int], ancilla: int, record: int,
                           gateset: str = GATESET_CR,
                           correct_byproduct: bool = True):
    """Instructions measuring W = X_a X_b into a record via one ancilla.

    Returns (instructions, wall_value): the recorded value that signals a
    wall depends on the gadget (+1 for ``cr``, -1 for ``cphase``).
    """
    a, b = bond
    qa, qb, anc = f"q{a}", f"q{b}", f"a{ancilla}"
    if gateset == GATESET_CR:
        ins = [
            Instruction("PREP_PLUS", (anc,)),
            Instruction("CR", (qa, anc), angle=0.5),
            Instruction("CR", (qb, anc), angle=0.5),
            Instruction("MX", (anc,), record=record),
        ]
        if correct_byproduct:
            ins.append(Instruction("X", (qa,), condition=((record, -1),)))
        ins.append(Instruction("RESET", (anc,)))
        return ins, +1
    if gateset == GATESET_CPHASE:
        ins = [
            Instruction("PREP_PLUS", (anc,)),
            Instruction("H", (qa,)),
            Instruction("H", (qb,)),
            Instruction("CPHASE", (qa, anc), angle=1.0),
            Instruction("CPHASE", (qb, anc), angle=1.0),
            Instruction("H", (qa,)),
            Instruction("H", (qb,)),
            Instruction("MX", (anc,), record=record),
            Instruction("RESET", (anc,)),
        ]
        return ins, -1
    raise ValueError(f"unknown gateset {gateset!r}")


def _ccz(a: str, b: str, c: str) -> list[Instruction]:
    """Doubly controlled Z via the standard T-gate decomposition."""
    seq = [
        ("CX", b, c), ("TDG", c), ("CX", a, c), ("T", c),
        ("CX", b, c), ("TDG", c), ("CX", a, c), ("T", b), ("T", c),
        ("CX", a, b), ("T", a), ("TDG", b), ("CX", a, b),
    ]
    return [Instruction(op, tuple(ts)) for op, *ts in seq]


def _dw_coherent(bond: tuple[int, int], ancilla: int,
                 gateset: str) -> list[Instruction]:
    """Load the wall bit of a bond into an ancilla without measuring it.

    After these instructions the ancilla is |+> (cr) or |-> (cphase) when
    a wall is present, with no residual byproduct on the system.
    """
    a, b = bond
    qa, qb, anc = f"q{a}", f"q{b}", f"a{ancilla}"
    if gateset == GATESET_CR:
        return [
            Instruction("PREP_PLUS", (anc,)),
            Instruction("CR", (qa, anc), angle=0.5),
            Instruction("CR", (qb, anc), angle=0.5),
            # undo the no-wall branch byproduct: controlled i*X with the
            # ancilla |-> state as control
            Instruction("H", (anc,)),
            Instruction("CX", (anc, qa)),
            Instruction("S", (anc,)),
            Instruction("H", (anc,)),
        ]
    if gateset == GATESET_CPHASE:
        return [
            Instruction("PREP_PLUS", (anc,)),
            Instruction("H", (qa,)),
            Instruction("H", (qb,)),
            Instruction("CPHASE", (qa, anc), angle=1.0),
            Instruction("CPHASE", (qb, anc), angle=1.0),
            Instruction("H", (qa,)),
            Instruction("H", (qb,)),
        ]
    raise ValueError(f"unknown gateset {gateset!r}")


def compile_nec_round(lattice: LatticeTopology,
                      layout: HardwareLayout | None = None,
                      gateset: str = GATESET_CR,
                      variant: str = MEASURE_FEEDBACK) -> Circuit:
    """Full deterministic correction round: sublattice A then B, ascending.

    Every site with both rule bonds present gets one feedback application;
    sites at open boundaries are skipped, matching the dynamics.
    """
    if layout is None:
        layout = pooled_layout(lattice.n_sites, 2)
    if layout.n_system != lattice.n_sites:
        raise ValueError("layout system size does not match lattice")
    circuit = Circuit(lattice.n_sites, layout.n_ancilla)
    record = 0
    for label in (0, 1):
        for j in lattice.sublattice_sites(label):
            targets = lattice.nec_targets(int(j))
            if targets is None:
                continue
            if variant == MEASURE_FEEDBACK:
                recs = []
                wall_value = None
                for bond_ in targets:
                    anc = layout.pick(bond_)
                    ins, wall_value = compile_dw_measurement(
                        bond_, anc, record, gateset
                    )
                    circuit.append(*ins)
                    recs.append(record)
                    record += 1
                circuit.append(Instruction(
                    "Z", (f"q{int(j)}",),
                    condition=((recs[0], wall_value), (recs[1], wall_value)),
                ))
            elif variant == TOFFOLI_RESET:
                anc_n = layout.pick(targets[0])
                anc_e = layout.pick(targets[1], in_use=frozenset({anc_n}))
                circuit.append(*_dw_coherent(targets[0], anc_n, gateset))
                circuit.append(*_dw_coherent(targets[1], anc_e, gateset))
                an, ae = f"a{anc_n}", f"a{anc_e}"
                if gateset == GATESET_CR:
                    # wall <-> |+>; rotate so CCZ triggers on wall states
                    pre = [Instruction("H", (an,)), Instruction("X", (an,)),
                           Instruction("H", (ae,)), Instruction("X", (ae,))]
                    post = [Instruction("X", (an,)), Instruction("H", (an,)),
                            Instruction("X", (ae,)), Instruction("H", (ae,))]
                else:
                    # wall <-> |->, which H maps straight to |1>
                    pre = [Instruction("H", (an,)), Instruction("H", (ae,))]
                    post = [Instruction("H", (an,)), Instruction("H", (ae,))]
                circuit.append(*pre)
                circuit.append(*_ccz(an, ae, f"q{int(j)}"))
                circuit.append(*post)
                circuit.append(Instruction("RESET", (an,)),
                               Instruction("RESET", (ae,)))
            else:
                raise ValueError(f"unknown variant {variant!r}")
    return circuit


# ---------------------------------------------------------------------------
# text form
# ---------------------------------------------------------------------------

def _fmt_angle(t: float) -> str:
    if t == 1.0:
        return "pi"
    if t == -1.0:
        return "-pi"
    return f"{t:g}pi"


def _parse_angle(s: str) -> float:
    if not s.endswith("pi"):
        raise ValueError(f"bad angle {s!r}")
    body = s[:-2]
    if body in ("", "+"):
        return 1.0
    if body == "-":
        return -1.0
    return float(body)


def emit_instruction(ins: Instruction) -> str:
    if ins.op == "MX":
        line = f"MX {ins.targets[0]} -> r{ins.record}"
    elif ins.op in OPS_ANGLE:
        line = f"{ins.op} {ins.targets[0]} {ins.targets[1]} {_fmt_angle(ins.angle)}"
    else:
        line = " ".join((ins.op,) + ins.targets)
    if ins.condition:
        tests = " AND ".join(f"r{r}=={v:+d}".replace("+", "")
                             for r, v in ins.condition)
        line += f" IF {tests}"
    return line


def parse_instruction(line: str) -> Instruction:
    cond: tuple[tuple[int, int], ...] = ()
    if " IF " in line:
        line, cond_text = line.split(" IF ", 1)
        tests = []
        for t in cond_text.split(" AND "):
            reg, val = t.split("==")
            if not reg.startswith("r"):
                raise ValueError(f"bad condition register {reg!r}")
            tests.append((int(reg[1:]), int(val)))
        cond = tuple(tests)
    parts = line.split()
    op = parts[0]
    if op == "MX":
        if len(parts) != 4 or parts[2] != "->" or not parts[3].startswith("r"):
            raise ValueError(f"bad MX line {line!r}")
        return Instruction("MX", (parts[1],), record=int(parts[3][1:]),
                           condition=cond)
    if op in OPS_ANGLE:
        return Instruction(op, (parts[1], parts[2]),
                           angle=_parse_angle(parts[3]), condition=cond)
    return Instruction(op, tuple(parts[1:]), condition=cond)


def emit_text(circuit: Circuit) -> str:
    lines = [HEADER, f"QUBITS {circuit.n_system} {circuit.n_ancilla}"]
    lines.extend(emit_instruction(i) for i in circuit.instructions)
    return "\n".join(lines) + "\n"


def parse_text(text: str) -> Circuit:
    lines = [ln for ln in (raw.strip() for raw in text.splitlines())
             if ln and not ln.startswith("#")]
    if not lines or lines[0] != HEADER:
        raise ValueError(f"missing header {HEADER!r}")
    if len(lines) < 2 or not lines[1].startswith("QUBITS "):
        raise ValueError("missing QUBITS declaration")
    _, ns, na = lines[1].split()
    circuit = Circuit(int(ns), int(na))
    for ln in lines[2:]:
        circuit.append(parse_instruction(ln))
    return circuit


# ---------------------------------------------------------------------------
# exact execution as a channel
# ---------------------------------------------------------------------------

def _qubit_index(name: str, n_system: int) -> int:
    kind, idx = name[0], int(name[1:])
    if kind == "q":
        if idx >= n_system:
            raise ValueError(f"system qubit {name} out of range")
        return idx
    if kind == "a":
        return n_system + idx
    raise ValueError(f"bad qubit name {name!r}")


_UNITARY_1Q = {"H": H, "X": X, "Z": Z, "S": S, "SDG": S_DAG,
               "T": T_GATE, "TDG": T_GATE.conj().T}
_UNITARY_2Q = {"CX": CX4, "CZ": CZ4}

_KET0 = np.array([[1.0], [0.0]], dtype=complex)
_KETP = np.array([[1.0], [1.0]], dtype=complex) / np.sqrt(2.0)


def _cr_matrix(t: float) -> np.ndarray:
    """exp(-i (t pi / 2) X (x) Z), first operand X, second Z."""
    th = t * np.pi / 2
    return np.cos(th) * np.eye(4) - 1j * np.sin(th) * np.kron(X, Z)


def _cphase_matrix(t: float) -> np.ndarray:
    return np.diag([1.0, 1.0, 1.0, np.exp(1j * np.pi * t)]).astype(complex)


class _Embeds:
    """Memoized operator embeddings for one circuit execution."""

    def __init__(self, n_total: int):
        self.n = n_total
        self.cache: dict = {}

    def unitary(self, ins: Instruction, n_system: int) -> np.ndarray:
        key = (ins.op, ins.targets, ins.angle)
        u = self.cache.get(key)
        if u is not None:
            return u
        qs = [_qubit_index(t, n_system) for t in ins.targets]
        if ins.op in _UNITARY_1Q:
            u = embed_1q(_UNITARY_1Q[ins.op], qs[0], self.n)
        elif ins.op in _UNITARY_2Q:
            u = embed_2q(_UNITARY_2Q[ins.op], qs[0], qs[1], self.n)
        elif ins.op == "CR":
            u = embed_2q(_cr_matrix(ins.angle), qs[0], qs[1], self.n)
        elif ins.op == "CPHASE":
            u = embed_2q(_cphase_matrix(ins.angle), qs[0], qs[1], self.n)
        else:
            raise ValueError(f"{ins.op} is not unitary")
        self.cache[key] = u
        return u

    def kraus_reset(self, name: str, to_plus: bool, n_system: int):
        key = ("RESETK", name, to_plus)
        ks = self.cache.get(key)
        if ks is not None:
            return ks
        q = _qubit_index(name, n_system)
        ket = _KETP if to_plus else _KET0
        ks = tuple(
            embed_1q(ket @ bra.conj().T, q, self.n)
            for bra in (_KET0, np.flipud(_KET0))
        )
        self.cache[key] = ks
        return ks

    def x_projectors(self, name: str, n_system: int):
        key = ("PX", name)
        ps = self.cache.get(key)
        if ps is not None:
            return ps
        q = _qubit_index(name, n_system)
        xq = embed_1q(X, q, self.n)
        eye = np.eye(1 << self.n, dtype=complex)
        ps = (0.5 * (eye + xq), 0.5 * (eye - xq))
        self.cache[key] = ps
        return ps


def run_circuit_branches(circuit: Circuit, rho_system: np.ndarray,
                         prune: float = 1e-14):
    """Execute a circuit keeping every measurement branch separate.

    Returns a list of (records, weight, rho_system_normalized) with one
    entry per surviving outcome pattern; weights sum to 1.  Useful for
    checking which outcomes a gadget can produce and with what state.
    """
    ns, na = circuit.n_system, circuit.n_ancilla
    nt = ns + na
    if nt > MAX_INTERP_QUBITS:
        raise ValueError(f"{nt} qubits exceeds interpreter cap {MAX_INTERP_QUBITS}")
    anc = np.zeros((1 << na, 1 << na), dtype=complex)
    anc[0, 0] = 1.0
    rho = np.kron(anc, rho_system.astype(complex))
    emb = _Embeds(nt)
    branches: list[tuple[dict, np.ndarray]] = [({}, rho)]
    for ins in circuit.instructions:
        nxt = []
        for records, rho in branches:
            if ins.condition and not all(
                records[r] == v for r, v in ins.condition
            ):
                nxt.append((records, rho))
                continue
            if ins.op == "MX":
                pp, pm = emb.x_projectors(ins.targets[0], ns)
                for val, p in ((+1, pp), (-1, pm)):
                    out = p @ rho @ p
                    if np.trace(out).real > prune:
                        nxt.append(({**records, ins.record: val}, out))
            elif ins.op in ("PREP_PLUS", "RESET"):
                k0, k1 = emb.kraus_reset(
                    ins.targets[0], ins.op == "PREP_PLUS", ns
                )
                nxt.append((records,
                            k0 @ rho @ k0.conj().T + k1 @ rho @ k1.conj().T))
            else:
                u = emb.unitary(ins, ns)
                nxt.append((records, u @ rho @ u.conj().T))
        branches = nxt
    out = []
    for records, rho in branches:
        t = rho.reshape(1 << na, 1 << ns, 1 << na, 1 << ns)
        sys_rho = np.einsum("aiaj->ij", t)
        w = float(np.trace(sys_rho).real)
        out.append((records, w, sys_rho / w))
    return out


def run_circuit_channel(circuit: Circuit, rho_system: np.ndarray,
                        prune: float = 1e-14) -> np.ndarray:
    """Exact channel action of a circuit on a system density matrix.

    Ancillas start in |0>, every measurement branch is followed with its
    Born weight (unnormalized branch density matrices), conditioned
    instructions apply only on matching branches, and the ancillas are
    traced out at the end.  Branches are merged as soon as the records
    distinguishing them go dead, so the live branch count stays small.
    """
    ns, na = circuit.n_system, circuit.n_ancilla
    nt = ns + na
    if nt > MAX_INTERP_QUBITS:
        raise ValueError(f"{nt} qubits exceeds interpreter cap {MAX_INTERP_QUBITS}")
    if rho_system.shape != (1 << ns, 1 << ns):
        raise ValueError("system density matrix has the wrong shape")
    anc = np.zeros((1 << na, 1 << na), dtype=complex)
    anc[0, 0] = 1.0
    rho = np.kron(anc, rho_system.astype(complex))

    # last instruction index at which each record is tested
    last_use = {}
    for k, ins in enumerate(circuit.instructions):
        for rec, _ in ins.condition:
            last_use[rec] = k

    emb = _Embeds(nt)
    branches: list[tuple[dict, np.ndarray]] = [({}, rho)]
    for k, ins in enumerate(circuit.instructions):
        nxt: list[tuple[dict, np.ndarray]] = []
        for records, rho in branches:
            if ins.condition and not all(
                records[r] == v for r, v in ins.condition
            ):
                nxt.append((records, rho))
                continue
            if ins.op == "MX":
                pp, pm = emb.x_projectors(ins.targets[0], ns)
                for val, p in ((+1, pp), (-1, pm)):
                    out = p @ rho @ p
                    if np.trace(out).real > prune:
                        nxt.append(({**records, ins.record: val}, out))
            elif ins.op in ("PREP_PLUS", "RESET"):
                k0, k1 = emb.kraus_reset(
                    ins.targets[0], ins.op == "PREP_PLUS", ns
                )
                nxt.append((records,
                            k0 @ rho @ k0.conj().T + k1 @ rho @ k1.conj().T))
            else:
                u = emb.unitary(ins, ns)
                nxt.append((records, u @ rho @ u.conj().T))
        # drop dead records, then merge identical branches
        merged: dict[tuple, np.ndarray] = {}
        for records, rho in nxt:
            live = {r: v for r, v in records.items() if last_use.get(r, -1) > k}
            key = tuple(sorted(live.items()))
            if key in merged:
                merged[key] = merged[key] + rho
            else:
                merged[key] = rho
        branches = [(dict(key), rho) for key, rho in merged.items()]

    total = sum(rho for _, rho in branches)
    # trace out the ancillas (high-order qubits)
    t = total.reshape(1 << na, 1 << ns, 1 << na, 1 << ns)
    return np.einsum("aiaj->ij", t)
