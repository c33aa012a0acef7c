"""One-way LOCC protocols: representation, execution, and the two reusable
sub-protocols (qudit teleportation and flattening of a Schmidt spectrum onto a
maximally entangled target).

A protocol is a finite family of labelled branches.  Each branch pairs a
measurement operator ``a_op`` acting on the sender's input register with an
isometry ``b_op`` applied by the receiver once the outcome label is
communicated.  Completeness of the measurement and isometry of every
``b_op`` are enforced at construction time, so downstream code can rely on
probabilities summing to one.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ValidationError, VerificationError
from .numerics import dagger, tolerance


def max_entangled_vector(d: int) -> np.ndarray:
    """Return the maximally entangled vector (1/sqrt(d)) sum_l |l>|l> in C^{d*d}."""
    if d < 1:
        raise ValidationError(f"dimension must be positive, got {d}")
    vec = np.zeros(d * d, dtype=complex)
    vec[:: d + 1] = 1.0 / np.sqrt(float(d))
    return vec


def generalized_pauli(d: int, x: int, z: int) -> np.ndarray:
    """Return X^x Z^z on C^d with X|l> = |l+1 mod d> and Z|l> = e^{2 pi i l/d}|l>."""
    if d < 1:
        raise ValidationError(f"dimension must be positive, got {d}")
    ls = np.arange(d)
    op = np.zeros((d, d), dtype=complex)
    op[(ls + x) % d, ls] = np.exp(2j * np.pi * z * ls / d)
    return op


@dataclass(frozen=True)
class Branch:
    """One protocol branch: outcome ``label``, sender operator, receiver isometry."""

    label: tuple
    a_op: np.ndarray
    b_op: np.ndarray

    def __post_init__(self) -> None:
        for name in ("a_op", "b_op"):
            arr = np.array(getattr(self, name), dtype=complex)
            if arr.ndim != 2:
                raise ValidationError(f"{name} must be a matrix, got shape {arr.shape}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "label", tuple(self.label))


@dataclass(frozen=True)
class OneWayProtocol:
    """A one-way LOCC protocol from sender A to receiver B.

    ``a_in_dim``/``b_in_dim`` describe the two input registers; every branch
    maps them to common output registers (the sender side may be fully
    measured out, i.e. one-dimensional).
    """

    branches: tuple
    name: str = ""

    def __post_init__(self) -> None:
        tol = tolerance()
        if not self.branches:
            raise ValidationError("protocol must have at least one branch")
        branches = tuple(self.branches)
        a_shape = branches[0].a_op.shape
        b_shape = branches[0].b_op.shape
        labels = set()
        for br in branches:
            if br.a_op.shape != a_shape or br.b_op.shape != b_shape:
                raise ValidationError(
                    "all branches must share operator shapes: "
                    f"{br.a_op.shape}/{br.b_op.shape} vs {a_shape}/{b_shape}"
                )
            if br.label in labels:
                raise ValidationError(f"duplicate branch label {br.label}")
            labels.add(br.label)
            gram = dagger(br.b_op) @ br.b_op
            if np.max(np.abs(gram - np.eye(b_shape[1]))) > 10 * tol:
                raise ValidationError(
                    f"branch {br.label}: receiver operator is not an isometry"
                )
        stacked = np.concatenate([br.a_op for br in branches], axis=0)
        total = dagger(stacked) @ stacked
        residual = float(np.max(np.abs(total - np.eye(a_shape[1]))))
        if residual > 10 * tol:
            raise ValidationError(
                f"measurement completeness fails (residual {residual:.2e})"
            )
        object.__setattr__(self, "branches", branches)

    @property
    def a_in_dim(self) -> int:
        return self.branches[0].a_op.shape[1]

    @property
    def a_out_dim(self) -> int:
        return self.branches[0].a_op.shape[0]

    @property
    def b_in_dim(self) -> int:
        return self.branches[0].b_op.shape[1]

    @property
    def b_out_dim(self) -> int:
        return self.branches[0].b_op.shape[0]

    def completeness_residual(self) -> float:
        stacked = np.concatenate([br.a_op for br in self.branches], axis=0)
        total = dagger(stacked) @ stacked
        return float(np.max(np.abs(total - np.eye(self.a_in_dim))))


@dataclass(frozen=True)
class BranchOutcome:
    """Result of running one branch: label, probability, normalized output."""

    label: tuple
    probability: float
    state: np.ndarray


@dataclass(frozen=True)
class VerificationReport:
    """Branch-by-branch comparison of a protocol run against a target vector."""

    min_branch_fidelity: float
    completeness_residual: float
    probability_total: float
    branch_count: int
    passed: bool


def apply_branch(
    branch: Branch, vec: np.ndarray, a_in: int, b_in: int
) -> np.ndarray:
    """Apply one branch to ``vec`` on (spectator, a_in, b_in); unnormalized output."""
    size = vec.size
    if size % (a_in * b_in) != 0:
        raise ValidationError(
            f"input dimension {size} incompatible with registers {a_in}x{b_in}"
        )
    spec = size // (a_in * b_in)
    tensor = np.asarray(vec, dtype=complex).reshape(spec, a_in, b_in)
    half = np.einsum("iab,yb->iay", tensor, branch.b_op)
    return np.einsum("xa,iay->ixy", branch.a_op, half)


def apply_protocol(protocol: OneWayProtocol, vec: np.ndarray) -> list:
    """Run every branch on ``vec``; return outcomes with probability above tolerance.

    The input vector lives on (spectator x a_in x b_in); the spectator
    dimension is inferred from the vector length.
    """
    tol = tolerance()
    vec = np.asarray(vec, dtype=complex).reshape(-1)
    norm = np.linalg.norm(vec)
    if abs(norm - 1.0) > 1e-6:
        raise ValidationError(f"input vector norm {norm} is not 1")
    outcomes = []
    total = 0.0
    for br in protocol.branches:
        out = apply_branch(br, vec, protocol.a_in_dim, protocol.b_in_dim)
        prob = float(np.linalg.norm(out) ** 2)
        total += prob
        if prob > tol:
            outcomes.append(
                BranchOutcome(
                    label=br.label,
                    probability=prob,
                    state=out.reshape(-1) / np.sqrt(prob),
                )
            )
    if abs(total - 1.0) > 10 * tol:
        raise VerificationError(f"branch probabilities sum to {total}, not 1")
    return outcomes


def verify_protocol(
    protocol: OneWayProtocol,
    vec: np.ndarray,
    target: np.ndarray,
    phase_insensitive: bool = True,
) -> VerificationReport:
    """Check that every branch maps ``vec`` onto ``target`` exactly.

    Branch outputs are compared by squared fidelity; with
    ``phase_insensitive=False`` the comparison additionally demands a positive
    real overlap (no global-phase forgiveness).
    """
    tol = tolerance()
    target = np.asarray(target, dtype=complex).reshape(-1)
    t_norm = np.linalg.norm(target)
    if abs(t_norm - 1.0) > 1e-6:
        raise ValidationError(f"target vector norm {t_norm} is not 1")
    outcomes = apply_protocol(protocol, vec)
    min_fid = 1.0
    total = 0.0
    for out in outcomes:
        if out.state.size != target.size:
            raise ValidationError(
                f"branch output dimension {out.state.size} != target {target.size}"
            )
        overlap = complex(np.vdot(target, out.state))
        fid = abs(overlap) ** 2 if phase_insensitive else max(overlap.real, 0.0) ** 2
        min_fid = min(min_fid, fid)
        total += out.probability
    residual = protocol.completeness_residual()
    passed = min_fid >= 1.0 - 10 * tol and residual <= 10 * tol
    return VerificationReport(
        min_branch_fidelity=min_fid,
        completeness_residual=residual,
        probability_total=total,
        branch_count=len(outcomes),
        passed=passed,
    )


def teleportation_protocol(d: int) -> OneWayProtocol:
    """Teleport a d-level register using a shared maximally entangled pair.

    The sender measures (input x sender-half) in the maximally entangled
    basis indexed by (x, z); the receiver corrects with X^x Z^z.  ``d = 1``
    degenerates to the single trivial branch.
    """
    if d < 1:
        raise ValidationError(f"dimension must be positive, got {d}")
    branches = []
    scale = 1.0 / np.sqrt(float(d))
    for x in range(d):
        for z in range(d):
            sigma = generalized_pauli(d, x, z)
            a_op = (sigma.conj().reshape(1, d * d)) * scale
            branches.append(Branch(label=(x, z), a_op=a_op, b_op=sigma))
    return OneWayProtocol(branches=tuple(branches), name=f"teleport[{d}]")


@dataclass(frozen=True)
class FlattenStep:
    """One flattening outcome: the L selected levels and their common mass."""

    indices: tuple
    mass: float


def flatten_schedule(p: Sequence[float], L: int) -> list:
    """Split a descending mass vector into chunks of L distinct levels each.

    Wrap-around construction: lay the masses end to end on a line of length
    total(p), cut the line into L segments of equal length, and emit one
    outcome per breakpoint interval — the L indices covering that interval
    offset in each segment, with the interval width as the per-level mass.
    Requires max(p) <= total(p)/L, which guarantees the L indices of every
    outcome are distinct; each outcome exhausts its share of every selected
    mass, so the schedule consumes the vector exactly in at most len(p) steps.
    """
    tol = tolerance()
    masses = np.asarray(p, dtype=float)
    if masses.ndim != 1 or masses.size == 0:
        raise ValidationError("mass vector must be a nonempty 1-d sequence")
    if np.any(masses < -tol):
        raise ValidationError("mass vector has negative entries")
    if np.any(np.diff(masses) > tol):
        raise ValidationError("mass vector must be sorted in descending order")
    if L < 1 or L > masses.size:
        raise ValidationError(f"target level count {L} out of range 1..{masses.size}")
    masses = np.clip(masses, 0.0, None)
    total = float(masses.sum())
    if total <= tol:
        raise ValidationError("mass vector has no weight")
    seg = total / L
    if masses.max() > seg + tol:
        raise ValidationError(
            f"flattening impossible: max mass {masses.max():.6g} exceeds "
            f"total/L = {seg:.6g}"
        )
    bounds = np.cumsum(masses)
    # distinct interior breakpoints: mass boundaries folded into one segment
    cuts = [0.0]
    for b in bounds[:-1]:
        off = float(b % seg)
        if off > 1e-12 and seg - off > 1e-12:
            cuts.append(off)
    cuts = sorted(set(np.round(cuts, 14)))
    cuts.append(seg)
    steps = []
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        width = hi - lo
        if width <= 1e-12:
            continue
        mid = 0.5 * (lo + hi)
        chosen = tuple(
            int(np.searchsorted(bounds, k * seg + mid, side="right"))
            for k in range(L)
        )
        if len(set(chosen)) != L or max(chosen) >= masses.size:
            raise VerificationError(
                f"flattening failed: interval at offset {mid:.6g} does not "
                f"select {L} distinct levels (got {chosen})"
            )
        steps.append(FlattenStep(indices=chosen, mass=float(width)))
    return steps


def flatten_to_uniform(p: Sequence[float], L: int) -> OneWayProtocol:
    """Convert the pure state with Schmidt vector ``p`` into a maximally
    entangled L-level pair, exactly in every branch.

    The sender's outcome-s operator rescales the selected levels to a common
    mass; the receiver permutes the matching levels to the front of its
    register, so the output is the L-level maximally entangled vector
    embedded in (L x len(p)).
    """
    steps = flatten_schedule(p, L)
    n = len(p)
    branches = []
    for s, step in enumerate(steps):
        a_op = np.zeros((L, n), dtype=complex)
        b_op = np.zeros((n, n), dtype=complex)
        rest = [i for i in range(n) if i not in step.indices]
        for level, i in enumerate(step.indices):
            a_op[level, i] = np.sqrt(step.mass / p[i])
            b_op[level, i] = 1.0
        for offset, i in enumerate(rest):
            b_op[L + offset, i] = 1.0
        branches.append(Branch(label=(s,), a_op=a_op, b_op=b_op))
    return OneWayProtocol(branches=tuple(branches), name=f"flatten[{n}->{L}]")


def flatten_source_vector(p: Sequence[float]) -> np.ndarray:
    """Return the purification sum_i sqrt(p_i)|i>|i> matching flatten_to_uniform."""
    p = np.asarray(p, dtype=float)
    n = p.size
    vec = np.zeros(n * n, dtype=complex)
    vec[:: n + 1] = np.sqrt(np.clip(p, 0.0, None))
    return vec


def flatten_target_vector(L: int, n: int) -> np.ndarray:
    """The L-level maximally entangled vector embedded in C^L (x) C^n."""
    if n < L:
        raise ValidationError(f"receiver dimension {n} smaller than target {L}")
    vec = np.zeros((L, n), dtype=complex)
    for l in range(L):
        vec[l, l] = 1.0 / np.sqrt(float(L))
    return vec.reshape(-1)


def protocol_choi(
    protocol: OneWayProtocol,
    input_dim: int,
    embed: Callable[[np.ndarray], np.ndarray],
) -> np.ndarray:
    """Choi matrix of the channel induced by the protocol on a chosen input.

    ``embed`` maps a channel-input vector of dimension ``input_dim`` to the
    protocol's full input vector (appending fixed resource registers).  The
    returned matrix is sum_{m,j,k} out_m(e_j) out_m(e_k)^dag (x) |j><k|,
    normalized so the identity channel gives the unnormalized maximally
    entangled projector of trace ``input_dim``.
    """
    raw = []
    for j in range(input_dim):
        e = np.zeros(input_dim, dtype=complex)
        e[j] = 1.0
        full = np.asarray(embed(e), dtype=complex).reshape(-1)
        raw.append(
            [
                apply_branch(br, full, protocol.a_in_dim, protocol.b_in_dim).reshape(-1)
                for br in protocol.branches
            ]
        )
    out_dim = raw[0][0].size
    choi = np.zeros((out_dim * input_dim, out_dim * input_dim), dtype=complex)
    for m in range(len(protocol.branches)):
        block = np.zeros((out_dim, input_dim), dtype=complex)
        for j in range(input_dim):
            block[:, j] = raw[j][m]
        vecm = block.reshape(-1)  # index order (out, j)
        choi += np.outer(vecm, vecm.conj())
    return choi


def _matrix_to_json(mat: np.ndarray) -> list:
    return [[[float(v.real), float(v.imag)] for v in row] for row in np.asarray(mat)]


def protocol_to_json(protocol: OneWayProtocol) -> dict:
    """Serializable audit dump: labels and full operator matrices per branch."""
    return {
        "name": protocol.name,
        "a_in_dim": protocol.a_in_dim,
        "a_out_dim": protocol.a_out_dim,
        "b_in_dim": protocol.b_in_dim,
        "b_out_dim": protocol.b_out_dim,
        "branch_count": len(protocol.branches),
        "branches": [
            {
                "label": list(br.label),
                "a_op": _matrix_to_json(br.a_op),
                "b_op": _matrix_to_json(br.b_op),
            }
            for br in protocol.branches
        ],
    }
