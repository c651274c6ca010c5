"""Dense simulation of qudit graph states and their stabilizer tests.

Conventions: ``Z|j> = w^j |j>`` and ``X|j> = |j+1 mod d>`` with
``w = exp(2 pi i / d)``, so ``Z X = w X Z``.  A graph edge (i, j, m) applies
the controlled phase ``CZ^m |a, b> = w^{m a b} |a, b>``.  The generator of
vertex i is ``S_i = X_i prod_j Z_j^{m_ij}`` and ``g_k = prod_i S_i^{k_i}``.

A test with label k measures every local factor of g_k and passes when the
outcome digits sum to 0 mod d.  Everything is dense, so this is meant for a
handful of qudits.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import product
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np
from scipy.linalg import expm, schur

from .adversarial import MixtureSpec, StrategyLike, as_strategy
from .errors import DomainError, ResourceError

MAX_STATE_DIM = 2 ** 14
MAX_OPERATOR_DIM = 2 ** 11
MAX_TRIAL_TESTS = 10 ** 9
_TOL = 1e-10


def _is_prime(d: int) -> bool:
    if d < 2:
        return False
    return all(d % p for p in range(2, int(math.isqrt(d)) + 1))


# ---------------------------------------------------------------------------
# graph specification

@dataclass(frozen=True)
class GraphSpec:
    """Weighted graph with edge multiplicities in Z_d; vertices are 0-based."""

    d: int
    n: int
    edges: Tuple[Tuple[int, int, int], ...] = ()

    def __post_init__(self):
        if not _is_prime(self.d):
            raise DomainError(f"local dimension must be prime, got {self.d}")
        if self.n < 1:
            raise DomainError("need at least one vertex")
        if self.d ** self.n > MAX_STATE_DIM:
            raise ResourceError(f"d^n = {self.d ** self.n} exceeds the cap {MAX_STATE_DIM}")
        norm = []
        seen = set()
        for e in self.edges:
            i, j, m = (int(v) for v in e)
            if i == j:
                raise DomainError("self-loops are not allowed")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise DomainError(f"edge ({i}, {j}) references a missing vertex")
            key = (min(i, j), max(i, j))
            if key in seen:
                raise DomainError(f"duplicate edge {key}")
            seen.add(key)
            norm.append((i, j, m % self.d))
        object.__setattr__(self, "edges", tuple(norm))

    @property
    def dim(self) -> int:
        return self.d ** self.n

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n, self.n), dtype=np.int64)
        for i, j, m in self.edges:
            a[i, j] = a[j, i] = m
        return a

    # -- serialization -----------------------------------------------------

    @classmethod
    def parse(cls, text: str) -> "GraphSpec":
        """Read the ``d n`` + ``i j m`` line format, or the equivalent JSON object."""
        stripped = text.strip()
        if stripped.startswith("{"):
            try:
                obj = json.loads(stripped)
                return cls(int(obj["d"]), int(obj["n"]),
                           tuple(tuple(int(v) for v in e) for e in obj.get("edges", [])))
            except (KeyError, TypeError, ValueError) as exc:
                if isinstance(exc, DomainError):
                    raise
                raise DomainError(f"malformed graph JSON: {exc}") from exc
        rows = []
        for raw in text.splitlines():
            line = raw.split("#", 1)[0].strip()
            if line:
                rows.append(line.split())
        if not rows:
            raise DomainError("empty graph description")
        try:
            if len(rows[0]) != 2:
                raise ValueError("header must be 'd n'")
            d, n = int(rows[0][0]), int(rows[0][1])
            edges = []
            for r in rows[1:]:
                if len(r) == 2:
                    r = r + ["1"]
                if len(r) != 3:
                    raise ValueError(f"bad edge line {' '.join(r)!r}")
                edges.append(tuple(int(v) for v in r))
        except ValueError as exc:
            raise DomainError(f"malformed graph file: {exc}") from exc
        return cls(d, n, tuple(edges))

    @classmethod
    def load(cls, path: str) -> "GraphSpec":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.parse(fh.read())

    def to_text(self) -> str:
        lines = [f"{self.d} {self.n}"] + [f"{i} {j} {m}" for i, j, m in self.edges]
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        return json.dumps({"d": self.d, "n": self.n, "edges": [list(e) for e in self.edges]})

    # -- common shapes ----------------------------------------------------

    @classmethod
    def linear_cluster(cls, d: int, n: int) -> "GraphSpec":
        return cls(d, n, tuple((i, i + 1, 1) for i in range(n - 1)))

    @classmethod
    def triangle(cls, d: int) -> "GraphSpec":
        return cls(d, 3, ((0, 1, 1), (1, 2, 1), (0, 2, 1)))


# ---------------------------------------------------------------------------
# single-qudit operators

def _omega(d: int) -> complex:
    return np.exp(2j * np.pi / d)


def shift(d: int) -> np.ndarray:
    return np.roll(np.eye(d, dtype=complex), 1, axis=0)


def clock(d: int) -> np.ndarray:
    return np.diag(_omega(d) ** np.arange(d))


def _local_pauli(d: int, x: int, z: int) -> np.ndarray:
    return np.linalg.matrix_power(shift(d), x % d) @ np.linalg.matrix_power(clock(d), z % d)


# ---------------------------------------------------------------------------
# Pauli strings and stabilizer elements

@dataclass(frozen=True)
class PauliString:
    """w^phase_exp * tensor_i X^{x_i} Z^{z_i}."""

    d: int
    x_exps: Tuple[int, ...]
    z_exps: Tuple[int, ...]
    phase_exp: int = 0

    def __post_init__(self):
        d = self.d
        object.__setattr__(self, "x_exps", tuple(int(v) % d for v in self.x_exps))
        object.__setattr__(self, "z_exps", tuple(int(v) % d for v in self.z_exps))
        object.__setattr__(self, "phase_exp", int(self.phase_exp) % d)
        if len(self.x_exps) != len(self.z_exps):
            raise DomainError("x and z exponent vectors must have equal length")

    @property
    def n(self) -> int:
        return len(self.x_exps)

    def __mul__(self, other: "PauliString") -> "PauliString":
        if self.d != other.d or self.n != other.n:
            raise DomainError("incompatible Pauli strings")
        # Z^a X^b = w^{ab} X^b Z^a at each site
        extra = sum(za * xb for za, xb in zip(self.z_exps, other.x_exps))
        return PauliString(
            self.d,
            tuple(a + b for a, b in zip(self.x_exps, other.x_exps)),
            tuple(a + b for a, b in zip(self.z_exps, other.z_exps)),
            self.phase_exp + other.phase_exp + extra,
        )

    def local_factors(self) -> List[np.ndarray]:
        """Per-site d x d matrices whose tensor product is the full operator.

        Each factor is scaled so that its eigenvalues are powers of w (for
        d = 2, X Z is multiplied by i), and the leftover global scalar is
        folded into the first non-identity site.  The product of the local
        eigenvalues then equals the eigenvalue of the whole string.
        """
        d = self.d
        mats, scale = [], _omega(d) ** self.phase_exp
        for x, z in zip(self.x_exps, self.z_exps):
            m = _local_pauli(d, x, z)
            if d == 2 and x == 1 and z == 1:
                m = 1j * m
                scale *= -1j
            mats.append(m)
        nontrivial = [i for i, (x, z) in enumerate(zip(self.x_exps, self.z_exps)) if x or z]
        if nontrivial:
            mats[nontrivial[0]] = scale * mats[nontrivial[0]]
        elif abs(scale - 1) > 1e-12:
            raise DomainError("identity string with a non-trivial phase is not a test")
        return mats

    def matrix(self) -> np.ndarray:
        dim = self.d ** self.n
        if dim > MAX_OPERATOR_DIM:
            raise ResourceError(f"dense operator of dimension {dim} exceeds {MAX_OPERATOR_DIM}")
        out = np.array([[_omega(self.d) ** self.phase_exp]], dtype=complex)
        for x, z in zip(self.x_exps, self.z_exps):
            out = np.kron(out, _local_pauli(self.d, x, z))
        return out


def _check_k(spec: GraphSpec, k_vec) -> Tuple[int, ...]:
    k = tuple(int(v) % spec.d for v in k_vec)
    if len(k) != spec.n:
        raise DomainError(f"label must have length {spec.n}")
    return k


def stabilizer_element(spec: GraphSpec, k_vec) -> PauliString:
    """Pauli-string form of prod_i S_i^{k_i}, with its exact phase."""
    k = _check_k(spec, k_vec)
    adj = spec.adjacency()
    z = [int(sum(adj[i, a] * k[i] for i in range(spec.n))) for a in range(spec.n)]
    # at site a the factors arrive as Z^{A_a} X^{k_a} Z^{...}; reorder to X Z
    phase = sum(int(sum(adj[i, a] * k[i] for i in range(a))) * k[a] for a in range(spec.n))
    return PauliString(spec.d, k, tuple(z), phase)


def generator(spec: GraphSpec, i: int) -> PauliString:
    e = [0] * spec.n
    e[i] = 1
    return stabilizer_element(spec, e)


def all_labels(spec: GraphSpec) -> Iterable[Tuple[int, ...]]:
    return product(range(spec.d), repeat=spec.n)


def label_from_index(spec: GraphSpec, idx: int) -> Tuple[int, ...]:
    digits = []
    for _ in range(spec.n):
        idx, r = divmod(idx, spec.d)
        digits.append(r)
    return tuple(reversed(digits))


# ---------------------------------------------------------------------------
# states

@dataclass
class QuantumState:
    """Pure (amplitude vector) or mixed (density matrix) state of n qudits."""

    d: int
    n: int
    kind: str
    data: np.ndarray

    def __post_init__(self):
        dim = self.d ** self.n
        self.data = np.asarray(self.data, dtype=complex)
        if self.kind == "pure":
            if self.data.shape != (dim,):
                raise DomainError(f"amplitudes must have shape ({dim},)")
            if abs(np.linalg.norm(self.data) - 1.0) > _TOL:
                raise DomainError("state vector is not normalised")
        elif self.kind == "mixed":
            if dim > MAX_OPERATOR_DIM:
                raise ResourceError(f"density matrix of dimension {dim} exceeds {MAX_OPERATOR_DIM}")
            if self.data.shape != (dim, dim):
                raise DomainError(f"density matrix must have shape ({dim}, {dim})")
            if np.max(np.abs(self.data - self.data.conj().T)) > _TOL:
                raise DomainError("density matrix is not Hermitian")
            self.data = 0.5 * (self.data + self.data.conj().T)
            if abs(np.trace(self.data).real - 1.0) > _TOL:
                raise DomainError("density matrix does not have unit trace")
            if np.linalg.eigvalsh(self.data).min() < -_TOL:
                raise DomainError("density matrix is not positive semidefinite")
        else:
            raise DomainError("kind must be 'pure' or 'mixed'")

    @property
    def dim(self) -> int:
        return self.d ** self.n

    def density(self) -> np.ndarray:
        if self.kind == "mixed":
            return self.data
        if self.dim > MAX_OPERATOR_DIM:
            raise ResourceError(f"density matrix of dimension {self.dim} exceeds {MAX_OPERATOR_DIM}")
        return np.outer(self.data, self.data.conj())

    def to_json(self) -> str:
        flat = self.data.ravel()
        return json.dumps({"d": self.d, "n": self.n, "kind": self.kind,
                           "shape": list(self.data.shape),
                           "data": [[float(v.real), float(v.imag)] for v in flat]})


def build_graph_state(spec: GraphSpec) -> QuantumState:
    """prod_e CZ_e^{m_e} |+>^n as an amplitude vector."""
    d, n = spec.d, spec.n
    digits = np.indices((d,) * n).reshape(n, -1)
    exponent = np.zeros(d ** n, dtype=np.int64)
    for i, j, m in spec.edges:
        exponent += m * digits[i] * digits[j]
    amps = _omega(d) ** (exponent % d) / math.sqrt(d ** n)
    return QuantumState(d, n, "pure", amps)


def _apply_local(tensor: np.ndarray, site: int, mat: np.ndarray, n: int, axis_offset: int = 0) -> np.ndarray:
    """Contract a d x d matrix into one qudit axis of a reshaped tensor."""
    ax = axis_offset + site
    out = np.tensordot(mat, tensor, axes=([1], [ax]))
    return np.moveaxis(out, 0, ax)


def _pauli_on_vector(vec: np.ndarray, d: int, n: int, pauli: PauliString) -> np.ndarray:
    t = vec.reshape((d,) * n)
    for site, (x, z) in enumerate(zip(pauli.x_exps, pauli.z_exps)):
        if x or z:
            t = _apply_local(t, site, _local_pauli(d, x, z), n)
    return (_omega(d) ** pauli.phase_exp) * t.reshape(-1)


def apply_pauli(state: QuantumState, pauli: PauliString) -> np.ndarray:
    """Pauli string applied to a pure state, without building the dense matrix."""
    if state.kind != "pure":
        raise DomainError("apply_pauli needs a pure state")
    return _pauli_on_vector(state.data, state.d, state.n, pauli)


# ---------------------------------------------------------------------------
# tests and strategies

def test_projector(spec: GraphSpec, k_vec) -> np.ndarray:
    """(1/d) sum_j g_k^j: the projector onto the +1 eigenspace of g_k."""
    g = stabilizer_element(spec, k_vec).matrix()
    acc = np.eye(spec.dim, dtype=complex)
    power = np.eye(spec.dim, dtype=complex)
    for _ in range(1, spec.d):
        power = power @ g
        acc += power
    return acc / spec.d


def strategy_operator(spec: GraphSpec, lam: float, via: str = "spectral") -> np.ndarray:
    """Homogeneous strategy |G><G| + lam (1 - |G><G|).

    ``via="mixing"`` builds it as p * (average of all test projectors) plus
    (1 - p) * identity with p = d (1 - lam)/(d - 1), which needs lam >= 1/d.
    """
    if not 0.0 <= lam < 1.0:
        raise DomainError("lambda must lie in [0, 1)")
    dim = spec.dim
    if dim > MAX_OPERATOR_DIM:
        raise ResourceError(f"dense operator of dimension {dim} exceeds {MAX_OPERATOR_DIM}")
    if via == "spectral":
        psi = build_graph_state(spec).data
        proj = np.outer(psi, psi.conj())
        return proj + lam * (np.eye(dim) - proj)
    if via == "mixing":
        p = mixing_probability(spec.d, lam)
        avg = sum(test_projector(spec, k) for k in all_labels(spec)) / dim
        return p * avg + (1 - p) * np.eye(dim)
    raise DomainError("via must be 'spectral' or 'mixing'")


def mixing_probability(d: int, lam: float) -> float:
    """Weight of the uniform stabilizer test that yields second eigenvalue lam."""
    if not 1.0 / d - 1e-15 <= lam < 1.0:
        raise DomainError(f"lambda must lie in [1/d, 1) for the mixing construction (d={d})")
    return min(1.0, d * (1.0 - lam) / (d - 1))


def pass_probability(state: QuantumState, spec: GraphSpec, k_vec) -> float:
    """Probability that the state passes the test with label k_vec."""
    _check_state(state, spec)
    g = stabilizer_element(spec, k_vec)
    if state.kind == "pure":
        acc, v = 1.0, state.data
        for _ in range(1, spec.d):
            v = _pauli_on_vector(v, spec.d, spec.n, g)
            acc += np.vdot(state.data, v).real
        return float(min(1.0, max(0.0, acc / spec.d)))
    val = np.trace(test_projector(spec, k_vec) @ state.data).real
    return float(min(1.0, max(0.0, val)))


def _check_state(state: QuantumState, spec: GraphSpec) -> None:
    if state.d != spec.d or state.n != spec.n:
        raise DomainError("state and graph have different shapes")


# ---------------------------------------------------------------------------
# outcome sampling

@dataclass(frozen=True)
class TestRecord:
    k_vec: Tuple[int, ...]
    outcomes: Tuple[int, ...]
    passed: bool


def _eigensystem(mat: np.ndarray, d: int):
    """Unitary eigenbasis of a normal matrix, with eigenvalues as digits of w."""
    t, q = schur(mat, output="complex")
    angles = np.angle(np.diag(t))
    digits = np.rint(angles * d / (2 * np.pi)).astype(np.int64) % d
    return q, digits


class _OutcomeTable:
    """Joint outcome distributions of the local measurements, cached per label."""

    def __init__(self, state: QuantumState, spec: GraphSpec):
        _check_state(state, spec)
        self.state, self.spec = state, spec
        self._cache: Dict[Tuple[int, ...], tuple] = {}

    def get(self, k: Tuple[int, ...]):
        hit = self._cache.get(k)
        if hit is not None:
            return hit
        spec, st = self.spec, self.state
        d, n = spec.d, spec.n
        factors = stabilizer_element(spec, k).local_factors()
        sites = [i for i, f in enumerate(factors) if np.max(np.abs(f - np.eye(d))) > 1e-12]
        digit_rows = []
        if st.kind == "pure":
            t = st.data.reshape((d,) * n)
            for s in sites:
                q, dig = _eigensystem(factors[s], d)
                t = _apply_local(t, s, q.conj().T, n)
                digit_rows.append(dig)
            probs = np.abs(t) ** 2
            other = tuple(i for i in range(n) if i not in sites)
            probs = probs.sum(axis=other) if other else probs
        else:
            t = st.data.reshape((d,) * (2 * n))
            for s in sites:
                q, dig = _eigensystem(factors[s], d)
                t = _apply_local(t, s, q.conj().T, n)
                t = _apply_local(t, s, q.T, n, axis_offset=n)
                digit_rows.append(dig)
            diag = np.einsum(_diag_subscripts(n), t).real
            other = tuple(i for i in range(n) if i not in sites)
            probs = diag.sum(axis=other) if other else diag
        probs = np.clip(np.asarray(probs, dtype=float).reshape(-1), 0.0, None)
        probs /= probs.sum()
        if sites:
            grids = np.meshgrid(*digit_rows, indexing="ij")
            fails = (sum(grids).reshape(-1) % d) != 0
        else:
            fails = np.zeros(1, dtype=bool)
        entry = (tuple(sites), digit_rows, np.cumsum(probs), fails)
        self._cache[k] = entry
        return entry

    def outcomes(self, k: Tuple[int, ...], joint_index: int) -> Tuple[int, ...]:
        sites, digit_rows, _, _ = self.get(k)
        out = [0] * self.spec.n
        if sites:
            pos = np.unravel_index(joint_index, [self.spec.d] * len(sites))
            for site, row, j in zip(sites, digit_rows, pos):
                out[site] = int(row[j])
        return tuple(out)

    def stacked(self):
        """(cdf, fails) tables indexed by label index, padded to equal width."""
        rows = [self.get(label_from_index(self.spec, i)) for i in range(self.spec.dim)]
        width = max(r[2].size for r in rows)
        cdf = np.full((len(rows), width), 2.0)
        fails = np.zeros((len(rows), width), dtype=bool)
        sizes = np.empty(len(rows), dtype=np.int64)
        for i, r in enumerate(rows):
            cdf[i, :r[2].size] = r[2]
            fails[i, :r[3].size] = r[3]
            sizes[i] = r[2].size
        return cdf, fails, sizes


def _diag_subscripts(n: int) -> str:
    letters = "abcdefghijklmnopqrstuvwxyz"
    if n > 26:
        raise ResourceError("too many qudits for the mixed-state sampler")
    idx = letters[:n]
    return f"{idx}{idx}->{idx}"


def _draw_label(spec: GraphSpec, lam: float, rng: np.random.Generator) -> Tuple[int, ...]:
    p = mixing_probability(spec.d, lam)
    if rng.random() >= p:
        return (0,) * spec.n
    return label_from_index(spec, int(rng.integers(spec.dim)))


def sample_test(state: QuantumState, spec: GraphSpec, strategy: StrategyLike,
                rng: np.random.Generator, _table: Optional[_OutcomeTable] = None) -> TestRecord:
    """Draw a test from the strategy and sample its local outcomes on the state."""
    lam = as_strategy(strategy).lam
    table = _table or _OutcomeTable(state, spec)
    k = _draw_label(spec, lam, rng)
    _, _, cdf, _ = table.get(k)
    j = int(min(np.searchsorted(cdf, rng.random(), side="right"), cdf.size - 1))
    outs = table.outcomes(k, j)
    return TestRecord(k, outs, sum(outs) % spec.d == 0)


# ---------------------------------------------------------------------------
# noise models

def infidelity(state: QuantumState, spec: GraphSpec) -> float:
    """1 - <G|state|G>."""
    _check_state(state, spec)
    g = build_graph_state(spec).data
    if state.kind == "pure":
        f = abs(np.vdot(g, state.data)) ** 2
    else:
        f = np.vdot(g, state.data @ g).real
    return float(min(1.0, max(0.0, 1.0 - f)))


def apply_depolarizing(state: QuantumState, strength: float) -> QuantumState:
    """(1 - s) rho + s * identity / D."""
    if not 0.0 <= strength <= 1.0:
        raise DomainError("strength must lie in [0, 1]")
    rho = state.density()
    dim = state.dim
    return QuantumState(state.d, state.n, "mixed",
                        (1.0 - strength) * rho + strength * np.eye(dim) / dim)


def apply_dephasing(state: QuantumState, strength: float, site: int = 0) -> QuantumState:
    """Uniform Z-power dephasing of one qudit with total weight ``strength``."""
    if not 0.0 <= strength <= 1.0:
        raise DomainError("strength must lie in [0, 1]")
    d, n = state.d, state.n
    rho = state.density()
    t = rho.reshape((d,) * (2 * n))
    acc = (1.0 - strength) * rho
    for j in range(1, d):
        zj = np.linalg.matrix_power(clock(d), j)
        u = _apply_local(t, site, zj, n)
        u = _apply_local(u, site, zj.conj(), n, axis_offset=n)
        acc = acc + strength / (d - 1) * u.reshape(rho.shape)
    return QuantumState(d, n, "mixed", acc)


def apply_rotation(state: QuantumState, angle: float, site: int = 0) -> QuantumState:
    """Coherent error exp(-i angle H) on one qudit, H = (Z + Z^dagger)/2."""
    if state.kind != "pure":
        raise DomainError("coherent rotation is implemented for pure states")
    d, n = state.d, state.n
    z = clock(d)
    u = expm(-1j * angle * 0.5 * (z + z.conj().T))
    t = _apply_local(state.data.reshape((d,) * n), site, u, n).reshape(-1)
    return QuantumState(d, n, "pure", t / np.linalg.norm(t))


def _bisect(f, lo: float, hi: float, target: float, iters: int = 200) -> float:
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if f(mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def calibrate_noise(spec: GraphSpec, target_eps: float, model: str = "depolarizing") -> QuantumState:
    """Noisy version of the graph state with infidelity target_eps."""
    if target_eps < 0.0:
        raise DomainError("target infidelity must be nonnegative")
    ideal = build_graph_state(spec)
    if target_eps == 0.0:
        return ideal
    dim = spec.dim
    if model == "depolarizing":
        if target_eps >= 1.0 - 1.0 / dim:
            raise DomainError("target infidelity is unreachable by depolarizing noise")
        return apply_depolarizing(ideal, target_eps / (1.0 - 1.0 / dim))
    if model == "dephasing":
        top = infidelity(apply_dephasing(ideal, 1.0), spec)
        if target_eps > top:
            raise DomainError("target infidelity is unreachable by single-site dephasing")
        s = _bisect(lambda x: infidelity(apply_dephasing(ideal, x), spec), 0.0, 1.0, target_eps)
        return apply_dephasing(ideal, s)
    if model == "rotation":
        grid = np.linspace(0.0, np.pi, 257)
        vals = [infidelity(apply_rotation(ideal, a), spec) for a in grid]
        top = int(np.argmax(vals))
        if target_eps > vals[top]:
            raise DomainError("target infidelity is unreachable by a single-site rotation")
        a = _bisect(lambda x: infidelity(apply_rotation(ideal, x), spec), 0.0, float(grid[top]), target_eps)
        return apply_rotation(ideal, a)
    raise DomainError("model must be 'depolarizing', 'dephasing' or 'rotation'")


# ---------------------------------------------------------------------------
# Monte Carlo protocol runs

@dataclass(frozen=True)
class TrialRecord:
    failures: int
    accepted: bool
    tests: Optional[Tuple[TestRecord, ...]] = None


@dataclass(frozen=True)
class ProtocolRun:
    trials: int
    accepted: int
    records: Tuple[TrialRecord, ...] = field(repr=False)

    @property
    def frequency(self) -> float:
        return self.accepted / self.trials

    @property
    def std_error(self) -> float:
        f = self.frequency
        return math.sqrt(max(f * (1 - f), 0.0) / self.trials)


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Independent generator for one trial, reproducible in isolation."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(trial,)))


def _check_run(N: int, k: int, trials: int) -> None:
    if trials < 1:
        raise DomainError("trials must be positive")
    if k < 0 or N < k + 1:
        raise DomainError("need 0 <= k <= N - 1")
    if N * trials > MAX_TRIAL_TESTS:
        raise ResourceError(f"trials * N exceeds {MAX_TRIAL_TESTS}")


def _map_trials(fn, trials: int, threads: int):
    if threads <= 1:
        return [fn(t) for t in range(trials)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(trials)))


def run_protocol_iid(spec: GraphSpec, strategy: StrategyLike, tau: QuantumState, N: int,
                     k: int, trials: int, seed: int = 0, threads: int = 1,
                     keep_tests: bool = False) -> ProtocolRun:
    """Run N tests on fresh copies of tau per trial; accept when failures <= k.

    Label index 0 is the trivial test, so a test is encoded by its label
    index (0 when the trivial branch of the strategy is drawn).
    """
    _check_run(N, k, trials)
    lam = as_strategy(strategy).lam
    p = mixing_probability(spec.d, lam)
    table = _OutcomeTable(tau, spec)
    cdf, fails, sizes = table.stacked()

    def one(t: int) -> TrialRecord:
        rng = trial_rng(seed, t)
        nontrivial = rng.random(N) < p
        labels = rng.integers(spec.dim, size=N) * nontrivial
        u = rng.random(N)
        j = np.minimum((cdf[labels] <= u[:, None]).sum(axis=1), sizes[labels] - 1)
        bad = fails[labels, j]
        failures = int(np.count_nonzero(bad))
        tests = None
        if keep_tests:
            tests = tuple(
                TestRecord(label_from_index(spec, int(a)), table.outcomes(label_from_index(spec, int(a)), int(b)), not bool(c))
                for a, b, c in zip(labels, j, bad))
        return TrialRecord(failures, failures <= k, tests)

    records = _map_trials(one, trials, threads)
    return ProtocolRun(trials, sum(r.accepted for r in records), tuple(records))


@dataclass(frozen=True)
class MixtureRun:
    trials: int
    accepted: int
    accepted_with_bad_remainder: int

    @property
    def frequency(self) -> float:
        return self.accepted / self.trials

    @property
    def bad_rate_given_accept(self) -> Optional[float]:
        return None if self.accepted == 0 else self.accepted_with_bad_remainder / self.accepted


def run_protocol_mixture(spec: GraphSpec, strategy: StrategyLike, mixture: MixtureSpec,
                         N: int, k: int, trials: int, seed: int = 0,
                         threads: int = 1) -> MixtureRun:
    """Classical simulation of the permutation-invariant bad/good model.

    Per trial: draw z from the mixture, place z bad labels uniformly on
    N + 1 slots, let each tested bad slot fail with probability nu, and
    accept when at most k tests fail.  The last slot is the one kept.  The
    graph only fixes d, which bounds the strategies realizable by mixing.
    """
    _check_run(N, k, trials)
    mixing_probability(spec.d, as_strategy(strategy).lam)
    if mixture.support_max() > N + 1:
        raise DomainError("mixture must be supported on 0..N+1")
    nu = as_strategy(strategy).nu
    zs = np.array([z for z, _ in mixture.weights])
    ws = np.array([w for _, w in mixture.weights])
    cdf = np.cumsum(ws) / ws.sum()

    def one(t: int):
        rng = trial_rng(seed, t)
        z = int(zs[min(np.searchsorted(cdf, rng.random(), side="right"), zs.size - 1)])
        bad = np.zeros(N + 1, dtype=bool)
        bad[rng.choice(N + 1, size=z, replace=False)] = True
        fails = int(np.count_nonzero(bad[:N] & (rng.random(N) < nu)))
        ok = fails <= k
        return ok, ok and bool(bad[N])

    res = _map_trials(one, trials, threads)
    return MixtureRun(trials, sum(a for a, _ in res), sum(b for _, b in res))
