"""Discrete memory-kernel master equation and its stroboscopic (GKSL) limit.

Superoperators are stored as matrices acting on column-vectorized operators
(vec stacks columns, so the conjugation X -> A X B^dag has matrix
``kron(conj(B), A)``).  The memory kernel splits into a local single-collision
term and nonlocal terms built by threading complementary projections between
collision propagators; by construction the resulting time-convolution
recursion reproduces the embedding trajectory exactly.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import embedding as emb
from .embedding import CollisionModel
from .linalg import (
    DEFAULT_TOL,
    dagger,
    frobenius,
    hermitian_basis,
    kron,
    partial_trace,
    permute_factors,
)
from .mps import (
    BondState,
    MpsEnvironment,
    evolve_bond_state,
    site_reduced_state,
    stationary_bond_state,
    transfer_spectrum,
    two_site_reduced_state,
)

__all__ = [
    "Superoperator",
    "KernelTable",
    "vec",
    "unvec",
    "propagator_superop",
    "projection_P",
    "projection_Q",
    "single_collision_channel",
    "two_collision_channel",
    "memory_kernel",
    "build_kernel_table",
    "solve_nz",
    "second_order_kernel",
    "stroboscopic_generator",
    "evolve_gksl",
]


def vec(x: np.ndarray) -> np.ndarray:
    """Column-major vectorization (stack columns)."""
    return np.asarray(x, dtype=complex).reshape(-1, order="F")


def unvec(v: np.ndarray, dim: int) -> np.ndarray:
    return np.asarray(v, dtype=complex).reshape((dim, dim), order="F")


@dataclass(frozen=True)
class Superoperator:
    """Linear map on operators, matrix of shape (out_dim^2, in_dim^2)."""

    matrix: np.ndarray = field(repr=False)
    in_dim: int
    out_dim: int

    def __post_init__(self):
        object.__setattr__(self, "matrix", np.asarray(self.matrix, dtype=complex))
        if self.matrix.shape != (self.out_dim ** 2, self.in_dim ** 2):
            raise ValueError(
                f"superoperator matrix {self.matrix.shape} does not match dims "
                f"in={self.in_dim}, out={self.out_dim}"
            )

    # -- construction -----------------------------------------------------
    @classmethod
    def identity(cls, dim: int) -> "Superoperator":
        return cls(np.eye(dim ** 2, dtype=complex), dim, dim)

    @classmethod
    def conjugation(cls, a: np.ndarray, b: np.ndarray) -> "Superoperator":
        """X -> A X B^dag."""
        a = np.asarray(a, dtype=complex)
        b = np.asarray(b, dtype=complex)
        return cls(kron(b.conj(), a), a.shape[1], a.shape[0])

    @classmethod
    def from_kraus(cls, ops) -> "Superoperator":
        ops = [np.asarray(a, dtype=complex) for a in ops]
        mat = sum(kron(a.conj(), a) for a in ops)
        return cls(mat, ops[0].shape[1], ops[0].shape[0])

    @classmethod
    def from_map(cls, f, in_dim: int, out_dim: int) -> "Superoperator":
        """Matrix of an arbitrary operator map by acting on a matrix basis."""
        mat = np.zeros((out_dim ** 2, in_dim ** 2), dtype=complex)
        basis = np.zeros((in_dim, in_dim), dtype=complex)
        for j in range(in_dim):
            for i in range(in_dim):
                basis[i, j] = 1.0
                mat[:, j * in_dim + i] = vec(f(basis))
                basis[i, j] = 0.0
        return cls(mat, in_dim, out_dim)

    # -- algebra -----------------------------------------------------------
    def apply(self, x: np.ndarray) -> np.ndarray:
        return unvec(self.matrix @ vec(x), self.out_dim)

    def __matmul__(self, other: "Superoperator") -> "Superoperator":
        if self.in_dim != other.out_dim:
            raise ValueError(f"cannot compose {other.out_dim} -> into in_dim {self.in_dim}")
        return Superoperator(self.matrix @ other.matrix, other.in_dim, self.out_dim)

    def __add__(self, other: "Superoperator") -> "Superoperator":
        self._check_same(other)
        return Superoperator(self.matrix + other.matrix, self.in_dim, self.out_dim)

    def __sub__(self, other: "Superoperator") -> "Superoperator":
        self._check_same(other)
        return Superoperator(self.matrix - other.matrix, self.in_dim, self.out_dim)

    def __mul__(self, scalar) -> "Superoperator":
        return Superoperator(self.matrix * complex(scalar), self.in_dim, self.out_dim)

    __rmul__ = __mul__

    def __neg__(self) -> "Superoperator":
        return self * (-1.0)

    def _check_same(self, other: "Superoperator") -> None:
        if (self.in_dim, self.out_dim) != (other.in_dim, other.out_dim):
            raise ValueError("superoperator dimensions differ")

    # -- diagnostics --------------------------------------------------------
    def norm(self) -> float:
        return frobenius(self.matrix)

    def trace_defect(self) -> float:
        """How far tr(S[X]) is from tr(X) over a full operator basis."""
        tr_out = vec(np.eye(self.out_dim)).conj() @ self.matrix
        tr_in = vec(np.eye(self.in_dim)).conj()
        return float(np.max(np.abs(tr_out - tr_in)))

    def is_trace_preserving(self, tol: float = 1e-10) -> bool:
        return self.trace_defect() <= tol

    def annihilates_trace(self, tol: float = 1e-10) -> bool:
        tr_out = vec(np.eye(self.out_dim)).conj() @ self.matrix
        return float(np.max(np.abs(tr_out))) <= tol


# -- building blocks -------------------------------------------------------

def propagator_superop(model: CollisionModel, k: int) -> Superoperator:
    """Matrix of the k-th collision map on system (x) bond operators."""
    return Superoperator.from_kraus(emb.kraus_operators(model, k))


def _embed_superop(chi: np.ndarray, d_system: int) -> Superoperator:
    return Superoperator.from_map(lambda x: kron(x, chi), d_system,
                                  d_system * chi.shape[0])


def _trace_bond_superop(d_system: int, bond_dim: int) -> Superoperator:
    return Superoperator.from_map(
        lambda x: partial_trace(x, (d_system, bond_dim), keep=(0,)),
        d_system * bond_dim, d_system,
    )


def projection_P(d_system: int, chi: BondState) -> Superoperator:
    """R -> tr_bond[R] (x) chi_k; idempotent on system-bond operators."""
    d_bond = chi.matrix.shape[0]
    return _embed_superop(chi.matrix, d_system) @ _trace_bond_superop(d_system, d_bond)


def projection_Q(d_system: int, chi: BondState) -> Superoperator:
    dim = d_system * chi.matrix.shape[0]
    return Superoperator.identity(dim) - projection_P(d_system, chi)


def _bond_ladder(env: MpsEnvironment, k_max: int) -> list[BondState]:
    chis = [env.initial_bond_state()]
    for _ in range(k_max):
        chis.append(evolve_bond_state(env, chis[-1]))
    return chis


def _pad_state(rho: np.ndarray, from_dims, to_dims) -> np.ndarray:
    """Embed an operator on a product of small spaces into larger factors."""
    from_dims = list(from_dims)
    to_dims = list(to_dims)
    idx = [0]
    for df, dt in zip(from_dims, to_dims):
        idx = [base * dt + j for base in idx for j in range(df)]
    out = np.zeros((int(np.prod(to_dims)), int(np.prod(to_dims))), dtype=complex)
    out[np.ix_(idx, idx)] = rho
    return out


def _mode_site_state(model: CollisionModel, chi: BondState) -> np.ndarray:
    """Next-particle state on the padded interaction mode space."""
    env = model.env
    rho = site_reduced_state(env, chi)
    anc = env.ancilla_dim
    if anc > 1:
        dm = env.mode_dim(chi.site)
        rho = rho.reshape(dm, anc, dm, anc)
        rho = np.einsum("iaja->ij", rho)
    return _pad_state(rho, (rho.shape[0],), (model.mode_dim,))


def _site_state_effective(model: CollisionModel, chi: BondState) -> np.ndarray:
    """Next-particle state on the full effective space (mode x ancilla)."""
    env = model.env
    rho = site_reduced_state(env, chi)
    return _pad_state(rho, (env.mode_dim(chi.site), env.ancilla_dim),
                      (model.mode_dim, env.ancilla_dim))


def _mode_pair_state(model: CollisionModel, site_a: int, site_b: int,
                     chi: BondState) -> np.ndarray:
    """Two-particle mode state (ancillas traced, padded to the mode space)."""
    env = model.env
    rho = two_site_reduced_state(env, site_a, site_b, chi)
    anc = env.ancilla_dim
    da = env.mode_dim(site_a)
    db = env.mode_dim(site_b)
    if anc > 1:
        rho = rho.reshape(da, anc, db, anc, da, anc, db, anc)
        rho = np.einsum("iajbkalb->ijkl", rho).reshape(da * db, da * db)
    return _pad_state(rho, (da, db), (model.mode_dim, model.mode_dim))


def _pair_state_effective(model: CollisionModel, site_a: int, site_b: int,
                          chi: BondState) -> np.ndarray:
    env = model.env
    rho = two_site_reduced_state(env, site_a, site_b, chi)
    anc = env.ancilla_dim
    return _pad_state(rho,
                      (env.mode_dim(site_a), anc, env.mode_dim(site_b), anc),
                      (model.mode_dim, anc, model.mode_dim, anc))


def single_collision_channel(model: CollisionModel, chi: BondState) -> Superoperator:
    """Channel of one collision with the current particle's reduced state."""
    m_eff = model.effective_mode_dim(chi.site)
    u = model.effective_unitary(chi.site)
    particle = _site_state_effective(model, chi)
    d_s = model.d_system

    def channel(rho):
        joint = u @ kron(rho, particle) @ dagger(u)
        return partial_trace(joint, (d_s, m_eff), keep=(0,))

    return Superoperator.from_map(channel, d_s, d_s)


def two_collision_channel(model: CollisionModel, chi: BondState,
                          correlated: bool = True) -> Superoperator:
    """Channel of two sequential collisions with the joint two-particle state."""
    k = chi.site
    m_eff = model.effective_mode_dim(k)
    d_s = model.d_system
    if correlated:
        pair = _pair_state_effective(model, k, k + 1, chi)
    else:
        first = _site_state_effective(model, chi)
        second = _site_state_effective(model, evolve_bond_state(model.env, chi))
        pair = kron(first, second)
    u1 = kron(model.effective_unitary(k), np.eye(m_eff))
    u2 = permute_factors(kron(model.effective_unitary(k + 1), np.eye(m_eff)),
                         (d_s, m_eff, m_eff), (0, 2, 1))
    u21 = u2 @ u1

    def channel(rho):
        joint = u21 @ kron(rho, pair) @ dagger(u21)
        return partial_trace(joint, (d_s, m_eff, m_eff), keep=(0,))

    return Superoperator.from_map(channel, d_s, d_s)


# -- exact memory kernel -----------------------------------------------------

def memory_kernel(model: CollisionModel, k: int, m: int,
                  _ladder=None, _props=None) -> Superoperator:
    """Exact discrete memory kernel K_{km} on system operators (0-based k).

    m = 0 is the local term (latest collision relative to the free-evolved
    bond); m >= 1 threads m complementary projections between collision
    propagators, which isolates exactly the correlation-carried part of the
    dynamics.  Scaled by 1/tau so the kernels are rates.
    """
    if m < 0 or m > k:
        raise ValueError(f"need 0 <= m <= k, got m={m}, k={k}")
    ladder = _ladder if _ladder is not None else _bond_ladder(model.env, k + 1)
    d_s = model.d_system
    tau = model.tau
    if m == 0:
        phi = single_collision_channel(model, ladder[k])
        return (phi - Superoperator.identity(d_s)) * (1.0 / tau)

    def prop(j):
        if _props is not None:
            return _props(j)
        return propagator_superop(model, j)

    comp = _embed_superop(ladder[k - m].matrix, d_s)
    for j in range(k - m, k):
        comp = projection_Q(d_s, ladder[j + 1]) @ prop(j) @ comp
    bond_out = model.env.site(k).shape[2]
    comp = _trace_bond_superop(d_s, bond_out) @ prop(k) @ comp
    return comp * (1.0 / tau)


@dataclass(frozen=True)
class KernelTable:
    """Memory kernels K_{km} for every step k < k_max and delay m <= k."""

    tau: float
    d_system: int
    entries: dict

    def kernel(self, k: int, m: int) -> Superoperator:
        try:
            return self.entries[(k, m)]
        except KeyError:
            raise KeyError(f"kernel table has no entry for (k={k}, m={m})") from None


def build_kernel_table(model: CollisionModel, k_max: int) -> KernelTable:
    """All kernels needed to integrate the master equation to k_max steps.

    Entries are independent given the precomputed bond ladder and propagators
    and could be filled concurrently; this fills them in a simple loop.
    """
    ladder = _bond_ladder(model.env, k_max)
    homog = model.env.homogeneous and not isinstance(model.unitary, tuple)
    cache = {}

    def props(j):
        key = 0 if homog else j
        if key not in cache:
            cache[key] = propagator_superop(model, key)
        return cache[key]

    entries = {}
    for k in range(k_max):
        for m in range(k + 1):
            entries[(k, m)] = memory_kernel(model, k, m, _ladder=ladder, _props=props)
    return KernelTable(model.tau, model.d_system, entries)


def solve_nz(table: KernelTable, rho_s0: np.ndarray, k_max: int) -> list[np.ndarray]:
    """Integrate the discrete time-convolution master equation.

    rho((k+1) tau) = rho(k tau) + tau * sum_m K_{km}[rho((k-m) tau)].
    With exact kernels this reproduces the embedding trajectory.
    """
    rho = np.asarray(rho_s0, dtype=complex)
    states = [rho]
    for k in range(k_max):
        increment = np.zeros_like(rho)
        for m in range(k + 1):
            increment += table.kernel(k, m).apply(states[k - m])
        states.append(states[k] + table.tau * increment)
    return states


# -- second-order (correlation-function) kernel ------------------------------

def _system_factors(hamiltonian: np.ndarray, d_system: int, mode_dim: int,
                    basis) -> list[np.ndarray]:
    h4 = hamiltonian.reshape(d_system, mode_dim, d_system, mode_dim)
    return [np.einsum("sitj,ji->st", h4, e) for e in basis]


def _double_commutator_superop(s_late: np.ndarray, s_early: np.ndarray,
                               d_system: int) -> np.ndarray:
    """Matrix of rho -> A B rho - B rho A - A rho B + rho B A.

    A acts at the later site, B at the earlier one (outer commutator is the
    later collision).
    """
    eye = np.eye(d_system, dtype=complex)
    ab = s_late @ s_early
    ba = s_early @ s_late
    return (kron(eye, ab) - kron(s_late.T, s_early)
            - kron(s_early.T, s_late) + kron(ba.T, eye))


def second_order_kernel(model: CollisionModel, k: int, m: int,
                        hamiltonian: np.ndarray | None = None,
                        g: float | None = None) -> Superoperator:
    """Leading (two-point correlation) contribution to K_{km}, m >= 1.

    Expands the interaction generator in a Hilbert-Schmidt-orthonormal mode
    basis, evaluates the connected pair correlator between the sites of the
    latest and the (m steps earlier) collision, and assembles the double
    commutator weighted by -g^2 tau.
    """
    if m < 1 or m > k:
        raise ValueError(f"need 1 <= m <= k, got m={m}, k={k}")
    h = model.hamiltonian if hamiltonian is None else np.asarray(hamiltonian, dtype=complex)
    if h is None:
        raise ValueError("model carries no interaction Hamiltonian")
    if frobenius(h - dagger(h)) > DEFAULT_TOL:
        raise ValueError("interaction Hamiltonian must be Hermitian")
    hnorm = float(np.max(np.abs(np.linalg.eigvalsh(h))))
    if hnorm > 1.0 + 1e-9:
        warnings.warn(
            f"interaction Hamiltonian has operator norm {hnorm:.3f} > 1; the "
            "dimensionless normalization convention is violated",
            stacklevel=2,
        )
    g = model.g if g is None else float(g)
    d_s = model.d_system
    mode = model.mode_dim

    ladder = _bond_ladder(model.env, k - m + 1)
    chi = ladder[k - m]
    pair = _mode_pair_state(model, k - m, k, chi)
    early = _mode_site_state(model, chi)
    late_chi = chi
    for j in range(k - m, k):
        late_chi = evolve_bond_state(model.env, late_chi)
    late = _mode_site_state(model, late_chi)
    connected = pair - kron(early, late)

    basis = hermitian_basis(mode)
    s_ops = _system_factors(h, d_s, mode, basis)
    conn4 = connected.reshape(mode, mode, mode, mode)
    # weight[b, a] = tr[(E_b (x) E_a) connected], E_b at the earlier site
    weights = np.array([
        [np.einsum("pi,qj,ijpq->", eb, ea, conn4) for ea in basis]
        for eb in basis
    ])
    mat = np.zeros((d_s ** 2, d_s ** 2), dtype=complex)
    for bi in range(len(basis)):
        for ai in range(len(basis)):
            w = weights[bi, ai]
            if abs(w) < 1e-16:
                continue
            mat += w * _double_commutator_superop(s_ops[ai], s_ops[bi], d_s)
    return Superoperator(-(g ** 2) * model.tau * mat, d_s, d_s)


# -- stroboscopic (GKSL) limit ------------------------------------------------

def stroboscopic_generator(model: CollisionModel, two_site: str = "correlated",
                           tol: float = 1e-10) -> Superoperator:
    """Markovian generator of the stroboscopic limit for a homogeneous model.

    The local part is the two-collision channel rate (Phi_12 - Id)/(2 tau)
    evaluated at the stationary bond state (with the correlated or the
    product two-particle state per ``two_site``).  The nonlocal part resums
    the geometric tail of the two-point memory kernels; a mean-field
    double-commutator term converts the discrete stepping into a bona fide
    continuous generator when the interaction has a nonzero environment
    average.  The assembled generator annihilates the trace.
    """
    if two_site not in ("correlated", "product"):
        raise ValueError("two_site must be 'correlated' or 'product'")
    if not model.env.homogeneous:
        raise ValueError("stroboscopic limit needs a homogeneous environment")
    if isinstance(model.unitary, tuple):
        raise ValueError("stroboscopic limit needs a homogeneous interaction")
    h = model.hamiltonian
    if h is None:
        raise ValueError("model carries no interaction Hamiltonian")

    spectrum = transfer_spectrum(model.env)  # raises for infinite correlation length
    lam = spectrum.lambda2
    chi_star = stationary_bond_state(model.env)
    d_s = model.d_system
    g2tau = model.g ** 2 * model.tau

    local = (two_collision_channel(model, chi_star, correlated=(two_site == "correlated"))
             - Superoperator.identity(d_s)) * (1.0 / (2.0 * model.tau))

    # Mean-field (environment-averaged) generator and its double commutator.
    mode = model.mode_dim
    rho1 = _mode_site_state(model, chi_star)
    h4 = h.reshape(d_s, mode, d_s, mode)
    h_avg = np.einsum("sitj,ji->st", h4, rho1)
    adh2 = Superoperator(_double_commutator_superop(h_avg, h_avg, d_s), d_s, d_s)

    # Connected pair kernel at separation 1; the geometric transfer decay
    # lambda2^m of the correlators sums the whole nonlocal tail.
    pair = _mode_pair_state(model, 0, 1, BondState(0, chi_star.matrix))
    basis = hermitian_basis(mode)
    s_ops = _system_factors(h, d_s, mode, basis)
    conn4 = (pair - kron(rho1, rho1)).reshape(mode, mode, mode, mode)
    weights = np.array([
        [np.einsum("pi,qj,ijpq->", eb, ea, conn4) for ea in basis]
        for eb in basis
    ])
    k1_mat = np.zeros((d_s ** 2, d_s ** 2), dtype=complex)
    for bi in range(len(basis)):
        for ai in range(len(basis)):
            w = weights[bi, ai]
            if abs(w) < 1e-16:
                continue
            k1_mat += w * _double_commutator_superop(s_ops[ai], s_ops[bi], d_s)
    k1 = Superoperator(-k1_mat, d_s, d_s)  # K_1 = [<H>,[<H>,.]] - <[H_2,[H_1,.]]>

    if two_site == "correlated":
        # Local part already carries half of the separation-1 kernel.
        weight = 0.5 * (1.0 + lam) / (1.0 - lam)
    else:
        weight = 1.0 / (1.0 - lam)
    generator = local + g2tau * weight * k1 + g2tau * adh2

    if not generator.annihilates_trace(tol):
        raise ValueError("assembled generator does not annihilate the trace")
    return generator


def evolve_gksl(generator: Superoperator, rho_s0: np.ndarray, t: float) -> np.ndarray:
    """rho(t) = exp(t L)[rho(0)] by superoperator matrix exponential."""
    rho0 = np.asarray(rho_s0, dtype=complex)
    propagator = scipy.linalg.expm(float(t) * generator.matrix)
    return unvec(propagator @ vec(rho0), generator.out_dim)
