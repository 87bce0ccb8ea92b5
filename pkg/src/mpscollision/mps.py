"""Right-canonical matrix-product-state environments.

An environment is a chain of site tensors ``B[k]`` of shape ``(d_k, D_{k-1},
D_k)`` in right-canonical gauge (sum_i B[i] B[i]^dag = identity on the left
bond) together with an initial bond density matrix ``chi0``.  The bond space
carries everything the system can ever learn about the particles it has not
met yet, so all reduced states of the chain are small contractions against a
current bond state.

Index conventions used throughout:

* bond states ``chi_k`` live after ``k`` consumed sites (``chi_0 = chi0``),
  and evolve as ``chi_k = sum_i B[k,i]^T chi_{k-1} B[k,i]^*``;
* reduced densities of sites ``1..k`` contract ``chi0`` with the tensor
  chain on the left and close the right bond with an identity line.

Mixtures of pure MPSs are represented by direct sums of the branch tensors
with ``chi0 = diag(weights)``.  A site's physical index may carry a trailing
purification ancilla of dimension ``ancilla_dim`` (used by :func:`decorrelate`
to encode mixed single-site marginals as pure product states); interactions
couple only to the leading mode factor.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .linalg import (
    DEFAULT_TOL,
    assert_density_matrix,
    frobenius,
    hermitian_part,
    lq_factorize,
)

__all__ = [
    "MpsEnvironment",
    "BondState",
    "TransferSpectrum",
    "InfiniteCorrelationLengthError",
    "check_right_canonical",
    "right_canonicalize",
    "right_canonicalize_mixture",
    "evolve_bond_state",
    "site_reduced_state",
    "two_site_reduced_state",
    "reduced_density_prefix",
    "transfer_matrix",
    "transfer_spectrum",
    "stationary_bond_state",
    "decorrelate",
    "environment_to_dict",
    "environment_from_dict",
]

PREFIX_GUARD = 2 ** 14


class InfiniteCorrelationLengthError(ValueError):
    """Transfer matrix has a degenerate leading eigenvalue (e.g. GHZ)."""


@dataclass(frozen=True)
class MpsEnvironment:
    """Right-canonical MPS environment plus initial bond density matrix.

    ``sites`` holds one ``(d, D_left, D_right)`` tensor per site; a
    homogeneous (translation-invariant, unbounded) chain stores a single
    tensor that is reused for every collision.
    """

    sites: tuple
    chi0: np.ndarray
    homogeneous: bool = False
    ancilla_dim: int = 1

    def __post_init__(self):
        sites = tuple(np.asarray(t, dtype=complex) for t in self.sites)
        object.__setattr__(self, "sites", sites)
        object.__setattr__(self, "chi0", np.asarray(self.chi0, dtype=complex))
        if not sites:
            raise ValueError("environment needs at least one site tensor")
        for t in sites:
            if t.ndim != 3:
                raise ValueError(f"site tensor must have shape (d, Dl, Dr), got {t.shape}")
        if self.homogeneous and len(sites) != 1:
            raise ValueError("homogeneous environment stores exactly one site tensor")
        d0 = sites[0].shape[1]
        if self.chi0.shape != (d0, d0):
            raise ValueError(f"chi0 shape {self.chi0.shape} does not match first bond dim {d0}")
        if self.homogeneous and sites[0].shape[1] != sites[0].shape[2]:
            raise ValueError("homogeneous site tensor must have equal bond dimensions")
        for k in range(len(sites) - 1):
            if sites[k].shape[2] != sites[k + 1].shape[1]:
                raise ValueError(f"bond dimension mismatch between sites {k} and {k + 1}")
        if self.ancilla_dim < 1 or any(t.shape[0] % self.ancilla_dim for t in sites):
            raise ValueError("ancilla_dim must divide every physical dimension")

    @property
    def length(self):
        """Number of sites, or None for an unbounded homogeneous chain."""
        return None if self.homogeneous else len(self.sites)

    def site(self, k: int) -> np.ndarray:
        if self.homogeneous:
            return self.sites[0]
        if k < 0 or k >= len(self.sites):
            raise IndexError(f"site {k} out of range for chain of length {len(self.sites)}")
        return self.sites[k]

    def phys_dim(self, k: int = 0) -> int:
        return self.site(k).shape[0]

    def mode_dim(self, k: int = 0) -> int:
        """Physical dimension seen by interactions (ancilla factored out)."""
        return self.phys_dim(k) // self.ancilla_dim

    def bond_dim(self, k: int) -> int:
        """Dimension of bond #k (0 = before the first site)."""
        if k == 0:
            return self.chi0.shape[0]
        return self.site(k - 1).shape[2]

    def initial_bond_state(self) -> "BondState":
        return BondState(0, self.chi0)

    def validate(self, tol: float = 1e-10) -> None:
        assert_density_matrix(self.chi0, max(tol, DEFAULT_TOL), "chi0")
        res = check_right_canonical(self)
        if res > tol:
            raise ValueError(f"environment is not right-canonical (residual {res:.3e})")


@dataclass(frozen=True)
class BondState:
    """Bond density matrix chi_k after ``site`` consumed sites."""

    site: int
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "matrix", np.asarray(self.matrix, dtype=complex))
        m = self.matrix
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("bond state must be a square matrix")

    def validate(self, tol: float = 1e-10) -> None:
        assert_density_matrix(self.matrix, tol, f"bond state at site {self.site}")


def check_right_canonical(env: MpsEnvironment) -> float:
    """Largest Frobenius deviation of sum_i B[i] B[i]^dag from the identity."""
    worst = 0.0
    for t in env.sites:
        gram = np.einsum("iab,icb->ac", t, t.conj())
        worst = max(worst, frobenius(gram - np.eye(t.shape[1])))
    return worst


def _as_site_tensor(t) -> np.ndarray:
    arr = np.asarray(t, dtype=complex)
    if arr.ndim != 3:
        raise ValueError(f"site tensor must have shape (d, Dl, Dr), got {arr.shape}")
    return arr


def right_canonicalize(tensors, tol: float = DEFAULT_TOL) -> MpsEnvironment:
    """Bring an arbitrary-gauge pure MPS to right-canonical form.

    ``tensors`` is a sequence of ``(d, Dl, Dr)`` arrays with outer bond
    dimensions 1.  Sweeps right to left with rank-revealing LQ splits,
    truncating singular directions below ``tol`` relative weight.  The overall
    norm (and global phase) is absorbed, so the result represents the
    normalized state; a zero-norm input raises ValueError.
    """
    work = [_as_site_tensor(t).copy() for t in tensors]
    if work[0].shape[1] != 1 or work[-1].shape[2] != 1:
        raise ValueError("pure MPS must have outer bond dimensions 1")
    for k in range(len(work) - 1, 0, -1):
        d, dl, dr = work[k].shape
        m = work[k].transpose(1, 0, 2).reshape(dl, d * dr)
        l, q = lq_factorize(m, tol)
        rank = q.shape[0]
        work[k] = q.reshape(rank, d, dr).transpose(1, 0, 2)
        work[k - 1] = np.einsum("iab,bc->iac", work[k - 1], l)
    # Leftover weight on the first site is the state norm.
    d, dl, dr = work[0].shape
    m = work[0].transpose(1, 0, 2).reshape(dl, d * dr)
    l, q = lq_factorize(m, tol)
    norm = abs(l[0, 0])
    if norm <= tol:
        raise ValueError("cannot canonicalize a zero-norm state")
    work[0] = q.reshape(q.shape[0], d, dr).transpose(1, 0, 2)
    return MpsEnvironment(tuple(work), np.eye(1, dtype=complex))


def right_canonicalize_mixture(branches, tol: float = DEFAULT_TOL) -> MpsEnvironment:
    """Environment for a mixture of pure MPSs via the direct-sum construction.

    ``branches`` is a sequence of ``(weight, tensors)`` pairs.  Each branch is
    canonicalized separately, the site tensors are assembled block-diagonally
    and ``chi0 = diag(weights)`` (weights normalized to unit sum).
    """
    weights = np.array([float(w) for w, _ in branches])
    if np.any(weights < 0) or weights.sum() <= 0:
        raise ValueError("mixture weights must be nonnegative with positive sum")
    weights = weights / weights.sum()
    envs = [right_canonicalize(tensors, tol) for _, tensors in branches]
    lengths = {len(e.sites) for e in envs}
    if len(lengths) != 1:
        raise ValueError("all mixture branches must have the same length")
    dims = {e.phys_dim(0) for e in envs}
    if len(dims) != 1:
        raise ValueError("all mixture branches must share the physical dimension")
    n = lengths.pop()
    d = dims.pop()
    sites = []
    for k in range(n):
        parts = [e.site(k) for e in envs]
        dl = sum(p.shape[1] for p in parts)
        dr = sum(p.shape[2] for p in parts)
        block = np.zeros((d, dl, dr), dtype=complex)
        ol = orow = 0
        for p in parts:
            block[:, orow:orow + p.shape[1], ol:ol + p.shape[2]] = p
            orow += p.shape[1]
            ol += p.shape[2]
        sites.append(block)
    chi0 = np.diag(weights).astype(complex)
    return MpsEnvironment(tuple(sites), chi0)


def evolve_bond_state(env: MpsEnvironment, chi: BondState) -> BondState:
    """Free bond evolution chi_k = sum_i B[k,i]^T chi_{k-1} B[k,i]^*."""
    b = env.site(chi.site)
    if b.shape[1] != chi.matrix.shape[0]:
        raise ValueError(
            f"bond state dim {chi.matrix.shape[0]} does not match site {chi.site} "
            f"left bond {b.shape[1]}"
        )
    out = np.einsum("iab,ac,icd->bd", b, chi.matrix, b.conj(), optimize=True)
    return BondState(chi.site + 1, out)


def site_reduced_state(env: MpsEnvironment, chi: BondState) -> np.ndarray:
    """Density matrix of the next particle given the current bond state."""
    b = env.site(chi.site)
    if b.shape[1] != chi.matrix.shape[0]:
        raise ValueError("bond state dimension does not match site tensor")
    rho = np.einsum("iab,ac,jcb->ij", b, chi.matrix, b.conj(), optimize=True)
    return rho


def two_site_reduced_state(env: MpsEnvironment, site_a: int, site_b: int,
                           chi: BondState) -> np.ndarray:
    """Joint density matrix of particles at ``site_a`` < ``site_b``.

    ``chi`` is the bond state entering ``site_a`` (``chi.site == site_a``).
    The first tensor factor of the result is the earlier site.
    """
    if site_a >= site_b:
        raise ValueError(f"need site_a < site_b, got {site_a} >= {site_b}")
    if chi.site != site_a:
        raise ValueError(f"bond state is at site {chi.site}, expected {site_a}")
    ba = env.site(site_a)
    # Operator-valued bond object M[i, i'] = B[i]^T chi B[i']^*.
    m = np.einsum("iab,ac,jcd->ijbd", ba, chi.matrix, ba.conj(), optimize=True)
    for k in range(site_a + 1, site_b):
        bk = env.site(k)
        m = np.einsum("kab,ijac,kcd->ijbd", bk, m, bk.conj(), optimize=True)
    bb = env.site(site_b)
    out = np.einsum("kab,ijac,lcb->ikjl", bb, m, bb.conj(), optimize=True)
    da, db = ba.shape[0], bb.shape[0]
    return out.reshape(da * db, da * db)


def _purify_bond(chi0: np.ndarray, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Matrix W with W^T W^* = chi0, rows indexing a rank-sized ancilla."""
    w_eig, v = np.linalg.eigh(hermitian_part(chi0))
    keep = w_eig > tol * max(w_eig.max(), 1.0)
    if not np.any(keep):
        raise ValueError("chi0 has no positive weight")
    return (np.sqrt(w_eig[keep])[:, None] * v[:, keep].T).astype(complex)


def reduced_density_prefix(env: MpsEnvironment, k: int) -> np.ndarray:
    """Exact reduced density matrix of the first ``k`` sites.

    Future sites enter only through the identity line guaranteed by
    right-canonicality; the past enters through chi0.  Guarded against
    exponential blow-up at ``prod(d) > 2**14``.
    """
    if k < 1:
        raise ValueError("need at least one site")
    if env.length is not None and k > env.length:
        raise ValueError(f"chain has only {env.length} sites")
    dims = [env.phys_dim(j) for j in range(k)]
    total = int(np.prod(dims))
    if total > PREFIX_GUARD:
        raise ValueError(f"prefix dimension {total} exceeds guard {PREFIX_GUARD}")
    t = _purify_bond(env.chi0)  # (anc, D0)
    for j in range(k):
        # (anc, i_1..i_{j-1}, D) x (d, Dl, Dr) over D=Dl -> (anc, i_1..i_j, Dr)
        t = np.tensordot(t, env.site(j), axes=([t.ndim - 1], [1]))
    # t has shape (anc, d_1, ..., d_k, D_k); contract ancilla and open bond.
    rho = np.tensordot(t, t.conj(), axes=([0, t.ndim - 1], [0, t.ndim - 1]))
    return rho.reshape(total, total)


def transfer_matrix(env: MpsEnvironment) -> np.ndarray:
    """Matrix of the bond free-evolution channel (column vectorization).

    For a finite chain, requires a well-defined repeated bulk tensor (all
    square interior tensors equal).
    """
    bulk = _bulk_tensor(env)
    return np.einsum("iab,icd->bdac", bulk, bulk.conj()).reshape(
        bulk.shape[2] ** 2, bulk.shape[1] ** 2
    )


def _bulk_tensor(env: MpsEnvironment) -> np.ndarray:
    if env.homogeneous:
        return env.sites[0]
    interior = [t for t in env.sites if t.shape[1] == t.shape[2]]
    if not interior:
        raise ValueError("environment has no repeated bulk tensor")
    ref = interior[0]
    for t in interior[1:]:
        if t.shape != ref.shape or frobenius(t - ref) > DEFAULT_TOL:
            raise ValueError("environment is not translation invariant in the bulk")
    return ref


@dataclass(frozen=True)
class TransferSpectrum:
    lambda2: complex
    correlation_length: float
    sign: int


def transfer_spectrum(env: MpsEnvironment, tol: float = 1e-10) -> TransferSpectrum:
    """Subleading transfer eigenvalue, correlation length and its sign.

    Raises :class:`InfiniteCorrelationLengthError` when the second eigenvalue
    sits on the unit circle (degenerate fixed point, e.g. a GHZ chain).
    """
    t = transfer_matrix(env)
    eigs = np.linalg.eigvals(t)
    order = np.argsort(-np.abs(eigs))
    eigs = eigs[order]
    if abs(eigs[0] - 1.0) > tol:
        raise ValueError(f"leading transfer eigenvalue {eigs[0]:.12g} is not 1")
    if len(eigs) == 1:
        return TransferSpectrum(0.0, 0.0, 1)
    lam2 = complex(eigs[1])
    if abs(lam2) >= 1.0 - tol:
        raise InfiniteCorrelationLengthError(
            f"second transfer eigenvalue {lam2:.6g} lies on the unit circle; "
            "correlation length is infinite"
        )
    if abs(lam2) <= tol:
        return TransferSpectrum(0.0, 0.0, 1)
    if abs(lam2.imag) > 1e-8 * max(abs(lam2), 1.0):
        warnings.warn(
            "complex subleading transfer eigenvalue; using its modulus and the "
            "sign of its real part",
            stacklevel=2,
        )
    l_corr = -1.0 / np.log(abs(lam2))
    sign = 1 if lam2.real >= 0 else -1
    return TransferSpectrum(lam2, float(l_corr), sign)


def stationary_bond_state(env: MpsEnvironment, tol: float = 1e-10) -> BondState:
    """Fixed point of the bond free evolution, normalized to unit trace."""
    t = transfer_matrix(env)
    eigs, vecs = np.linalg.eig(t)
    idx = int(np.argmin(np.abs(eigs - 1.0)))
    if abs(eigs[idx] - 1.0) > tol:
        raise ValueError("transfer matrix has no eigenvalue 1")
    d = int(round(np.sqrt(t.shape[0])))
    chi = vecs[:, idx].reshape(d, d, order="F")
    chi = hermitian_part(chi)
    tr = np.trace(chi).real
    if abs(tr) < tol:
        raise ValueError("stationary bond candidate has zero trace")
    chi = chi / tr
    return BondState(0, chi)


def decorrelate(env: MpsEnvironment, length: int | None = None,
                tol: float = DEFAULT_TOL) -> MpsEnvironment:
    """Product environment with the same single-particle marginals.

    Each particle's (generally mixed) marginal is purified into a per-site
    ancilla folded into the physical index, giving a pure product state of
    bond dimension 1.  Interactions on the result act on the mode factor
    only, so collision dynamics with it reproduces the sequential
    single-particle channels exactly.

    For a homogeneous input whose chi0 is already stationary the output is
    homogeneous; otherwise the marginals are site dependent and ``length``
    (defaulting to the chain length) bounds the output chain.
    """
    chi = env.initial_bond_state()
    if env.homogeneous:
        stationary = frobenius(evolve_bond_state(env, chi).matrix - chi.matrix) <= 1e-12
        if stationary:
            n = 1
        else:
            if length is None:
                raise ValueError(
                    "homogeneous environment with non-stationary chi0 needs an "
                    "explicit length to decorrelate"
                )
            n = int(length)
    else:
        n = len(env.sites) if length is None else min(int(length), len(env.sites))
    marginals = []
    for k in range(n):
        rho = site_reduced_state(env, chi)
        if env.ancilla_dim > 1:
            # Keep only the mode marginal; the old purification ancilla is
            # traced out so decorrelation is idempotent at the state level.
            dm = env.mode_dim(k)
            rho = rho.reshape(dm, env.ancilla_dim, dm, env.ancilla_dim)
            rho = np.einsum("iaja->ij", rho)
        marginals.append(rho)
        chi = evolve_bond_state(env, chi)

    purified = []
    for rho in marginals:
        w_eig, v = np.linalg.eigh(hermitian_part(rho))
        keep = w_eig > tol * max(w_eig.max(), 1.0)
        purified.append(v[:, keep] * np.sqrt(w_eig[keep]))
    anc = max(p.shape[1] for p in purified)
    sites = []
    for p in purified:
        d = p.shape[0]
        psi = np.zeros((d, anc), dtype=complex)
        psi[:, : p.shape[1]] = p
        sites.append(psi.reshape(d * anc, 1, 1))
    chi0 = np.eye(1, dtype=complex)
    homogeneous = env.homogeneous and n == 1
    return MpsEnvironment(tuple(sites), chi0, homogeneous=homogeneous,
                          ancilla_dim=anc)


def _matrix_to_json(m: np.ndarray):
    return [[[float(x.real), float(x.imag)] for x in row] for row in np.asarray(m, dtype=complex)]


def _matrix_from_json(data) -> np.ndarray:
    return np.array([[complex(re, im) for re, im in row] for row in data], dtype=complex)


def environment_to_dict(env: MpsEnvironment) -> dict:
    """JSON-ready document: {sites, chi0, homogeneous[, ancilla_dim]}."""
    doc = {
        "sites": [
            [_matrix_to_json(t[i]) for i in range(t.shape[0])] for t in env.sites
        ],
        "chi0": _matrix_to_json(env.chi0),
        "homogeneous": bool(env.homogeneous),
    }
    if env.ancilla_dim != 1:
        doc["ancilla_dim"] = int(env.ancilla_dim)
    return doc


def environment_from_dict(doc: dict, validate: bool = True) -> MpsEnvironment:
    try:
        sites = tuple(
            np.stack([_matrix_from_json(m) for m in site]) for site in doc["sites"]
        )
        chi0 = _matrix_from_json(doc["chi0"])
        homogeneous = bool(doc.get("homogeneous", False))
        ancilla_dim = int(doc.get("ancilla_dim", 1))
    except (KeyError, TypeError, IndexError) as exc:
        raise ValueError(f"malformed environment document: {exc}") from exc
    env = MpsEnvironment(sites, chi0, homogeneous=homogeneous, ancilla_dim=ancilla_dim)
    if validate:
        env.validate()
    return env


def environment_to_json(env: MpsEnvironment, **kwargs) -> str:
    return json.dumps(environment_to_dict(env), **kwargs)


def environment_from_json(text: str, validate: bool = True) -> MpsEnvironment:
    return environment_from_dict(json.loads(text), validate=validate)
