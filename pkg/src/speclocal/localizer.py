"""Finite-volume spectral localizers, assembled as sparse Hermitian matrices.

The generic localizer of a lattice Hamiltonian H and the position Dirac
operator D = sum_j X_j gamma_j is

    L_kappa = kappa D (x) sigma_1 - H (x) sigma_3 ,

restricted to the Euclidean ball |n| <= rho with Dirichlet boundary (all
hoppings leaving the ball are dropped).  The `even` and `odd` flavors are
the graded summands that split off when d is even (chirality of the
gamma-rep) or when H itself is chiral; `split_blocks` performs those
splittings explicitly and reproduces the flavored assemblies.

Basis ordering is fixed package-wide for lattice assemblies:

    index = ((site * dim_cliff + clifford) * bands + band) * 2 + grading

with sites enumerated lexicographically.  Continuum-grid assemblies use a
grading-major layout instead (documented in meta["ordering"]).
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from speclocal.clifford import ATOL, CliffordRep, clifford_generators, s1, s2, s3
from speclocal.lattice_model import (
    TightBindingModel,
    fiber_batch,
    fiber_derivative,
    find_fermi_points,
    model_hash,
)

GAPLESS_TOL = 1e-8  # below this grid gap the tuning bounds are meaningless
CHIRAL_BLOCK_TOL = 1e-12
COO_HEADER = "# speclocal-localizer-coo 1"


class LocalizerError(ValueError):
    """Incompatible flavor/model combination or malformed assembly input."""


# ------------------------------------------------------- Clifford plumbing


def graded_clifford_rep(d: int) -> CliffordRep:
    """Even-d irreducible rep with diagonal chirality diag(1..1,-1..-1).

    gamma_j = s1 (x) g'_j for j < d and gamma_d = s2 (x) 1, with g' the
    left-handed odd rep of C_{d-1}; then (-i)^{d/2} gamma_1..gamma_d =
    s3 (x) 1, so the positive/negative chirality halves are the contiguous
    index blocks.  The graded assemblies and `split_blocks` rely on that.
    """
    if d < 2 or d % 2:
        raise LocalizerError(f"graded rep needs even d >= 2, got {d}")
    base = clifford_generators(d - 1)
    eye = np.eye(base.dim, dtype=complex)
    gens = [np.kron(s1, g) for g in base.generators]
    gens.append(np.kron(s2, eye))
    return CliffordRep(d=d, generators=tuple(gens))


def _default_rep(d: int, flavor: str) -> CliffordRep:
    if flavor == "even" or d % 2 == 0:
        return graded_clifford_rep(d)
    return clifford_generators(d)


def _chirality_split(rep: CliffordRep) -> int:
    """Half-dimension h of a graded rep; errors unless chirality is exactly
    diag(1_h, -1_h)."""
    ch = rep.chirality()
    h = rep.dim // 2
    want = np.diag(np.concatenate([np.ones(h), -np.ones(h)]))
    if not np.allclose(ch, want, atol=ATOL):
        raise LocalizerError("graded flavor needs chirality diag(1..,-1..); "
                             "use graded_clifford_rep")
    return h


# ------------------------------------------------------------ declarations


@dataclass(frozen=True)
class LocalizerConfig:
    """Tuning and flavor of one assembly.

    rho is the Euclidean ball radius on the lattice and the box half-width
    for continuum grids.  rep defaults to the flavor-appropriate rep of
    C_d (odd rep, or the graded even rep with diagonal chirality).
    """

    kappa: float
    rho: float
    flavor: str = "generic"
    rep: CliffordRep | None = None

    def __post_init__(self):
        if not self.kappa > 0:
            raise LocalizerError(f"kappa must be > 0, got {self.kappa}")
        if not self.rho >= 1:
            raise LocalizerError(f"rho must be >= 1, got {self.rho}")
        if self.flavor not in ("generic", "even", "odd"):
            raise LocalizerError(f"unknown flavor {self.flavor!r}")


@dataclass(frozen=True, eq=False)
class AssembledLocalizer:
    """One assembled finite-volume localizer.

    grading maps each site (lattice point, or grid multi-index for
    continuum assemblies) to the first basis index of its fiber block;
    blocks are contiguous and fiber_dim wide.  symmetry_ops holds exact
    (anti)symmetries: "J_prime" with J'L J'* = -L, and "J" grading of the
    off-diagonal (Callias) form.  Matrices are immutable by contract; row
    blocks are independent, so matrix-vector products may be mapped over
    row ranges in parallel.
    """

    matrix: sp.csr_matrix = field(repr=False)
    dim: int
    d: int
    flavor: str
    kappa: float
    rho: float
    fiber_dim: int
    grading: dict = field(repr=False)
    sites: np.ndarray = field(repr=False)
    symmetry_ops: dict = field(repr=False, default_factory=dict)
    model_hash: str | None = None
    meta: dict = field(repr=False, default_factory=dict)

    @property
    def site_count(self) -> int:
        return len(self.sites)


@dataclass(frozen=True)
class DisorderSpec:
    """Per-site i.i.d. Hermitian disorder: entries uniform in [-1,1],
    Hermitized, scaled to unit spectral norm; stream s derives from
    SeedSequence(seed, spawn_key=(s,)) so runs are bit-reproducible."""

    lam: float
    seed: int

    def __post_init__(self):
        if self.lam < 0:
            raise LocalizerError("disorder coupling must be >= 0")


@dataclass(frozen=True)
class MassTermSpec:
    """Scalar mass perturbation m*Y with Y a (necessarily real-fibered)
    N=1 tight-binding model; y_signs records sgn(Y_{k*}) per Fermi point
    once known (add_mass_term fills it in when left None)."""

    Y: TightBindingModel
    m: float
    y_signs: tuple | None = None


@dataclass(frozen=True)
class TuningReport:
    """Numbers entering the rigorous tuning window kappa < g^3 /
    (12 ||H||^3 ||[D,H]||), rho > 2g/kappa, plus pass/fail flags."""

    gap: float
    h_norm: float
    commutator_norm: float
    kappa_bound: float
    rho_min: float
    kappa: float
    rho: float
    kappa_ok: bool
    rho_ok: bool
    applicable: bool


def default_rho(kappa: float) -> int:
    """Ball radius for semimetal counting; quasimode width ~ kappa^-1/2."""
    return int(math.ceil(8.0 / math.sqrt(kappa)))


# ----------------------------------------------------------- ball geometry


def ball_sites(d: int, rho: float) -> np.ndarray:
    """Integer points with |n| <= rho (Euclidean), lexicographic order."""
    R = int(math.floor(rho))
    axes = [np.arange(-R, R + 1)] * d
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    keep = (pts * pts).sum(axis=1) <= rho * rho
    return pts[keep]


def _site_cube(sites: np.ndarray, R: int) -> np.ndarray:
    d = sites.shape[1]
    cube = np.full((2 * R + 1,) * d, -1, dtype=np.int64)
    cube[tuple((sites + R).T)] = np.arange(len(sites))
    return cube


def _hop_pairs(sites, cube, R, offset):
    """Site-id pairs (n, m) with n = m + offset, both inside the ball."""
    dest = sites + np.asarray(offset, dtype=int)
    box = np.all(np.abs(dest) <= R, axis=1)
    ids = cube[tuple((dest[box] + R).T)]
    ok = ids >= 0
    return ids[ok], np.flatnonzero(box)[ok]


class _CooBuilder:
    def __init__(self, dim):
        self.dim = dim
        self.rows, self.cols, self.vals = [], [], []

    def add(self, rows, cols, vals):
        rows = np.asarray(rows, dtype=np.int64)
        vals = np.broadcast_to(np.asarray(vals, dtype=complex), rows.shape)
        self.rows.append(rows.ravel())
        self.cols.append(np.asarray(cols, dtype=np.int64).ravel())
        self.vals.append(np.asarray(vals, dtype=complex).ravel())

    def tocsr(self) -> sp.csr_matrix:
        if not self.rows:
            return sp.csr_matrix((self.dim, self.dim), dtype=complex)
        rows = np.concatenate(self.rows)
        cols = np.concatenate(self.cols)
        vals = np.concatenate(self.vals)
        out = sp.coo_matrix((vals, (rows, cols)), shape=(self.dim, self.dim))
        out = out.tocsr()
        out.eliminate_zeros()
        out.sort_indices()
        return out


# --------------------------------------------------------------- assembly


def assemble(model: TightBindingModel, config: LocalizerConfig) -> AssembledLocalizer:
    """Assemble the flavored spectral localizer on the ball |n| <= rho.

    generic: L = kappa D (x) sigma_1 - H (x) sigma_3 with the exact
    spectrum-reflecting symmetry J' = 1 (x) sigma_2.  even (even d only):
    the positive-chirality summand [[-H, kappa D0*], [kappa D0, H]], with
    D0 the negative-to-positive off-block of D; when H is chiral the
    anticommuting J' = Gamma0 (x) sigma_3 is attached.  odd (chiral H):
    [[kappa D, A*], [A, -kappa D]] with A the positive-to-negative block
    of H in the eigenbasis of its chiral symmetry.
    """
    d, N = model.d, model.N
    flavor = config.flavor
    if flavor == "even" and d % 2:
        raise LocalizerError("even flavor needs even d")
    if flavor == "odd" and model.chiral_symmetry is None:
        raise LocalizerError("odd flavor needs a chiral model")
    rep = config.rep if config.rep is not None else _default_rep(d, flavor)
    if rep.d != d:
        raise LocalizerError(f"rep is for d={rep.d}, model has d={d}")

    sites = ball_sites(d, config.rho)
    R = int(math.floor(config.rho))
    cube = _site_cube(sites, R)
    S = len(sites)
    kappa = config.kappa

    if flavor == "generic":
        matrix, fiber, ops, extra = _assemble_generic(
            model, sites, cube, R, rep, kappa)
    elif flavor == "even":
        matrix, fiber, ops, extra = _assemble_even(
            model, sites, cube, R, rep, kappa)
    else:
        matrix, fiber, ops, extra = _assemble_odd(
            model, sites, cube, R, rep, kappa)

    if matrix.shape[0] <= 300_000:  # guard, not a proof: big volumes skip it
        diff = matrix - matrix.getH()
        herm = abs(diff.data).max() if diff.nnz else 0.0
        if herm > 1e-13:
            raise LocalizerError(f"assembly lost Hermiticity: {herm:.2e}")

    grading = {tuple(s): i * fiber for i, s in enumerate(sites)}
    meta = {"rep": rep, "model_name": model.name, "bands": N,
            "ordering": "site-major: ((site*cliff + c)*bands + b)*2 + g"}
    meta.update(extra)
    return AssembledLocalizer(
        matrix=matrix, dim=S * fiber, d=d, flavor=flavor, kappa=kappa,
        rho=config.rho, fiber_dim=fiber, grading=grading, sites=sites,
        symmetry_ops=ops, model_hash=model_hash(model), meta=meta)


def _site_dirac(sites, generators) -> np.ndarray:
    """D_n = sum_j n_j gamma_j per site, shape (S, dim, dim)."""
    gam = np.array(generators)
    return np.tensordot(sites.astype(float), gam, axes=(1, 0))


def _assemble_generic(model, sites, cube, R, rep, kappa):
    d, N = model.d, model.N
    dp = rep.dim
    fiber = dp * N * 2
    S = len(sites)
    coo = _CooBuilder(S * fiber)

    def idx(site, c, b, g):
        return ((site * dp + c) * N + b) * 2 + g

    # -H (x) sigma_3: hoppings, diagonal in Clifford and grading
    for term in model.hoppings:
        n_ids, m_ids = _hop_pairs(sites, cube, R, term.offset)
        if not n_ids.size:
            continue
        for b, bp in np.argwhere(np.abs(term.amplitude) > 0):
            w = term.amplitude[b, bp]
            for c in range(dp):
                coo.add(idx(n_ids, c, b, 0), idx(m_ids, c, bp, 0), -w)
                coo.add(idx(n_ids, c, b, 1), idx(m_ids, c, bp, 1), +w)

    # kappa D (x) sigma_1: site-diagonal, off-diagonal in grading
    dmats = _site_dirac(sites, rep.generators)
    all_s = np.arange(S)
    for c in range(dp):
        for cp in range(dp):
            vals = kappa * dmats[:, c, cp]
            if not np.any(vals):
                continue
            for b in range(N):
                coo.add(idx(all_s, c, b, 0), idx(all_s, cp, b, 1), vals)
                coo.add(idx(all_s, c, b, 1), idx(all_s, cp, b, 0), vals)

    jp = sp.kron(sp.identity(S * dp * N, format="csr"),
                 sp.csr_matrix(s2), format="csr")
    return coo.tocsr(), fiber, {"J_prime": jp}, {}


def _assemble_even(model, sites, cube, R, rep, kappa):
    d, N = model.d, model.N
    h = _chirality_split(rep)
    fiber = h * N * 2
    S = len(sites)
    coo = _CooBuilder(S * fiber)

    def idx(site, c, b, g):
        return ((site * h + c) * N + b) * 2 + g

    for term in model.hoppings:
        n_ids, m_ids = _hop_pairs(sites, cube, R, term.offset)
        if not n_ids.size:
            continue
        for b, bp in np.argwhere(np.abs(term.amplitude) > 0):
            w = term.amplitude[b, bp]
            for c in range(h):
                coo.add(idx(n_ids, c, b, 0), idx(m_ids, c, bp, 0), -w)
                coo.add(idx(n_ids, c, b, 1), idx(m_ids, c, bp, 1), +w)

    # kappa D0 at (1,0) in the grading, D0 = negative->positive off-block
    dmats = _site_dirac(sites, rep.generators)[:, h:, :h]
    all_s = np.arange(S)
    for c in range(h):
        for cp in range(h):
            vals = kappa * dmats[:, c, cp]
            if not np.any(vals):
                continue
            for b in range(N):
                coo.add(idx(all_s, c, b, 1), idx(all_s, cp, b, 0), vals)
                coo.add(idx(all_s, cp, b, 0), idx(all_s, c, b, 1), vals.conj())

    ops = {}
    if model.chiral_symmetry is not None:
        jfiber = np.kron(model.chiral_symmetry, s3)
        ops["J_prime"] = sp.kron(sp.identity(S * h, format="csr"),
                                 sp.csr_matrix(jfiber), format="csr")
    return coo.tocsr(), fiber, ops, {}


def _chiral_band_rotation(model) -> np.ndarray:
    """Unitary U with U* Gamma U = diag(1_{N/2}, -1_{N/2})."""
    G = model.chiral_symmetry
    N = model.N
    if N % 2:
        raise LocalizerError("chiral model needs an even number of bands")
    hN = N // 2
    want = np.diag(np.concatenate([np.ones(hN), -np.ones(hN)]))
    if np.allclose(G, want, atol=ATOL):
        return np.eye(N, dtype=complex)
    vals, vecs = np.linalg.eigh(G)
    if abs(vals.sum()) > 1e-9 or np.abs(np.abs(vals) - 1).max() > 1e-9:
        raise LocalizerError("chiral symmetry must square to 1 with balanced "
                             "+1/-1 eigenspaces")
    order = np.argsort(-vals)  # +1 block first
    return vecs[:, order]


def _assemble_odd(model, sites, cube, R, rep, kappa):
    d, N = model.d, model.N
    U = _chiral_band_rotation(model)
    hN = N // 2
    dp = rep.dim
    fiber = dp * hN * 2
    S = len(sites)
    coo = _CooBuilder(S * fiber)

    def idx(site, c, b, g):
        return ((site * dp + c) * hN + b) * 2 + g

    # A at (1,0): hoppings rotated into the chiral eigenbasis; the
    # diagonal blocks must vanish there, which is re-checked, not assumed.
    for term in model.hoppings:
        n_ids, m_ids = _hop_pairs(sites, cube, R, term.offset)
        if not n_ids.size:
            continue
        W = U.conj().T @ term.amplitude @ U
        diag_leak = max(np.abs(W[:hN, :hN]).max(), np.abs(W[hN:, hN:]).max())
        if diag_leak > CHIRAL_BLOCK_TOL * max(1.0, np.abs(W).max()):
            raise LocalizerError("hoppings do not anticommute with the "
                                 "declared chiral symmetry")
        A, Adag = W[hN:, :hN], W[:hN, hN:]
        for b, bp in np.argwhere(np.abs(A) > 0):
            for c in range(dp):
                coo.add(idx(n_ids, c, b, 1), idx(m_ids, c, bp, 0), A[b, bp])
        for b, bp in np.argwhere(np.abs(Adag) > 0):
            for c in range(dp):
                coo.add(idx(n_ids, c, b, 0), idx(m_ids, c, bp, 1), Adag[b, bp])

    # +kappa D / -kappa D on the two grading diagonals
    dmats = _site_dirac(sites, rep.generators)
    all_s = np.arange(S)
    for c in range(dp):
        for cp in range(dp):
            vals = kappa * dmats[:, c, cp]
            if not np.any(vals):
                continue
            for b in range(hN):
                coo.add(idx(all_s, c, b, 0), idx(all_s, cp, b, 0), vals)
                coo.add(idx(all_s, c, b, 1), idx(all_s, cp, b, 1), -vals)

    return coo.tocsr(), fiber, {}, {"band_rotation": U}


# -------------------------------------------------------- tuning estimate


def check_tuning_bounds(model: TightBindingModel, kappa: float, rho: float,
                        grid_per_axis: int | None = None) -> TuningReport:
    """Evaluate the rigorous localizer window on a BZ grid.

    g = min_k sigma_min(H_k), ||H|| = max_k ||H_k||, and ||[D,H]|| is the
    max over k of || sum_j gamma_j (x) dH_k/d(2 pi i k_j) ||, since the
    commutator [X_j, H] has Bloch fiber (2 pi i)^{-1} dH_k/dk_j.  Gapless
    models (g ~ 0) get applicable=False: the window is a gapped-phase
    statement and means nothing in the semimetal regime.
    """
    d = model.d
    n = grid_per_axis or {1: 512, 2: 96, 3: 32}.get(d, 16)
    axes = [np.arange(n) / n] * d
    ks = np.stack([m.ravel() for m in np.meshgrid(*axes, indexing="ij")],
                  axis=-1)
    fibers = fiber_batch(model, ks)
    svals = np.linalg.svd(fibers, compute_uv=False)
    gap = float(svals[:, -1].min())
    h_norm = float(svals[:, 0].max())

    gam = (clifford_generators(d) if d % 2 else graded_clifford_rep(d)).generators
    comm = 0.0
    for k in ks:
        M = sum(np.kron(gam[j], fiber_derivative(model, k, j) / (2j * np.pi))
                for j in range(d))
        comm = max(comm, float(np.linalg.norm(M, 2)))

    applicable = gap > GAPLESS_TOL
    if not applicable:
        kappa_bound, rho_min = 0.0, math.inf
    else:
        kappa_bound = gap**3 / (12 * h_norm**3 * comm) if comm > 0 else math.inf
        rho_min = 2 * gap / kappa
    return TuningReport(
        gap=gap, h_norm=h_norm, commutator_norm=comm,
        kappa_bound=kappa_bound, rho_min=rho_min, kappa=kappa, rho=rho,
        kappa_ok=applicable and kappa < kappa_bound,
        rho_ok=applicable and rho > rho_min,
        applicable=applicable)


# ------------------------------------------------------------ deformations


def _scalar_ball_entries(Y: TightBindingModel, sites, cube, R):
    """(n_ids, m_ids, y) triplets of the ball restriction of scalar Y."""
    out = []
    for term in Y.hoppings:
        n_ids, m_ids = _hop_pairs(sites, cube, R, term.offset)
        if n_ids.size:
            out.append((n_ids, m_ids, complex(term.amplitude[0, 0])))
    return out


def add_mass_term(loc: AssembledLocalizer, model: TightBindingModel,
                  spec: MassTermSpec) -> AssembledLocalizer:
    """L + m Y (x) sigma_2 (generic flavor), or H -> H - m Y Gamma inside
    the even-flavor blocks; Hermiticity is preserved exactly.

    Y must be scalar with nonvanishing value at every Fermi point of the
    model (otherwise the crossing signs y* are undefined).  When
    spec.y_signs is None the Fermi points are located and the signs are
    recorded in meta["mass"]["y_signs"].
    """
    if spec.Y.N != 1:
        raise LocalizerError("mass term must be scalar (N=1)")
    if spec.Y.d != model.d:
        raise LocalizerError("mass term dimension mismatch")
    if loc.flavor == "odd":
        raise LocalizerError("mass deformation applies to generic/even flavors")
    if loc.flavor == "even" and model.chiral_symmetry is None:
        raise LocalizerError("even-flavor mass term needs a chiral model")

    # scalar Y always commutes with H fiberwise; keep the cheap grid check
    # as a guard against future non-scalar extensions
    probe = np.linspace(0.0, 1.0, 7, endpoint=False)
    ks = np.stack(np.meshgrid(*[probe] * model.d, indexing="ij"),
                  axis=-1).reshape(-1, model.d)
    yk = fiber_batch(spec.Y, ks)[:, 0, 0]
    if np.abs(yk.imag).max() > 1e-10:
        raise LocalizerError("mass term must have real Bloch fibers")

    y_signs = spec.y_signs
    if y_signs is None:
        points = find_fermi_points(model)
        vals = [float(fiber_batch(spec.Y, np.array([p]))[0, 0, 0].real)
                for p in points]
        if any(abs(v) <= 1e-8 for v in vals):
            raise LocalizerError("mass term vanishes at a Fermi point; "
                                 "crossing signs undefined")
        y_signs = tuple(int(np.sign(v)) for v in vals)

    if spec.m == 0:
        meta = dict(loc.meta)
        meta["mass"] = {"m": 0.0, "y_signs": y_signs}
        return dataclasses.replace(loc, meta=meta)

    R = int(math.floor(loc.rho))
    cube = _site_cube(loc.sites, R)
    entries = _scalar_ball_entries(spec.Y, loc.sites, cube, R)
    N = loc.meta["bands"]
    coo = _CooBuilder(loc.dim)

    if loc.flavor == "generic":
        dp = loc.meta["rep"].dim

        def idx(site, c, b, g):
            return ((site * dp + c) * N + b) * 2 + g

        for n_ids, m_ids, y in entries:  # m Y (x) sigma_2
            for c in range(dp):
                for b in range(N):
                    coo.add(idx(n_ids, c, b, 0), idx(m_ids, c, b, 1),
                            -1j * spec.m * y)
                    coo.add(idx(n_ids, c, b, 1), idx(m_ids, c, b, 0),
                            +1j * spec.m * y)
    else:
        h = _chirality_split(loc.meta["rep"])
        G = model.chiral_symmetry

        def idx(site, c, b, g):
            return ((site * h + c) * N + b) * 2 + g

        # diagonal blocks are -(H - mYG) and +(H - mYG)
        for n_ids, m_ids, y in entries:
            for b, bp in np.argwhere(np.abs(G) > 0):
                w = spec.m * y * G[b, bp]
                for c in range(h):
                    coo.add(idx(n_ids, c, b, 0), idx(m_ids, c, bp, 0), +w)
                    coo.add(idx(n_ids, c, b, 1), idx(m_ids, c, bp, 1), -w)

    meta = dict(loc.meta)
    meta["mass"] = {"m": spec.m, "y_signs": y_signs}
    return dataclasses.replace(loc, matrix=(loc.matrix + coo.tocsr()).tocsr(),
                               meta=meta)


def add_disorder(loc: AssembledLocalizer, model: TightBindingModel,
                 spec: DisorderSpec) -> AssembledLocalizer:
    """L + lambda diag(-V, V) with independent per-site Hermitian V."""
    if loc.flavor != "generic":
        raise LocalizerError("disorder is defined for the generic flavor")
    if spec.lam == 0:
        return loc
    N = loc.meta["bands"]
    dp = loc.meta["rep"].dim
    S = loc.site_count
    coo = _CooBuilder(loc.dim)

    def idx(site, c, b, g):
        return ((site * dp + c) * N + b) * 2 + g

    for s in range(S):
        rng = np.random.default_rng(
            np.random.SeedSequence(spec.seed, spawn_key=(s,)))
        A = rng.uniform(-1, 1, (N, N)) + 1j * rng.uniform(-1, 1, (N, N))
        V = (A + A.conj().T) / 2
        norm = np.linalg.norm(V, 2)
        if norm > 0:
            V = V / norm
        for b, bp in np.argwhere(np.abs(V) > 0):
            w = spec.lam * V[b, bp]
            for c in range(dp):
                coo.add(idx(s, c, b, 0), idx(s, c, bp, 0), -w)
                coo.add(idx(s, c, b, 1), idx(s, c, bp, 1), +w)

    meta = dict(loc.meta)
    meta["disorder"] = {"lambda": spec.lam, "seed": spec.seed}
    return dataclasses.replace(loc, matrix=(loc.matrix + coo.tocsr()).tocsr(),
                               meta=meta)


# ------------------------------------------------------------ block splits


def _permutation_views(matrix, perm_a, perm_b, tol):
    cross = matrix[perm_a][:, perm_b]
    leak = abs(cross.data).max() if cross.nnz else 0.0
    if leak > tol:
        raise LocalizerError(f"sectors are coupled (leak {leak:.2e}); "
                             "no applicable symmetry")
    return matrix[perm_a][:, perm_a].tocsr(), matrix[perm_b][:, perm_b].tocsr()


def _sector_localizer(loc, matrix, fiber, flavor, mirror, extra=None):
    grading = {s: i * fiber for i, s in enumerate(sorted(
        loc.grading, key=loc.grading.get))}
    meta = {"rep": loc.meta["rep"], "model_name": loc.meta["model_name"],
            "bands": loc.meta["bands"], "mirror": mirror,
            "ordering": loc.meta["ordering"]}
    if extra:
        meta.update(extra)
    return AssembledLocalizer(
        matrix=matrix, dim=matrix.shape[0], d=loc.d, flavor=flavor,
        kappa=loc.kappa, rho=loc.rho, fiber_dim=fiber, grading=grading,
        sites=loc.sites, symmetry_ops={}, model_hash=loc.model_hash,
        meta=meta)


def split_blocks(loc: AssembledLocalizer, model: TightBindingModel):
    """Split a generic localizer into its two graded summands.

    Even d: S = gamma_0 (x) sigma_3 commutes with L, and the S = +1 sector
    in the basis ((pos-chirality, g=0), (neg-chirality, g=1)) is exactly
    the even-flavor assembly; the S = -1 sector is its mirror.  Odd d with
    chiral H: after the grading rotation e (sigma_1 -> sigma_3) and the
    chiral band rotation, the two Gamma-sectors are the odd-flavor
    assembly [[kappa D, A*], [A, -kappa D]] and its mirror.  Sector
    decoupling is verified on the assembled entries, not assumed.
    """
    if loc.flavor != "generic":
        raise LocalizerError("only generic-flavor localizers split")
    rep = loc.meta["rep"]
    N = loc.meta["bands"]
    dp = rep.dim
    idx = np.arange(loc.dim)
    g = idx & 1
    b = (idx >> 1) % N
    c = (idx >> 1) // N % dp
    s_id = idx // (2 * N * dp)

    if loc.d % 2 == 0:
        h = _chirality_split(rep)
        in_plus = ((c < h) & (g == 0)) | ((c >= h) & (g == 1))
        new_pos = ((s_id * h + (c % h)) * N + b) * 2 + g
        half = loc.dim // 2
        perm_p = np.empty(half, dtype=np.int64)
        perm_m = np.empty(half, dtype=np.int64)
        perm_p[new_pos[in_plus]] = idx[in_plus]
        perm_m[new_pos[~in_plus]] = idx[~in_plus]
        blk_p, blk_m = _permutation_views(loc.matrix, perm_p, perm_m, 1e-12)
        fiber = h * N * 2
        return (_sector_localizer(loc, blk_p, fiber, "even", mirror=False),
                _sector_localizer(loc, blk_m, fiber, "even", mirror=True))

    if model.chiral_symmetry is None:
        raise LocalizerError("odd-d split needs a chiral model; "
                             "no applicable symmetry")
    U = _chiral_band_rotation(model)
    e_mat = np.array([[1, 1], [-1, 1]], dtype=complex) / math.sqrt(2)
    T = sp.kron(sp.identity(loc.site_count * dp, format="csr"),
                sp.csr_matrix(np.kron(U.conj().T, e_mat)), format="csr")
    rotated = (T @ loc.matrix @ T.getH()).tocsr()

    hN = N // 2
    bp = b % hN
    upper = b < hN  # positive-chirality band half after rotation
    in_one = (upper & (g == 0)) | (~upper & (g == 1))
    new_pos = ((s_id * dp + c) * hN + bp) * 2 + g
    half = loc.dim // 2
    perm_1 = np.empty(half, dtype=np.int64)
    perm_2 = np.empty(half, dtype=np.int64)
    perm_1[new_pos[in_one]] = idx[in_one]
    perm_2[new_pos[~in_one]] = idx[~in_one]
    scale = abs(rotated.data).max() if rotated.nnz else 1.0
    blk_1, blk_2 = _permutation_views(rotated, perm_1, perm_2,
                                      1e-10 * max(1.0, scale))
    blk_1.eliminate_zeros()
    blk_2.eliminate_zeros()
    fiber = dp * hN * 2
    extra = {"band_rotation": U}
    return (_sector_localizer(loc, blk_1, fiber, "odd", False, extra),
            _sector_localizer(loc, blk_2, fiber, "odd", True, extra))


# -------------------------------------------------------- continuum grids


def _slope_matrix(B) -> np.ndarray:
    B = np.asarray(getattr(B, "b", B), dtype=float)
    if B.ndim == 1:
        B = np.diag(B)
    if B.ndim != 2 or B.shape[0] != B.shape[1]:
        raise LocalizerError("slope input must be a vector or square matrix")
    if abs(np.linalg.det(B)) < 1e-12:
        raise LocalizerError("slope matrix must be invertible")
    return B


def _slac_derivative(M: int, h: float) -> np.ndarray:
    """Momentum operator -i d/dx on a uniform grid, spectrally exact for
    modes below pi/h: P_nm = -i (-1)^{n-m} / (h (n-m)).  A local stencil
    would put a spurious doubler at the band edge and fake extra kernel
    vectors, so the nonlocal form is required here."""
    n = np.arange(M)
    diff = n[:, None] - n[None, :]
    sign = np.where(diff % 2 == 0, 1.0, -1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        P = -1j * sign / (h * diff)
    np.fill_diagonal(P, 0.0)
    return P


def _grid_setup(B, kappa, half_width, points, d):
    smin = float(np.linalg.svd(B, compute_uv=False)[-1])
    X = half_width if half_width is not None else 6.0 * math.sqrt(kappa / smin)
    M = points if points is not None else (64 if d <= 2 else 32)
    tail = math.exp(-smin * X * X / (2 * kappa))
    if tail > 1e-6:
        raise LocalizerError(f"box too small: Gaussian boundary tail {tail:.1e}")
    h = 2.0 * X / M
    axis = (np.arange(M) - (M - 1) / 2) * h
    mesh = np.meshgrid(*[axis] * d, indexing="ij")
    coords = np.stack([m.ravel() for m in mesh], axis=-1)  # (M^d, d)
    P = sp.csr_matrix(_slac_derivative(M, h))
    p_ops = [sp.kron(sp.identity(M**j, format="csr"),
                     sp.kron(P, sp.identity(M**(d - 1 - j), format="csr")),
                     format="csr") for j in range(d)]
    return X, M, coords, p_ops


def _fiber_diag(values, fiber_mats):
    """sum_j diag(values[:, j]) (x) fiber_mats[j] as sparse."""
    blocks = np.tensordot(values, np.array(fiber_mats), axes=(1, 0))
    G, f, _ = blocks.shape
    rows, cols = np.nonzero(np.abs(blocks).max(axis=0) > 0)
    r = (np.arange(G)[:, None] * f + rows[None, :]).ravel()
    cidx = (np.arange(G)[:, None] * f + cols[None, :]).ravel()
    vals = blocks[:, rows, cols].ravel()
    out = sp.coo_matrix((vals, (r, cidx)), shape=(G * f, G * f)).tocsr()
    out.eliminate_zeros()
    return out


def continuum_weyl_localizer(B, kappa: float, half_width: float | None = None,
                             points: int | None = None) -> AssembledLocalizer:
    """Odd-d continuum toy: L = [[0, C*], [C, 0]] with C = kappa D + iH,
    D = sum_j P_j (gamma_j (x) 1) and H(x) = sum_j (B^T x)_j (1 (x) Gamma_j).

    The derivative and the linear potential act on *different* commuting
    Clifford factors (fiber dimension dp^2), which is what collapses C*C
    into harmonic oscillators plus the constant matrix sum_j b_j gamma_j
    (x) Gamma_j.  Grading-major layout: J = diag(+1, -1) over the two
    halves; Ker C lives in the J=+1 half, Ker C* in the J=-1 half, so
    Sig(J | ker L) is the index of C.  meta["C"] carries the block itself.
    """
    B = _slope_matrix(B)
    d = B.shape[0]
    if d % 2 == 0:
        raise LocalizerError("continuum Weyl grid needs odd d")
    rep = clifford_generators(d)
    X, M, coords, p_ops = _grid_setup(B, kappa, half_width, points, d)
    G = len(coords)
    dp = rep.dim
    fiber = dp * dp

    eye = np.eye(dp)
    D = sum(sp.kron(p_ops[j], sp.csr_matrix(np.kron(rep.generators[j], eye)),
                    format="csr")
            for j in range(d))
    H = _fiber_diag(coords @ B, [np.kron(eye, g) for g in rep.generators])
    C = (kappa * D + 1j * H).tocsr()
    L = sp.bmat([[None, C.getH()], [C, None]], format="csr")
    n_half = G * fiber
    J = sp.diags(np.concatenate([np.ones(n_half), -np.ones(n_half)]),
                 format="csr", dtype=complex)

    grid_ids = np.stack(np.meshgrid(*[np.arange(M)] * d, indexing="ij"),
                        axis=-1).reshape(-1, d)
    grading = {tuple(gi): i * fiber for i, gi in enumerate(grid_ids)}
    meta = {"rep": rep, "B": B, "C": C, "x": coords, "points": M,
            "ordering": "grading-major: g*(G*fiber) + point*fiber + c"}
    return AssembledLocalizer(
        matrix=L, dim=2 * n_half, d=d, flavor="continuum-weyl", kappa=kappa,
        rho=X, fiber_dim=fiber, grading=grading, sites=grid_ids,
        symmetry_ops={"J": J}, model_hash=None, meta=meta)


def continuum_dirac_localizer(B, kappa: float, half_width: float | None = None,
                              points: int | None = None) -> AssembledLocalizer:
    """Even-d continuum toy: L = sum_j (kappa P_j gamma_j (x) 1 -
    (B^T x)_j gamma_0 (x) Gamma_j), with both gamma and Gamma the graded
    even-d rep; J = gamma_0 (x) Gamma_0 anticommutes with L and grades its
    kernel, whose signature is the index."""
    B = _slope_matrix(B)
    d = B.shape[0]
    if d % 2:
        raise LocalizerError("continuum Dirac grid needs even d")
    rep = graded_clifford_rep(d)
    gamma0 = rep.chirality().real
    X, M, coords, p_ops = _grid_setup(B, kappa, half_width, points, d)
    G = len(coords)
    dp = rep.dim
    fiber = dp * dp

    eye = sp.identity(dp, format="csr")
    L = sum(kappa * sp.kron(p_ops[j],
                            sp.kron(sp.csr_matrix(rep.generators[j]), eye),
                            format="csr")
            for j in range(d))
    mass_mats = [-np.kron(gamma0, g) for g in rep.generators]
    L = (L + _fiber_diag(coords @ B, mass_mats)).tocsr()
    J = sp.kron(sp.identity(G, format="csr"),
                sp.csr_matrix(np.kron(gamma0, gamma0)), format="csr")

    grid_ids = np.stack(np.meshgrid(*[np.arange(M)] * d, indexing="ij"),
                        axis=-1).reshape(-1, d)
    grading = {tuple(gi): i * fiber for i, gi in enumerate(grid_ids)}
    meta = {"rep": rep, "B": B, "x": coords, "points": M,
            "ordering": "site-major: (point*spinor + c)*spinor + q"}
    return AssembledLocalizer(
        matrix=L, dim=G * fiber, d=d, flavor="continuum-dirac", kappa=kappa,
        rho=X, fiber_dim=fiber, grading=grading, sites=grid_ids,
        symmetry_ops={"J": J}, model_hash=None, meta=meta)


# ------------------------------------------------------------- COO export


def export_coo(loc: AssembledLocalizer, path) -> None:
    """Plain-text sorted COO dump, upper triangle only, bit-exact."""
    upper = sp.triu(loc.matrix, k=0).tocoo()
    order = np.lexsort((upper.col, upper.row))
    lines = [COO_HEADER,
             f"# flavor={loc.flavor}",
             f"# kappa={loc.kappa!r}",
             f"# rho={loc.rho!r}",
             f"# model={loc.model_hash or 'none'}",
             f"# dim={loc.dim}",
             f"# entries={upper.nnz}"]
    rows, cols, data = upper.row[order], upper.col[order], upper.data[order]
    for r, cidx, v in zip(rows, cols, data):
        lines.append(f"{r} {cidx} {float(v.real)!r} {float(v.imag)!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def import_coo(path):
    """Inverse of export_coo: (csr_matrix, header dict)."""
    header = {}
    rows, cols, re_, im_ = [], [], [], []
    with open(path) as fh:
        first = fh.readline().rstrip("\n")
        if first != COO_HEADER:
            raise LocalizerError(f"not a localizer COO file: {first!r}")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition("=")
                header[key.strip()] = val.strip()
                continue
            a, bcol, re_s, im_s = line.split()
            rows.append(int(a))
            cols.append(int(bcol))
            re_.append(float(re_s))
            im_.append(float(im_s))
    dim = int(header["dim"])
    vals = np.array(re_) + 1j * np.array(im_)
    rows = np.array(rows, dtype=np.int64)
    cols = np.array(cols, dtype=np.int64)
    upper = sp.coo_matrix((vals, (rows, cols)), shape=(dim, dim))
    strict = rows != cols
    lower = sp.coo_matrix((vals[strict].conj(),
                           (cols[strict], rows[strict])), shape=(dim, dim))
    out = (upper + lower).tocsr()
    out.sort_indices()
    header["kappa"] = float(header["kappa"])
    header["rho"] = float(header["rho"])
    return out, header
