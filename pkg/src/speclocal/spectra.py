"""Eigenvalue windows, inertia, kernel signatures, and spectral flow.

Two algorithmic choices here are load-bearing and worth spelling out.

The sparse near-zero path works on the folded operator c - L^2 (largest
eigenvalues of the fold are the eigenvalues of L nearest zero), then does
a Rayleigh-Ritz step on the enlarged basis [V, L V].  Folding collapses
+nu and -nu onto one level, and a Lanczos run may capture only one vector
of that degenerate pair; enlarging by L V restores the other partner, so
the unfold never drops half of a symmetric pair.

Kernel classification for the continuum (Callias-type) assemblies does
not use the raw near-zero eigenvectors at all.  On a finite box the
off-diagonal block C is square, so rank-nullity forces every singular
value of C to appear in C* as well: each genuine kernel vector comes
with a boundary-supported partner at the same |nu| and the J-signature
of the raw near-kernel vanishes identically.  Restricting C to columns
supported in the box interior (rows stay global) removes the artifact:
a vector hugging the truncation edge pays an O(1) derivative cost that
the global rows can see, while the Gaussian bulk kernel is untouched.
The restricted singular values then show the kernel with a clean
sqrt(kappa)-scale gap and the index is read off per grading block.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from speclocal.localizer import AssembledLocalizer, LocalizerError

DENSE_CUTOFF = 6000
RESIDUAL_REL = 1e-8

_CONTINUUM = ("continuum-weyl", "continuum-dirac")


class ConvergenceError(RuntimeError):
    """Iterative eigensolver missed its residual target.

    The achieved per-pair residuals are attached as .residuals so a
    caller can decide whether the partial answer is still usable.
    """

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class SpectralGapError(RuntimeError):
    """A computation needed a spectral gap that the matrix does not have."""


class ClusterWarning(UserWarning):
    """Cluster/rest separation too weak for an unambiguous count."""


def _as_matrix(L):
    if isinstance(L, AssembledLocalizer):
        return L.matrix
    if sp.issparse(L):
        return L.tocsr()
    return np.asarray(L)


def two_norm_estimate(M, iters=20, seed=0):
    """Power-iteration estimate of the spectral norm of Hermitian M."""
    n = M.shape[0]
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        w = M @ v
        lam = np.linalg.norm(w)
        if lam == 0.0:
            return 0.0
        v = w / lam
    return float(lam)


def one_norm_estimate(M):
    if sp.issparse(M):
        return float(spla.onenormest(M))
    return float(np.linalg.norm(np.asarray(M), 1))


def zero_tolerance(L, norm=None):
    """Default kernel tolerance 10*sqrt(eps)*||L||, well under the
    sqrt(kappa) separation a tuned localizer guarantees."""
    if norm is None:
        norm = two_norm_estimate(_as_matrix(L))
    return 10.0 * np.sqrt(np.finfo(float).eps) * norm


# ------------------------------------------------------------ eig_window


@dataclass(frozen=True)
class EigenWindow:
    """Eigenpairs of a Hermitian matrix nearest zero, |nu| ascending."""

    values: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray
    method: str
    norm_estimate: float  # one-norm estimate backing the residual target

    def __len__(self):
        return len(self.values)


def eig_window(L, k=8, window=None, method="auto", v0=None, seed=0,
               rtol=RESIDUAL_REL):
    """Eigenpairs of Hermitian L nearest zero.

    k selects that many pairs; window=(lo, hi) instead returns every pair
    with nu inside the interval (the sparse path grows k until the
    interval is covered).  Matrices up to DENSE_CUTOFF are solved densely
    with the full spectrum available; larger ones go through the folded
    Lanczos path, or ARPACK shift-invert with method="shift_invert".
    Residuals are measured, not assumed: ||L v - nu v|| <= rtol * ||L||_1
    estimate, else ConvergenceError with the achieved values.
    """
    M = _as_matrix(L)
    n = M.shape[0]
    if method == "auto":
        method = "dense" if n <= DENSE_CUTOFF else "folded"
    norm1 = one_norm_estimate(M)
    target = rtol * max(norm1, np.finfo(float).tiny)

    if method == "dense":
        dense = M.toarray() if sp.issparse(M) else np.asarray(M, dtype=complex)
        vals, vecs = np.linalg.eigh(dense)
        order = np.argsort(np.abs(vals), kind="stable")
        if window is not None:
            order = order[(vals[order] >= window[0]) & (vals[order] <= window[1])]
        elif k is not None:
            order = order[:k]
        vals, vecs = vals[order], vecs[:, order]
        resid = np.linalg.norm(dense @ vecs - vecs * vals, axis=0)
        return EigenWindow(vals, vecs, resid, "dense", norm1)

    if method == "shift_invert":
        vals, vecs = spla.eigsh(M.tocsc(), k=k, sigma=0.0, which="LM", v0=v0)
        order = np.argsort(np.abs(vals), kind="stable")
        vals, vecs = vals[order], vecs[:, order]
        resid = _pair_residuals(M, vals, vecs)
        _check_residuals(resid, target, "shift-invert")
        return EigenWindow(vals, vecs, resid, "shift_invert", norm1)

    if method != "folded":
        raise LocalizerError(f"unknown eig_window method {method!r}")

    want = k if window is None else max(k, 8)
    for _ in range(4):
        vals, vecs, resid = _folded_pairs(M, want, v0, seed, target)
        if window is not None:
            covered = np.max(np.abs(vals)) >= max(abs(window[0]), abs(window[1]))
            if not covered and want < n - 2:
                want = min(2 * want, n - 2)
                continue
            keep = (vals >= window[0]) & (vals <= window[1])
            vals, vecs, resid = vals[keep], vecs[:, keep], resid[keep]
        return EigenWindow(vals, vecs, resid, "folded", norm1)
    raise ConvergenceError("folded path could not cover the requested window",
                           resid)


def _pair_residuals(M, vals, vecs):
    return np.linalg.norm(M @ vecs - vecs * vals, axis=0)


def _check_residuals(resid, target, label):
    if len(resid) and resid.max() > target:
        raise ConvergenceError(
            f"{label} residuals up to {resid.max():.3e} exceed the "
            f"target {target:.3e}", resid)


def _folded_pairs(M, k, v0, seed, target):
    """k eigenpairs of M nearest zero via the shifted fold c - M^2."""
    n = M.shape[0]
    c = 1.2 * two_norm_estimate(M, seed=seed) ** 2 + 1.0

    def fold(x):
        return c * x - M @ (M @ x)

    op = spla.LinearOperator((n, n), matvec=fold, dtype=complex)
    k2 = min(n - 2, k // 2 + 3)
    rng = np.random.default_rng(seed)
    if v0 is None:
        v0 = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    # restarts dominate once the top of the fold is a stack of nearly
    # degenerate levels, so take the largest basis ~1.5 GB allows before
    # falling back to the ARPACK default
    ncv_mem = max(2 * k2 + 2, int(1.5e9 / (16 * n)))
    ncv = min(n - 1, max(32, 4 * k2, min(64, ncv_mem)))
    last = None
    for tol, boost in ((1e-9, 1), (1e-13, 2)):
        theta, V = spla.eigsh(op, k=k2, which="LA", v0=v0,
                              ncv=min(n - 1, ncv * boost), tol=tol,
                              maxiter=400 * boost)
        V = _absorb_hidden_copies(op, theta, V, c, rng)
        # unfold: [V, MV] spans both halves of every +-nu pair; the stack
        # is rank-deficient when V is already clean, so orthonormalize by
        # SVD and drop the null directions rather than trusting QR
        A = np.hstack([V, M @ V])
        U, s, _ = np.linalg.svd(A, full_matrices=False)
        W = U[:, s > 1e-10 * s[0]]
        T = W.conj().T @ (M @ W)
        nu, Y = np.linalg.eigh((T + T.conj().T) / 2)
        order = _abs_order_pairwise(nu)[:k]
        vals, vecs = nu[order], W @ Y[:, order]
        resid = _pair_residuals(M, vals, vecs)
        last = (vals, vecs, resid)
        if resid.max() <= target:
            return last
        v0 = vecs[:, 0]  # warm-start the retry from the best current pair
    _check_residuals(last[2], target, "folded")
    return last


def _absorb_hidden_copies(op, theta, V, c, rng, rounds=6):
    """Complete the multiplicities of the fold levels Lanczos kept.

    A Krylov run from a single start vector resolves one direction per
    (nearly) degenerate level, so copies can be dropped silently -- a
    four-fold localizer kernel coming back as two is a miscount, not a
    small error.  Deflate the converged space to the bottom of the fold
    and look again: anything still reaching the retained levels is a
    missed copy.  One copy per probe is enough; the loop runs until the
    deflated top drops below the lowest retained level.
    """
    n = V.shape[0]
    slack = 1e-6 * (abs(c) + 1.0)
    floor = theta.min() - slack
    shift = abs(c) + 1.0
    for _ in range(rounds):
        if V.shape[1] >= n - 2:
            break
        U = V

        def deflated(x, U=U):
            return op.matvec(x) - shift * (U @ (U.conj().T @ x))

        dop = spla.LinearOperator((n, n), matvec=deflated, dtype=complex)
        w0 = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        w0 -= V @ (V.conj().T @ w0)
        try:
            t2, W = spla.eigsh(dop, k=1, which="LA", v0=w0, tol=1e-9,
                               ncv=min(n - 1, 20), maxiter=300)
        except spla.ArpackNoConvergence as err:
            t2, W = err.eigenvalues, err.eigenvectors
            if t2 is None or len(t2) == 0:
                break
        if t2.max() < floor:
            break
        W = W - V @ (V.conj().T @ W)
        nrm = np.linalg.norm(W[:, 0])
        if nrm < 1e-8:
            break
        V = np.hstack([V, W[:, :1] / nrm])
    return V


# --------------------------------------------------------- cluster counts


@dataclass(frozen=True)
class ClusterReport:
    """Near-zero cluster of a localizer spectrum.

    eigenvalues_low holds everything inside [-C sqrt(kappa), C sqrt(kappa)]
    ordered by |nu|; cluster is the sub-window within the power radius
    c*kappa^(2/3), and gap_ratio compares the first eigenvalue beyond the
    cluster against the largest one inside (regularized).  The intra-
    cluster spread can span orders of magnitude, so a constant-free split
    at the largest multiplicative gap is reported alongside (gap_split_*)
    rather than used for the count; fitting the measured radius against
    kappa is left to the caller.
    """

    kappa: float
    eigenvalues_low: np.ndarray
    cluster: np.ndarray
    cluster_count: int
    gap_ratio: float
    ambiguous: bool
    power_radius: float
    gap_split_count: int
    gap_split_ratio: float


def count_cluster(eigs, kappa, c=1.0, C=1.0):
    """Count the near-zero cluster inside the sqrt(kappa) window.

    The caller must pass every eigenvalue within the window (eig_window
    with window=(-C sqrt(kappa), C sqrt(kappa)) does).  gap_ratio below 3
    flags the count as ambiguous via ClusterWarning.
    """
    eigs = np.asarray(eigs, dtype=float).ravel()
    win = C * np.sqrt(kappa)
    low = eigs[np.abs(eigs) <= win]
    low = low[np.argsort(np.abs(low), kind="stable")]
    a = np.abs(low)
    reg = 1e-9 * win
    power = c * kappa ** (2.0 / 3.0)

    n_in = int(np.count_nonzero(a <= power))
    cluster = low[:n_in]
    inside = max(a[n_in - 1], reg) if n_in else reg
    outside = a[n_in] if n_in < len(a) else win
    gap_ratio = float(outside / inside)

    floored = np.maximum(a, reg)
    if len(a) == 0:
        split_count, split_ratio = 0, np.inf
    elif a[-1] <= reg or len(a) == 1:
        split_count, split_ratio = len(a), float(win / floored[-1])
    else:
        ratios = floored[1:] / floored[:-1]
        split_count = int(np.argmax(ratios)) + 1
        split_ratio = float(ratios.max())

    ambiguous = bool(len(a)) and gap_ratio < 3.0
    if ambiguous:
        warnings.warn(f"cluster edge ambiguous: gap ratio {gap_ratio:.2f} < 3",
                      ClusterWarning, stacklevel=2)
    return ClusterReport(kappa, low, cluster, n_in, gap_ratio, ambiguous,
                         power, split_count, split_ratio)


# ----------------------------------------------------- inertia / signature


@dataclass(frozen=True)
class InertiaTriple:
    n_plus: int
    n_zero: int
    n_minus: int
    zero_tol: float

    @property
    def signature(self):
        return self.n_plus - self.n_minus

    @property
    def dim(self):
        return self.n_plus + self.n_zero + self.n_minus


def inertia(L, zero_tol=None):
    """Eigenvalue sign counts of Hermitian L without diagonalizing.

    Complex input is realified to the doubled real symmetric form
    [[Re, -Im], [Im, Re]], factored with symmetric-indefinite (Bunch-
    Kaufman) pivoting, and the 1x1/2x2 block inertia is halved; any odd
    doubled count means the pivoting lost a marginal block, and the
    routine falls back to dense eigenvalue counting.
    """
    M = _as_matrix(L)
    n = M.shape[0]
    if n > 20000:
        raise LocalizerError(f"inertia densifies; dim {n} is past the desk "
                             "scale this path is meant for")
    dense = M.toarray() if sp.issparse(M) else np.asarray(M)
    herm = np.abs(dense - dense.conj().T).max() if n else 0.0
    scale = max(np.abs(dense).max() if n else 0.0, 1e-300)
    if herm > 1e-10 * scale:
        raise LocalizerError(f"inertia needs a Hermitian matrix "
                             f"(asymmetry {herm:.2e})")
    if zero_tol is None:
        zero_tol = zero_tolerance(dense)

    doubled = np.iscomplexobj(dense) and np.abs(dense.imag).max() > 0
    if doubled:
        R = np.block([[dense.real, -dense.imag], [dense.imag, dense.real]])
    else:
        R = np.ascontiguousarray(dense.real)
        R = (R + R.T) / 2
    _, D, _ = sla.ldl(R)
    counts = _block_inertia(D, zero_tol)
    if doubled:
        if any(v % 2 for v in counts):
            return _dense_inertia(dense, zero_tol)
        counts = tuple(v // 2 for v in counts)
    if sum(counts) != n:
        return _dense_inertia(dense, zero_tol)
    return InertiaTriple(*counts, zero_tol=float(zero_tol))


def _block_inertia(D, zero_tol):
    n = D.shape[0]
    n_plus = n_zero = n_minus = 0
    i = 0
    while i < n:
        two = i + 1 < n and D[i + 1, i] != 0.0
        if two:
            lam = np.linalg.eigvalsh(D[i:i + 2, i:i + 2].real)
            i += 2
        else:
            lam = (D[i, i].real,)
            i += 1
        for v in lam:
            if v > zero_tol:
                n_plus += 1
            elif v < -zero_tol:
                n_minus += 1
            else:
                n_zero += 1
    return n_plus, n_zero, n_minus


def _dense_inertia(dense, zero_tol):
    vals = np.linalg.eigvalsh(dense)
    return InertiaTriple(int((vals > zero_tol).sum()),
                         int((np.abs(vals) <= zero_tol).sum()),
                         int((vals < -zero_tol).sum()),
                         zero_tol=float(zero_tol))


def signature(L, zero_tol=None):
    return inertia(L, zero_tol).signature


def half_signature_chern(L, zero_tol=None):
    """Half the signature with the flavor's sign: + for the even form,
    - for the odd (chiral) form.  Demands an invertible localizer."""
    if not isinstance(L, AssembledLocalizer) or L.flavor not in ("even", "odd"):
        raise LocalizerError("half-signature invariant is defined for the "
                             "even and odd localizer flavors")
    tri = inertia(L, zero_tol)
    if tri.n_zero:
        raise SpectralGapError(
            f"localizer not gapped at kappa={L.kappa}, rho={L.rho}: "
            f"{tri.n_zero} eigenvalue(s) within {tri.zero_tol:.2e} of zero")
    if tri.signature % 2:
        raise SpectralGapError(f"odd signature {tri.signature} cannot halve")
    half = tri.signature // 2
    return half if L.flavor == "even" else -half


# ------------------------------------------------- kernel J-signatures


@dataclass(frozen=True)
class CalliasReport:
    """Bulk kernel of a continuum assembly, classified by the J grading."""

    kernel_dim: int
    n_plus: int
    n_minus: int
    index: int
    first_excited: float
    sigma_plus: np.ndarray
    sigma_minus: np.ndarray
    tol: float
    interior_fraction: float


def callias_kernel(L, interior_fraction=0.75, k=3, tol=None, seed=0):
    """Kernel dimension and J-signature of a continuum localizer.

    Works per grading block on the off-diagonal factor C restricted to
    interior columns (see the module docstring for why the restriction
    is what removes the truncation artifacts).  tol defaults to a
    quarter of the first oscillator level sqrt(2*kappa*smin); genuine
    kernel singular values sit orders of magnitude below it.
    """
    if not isinstance(L, AssembledLocalizer) or L.flavor not in _CONTINUUM:
        raise LocalizerError("callias_kernel applies to continuum assemblies")
    B = np.atleast_2d(np.asarray(L.meta["B"], dtype=float))
    smin = np.linalg.svd(B, compute_uv=False).min()
    shell = np.sqrt(2.0 * L.kappa * smin)
    if tol is None:
        tol = 0.25 * shell
    x = L.meta["x"]
    jdiag = L.symmetry_ops["J"].diagonal().real
    idx_p = np.flatnonzero(jdiag > 0)
    idx_m = np.flatnonzero(jdiag < 0)
    C = L.matrix[idx_m][:, idx_p]
    keep_site = np.max(np.abs(x), axis=1) <= interior_fraction * L.rho
    if not keep_site.any():
        raise LocalizerError("interior fraction leaves no interior sites")
    env = np.exp(-smin * (x * x).sum(axis=1) / (2.0 * L.kappa))

    sigma = {}
    for side, block in ((+1, C), (-1, C.getH())):
        sigma[side] = _restricted_singulars(block.tocsc(), keep_site, env,
                                            len(x), k, tol, seed)
    counts = {s: int(np.count_nonzero(v < tol)) for s, v in sigma.items()}
    excited = []
    for s, v in sigma.items():
        above = v[v >= tol]
        if len(above) == 0:
            raise SpectralGapError(f"restricted solve on the J={s:+d} block "
                                   "returned kernel values only; raise k")
        if len(v) > counts[s] and v[counts[s]] < 3.0 * tol:
            raise SpectralGapError(
                f"kernel not separated on the J={s:+d} block: next singular "
                f"value {v[counts[s]]:.3e} < 3*tol={3 * tol:.3e}; "
                f"sigma={np.array2string(v, precision=3)}")
        excited.append(float(above[0]))
    return CalliasReport(
        kernel_dim=counts[+1] + counts[-1],
        n_plus=counts[+1],
        n_minus=counts[-1],
        index=counts[+1] - counts[-1],
        first_excited=min(excited),
        sigma_plus=sigma[+1],
        sigma_minus=sigma[-1],
        tol=float(tol),
        interior_fraction=float(interior_fraction),
    )


def _restricted_singulars(block, keep_site, env, n_sites, k, tol, seed):
    """Smallest singular values of a Callias block with columns cut to
    the interior; grows k if the kernel might not fit."""
    f = block.shape[1] // n_sites
    keep = np.repeat(keep_site, f)
    Cint = block[:, keep].tocsr()
    m = Cint.shape[1]
    rng = np.random.default_rng(seed)
    v0 = np.repeat(env, f)[keep].astype(complex)
    v0 += 1e-3 * (rng.standard_normal(m) + 1j * rng.standard_normal(m))

    def fold(u):
        return Cint.getH() @ (Cint @ u)

    v = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    lam = 1.0
    for _ in range(15):
        w = fold(v / np.linalg.norm(v))
        lam = np.linalg.norm(w)
        v = w
    c = 1.1 * lam + 1.0

    while True:
        op = spla.LinearOperator((m, m), matvec=lambda u: c * u - fold(u),
                                 dtype=complex)
        kk = min(k, m - 1)
        theta, _ = spla.eigsh(op, k=kk, which="LA", v0=v0,
                              ncv=min(m - 1, max(24, 4 * kk)), tol=1e-7,
                              maxiter=5000)
        sig = np.sqrt(np.clip(c - theta, 0.0, None))
        sig.sort()
        if np.count_nonzero(sig < tol) < kk or kk == m - 1:
            return sig
        k += 3  # kernel filled the whole request; ask for more


def j_signature_on_kernel(L, J=None, tol=None, mode="auto"):
    """Signature of the J form restricted to the near-kernel of L.

    Continuum assemblies route to callias_kernel (mode="auto"), because
    on a square truncation the literal near-kernel signature is forced
    to zero by boundary pairing; mode="raw" runs the literal procedure
    anyway.  For other anticommuting (J, L) pairs the literal path
    collects |nu| < tol eigenvectors, refuses when the next eigenvalue
    is closer than 3*tol, and signs V* J V at threshold 0.5.
    """
    M = _as_matrix(L)
    if J is None:
        if isinstance(L, AssembledLocalizer):
            J = L.symmetry_ops.get("J")
            if J is None:
                J = L.symmetry_ops.get("J_prime")
        if J is None:
            raise LocalizerError("no J grading available for this matrix")
    _check_j_algebra(M, J)
    if (mode == "auto" and isinstance(L, AssembledLocalizer)
            and L.flavor in _CONTINUUM):
        return callias_kernel(L).index

    if tol is None:
        tol = zero_tolerance(M)
    n = M.shape[0]
    k = min(n, 8)
    while True:
        w = eig_window(M, k=k)
        absv = np.abs(w.values)
        if len(w) == n or absv.max() >= 3.0 * tol:
            break
        if k == n:
            break
        k = min(2 * k, n)
    kernel = absv < tol
    rest = absv[~kernel]
    if len(rest) and rest.min() < 3.0 * tol:
        raise SpectralGapError(
            f"kernel cluster not separated: next |nu| {rest.min():.3e} "
            f"< 3*tol={3 * tol:.3e}")
    V = w.vectors[:, kernel]
    if V.shape[1] == 0:
        return 0
    G = V.conj().T @ (J @ V)
    g = np.linalg.eigvalsh((G + G.conj().T) / 2)
    middling = np.count_nonzero(np.abs(g) <= 0.5)
    if middling:
        warnings.warn(f"{middling} kernel direction(s) carry |<J>| <= 0.5 "
                      "and count as zero; boundary pairing at work",
                      ClusterWarning, stacklevel=2)
    return int((g > 0.5).sum()) - int((g < -0.5).sum())


def _check_j_algebra(M, J):
    n = M.shape[0]
    rng = np.random.default_rng(7)
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    v /= np.linalg.norm(v)
    invol = np.linalg.norm(J @ (J @ v) - v)
    if invol > 1e-10:
        raise LocalizerError(f"J is not an involution (||J^2 v - v|| = "
                             f"{invol:.2e})")
    scale = max(np.linalg.norm(M @ v), 1e-300)
    anti = np.linalg.norm(J @ (M @ v) + M @ (J @ v)) / scale
    if anti > 1e-10:
        raise LocalizerError(f"J does not anticommute with L "
                             f"(relative leak {anti:.2e})")


# ----------------------------------------------------------- spectral flow


def spectral_flow(path, m_range, steps=8, zero_tol=None, max_bisect=24):
    """Net signature flow of the family m -> L(m) across m_range.

    Each simple eigenvalue crossing zero moves the signature by 2, so the
    returned integer equals Sig(end) - Sig(start) and the half-flow is
    what mass-term invariant differences predict.  The value telescopes
    (hence is trivially stable under step doubling); the grid plus
    bisection exist to localize crossings and to catch a degenerate
    evaluation point, which is nudged off the crossing before counting.
    """
    m0, m1 = float(m_range[0]), float(m_range[1])
    if steps < 1:
        raise LocalizerError("spectral_flow needs at least one step")
    cache = {}

    def sig_at(m):
        if m not in cache:
            cache[m] = inertia(path(m), zero_tol)
        return cache[m]

    def gapped_sig(m, lo, hi, endpoint=False):
        tri = sig_at(m)
        if tri.n_zero == 0:
            return m, tri.signature
        if endpoint:
            raise SpectralGapError(
                f"endpoint m={m} not gapped ({tri.n_zero} zero(s) at "
                f"tol {tri.zero_tol:.2e})")
        span = hi - lo
        for shift in (1e-3, -1e-3, 3e-3, -3e-3):
            mm = m + shift * span
            if lo < mm < hi:
                tri = sig_at(mm)
                if tri.n_zero == 0:
                    return mm, tri.signature
        raise SpectralGapError(f"could not find a gapped point near m={m}")

    _, s0 = gapped_sig(m0, m0, m1, endpoint=True)
    _, s1 = gapped_sig(m1, m0, m1, endpoint=True)
    flow = s1 - s0

    # localize the crossings; a step carrying |dSig| > 2 gets bisected
    points = [(m0, s0)]
    for m in np.linspace(m0, m1, steps + 1)[1:-1]:
        points.append(gapped_sig(float(m), m0, m1))
    points.append((m1, s1))
    budget = max_bisect
    i = 0
    while i + 1 < len(points):
        (ma, sa), (mb, sb) = points[i], points[i + 1]
        if abs(sb - sa) <= 2 or budget == 0:
            if abs(sb - sa) > 2:
                raise SpectralGapError(
                    f"flow tracking ambiguous in [{ma}, {mb}]: signature "
                    f"jump {sb - sa} after maximal refinement")
            i += 1
            continue
        budget -= 1
        points.insert(i + 1, gapped_sig((ma + mb) / 2, ma, mb))
    return int(flow)


# ------------------------------------------------------------- reporting


def eigen_report_csv(path, window, cluster=None):
    """Write the eigen-report table: index, eigenvalue, residual,
    in_cluster.  Ordering follows the window (|nu| ascending)."""
    edge = None
    if cluster is not None and cluster.cluster_count:
        edge = np.abs(cluster.cluster).max() * (1 + 1e-12)
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["index", "eigenvalue", "residual", "in_cluster"])
        for i, (v, r) in enumerate(zip(window.values, window.residuals)):
            inside = edge is not None and abs(v) <= edge
            out.writerow([i, f"{v:.17g}", f"{r:.3e}", str(inside).lower()])
