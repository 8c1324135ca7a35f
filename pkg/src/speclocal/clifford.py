"""Irreducible complex Clifford representations and the small algebraic
matrices (M, K) that control continuum localizer spectra.

Conventions used throughout the package:

* generators are Hermitian unitaries with {g_j, g_k} = 2 delta_jk,
* odd d is *left-handed*:  g_1 g_2 ... g_d = i^((d-1)/2) * 1,
* even d carries the chirality element g_0 = (-i)^(d/2) g_1 ... g_d,
  which is a Hermitian unitary anticommuting with every generator.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from itertools import product

import numpy as np

s0 = np.eye(2, dtype=complex)
s1 = np.array([[0, 1], [1, 0]], dtype=complex)
s2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
s3 = np.array([[1, 0], [0, -1]], dtype=complex)

# algebraic identities are exact up to rounding; see selftests
ATOL = 1e-12


@dataclass(frozen=True)
class CliffordRep:
    """An irreducible representation of the complex Clifford algebra C_d.

    generators: d Hermitian unitary matrices of size 2^(d//2), pairwise
    anticommuting.  Odd-d reps satisfy the left-handed product convention.
    """

    d: int
    generators: tuple
    left_handed: bool = True

    @property
    def dim(self) -> int:
        return self.generators[0].shape[0]

    def product(self) -> np.ndarray:
        return reduce(np.matmul, self.generators)

    def chirality(self) -> np.ndarray:
        """g_0 = (-i)^(d/2) g_1 ... g_d; defined for even d only."""
        if self.d % 2:
            raise ValueError("chirality element exists only for even d")
        return (-1j) ** (self.d // 2) * self.product()


@dataclass(frozen=True)
class SlopeVector:
    """Diagonalized slope coefficients b_1..b_d of a linearized band touching.

    total = sum |b_j| and sign = prod sgn(b_j) are the two derived scalars
    every spectral formula downstream depends on.
    """

    b: tuple

    def __post_init__(self):
        object.__setattr__(self, "b", tuple(float(x) for x in self.b))
        if any(x == 0.0 for x in self.b):
            raise ValueError("slope entries must all be nonzero")

    @property
    def d(self) -> int:
        return len(self.b)

    @property
    def total(self) -> float:
        """|b| = sum_j |b_j|."""
        return float(sum(abs(x) for x in self.b))

    @property
    def sign(self) -> int:
        """sgn(b) = prod_j sgn(b_j)."""
        out = 1
        for x in self.b:
            if x < 0:
                out = -out
        return out


def _as_slope(b) -> SlopeVector:
    return b if isinstance(b, SlopeVector) else SlopeVector(tuple(b))


def clifford_generators(d: int) -> CliffordRep:
    """Deterministic recursive-doubling construction.

    d=1 -> (1);  d=2 -> (s1, s2);  d+2 from d by g_j -> kron(g_j, s1) and
    appending kron(1, s2), kron(1, s3).  The last generator's sign is then
    flipped if needed so odd d lands on the left-handed product (the base
    cases already do; the guard keeps the invariant explicit).
    """
    if d < 1:
        raise ValueError(f"dimension must be a positive integer, got {d}")
    if d == 1:
        gens = [np.ones((1, 1), dtype=complex)]
    elif d == 2:
        gens = [s1.copy(), s2.copy()]
    else:
        prev = clifford_generators(d - 2)
        eye = np.eye(prev.dim, dtype=complex)
        gens = [np.kron(g, s1) for g in prev.generators]
        gens.append(np.kron(eye, s2))
        gens.append(np.kron(eye, s3))
    if d % 2 == 1:
        prod = reduce(np.matmul, gens)
        target = 1j ** ((d - 1) // 2)
        if not np.allclose(prod, target * np.eye(len(prod)), atol=ATOL):
            gens[-1] = -gens[-1]
    return CliffordRep(d=d, generators=tuple(gens))


def m_matrix(rep_gamma: CliffordRep, rep_Gamma: CliffordRep, b) -> np.ndarray:
    """M = sum_j b_j gamma_j (x) Gamma_j for two odd-d reps.

    Hermitian with ||M|| <= |b|; its spectrum is enumerated exactly by
    m_spectrum_analytic.
    """
    b = _as_slope(b)
    if rep_gamma.d != rep_Gamma.d or rep_gamma.d != b.d:
        raise ValueError(
            f"dimension mismatch: reps d={rep_gamma.d},{rep_Gamma.d}, |b|={b.d}"
        )
    if b.d % 2 == 0:
        raise ValueError("M is defined for odd d")
    n = rep_gamma.dim * rep_Gamma.dim
    M = np.zeros((n, n), dtype=complex)
    for bj, g, G in zip(b.b, rep_gamma.generators, rep_Gamma.generators):
        M += bj * np.kron(g, G)
    return M


def admissible_sign_patterns(d: int):
    """Joint sign patterns eta in {-1,1}^d carrying a one-dimensional joint
    eigenspace of the commuting family {gamma_j (x) Gamma_j}.

    The parity rule: an even number of -1 entries for d = 1 mod 4, an odd
    number for d = 3 mod 4.  Exactly 2^(d-1) patterns survive.
    """
    if d % 2 == 0:
        raise ValueError("joint-eigenspace enumeration requires odd d")
    want_odd = d % 4 == 3
    out = []
    for eta in product((1, -1), repeat=d):
        negs = sum(1 for e in eta if e < 0)
        if (negs % 2 == 1) == want_odd:
            out.append(eta)
    return out


def m_spectrum_analytic(d: int, b):
    """Spectrum of M as a sorted list of (eigenvalue, multiplicity).

    Each admissible eta contributes the simple eigenvalue <eta, b>; merged
    at tolerance 1e-12 * (1 + |b|) since float sums of permuted terms can
    differ in the last ulp.
    """
    b = _as_slope(b)
    if d % 2 == 0:
        raise ValueError("analytic M spectrum requires odd d")
    if b.d != d:
        raise ValueError(f"slope vector has length {b.d}, expected {d}")
    vals = sorted(
        float(np.dot(eta, b.b)) for eta in admissible_sign_patterns(d)
    )
    tol = 1e-12 * (1.0 + b.total)
    merged = []
    for v in vals:
        if merged and abs(v - merged[-1][0]) <= tol:
            merged[-1][1] += 1
        else:
            merged.append([v, 1])
    return [(v, m) for v, m in merged]


def k_matrix(rep_gamma: CliffordRep, rep_Gamma: CliffordRep, b) -> np.ndarray:
    """The 4-block Hermitian matrix governing the even-d continuum kernel.

        K = [[0, -i(M - b_d), 0, 0 ],
             [i(M - b_d), 0,  0, 0 ],
             [0, 0, 0, -i(M + b_d)],
             [0, 0, i(M + b_d), 0 ]]

    with M = sum_{j<d} b_j gamma'_j (x) Gamma'_j built from the odd (d-1)
    reps.  -|b| is always a simple eigenvalue; whether it sits in the upper
    or lower 2x2 block pair depends on (sgn(b), d mod 4).
    """
    b = _as_slope(b)
    d = b.d
    if d % 2:
        raise ValueError("K is defined for even d")
    if rep_gamma.d != d - 1 or rep_Gamma.d != d - 1:
        raise ValueError(
            f"need reps of dimension d-1={d - 1}, got {rep_gamma.d},{rep_Gamma.d}"
        )
    M = m_matrix(rep_gamma, rep_Gamma, SlopeVector(b.b[:-1]))
    bd = b.b[-1]
    n = M.shape[0]
    eye = np.eye(n)
    Z = np.zeros((n, n), dtype=complex)
    minus = M - bd * eye
    plus = M + bd * eye
    return np.block(
        [
            [Z, -1j * minus, Z, Z],
            [1j * minus, Z, Z, Z],
            [Z, Z, Z, -1j * plus],
            [Z, Z, 1j * plus, Z],
        ]
    )


def minus_b_block(d: int, b) -> str:
    """Which 2x2 block pair of K carries the simple eigenvalue -|b|.

    'upper' iff (sgn(b) = +1 and d = 0 mod 4) or (sgn(b) = -1 and d = 2
    mod 4); 'lower' otherwise.
    """
    b = _as_slope(b)
    if d % 2:
        raise ValueError("block location is an even-d notion")
    upper = (b.sign == 1 and d % 4 == 0) or (b.sign == -1 and d % 4 == 2)
    return "upper" if upper else "lower"


def simple_extremal_sign(d: int, b) -> int:
    """For odd d exactly one of +-|b| is a simple eigenvalue of M; return
    its sign.  +|b| is simple iff the pattern sgn(b) itself is admissible."""
    b = _as_slope(b)
    if d % 2 == 0:
        raise ValueError("extremal-eigenvalue rule is an odd-d notion")
    negs = sum(1 for x in b.b if x < 0)
    want_odd = d % 4 == 3
    return 1 if (negs % 2 == 1) == want_odd else -1


def clifford_trace_det(rep: CliffordRep, qs) -> complex:
    """Tr(prod_k sigma.q_k) for n odd column vectors q_k in R^n.

    Equals 2^((n-1)/2) i^((n-1)/2) det(q_1, ..., q_n) for a left-handed rep.
    """
    n = rep.d
    if n % 2 == 0:
        raise ValueError("trace-determinant identity requires odd n")
    qs = [np.asarray(q, dtype=float) for q in qs]
    if len(qs) != n or any(q.shape != (n,) for q in qs):
        raise ValueError(f"need exactly {n} vectors of length {n}")
    mats = [
        sum(q[j] * rep.generators[j] for j in range(n)) for q in qs
    ]
    return complex(np.trace(reduce(np.matmul, mats)))


def joint_eigenvector(rep_gamma: CliffordRep, rep_Gamma: CliffordRep, eta):
    """A unit vector in the joint eigenspace of {gamma_j (x) Gamma_j} with
    signs eta, or None when that space is zero-dimensional.

    Forms the product of the commuting projectors (1 + eta_j R_jj)/2 and
    returns its dominant column; used by the raising-operator selftest.
    """
    d = rep_gamma.d
    n = rep_gamma.dim * rep_Gamma.dim
    P = np.eye(n, dtype=complex)
    for j in range(d):
        R = np.kron(rep_gamma.generators[j], rep_Gamma.generators[j])
        P = P @ (0.5 * (np.eye(n) + eta[j] * R))
    norms = np.linalg.norm(P, axis=0)
    if norms.max() < 1e-10:
        return None
    v = P[:, int(np.argmax(norms))]
    return v / np.linalg.norm(v)
