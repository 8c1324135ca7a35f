"""Assembly of lattice and continuum spectral localizers: flavors, graded
splittings, mass/disorder deformations, tuning bounds, and the COO dump.

Signature values asserted here (ssh odd flavor -> +2; sin-chain mass
deformation -> -+2) were frozen from hand-built shift-matrix constructions
independent of this package's assembly code.
"""

import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from speclocal.clifford import clifford_generators
from speclocal.lattice_model import builtin_model, model_from_hoppings
from speclocal.localizer import (
    AssembledLocalizer,
    DisorderSpec,
    LocalizerConfig,
    LocalizerError,
    MassTermSpec,
    add_disorder,
    add_mass_term,
    assemble,
    ball_sites,
    check_tuning_bounds,
    continuum_dirac_localizer,
    continuum_weyl_localizer,
    default_rho,
    export_coo,
    graded_clifford_rep,
    import_coo,
    split_blocks,
)

s1 = np.array([[0, 1], [1, 0]], dtype=complex)
s2 = np.array([[0, -1j], [1j, 0]])
s3 = np.diag([1.0, -1.0]).astype(complex)


def signature(matrix, tol=1e-10):
    ev = np.linalg.eigvalsh(matrix.toarray())
    return int((ev > tol).sum() - (ev < -tol).sum())


def cos_mass():
    """Scalar model with fiber cos(2 pi k)."""
    return model_from_hoppings(1, 1, [((1,), np.array([[0.5]]))], name="cos")


# ------------------------------------------------------------- Clifford rep


@pytest.mark.parametrize("d", [2, 4, 6])
def test_graded_rep_is_clifford_with_diagonal_chirality(d):
    rep = graded_clifford_rep(d)
    assert len(rep.generators) == d and rep.dim == 2 ** (d // 2)
    for i, gi in enumerate(rep.generators):
        assert np.allclose(gi, gi.conj().T)
        for j, gj in enumerate(rep.generators):
            want = 2 * np.eye(rep.dim) if i == j else 0
            assert np.allclose(gi @ gj + gj @ gi, want, atol=1e-12)
    ch = rep.chirality()
    h = rep.dim // 2
    assert np.allclose(ch, np.diag([1.0] * h + [-1.0] * h), atol=1e-12)


def test_graded_rep_d2_is_pauli_pair():
    rep = graded_clifford_rep(2)
    assert np.allclose(rep.generators[0], s1)
    assert np.allclose(rep.generators[1], s2)


def test_graded_rep_rejects_odd_d():
    with pytest.raises(LocalizerError):
        graded_clifford_rep(3)


# ----------------------------------------------------------------- geometry


def test_ball_site_counts():
    assert len(ball_sites(1, 2)) == 5
    assert len(ball_sites(2, 10)) == 317
    # lexicographic order
    pts = ball_sites(2, 1.2)
    assert [tuple(p) for p in pts] == [(-1, 0), (0, -1), (0, 0), (0, 1), (1, 0)]


def test_default_rho():
    assert default_rho(0.05) == 36
    assert default_rho(0.02) == 57


# ----------------------------------------------------------------- assembly


def test_generic_dim_d1():
    L = assemble(builtin_model("sin_chain"), LocalizerConfig(kappa=0.1, rho=2))
    assert L.dim == 5 * 1 * 1 * 2 == 10
    assert L.fiber_dim == 2
    assert L.grading[(-2,)] == 0 and L.grading[(2,)] == 8


def test_even_flavor_dim_and_hermiticity():
    st_model = builtin_model("stacked_ssh", delta=0.6, mu=0.1)
    L = assemble(st_model, LocalizerConfig(kappa=0.05, rho=10, flavor="even"))
    assert L.dim == 317 * 2 * 2
    herm = L.matrix - L.matrix.getH()
    assert (abs(herm.data).max() if herm.nnz else 0.0) < 1e-14


def test_generic_sigma2_symmetry_exact():
    L = assemble(builtin_model("sin_chain"), LocalizerConfig(kappa=0.1, rho=12))
    Jp = L.symmetry_ops["J_prime"]
    anti = Jp @ L.matrix + L.matrix @ Jp
    assert (abs(anti.data).max() if anti.nnz else 0.0) == 0.0


def test_generic_spectrum_reflection():
    L = assemble(builtin_model("sin_chain"), LocalizerConfig(kappa=0.1, rho=20))
    ev = np.sort(np.linalg.eigvalsh(L.matrix.toarray()))
    assert np.abs(ev + ev[::-1]).max() < 1e-9


def test_even_flavor_chiral_antisymmetry():
    st_model = builtin_model("stacked_ssh", delta=0.6, mu=0.1)
    L = assemble(st_model, LocalizerConfig(kappa=0.05, rho=6, flavor="even"))
    Jp = L.symmetry_ops["J_prime"]
    anti = Jp @ L.matrix + L.matrix @ Jp
    assert (abs(anti.data).max() if anti.nnz else 0.0) == 0.0


def test_flavor_errors():
    with pytest.raises(LocalizerError):
        assemble(builtin_model("sin_chain"),
                 LocalizerConfig(kappa=0.1, rho=3, flavor="odd"))
    with pytest.raises(LocalizerError):
        assemble(builtin_model("sin_chain"),
                 LocalizerConfig(kappa=0.1, rho=3, flavor="even"))
    with pytest.raises(LocalizerError):
        LocalizerConfig(kappa=-0.1, rho=3)
    with pytest.raises(LocalizerError):
        LocalizerConfig(kappa=0.1, rho=0.5)


@settings(max_examples=12, deadline=None)
@given(kappa=st.floats(0.02, 0.5), rho=st.integers(2, 10),
       mu=st.floats(-1.8, 1.8))
def test_generic_assembly_properties_hold(kappa, rho, mu):
    model = builtin_model("ssh_chain", mu=mu)
    L = assemble(model, LocalizerConfig(kappa=kappa, rho=rho))
    herm = L.matrix - L.matrix.getH()
    assert (abs(herm.data).max() if herm.nnz else 0.0) < 1e-14
    Jp = L.symmetry_ops["J_prime"]
    anti = Jp @ L.matrix + L.matrix @ Jp
    assert (abs(anti.data).max() if anti.nnz else 0.0) == 0.0


# ------------------------------------------------------- frozen signatures


def test_ssh_odd_flavor_signature():
    # winding(det A_k) = +1 at mu=0.5 pairs with signature +2
    ssh = builtin_model("ssh_chain", mu=0.5)
    L = assemble(ssh, LocalizerConfig(kappa=0.1, rho=30, flavor="odd"))
    assert L.dim == 122
    assert signature(L.matrix) == 2


def test_ssh_odd_flavor_signature_trivial_phase():
    ssh = builtin_model("ssh_chain", mu=1.5)
    L = assemble(ssh, LocalizerConfig(kappa=0.1, rho=30, flavor="odd"))
    assert signature(L.matrix) == 0


def test_sin_chain_mass_signatures():
    chain = builtin_model("sin_chain")
    base = assemble(chain, LocalizerConfig(kappa=0.1, rho=30))
    for m, sig in [(0.1, -2), (-0.1, 2)]:
        Lm = add_mass_term(base, chain, MassTermSpec(Y=cos_mass(), m=m))
        assert signature(Lm.matrix) == sig
        assert Lm.meta["mass"]["y_signs"] == (1, -1)


# -------------------------------------------------------------- mass terms


def test_mass_zero_is_identity():
    chain = builtin_model("sin_chain")
    base = assemble(chain, LocalizerConfig(kappa=0.1, rho=10))
    Lm = add_mass_term(base, chain, MassTermSpec(Y=cos_mass(), m=0.0))
    assert (Lm.matrix != base.matrix).nnz == 0
    assert Lm.meta["mass"]["y_signs"] == (1, -1)


def test_mass_gaps_the_localizer():
    chain = builtin_model("sin_chain")
    base = assemble(chain, LocalizerConfig(kappa=0.1, rho=25))
    one = model_from_hoppings(1, 1, [((0,), np.array([[1.0]]))], name="one")
    small = np.abs(np.linalg.eigvalsh(base.matrix.toarray())).min()
    gaps = []
    for m in (0.1, 0.2):
        Lm = add_mass_term(base, chain, MassTermSpec(Y=one, m=m))
        gaps.append(np.abs(np.linalg.eigvalsh(Lm.matrix.toarray())).min())
    assert small < 1e-3              # semimetal: near-zero modes present
    assert gaps[0] > 0.05 and gaps[1] > gaps[0]


def test_mass_rejects_nonscalar_and_fermi_zero():
    chain = builtin_model("sin_chain")
    base = assemble(chain, LocalizerConfig(kappa=0.1, rho=6))
    bad = model_from_hoppings(1, 2, [((0,), np.eye(2, dtype=complex))])
    with pytest.raises(LocalizerError):
        add_mass_term(base, chain, MassTermSpec(Y=bad, m=0.1))
    # sin(2 pi k) vanishes at both Fermi points of the chain
    with pytest.raises(LocalizerError):
        add_mass_term(base, chain, MassTermSpec(Y=chain, m=0.1))


def test_even_mass_term_keeps_hermiticity():
    st_model = builtin_model("stacked_ssh", delta=0.3, mu=0.9)
    L = assemble(st_model, LocalizerConfig(kappa=0.05, rho=5, flavor="even"))
    Y = model_from_hoppings(2, 1, [((0, 0), np.array([[1.0]]))], name="one2")
    Lm = add_mass_term(L, st_model, MassTermSpec(Y=Y, m=0.2, y_signs=()))
    herm = Lm.matrix - Lm.matrix.getH()
    assert (abs(herm.data).max() if herm.nnz else 0.0) < 1e-14
    assert (Lm.matrix != L.matrix).nnz > 0


# --------------------------------------------------------------- disorder


def test_disorder_determinism_and_zero_coupling():
    chain = builtin_model("sin_chain")
    base = assemble(chain, LocalizerConfig(kappa=0.1, rho=15))
    assert add_disorder(base, chain, DisorderSpec(lam=0.0, seed=3)) is base
    d1 = add_disorder(base, chain, DisorderSpec(lam=0.05, seed=7))
    d2 = add_disorder(base, chain, DisorderSpec(lam=0.05, seed=7))
    d3 = add_disorder(base, chain, DisorderSpec(lam=0.05, seed=8))
    assert np.array_equal(d1.matrix.indptr, d2.matrix.indptr)
    assert np.array_equal(d1.matrix.indices, d2.matrix.indices)
    assert np.array_equal(d1.matrix.data, d2.matrix.data)
    assert (d1.matrix != d3.matrix).nnz > 0
    herm = d1.matrix - d1.matrix.getH()
    assert (abs(herm.data).max() if herm.nnz else 0.0) < 1e-14


def test_disorder_requires_generic():
    ssh = builtin_model("ssh_chain", mu=0.5)
    L = assemble(ssh, LocalizerConfig(kappa=0.1, rho=5, flavor="odd"))
    with pytest.raises(LocalizerError):
        add_disorder(L, ssh, DisorderSpec(lam=0.1, seed=0))


# ------------------------------------------------------------ block splits


def test_split_even_d_matches_even_assembly():
    st_model = builtin_model("stacked_ssh", delta=0.6, mu=0.1)
    Lg = assemble(st_model, LocalizerConfig(kappa=0.1, rho=6))
    plus, minus = split_blocks(Lg, st_model)
    Lev = assemble(st_model, LocalizerConfig(kappa=0.1, rho=6, flavor="even"))
    assert abs((plus.matrix - Lev.matrix).toarray()).max() < 1e-13
    ef = np.sort(np.linalg.eigvalsh(Lg.matrix.toarray()))
    eu = np.sort(np.concatenate([np.linalg.eigvalsh(plus.matrix.toarray()),
                                 np.linalg.eigvalsh(minus.matrix.toarray())]))
    assert np.abs(ef - eu).max() < 1e-10


def test_split_even_blocks_are_spectral_mirrors():
    # neither graded summand may carry a spectral asymmetry on its own
    st_model = builtin_model("stacked_ssh", delta=0.6, mu=0.1)
    Lg = assemble(st_model, LocalizerConfig(kappa=0.1, rho=6))
    plus, minus = split_blocks(Lg, st_model)
    ep = np.sort(np.linalg.eigvalsh(plus.matrix.toarray()))
    em = np.sort(np.linalg.eigvalsh(minus.matrix.toarray()))
    assert np.abs(ep + em[::-1]).max() < 1e-10


def test_split_odd_d_matches_odd_assembly():
    ssh = builtin_model("ssh_chain", mu=0.5)
    Lg = assemble(ssh, LocalizerConfig(kappa=0.1, rho=12))
    one, two = split_blocks(Lg, ssh)
    Lod = assemble(ssh, LocalizerConfig(kappa=0.1, rho=12, flavor="odd"))
    assert abs((one.matrix - Lod.matrix).toarray()).max() < 1e-13
    ef = np.sort(np.linalg.eigvalsh(Lg.matrix.toarray()))
    eu = np.sort(np.concatenate([np.linalg.eigvalsh(one.matrix.toarray()),
                                 np.linalg.eigvalsh(two.matrix.toarray())]))
    assert np.abs(ef - eu).max() < 1e-10


def test_split_without_symmetry_rejected():
    chain = builtin_model("sin_chain")
    L = assemble(chain, LocalizerConfig(kappa=0.1, rho=5))
    with pytest.raises(LocalizerError):
        split_blocks(L, chain)


# ------------------------------------------------------------ tuning bounds


def test_tuning_bounds_no_hopping():
    const = model_from_hoppings(1, 2, [((0,), s3)], name="const")
    r = check_tuning_bounds(const, 0.05, 100)
    assert r.applicable
    assert r.commutator_norm == 0.0
    assert r.kappa_bound == np.inf
    assert r.rho_min == pytest.approx(2 * 1.0 / 0.05)
    assert r.kappa_ok and r.rho_ok


def test_tuning_bounds_p_ip_values():
    r = check_tuning_bounds(builtin_model("p_ip", delta=1.0, mu_hat=-2.0),
                            kappa=5e-4, rho=9000, grid_per_axis=64)
    assert r.applicable
    assert r.gap == pytest.approx(2.0, abs=1e-9)
    assert r.h_norm == pytest.approx(6.0, abs=1e-9)
    assert r.commutator_norm == pytest.approx(4.0, abs=1e-9)
    assert r.kappa_bound == pytest.approx(8 / 10368, rel=1e-9)
    assert r.kappa_ok and r.rho_ok


def test_tuning_bounds_semimetal_inapplicable():
    r = check_tuning_bounds(builtin_model("sin_chain"), 0.02, 30)
    assert not r.applicable and not r.kappa_ok


# ------------------------------------------------------- volume stability


def test_finite_volume_stability():
    chain = builtin_model("sin_chain")
    kappa, rho = 0.05, 24
    e1 = np.linalg.eigvalsh(
        assemble(chain, LocalizerConfig(kappa=kappa, rho=rho)).matrix.toarray())
    e2 = np.linalg.eigvalsh(
        assemble(chain, LocalizerConfig(kappa=kappa, rho=1.5 * rho)).matrix.toarray())
    window = e1[np.abs(e1) <= np.sqrt(kappa)]
    assert len(window) == 2
    drift = max(np.abs(e2 - x).min() for x in window)
    assert drift < 1e-6


# ------------------------------------------------------------- continuum
#
# A square Dirichlet truncation cannot carry a nonzero Fredholm index: every
# near-zero mode of the infinite problem is forced (rank-nullity) into a
# (nu, -nu) pair with a boundary-concentrated partner, and further boundary
# pairs can appear on their own.  The genuine kernel vectors are the
# Gaussian-localized ones, so the tests below split the near-zero space by
# J and then diagonalize the interior-mass form inside each J-eigenspace.


def near_zero_split(L, w, V, tol):
    """(j_value, interior_mass) per near-zero mode, basis-independent."""
    x = L.meta["x"]
    J = L.symmetry_ops["J"]
    S = V[:, np.abs(w) < tol]
    S, _ = np.linalg.qr(S)
    jw, U = np.linalg.eigh(S.conj().T @ (J @ S))
    out = []
    interior = np.repeat(np.max(np.abs(x), axis=1) <= L.rho / 2, L.fiber_dim)
    if L.flavor == "continuum-weyl":
        interior = np.concatenate([interior, interior])
    for jval in (-1.0, 1.0):
        block = U[:, np.abs(jw - jval) < 1e-6]
        if block.shape[1] == 0:
            continue
        W = S @ block
        mass, R = np.linalg.eigh(W.conj().T @ (interior[:, None] * W))
        out.extend((jval, float(m)) for m in mass)
    return sorted(out)


def test_continuum_weyl_d1_oscillator_spectrum():
    # one genuine zero mode plus its forced boundary partner, then the
    # oscillator ladder kappa(2n+1) -+ kappa
    L = continuum_weyl_localizer([1.0], 0.1)
    ev = np.linalg.eigvalsh(L.matrix.toarray())
    low = np.sort(np.abs(ev))[:6]
    want = np.sqrt([0.0, 0.0, 0.2, 0.2, 0.4, 0.4])
    assert np.abs(low - want).max() < 1e-5


@pytest.mark.parametrize("b,jval", [(1.0, -1.0), (-1.0, 1.0)])
def test_continuum_weyl_d1_kernel_grading_flips_with_slope(b, jval):
    L = continuum_weyl_localizer([b], 0.1)
    w, V = np.linalg.eigh(L.matrix.toarray())
    modes = near_zero_split(L, w, V, 1e-4)
    assert len(modes) == 2
    genuine = [(j, m) for j, m in modes if m > 0.5]
    assert len(genuine) == 1
    assert genuine[0][0] == pytest.approx(jval, abs=1e-9)
    assert genuine[0][1] > 0.999


def test_continuum_weyl_rejects_small_box():
    with pytest.raises(LocalizerError):
        continuum_weyl_localizer([1.0], 0.1, half_width=0.5)
    with pytest.raises(LocalizerError):
        continuum_dirac_localizer(np.eye(2), 0.1, half_width=0.4)


def test_continuum_dirac_d2_multiset():
    # full-box low levels: the kernel, its forced boundary partner, one
    # more boundary pair, then the first oscillator shell at sqrt(0.4)
    L = continuum_dirac_localizer(np.eye(2), 0.2, points=32)
    assert L.dim == 32**2 * 4
    w = np.linalg.eigvalsh(L.matrix.toarray())
    a = np.sort(np.abs(w))
    assert a[3] < 1e-6
    assert np.abs(a[4:6] - np.sqrt(0.4)).max() < 2e-3


# ------------------------------------------------------------- COO export


def test_coo_round_trip_bit_exact(tmp_path):
    L = assemble(builtin_model("ssh_chain", mu=0.5),
                 LocalizerConfig(kappa=0.1, rho=5, flavor="odd"))
    path = os.path.join(tmp_path, "loc.coo")
    export_coo(L, path)
    M, header = import_coo(path)
    ref = L.matrix.copy()
    ref.sort_indices()
    ref.eliminate_zeros()
    assert np.array_equal(M.indptr, ref.indptr)
    assert np.array_equal(M.indices, ref.indices)
    assert np.array_equal(M.data, ref.data)
    assert header["flavor"] == "odd"
    assert header["kappa"] == 0.1 and header["rho"] == 5.0
    assert header["model"] == L.model_hash


def test_coo_rejects_foreign_file(tmp_path):
    path = os.path.join(tmp_path, "junk.txt")
    with open(path, "w") as fh:
        fh.write("not a localizer\n")
    with pytest.raises(LocalizerError):
        import_coo(path)
