"""Model construction, Bloch fibers, Fermi-point search, linearization,
and the model-file round trip."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from speclocal.lattice_model import (
    FermiSearchError,
    HoppingTerm,
    ModelError,
    WeylPointReport,
    bloch_fiber,
    builtin_model,
    charge_of,
    fiber_batch,
    find_fermi_points,
    linearize_at,
    model_from_hoppings,
    model_from_toml,
    model_hash,
    model_to_toml,
)

s1 = np.array([[0, 1], [1, 0]], dtype=complex)
s2 = np.array([[0, -1j], [1j, 0]])
s3 = np.diag([1.0, -1.0]).astype(complex)


def weyl_probe(signs=(1, 1, 1)):
    """d=3 lattice model with fiber sum_j s_j sign_j sin(2 pi k_j)/(2 pi):
    linearizes at k*=0 to B = diag(signs)."""
    paulis = (s1, s2, s3)
    terms = [
        HoppingTerm(tuple(int(i == j) for i in range(3)), signs[j] * paulis[j] / (4j * np.pi))
        for j in range(3)
    ]
    return model_from_hoppings(3, 2, terms)


# ------------------------------------------------------------ construction


def test_sin_chain_fiber():
    m = builtin_model("sin_chain")
    assert m.d == 1 and m.N == 1
    assert bloch_fiber(m, [0.25])[0, 0] == pytest.approx(1.0)
    assert bloch_fiber(m, [0.0])[0, 0] == pytest.approx(0.0)
    ks = np.linspace(0, 1, 17)
    for k in ks:
        assert bloch_fiber(m, [k])[0, 0] == pytest.approx(np.sin(2 * np.pi * k), abs=1e-14)


def test_stacked_ssh_fiber_hand_value():
    m = builtin_model("stacked_ssh", delta=0.6, mu=0.1)
    H = bloch_fiber(m, (0.0, 0.0))
    # A_(0,0) = 1 - 2*0.6 - 0.1 = -0.3
    assert np.allclose(H, [[0, -0.3], [-0.3, 0]], atol=1e-14)
    assert m.chiral_symmetry is not None
    assert np.allclose(m.chiral_symmetry, s3)


def test_minimal_weyl_fiber_components():
    m = builtin_model("minimal_weyl", delta=0.5, mu=4.0)
    assert m.chiral_symmetry is None
    for k in ((0.13, 0.4, 0.77), (0.5, 0.21, 0.08)):
        H = bloch_fiber(m, k)
        hx = -2 * 0.5 * np.sin(2 * np.pi * k[1])
        hy = -2 * 0.5 * np.sin(2 * np.pi * k[0])
        hz = 2 * sum(np.cos(2 * np.pi * x) for x in k) - 4.0
        assert np.allclose(H, hx * s1 + hy * s2 + hz * s3, atol=1e-13)


def test_p_ip_touchings_at_special_fillings():
    for mu_hat, gapped in ((-2.0, True), (0.0, False), (4.0, False), (-6.0, True)):
        m = builtin_model("p_ip", delta=1.0, mu_hat=mu_hat)
        ks = np.array([[0, 0], [0, 0.5], [0.5, 0], [0.5, 0.5]], dtype=float)
        sig = np.abs(np.linalg.eigvalsh(fiber_batch(m, ks))).min()
        assert (sig > 0.5) == gapped


def test_scale_parameter_is_uniform():
    m1 = builtin_model("p_ip", delta=1.0, mu_hat=-2.0)
    m2 = builtin_model("p_ip", delta=1.0, mu_hat=-2.0, scale=1 / 30)
    k = (0.3, 0.81)
    assert np.allclose(bloch_fiber(m1, k) / 30, bloch_fiber(m2, k), atol=1e-15)


def test_hermiticity_closure_mirrors_terms():
    amp = np.array([[0.3 + 0.2j, 1.1], [0.0, -0.4j]])
    m = model_from_hoppings(1, 2, [HoppingTerm((1,), amp)])
    offs = {t.offset: t.amplitude for t in m.hoppings}
    assert set(offs) == {(1,), (-1,)}
    assert np.array_equal(offs[(-1,)], amp.conj().T)


def test_construction_errors():
    with pytest.raises(ModelError, match="duplicate"):
        model_from_hoppings(1, 1, [HoppingTerm((1,), [[1.0]]), HoppingTerm((1,), [[2.0]])])
    with pytest.raises(ModelError, match="closure"):
        model_from_hoppings(
            1, 1, [HoppingTerm((1,), [[1 + 1j]]), HoppingTerm((-1,), [[1 + 1j]])]
        )
    with pytest.raises(ModelError, match="Hermitian"):
        model_from_hoppings(1, 1, [HoppingTerm((0,), [[1j]])])
    with pytest.raises(ModelError, match="chiral"):
        model_from_hoppings(
            1, 1, [HoppingTerm((1,), [[0.5]])], chiral=np.array([[1.0]])
        )
    with pytest.raises(ModelError, match="unknown builtin"):
        builtin_model("honeycomb")
    with pytest.raises(ModelError, match="missing parameter"):
        builtin_model("stacked_ssh", delta=0.6)
    with pytest.raises(ModelError, match="does not take"):
        builtin_model("sin_chain", mu=1.0)


@settings(max_examples=30, deadline=None)
@given(
    st.lists(
        st.tuples(
            st.integers(min_value=1, max_value=4),
            st.complex_numbers(max_magnitude=2.0, allow_nan=False, allow_infinity=False),
        ),
        min_size=1,
        max_size=4,
        unique_by=lambda t: t[0],
    ),
    st.floats(min_value=0.0, max_value=1.0, exclude_max=True),
)
def test_fiber_hermitian_and_periodic(terms, k):
    hops = [HoppingTerm((n,), [[z]]) for n, z in terms]
    hops.append(HoppingTerm((0,), [[0.7]]))
    m = model_from_hoppings(1, 1, hops)
    H = bloch_fiber(m, [k])
    assert np.max(np.abs(H - H.conj().T)) < 1e-13
    assert np.allclose(bloch_fiber(m, [k + 1.0]), H, atol=5e-13)


# ----------------------------------------------------------- Fermi search


def test_sin_chain_fermi_points():
    pts = find_fermi_points(builtin_model("sin_chain"))
    assert len(pts) == 2
    assert pts[0][0] == pytest.approx(0.0, abs=1e-9)
    assert pts[1][0] == pytest.approx(0.5, abs=1e-9)


def test_stacked_ssh_four_points_analytic():
    # solve |2 delta cos(2 pi k2) + mu| = 1 by hand and compare
    delta, mu = 0.6, 0.1
    pts = find_fermi_points(builtin_model("stacked_ssh", delta=delta, mu=mu))
    assert len(pts) == 4
    c_plus = np.arccos((1 - mu) / (2 * delta)) / (2 * np.pi)  # k1 = 0
    c_minus = np.arccos((-1 - mu) / (2 * delta)) / (2 * np.pi)  # k1 = 1/2
    expected = sorted(
        [
            (0.0, c_plus),
            (0.0, 1 - c_plus),
            (0.5, c_minus),
            (0.5, 1 - c_minus),
        ]
    )
    for got, want in zip(pts, expected):
        assert got[0] == pytest.approx(want[0], abs=1e-8)
        assert got[1] == pytest.approx(want[1], abs=1e-8)


def test_stacked_ssh_two_point_configuration():
    pts = find_fermi_points(builtin_model("stacked_ssh", delta=0.3, mu=0.9))
    assert len(pts) == 2


def test_minimal_weyl_fermi_points():
    pts = find_fermi_points(builtin_model("minimal_weyl", delta=0.5, mu=4.0))
    assert len(pts) == 2
    for p, kz in zip(pts, (0.25, 0.75)):
        assert p[0] == pytest.approx(0.0, abs=1e-8)
        assert p[1] == pytest.approx(0.0, abs=1e-8)
        assert p[2] == pytest.approx(kz, abs=1e-8)
    pts0 = find_fermi_points(builtin_model("minimal_weyl", delta=0.5, mu=0.0))
    assert len(pts0) == 4


def test_gapped_model_returns_empty():
    assert find_fermi_points(builtin_model("p_ip", delta=1.0, mu_hat=-2.0)) == []


def test_non_isolated_zero_set_raises():
    # fiber sin(2 pi k1), independent of k2: zero curves, not points
    m = model_from_hoppings(2, 1, [HoppingTerm((1, 0), [[1 / 2j]])])
    with pytest.raises(FermiSearchError, match="non-isolated"):
        find_fermi_points(m, grid_per_axis=48)


def test_scan_rejects_tiny_grid():
    with pytest.raises(ModelError):
        find_fermi_points(builtin_model("sin_chain"), grid_per_axis=4)


# ---------------------------------------------------------- linearization


def test_sin_chain_linearization():
    m = builtin_model("sin_chain")
    rep = linearize_at(m, (0.0,))
    assert rep.multiplicity == 1
    assert rep.B.shape == (1, 1)
    assert rep.B[0, 0] == pytest.approx(2 * np.pi, rel=1e-6)
    assert charge_of(rep, 1) == -1
    rep_half = linearize_at(m, (0.5,))
    assert rep_half.B[0, 0] == pytest.approx(-2 * np.pi, rel=1e-6)
    assert charge_of(rep_half, 1) == +1


def test_weyl_probe_identity_slope():
    rep = linearize_at(weyl_probe((1, 1, 1)), (0.0, 0.0, 0.0))
    assert rep.multiplicity == 1
    assert np.allclose(rep.B, np.eye(3), atol=1e-5)
    assert charge_of(rep, 3) == +1
    assert rep.fit_residual < 1e-6


def test_weyl_probe_reflected_slope():
    rep = linearize_at(weyl_probe((1, 1, -1)), (0.0, 0.0, 0.0))
    # B is gauge-fixed to the symmetric root with a column flip, so only
    # singular values and det sign are pinned
    assert np.allclose(sorted(np.linalg.svd(rep.B)[1]), [1, 1, 1], atol=1e-5)
    assert np.linalg.det(rep.B) < 0
    assert charge_of(rep, 3) == -1


def test_minimal_weyl_slope_matrix():
    m = builtin_model("minimal_weyl", delta=0.5, mu=4.0)
    rep = linearize_at(m, (0.0, 0.0, 0.25))
    assert rep.multiplicity == 1
    # B^T B = diag-free gauge invariant; singular values {2pi, 2pi, 4pi}
    sv = np.sort(np.linalg.svd(rep.B)[1])
    assert np.allclose(sv, [2 * np.pi, 2 * np.pi, 4 * np.pi], rtol=1e-5)
    assert np.linalg.det(rep.B) > 0
    assert charge_of(rep, 3) == +1
    rep2 = linearize_at(m, (0.0, 0.0, 0.75))
    assert charge_of(rep2, 3) == -1
    assert rep.residual_bound > 0  # quadratic remainder present and bounded


def test_charge_of_reference_values():
    mk = lambda B: WeylPointReport((0.0,) * 3, 1, np.array(B), None, 0.0)
    assert charge_of(mk(np.eye(3)), 3) == +1
    assert charge_of(mk(np.diag([1, 1, -1.0])), 3) == -1
    r1 = WeylPointReport((0.0,), 1, np.array([[2 * np.pi]]), None, 0.0)
    assert charge_of(r1, 1) == -1
    with pytest.raises(ModelError):
        charge_of(mk(np.eye(2)), 2)


def test_nielsen_ninomiya_sum():
    for spec_ in (
        ("sin_chain", {}),
        ("minimal_weyl", dict(delta=0.5, mu=4.0)),
        ("minimal_weyl", dict(delta=0.5, mu=0.0)),
    ):
        m = builtin_model(spec_[0], **spec_[1])
        pts = find_fermi_points(m)
        total = sum(charge_of(linearize_at(m, k), m.d) for k in pts)
        assert total == 0


def test_stacked_ssh_linearization_wellformed():
    m = builtin_model("stacked_ssh", delta=0.6, mu=0.1)
    for k in find_fermi_points(m):
        rep = linearize_at(m, k)
        assert rep.multiplicity == 1
        assert abs(np.linalg.det(rep.B)) > 1e-3
        assert rep.fit_residual < 1e-5


def test_linearize_rejects_gapped_point():
    with pytest.raises(ModelError, match="not a Fermi point"):
        linearize_at(builtin_model("p_ip", delta=1.0, mu_hat=-2.0), (0.3, 0.3))


# -------------------------------------------------------------- model I/O


def test_toml_round_trip_bit_exact():
    for m in (
        builtin_model("stacked_ssh", delta=0.6, mu=0.1),
        builtin_model("minimal_weyl", delta=0.5, mu=4.0, eta=0.3),
        builtin_model("sin_chain"),
    ):
        text = model_to_toml(m)
        m2 = model_from_toml(text)
        assert model_to_toml(m2) == text
        assert model_hash(m2) == model_hash(m)
        k = np.full(m.d, 0.234)
        assert np.array_equal(bloch_fiber(m, k), bloch_fiber(m2, k))
        if m.chiral_symmetry is None:
            assert m2.chiral_symmetry is None
        else:
            assert np.array_equal(m.chiral_symmetry, m2.chiral_symmetry)


def test_toml_rejects_unknown_key():
    text = model_to_toml(builtin_model("sin_chain")) + "\nhopping_strength = 2.0\n"
    with pytest.raises(ModelError, match="hopping_strength"):
        model_from_toml(text)


def test_model_hash_distinguishes_parameters():
    h1 = model_hash(builtin_model("stacked_ssh", delta=0.6, mu=0.1))
    h2 = model_hash(builtin_model("stacked_ssh", delta=0.6, mu=0.2))
    assert h1 != h2
