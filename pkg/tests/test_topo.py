"""BZ invariant and Chern-integral tests.

Oracles: the closed forms 1/2 (-1)^((d-1)/2) sgn(b) sgn(m) (Weyl) and
1/2 (-1)^(d/2+1) sgn(b) sgn(m) (Dirac) for the flat-space integrals; the
slope-matrix charge c* = (-1)^((d+1)/2) sgn(det B) for local charges; the
frozen even-localizer half-signature (+1 on p_ip at mu_hat=-2) for the
plaquette orientation; and sgn(Y) charge bookkeeping for mass jumps.
Quadrature error ladders quoted below were frozen from standalone runs
of the same integrands.
"""

import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from speclocal import (
    ChernResult,
    GaplessSampleError,
    LocalizerConfig,
    QuadratureError,
    assemble,
    builtin_model,
    charge_of,
    chern_even_bz,
    chern_even_bz_riemann,
    chern_integral_dirac,
    chern_integral_weyl,
    chern_odd_bz,
    chiral_block_sampler,
    dirac_integral_closed_form,
    find_fermi_points,
    flat_band_sampler,
    half_signature_chern,
    invariant_report_csv,
    linearize_at,
    local_charge,
    mass_term_chern_jump,
    nn_sum,
    weyl_integral_closed_form,
)
from speclocal.clifford import SlopeVector
from speclocal.lattice_model import bloch_fiber
from speclocal.topo import _dirac_quad, _weyl_quad

s1 = np.array([[0, 1], [1, 0]], dtype=complex)
s2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
s3 = np.diag([1.0, -1.0]).astype(complex)


# ------------------------------------------------------ flat-space integrals


@pytest.mark.parametrize(
    "b,m,expected",
    [
        ((1.0,), 1.0, 0.5),
        ((-2.0,), 0.5, -0.5),
        ((1.0, 1.0, 1.0), -1.0, 0.5),
        ((1.0, 1.0, -2.0), 1.0, 0.5),
    ],
)
def test_weyl_integral_examples(b, m, expected):
    assert weyl_integral_closed_form(b, m) == expected
    v = chern_integral_weyl(b, m)
    assert abs(v - expected) < 1e-2 * abs(expected)


def test_weyl_integral_all_sign_patterns():
    import itertools

    for pat in itertools.product((1.0, -1.0), repeat=3):
        v = chern_integral_weyl(pat, 1.0, quadrature=16)
        assert abs(v - weyl_integral_closed_form(pat, 1.0)) < 2e-2


def test_weyl_quadrature_monotone_refinement():
    # frozen ladder: 8.49e-3, 3.87e-3, 2.20e-3, 9.91e-4 at n=16,24,32,48
    bv = SlopeVector((1.0, 1.0, 1.0))
    errs = [abs(_weyl_quad(bv, 1.0, n) - (-0.5)) for n in (16, 24, 32, 48)]
    assert errs[0] < 1e-2
    assert all(a > b for a, b in zip(errs, errs[1:]))


@pytest.mark.parametrize(
    "b,m,expected",
    [
        ((1.0, 1.0), 1.0, 0.5),
        ((1.0, -1.0), 1.0, -0.5),
        ((2.0, 3.0), -0.7, -0.5),
    ],
)
def test_dirac_integral_examples(b, m, expected):
    assert dirac_integral_closed_form(b, m) == expected
    v = chern_integral_dirac(b, m)
    assert abs(v - expected) < 1e-2 * abs(expected)


def test_dirac_quadrature_monotone_refinement():
    # frozen ladder: 5.05e-3, 1.33e-3, 3.40e-4, 1.52e-4 at n=12,24,48,72
    bv = SlopeVector((1.0, 1.0))
    errs = [abs(_dirac_quad(bv, 1.0, n) - 0.5) for n in (12, 24, 48, 72)]
    assert all(a > b for a, b in zip(errs, errs[1:]))


def test_dirac_integral_antisymmetric_in_m():
    for b in [(1.0, 1.0), (1.0, -2.0)]:
        vp = chern_integral_dirac(b, 0.8, quadrature=24)
        vm = chern_integral_dirac(b, -0.8, quadrature=24)
        # symmetric quadrature nodes make the mirror exact in floats
        assert abs(vp + vm) < 1e-12


def test_integral_argument_errors():
    with pytest.raises(ValueError):
        chern_integral_weyl((1.0,), 0.0)
    with pytest.raises(ValueError):
        chern_integral_dirac((1.0, 1.0), 0.0)
    with pytest.raises(ValueError):
        chern_integral_weyl((1.0, 0.0, 1.0), 1.0)  # zero slope entry
    with pytest.raises(NotImplementedError):
        chern_integral_weyl((1.0, 1.0), 1.0)
    with pytest.raises(NotImplementedError):
        chern_integral_dirac((1.0, 1.0, 1.0), 1.0)


def test_integral_refinement_gate():
    with pytest.raises(QuadratureError):
        chern_integral_weyl((1.0, 1.0, 1.0), 1.0, quadrature=16, refine_tol=1e-9)


# ------------------------------------------------------------- even-d Chern


def test_pip_plaquette_grid_doubling():
    model = builtin_model("p_ip", delta=1.0, mu_hat=-2.0)
    for grid in (24, 48):
        r = chern_even_bz(model, grid=grid)
        assert r.value_int == 1
        assert r.deviation < 1e-10  # plaquette sum is integer-exact
        assert r.accepted
        assert r.grid == (grid, grid)


def test_pip_trivial_phase():
    r = chern_even_bz(builtin_model("p_ip", delta=1.0, mu_hat=-6.0), grid=24)
    assert r.value_int == 0 and r.accepted


def test_pip_chern_matches_frozen_half_signature():
    # the even localizer at kappa=0.15, rho=12 has half-signature +1 on
    # this model (frozen in the spectra tests); the plaquette orientation
    # must agree with it
    r = chern_even_bz(builtin_model("p_ip", delta=1.0, mu_hat=-2.0), grid=24)
    assert r.value_int == 1


def test_riemann_cross_check():
    model = builtin_model("p_ip", delta=1.0, mu_hat=-2.0)
    r = chern_even_bz_riemann(model, grid=48)
    assert r.value_int == 1
    assert abs(r.value_float - 1.0) < 0.02  # frozen: 0.99247 at 48^2
    assert r.accepted


def test_riemann_coarse_grid_is_flagged():
    r = chern_even_bz_riemann(
        builtin_model("p_ip", delta=1.0, mu_hat=-2.0), grid=8
    )
    assert not r.accepted
    assert r.deviation > 0.05


def test_chern_even_constant_sampler():
    r = chern_even_bz(lambda k: s3, grid=12)
    assert r.value_int == 0 and r.deviation < 1e-12


def test_chern_even_gapless_sample():
    gapless = flat_band_sampler(
        lambda k: np.sin(2 * np.pi * k[0]) * s3 + 1e-30 * s1
    )
    with pytest.raises(GaplessSampleError):
        chern_even_bz(gapless, grid=12)
    # non-involutive samplers are rejected too
    with pytest.raises(GaplessSampleError):
        chern_even_bz(lambda k: 0.5 * s3, grid=6)


def test_chern_even_d_guard():
    with pytest.raises(NotImplementedError):
        chern_even_bz(lambda k: s3, d=4)


# -------------------------------------------------------------- odd-d Chern


def test_winding_unit_and_constant():
    r = chern_odd_bz(lambda k: np.exp(2j * np.pi * k[0]), d=1)
    assert r.value_int == 1 and r.deviation < 1e-12
    r0 = chern_odd_bz(lambda k: 2.0 + 1.0j, d=1)
    assert r0.value_int == 0 and r0.deviation < 1e-12


@settings(max_examples=12, deadline=None)
@given(st.integers(min_value=-3, max_value=3))
def test_winding_counts_phase_degree(w):
    r = chern_odd_bz(lambda k: np.exp(2j * np.pi * w * k[0]) + 0.0j, d=1, grid=128)
    assert r.value_int == w and r.deviation < 1e-9


@pytest.mark.parametrize("mu,expected", [(0.5, 1), (1.5, 0)])
def test_ssh_block_winding(mu, expected):
    model = builtin_model("ssh_chain", mu=mu)
    r = chern_odd_bz(chiral_block_sampler(model), d=1)
    assert r.value_int == expected and r.deviation < 1e-9


def test_ssh_half_signature_is_minus_winding():
    # the odd localizer half-signature and the chiral block winding are
    # opposite on SSH at mu=0.5: half-signature -1, winding +1
    model = builtin_model("ssh_chain", mu=0.5)
    w = chern_odd_bz(chiral_block_sampler(model), d=1).value_int
    L = assemble(model, LocalizerConfig(kappa=0.1, rho=30, flavor="odd"))
    assert half_signature_chern(L) == -w == -1


def test_winding_singular_sample():
    with pytest.raises(GaplessSampleError):
        chern_odd_bz(lambda k: np.sin(2 * np.pi * k[0]) + 0.0j, d=1)


def test_odd_chern_d3_effective_unitary():
    # polar(H + i m Y) for minimal_weyl with Y = sin(2 pi k3) carries
    # winding -1 at m=+1 (frozen: -0.9570 at 32^3, deviation 0.043)
    model = builtin_model("minimal_weyl", delta=0.5, mu=4.0)
    eye = np.eye(2)

    def A(k):
        return bloch_fiber(model, k) + 1j * np.sin(2 * np.pi * k[2]) * eye

    r = chern_odd_bz(A, d=3)
    assert r.value_int == -1
    assert r.accepted
    assert r.grid == (32, 32, 32)


def test_odd_chern_d_guard():
    with pytest.raises(NotImplementedError):
        chern_odd_bz(lambda k: np.eye(2) + 0j, d=2)


# ------------------------------------------------------------- local charge


def analytic_weyl(sign3):
    return lambda k: k[0] * s1 + k[1] * s2 + sign3 * k[2] * s3


@pytest.mark.parametrize("sign3,expected", [(1.0, 1), (-1.0, -1)])
def test_local_charge_analytic_weyl(sign3, expected):
    assert local_charge(analytic_weyl(sign3), (0.0, 0.0, 0.0), eps=0.05) == expected


@pytest.mark.parametrize("eps", [0.02, 0.05, 0.08])
def test_local_charge_eps_independent(eps):
    assert local_charge(analytic_weyl(1.0), (0.0, 0.0, 0.0), eps=eps) == 1


def test_local_charge_sin_chain():
    model = builtin_model("sin_chain")
    assert local_charge(model, 0.0) == -1
    assert local_charge(model, 0.5) == 1
    # agrees with the slope formula at both touchings
    for k in (0.0, 0.5):
        rep = linearize_at(model, np.array([k]))
        assert local_charge(model, k) == charge_of(rep, 1)


def test_local_charge_minimal_weyl_triangle():
    # cube flux == slope-matrix charge at both Weyl points; their sum
    # vanishes; and the same sign structure is what the continuum kernel
    # J-signature with the fitted B produces (spectra tests)
    model = builtin_model("minimal_weyl", delta=0.5, mu=4.0)
    pts = find_fermi_points(model)
    assert [tuple(np.round(p, 6)) for p in pts] == [(0.0, 0.0, 0.25), (0.0, 0.0, 0.75)]
    charges = []
    for p in pts:
        c = local_charge(model, p)
        assert c == charge_of(linearize_at(model, p), 3)
        charges.append(c)
    assert charges == [1, -1]
    assert nn_sum(charges) == 0


def test_local_charge_proximity_error():
    model = builtin_model("minimal_weyl", delta=0.5, mu=4.0)
    with pytest.raises(ValueError, match="crowds"):
        local_charge(model, (0.0, 0.0, 0.25), eps=0.3)


def test_local_charge_dimension_guards():
    with pytest.raises(ValueError):
        local_charge(builtin_model("p_ip", delta=1.0, mu_hat=-2.0), (0.0, 0.0))
    with pytest.raises(ValueError):
        local_charge(analytic_weyl(1.0), (0.0, 0.0, 0.0, 0.0))


def test_stacked_ssh_per_fiber_charges():
    # chiral 1D fibers have symmetric spectra, so every per-fiber
    # signature jump vanishes individually; the sum trivially does
    model = builtin_model("stacked_ssh", delta=0.6, mu=0.1)
    pts = find_fermi_points(model)
    assert len(pts) == 4
    charges = []
    for p in pts:
        k2 = float(p[1])
        fiber = lambda k1, k2=k2: bloch_fiber(model, (float(np.atleast_1d(k1)[0]), k2))
        charges.append(local_charge(fiber, (float(p[0]),), eps=0.02))
    assert charges == [0, 0, 0, 0]
    assert nn_sum(charges) == 0


def test_nn_sum_rejects_non_integers():
    assert nn_sum([1, -1, 2, -2]) == 0
    with pytest.raises(ValueError):
        nn_sum([0.5, -0.5])


# --------------------------------------------------------------- mass jumps


def test_mass_jump_sin_chain_uniform():
    assert mass_term_chern_jump(builtin_model("sin_chain"), 1.0, 0.1) == 0


def test_mass_jump_sin_chain_cos():
    model = builtin_model("sin_chain")
    jump = mass_term_chern_jump(model, lambda k: np.cos(2 * np.pi * k[0]), 0.1)
    assert jump == -2


def test_mass_jump_gapped_model():
    assert mass_term_chern_jump(builtin_model("ssh_chain", mu=0.5), 1.0, 0.1) == 0


def test_mass_jump_minimal_weyl_d3():
    model = builtin_model("minimal_weyl", delta=0.5, mu=4.0)
    jump = mass_term_chern_jump(model, lambda k: np.sin(2 * np.pi * k[2]), 1.0)
    assert jump == -2


def test_mass_jump_errors():
    model = builtin_model("sin_chain")
    with pytest.raises(ValueError):
        mass_term_chern_jump(model, 1.0, 0.0)
    # Y = sin vanishes exactly where H does: the sampled family is
    # singular at the Fermi point, i.e. m_c = 0 for this profile
    with pytest.raises(GaplessSampleError, match="m_c"):
        mass_term_chern_jump(model, lambda k: np.sin(2 * np.pi * k[0]), 0.1)
    with pytest.raises(TypeError):
        mass_term_chern_jump(lambda k: s3, 1.0, 0.1)
    with pytest.raises(NotImplementedError):
        mass_term_chern_jump(builtin_model("p_ip", delta=1.0, mu_hat=-2.0), 1.0, 0.1)


# ----------------------------------------------------------------- samplers


def test_flat_band_sampler_involution():
    Q = flat_band_sampler(builtin_model("p_ip", delta=1.0, mu_hat=-2.0))
    q = Q((0.13, 0.31))
    assert np.allclose(q, q.conj().T)
    assert np.allclose(q @ q, np.eye(2))


def test_chiral_block_sampler_validation():
    with pytest.raises(ValueError):
        chiral_block_sampler(builtin_model("sin_chain"))
    with pytest.raises(ValueError):
        chiral_block_sampler(builtin_model("p_ip", delta=1.0, mu_hat=-2.0))
    A = chiral_block_sampler(builtin_model("ssh_chain", mu=0.3))
    # A_k = e^{2 pi i k} - mu in the lower-left block
    assert np.allclose(A((0.0,)), np.array([[0.7]]))


# ---------------------------------------------------------------------- csv


def test_invariant_report_csv(tmp_path):
    path = tmp_path / "invariants.csv"
    r = chern_even_bz(builtin_model("p_ip", delta=1.0, mu_hat=-2.0), grid=24)
    invariant_report_csv(
        path,
        [
            ("chern_even", "p_ip(delta=1,mu_hat=-2) grid=24", r.value_float,
             r.value_int, r.deviation),
            ("nn_sum", "minimal_weyl(mu=4)", 0.0, 0, 0.0),
        ],
    )
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["name", "parameters", "raw", "rounded", "deviation"]
    assert rows[1][0] == "chern_even" and rows[1][3] == "1"
    assert len(rows) == 3


def test_chern_result_is_frozen_dataclass():
    r = ChernResult(1.0, 1, 0.0, (4,), True)
    with pytest.raises(Exception):
        r.value_int = 2
