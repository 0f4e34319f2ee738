import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deco.errors import DampingVanishes, IncompatibleGrids, InvalidParameters, NonHermitianInput
from deco.grids import FrequencyGrid, TimeGrid
from deco.ordering import (OrderResult, Tolerances, Verdict, check_kernel_positive,
                           compare_environments, fdr_fit, lutz_compare, verdict_from_extremes)
from deco.spectral import (Family, SampledKernel, StationaryKernel, ThermalReservoirSpec,
                           composite_correlation, reservoir_kernel, total_damping)

GRID = FrequencyGrid.symmetric(400.0, 801)


def kern(fam, g0, lam, temp):
    return reservoir_kernel(ThermalReservoirSpec(fam, g0, lam, temp))


# --- verdict rules ---------------------------------------------------------

@pytest.mark.parametrize("lo, hi, verdict", [
    (0.0, 0.0, Verdict.EQUIVALENT),
    (-1e-13, 1e-13, Verdict.EQUIVALENT),
    (0.0, 0.5, Verdict.STRICTLY_GREATER),
    (-1e-10, 0.5, Verdict.STRICTLY_GREATER),
    (0.0, 1e-7, Verdict.EQUIVALENT),
    (-0.5, 0.0, Verdict.STRICTLY_LESS),
    (-0.5, 0.5, Verdict.INCOMPARABLE),
])
def test_verdict_rules(lo, hi, verdict):
    assert verdict_from_extremes(lo, hi, 1.0, Tolerances()) is verdict


@given(st.floats(-1, 1), st.floats(-1, 1))
def test_verdict_antisymmetry_of_rules(a, b):
    lo, hi = min(a, b), max(a, b)
    fwd = verdict_from_extremes(lo, hi, 1.0, Tolerances())
    bwd = verdict_from_extremes(-hi, -lo, 1.0, Tolerances())
    flip = {Verdict.STRICTLY_GREATER: Verdict.STRICTLY_LESS,
            Verdict.STRICTLY_LESS: Verdict.STRICTLY_GREATER}
    assert bwd is flip.get(fwd, fwd)


# --- positivity ------------------------------------------------------------

def test_thermal_kernel_is_positive():
    rep = check_kernel_positive(kern(Family.DRUDE, 0.5, 3.0, 1.0), GRID)
    assert rep.is_psd and rep.min_eigenvalue >= 0
    assert rep.grid is GRID


def test_difference_of_unequal_kernels_is_not_positive():
    a = kern(Family.DRUDE, 0.5, 3.0, 1.0)
    rep = check_kernel_positive(a - a * 2.0, GRID)
    assert not rep.is_psd


def test_sampled_kernel_positivity_report():
    grid = TimeGrid(0.0, 1.0, 5)
    vals = np.zeros((5, 5, 1, 1), dtype=complex)
    vals[:, :, 0, 0] = 1.0
    rep = check_kernel_positive(SampledKernel(grid, vals))
    assert rep.is_psd and rep.max_eigenvalue == pytest.approx(5.0)
    vals[2, 2, 0, 0] = -10.0
    rep = check_kernel_positive(SampledKernel(grid, vals))
    assert not rep.is_psd and rep.worst_point == [0.5, 0.5]


def test_non_hermitian_kernel_rejected():
    bad = StationaryKernel(2, density=lambda om: np.broadcast_to(
        np.array([[1.0, 1.0], [0.0, 1.0]], dtype=complex), (len(om), 2, 2)))
    with pytest.raises(NonHermitianInput):
        check_kernel_positive(bad, GRID)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(-1.0, 1.0))
def test_report_invariant(a, b):
    m = np.array([[a, b], [b, a]], dtype=complex)
    k = StationaryKernel(2, lines=((0.0, m),))
    rep = check_kernel_positive(k, FrequencyGrid.symmetric(1.0, 3))
    assert rep.is_psd == (rep.min_eigenvalue >= -rep.tol_rel * max(abs(rep.max_eigenvalue), rep.floor))


# --- comparisons -----------------------------------------------------------

def test_strong_hot_beats_weak_cold():
    res = compare_environments(kern(Family.DRUDE, 1.0, 10.0, 4.0), kern(Family.DRUDE, 0.5, 5.0, 1.0), GRID)
    assert res.verdict is Verdict.STRICTLY_GREATER
    assert res.min_eig_forward >= 0 > res.min_eig_backward


def test_weak_hot_and_strong_cold_are_incomparable():
    res = compare_environments(kern(Family.DRUDE, 0.2, 5.0, 8.0), kern(Family.DRUDE, 1.0, 10.0, 0.5), GRID)
    assert res.verdict is Verdict.INCOMPARABLE
    assert res.min_eig_forward < 0 and res.min_eig_backward < 0


def test_identical_kernels_are_equivalent():
    a = kern(Family.EXPONENTIAL, 0.4, 2.0, 1.0)
    assert compare_environments(a, a, GRID).verdict is Verdict.EQUIVALENT


def test_order_result_fields():
    d = compare_environments(kern(Family.DRUDE, 1, 1, 1), kern(Family.DRUDE, 1, 1, 1), GRID).to_dict()
    assert list(d) == ["verdict", "min_eig_forward", "min_eig_backward", "worst_point", "tolerances"]


def test_compare_needs_matching_channels():
    a = kern(Family.DRUDE, 1, 1, 1)
    with pytest.raises(IncompatibleGrids):
        compare_environments(a, composite_correlation([a, a], [[0], [1]]), GRID)


params = st.tuples(st.sampled_from(list(Family)), st.floats(0.1, 2.0), st.floats(0.5, 8.0),
                   st.floats(0.0, 6.0))


@settings(max_examples=40, deadline=None)
@given(params, params)
def test_compare_antisymmetric(pa, pb):
    a, b = kern(*pa), kern(*pb)
    ab = compare_environments(a, b, GRID)
    ba = compare_environments(b, a, GRID)
    flip = {Verdict.STRICTLY_GREATER: Verdict.STRICTLY_LESS,
            Verdict.STRICTLY_LESS: Verdict.STRICTLY_GREATER}
    assert ba.verdict is flip.get(ab.verdict, ab.verdict)
    assert ab.min_eig_forward == pytest.approx(ba.min_eig_backward)


@settings(max_examples=30, deadline=None)
@given(params, params, st.floats(0.1, 10.0))
def test_compare_scale_invariant(pa, pb, c):
    a, b = kern(*pa), kern(*pb)
    assert compare_environments(a, b, GRID).verdict is compare_environments(a * c, b * c, GRID).verdict


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(list(Family)), st.lists(st.floats(0.1, 5.0), min_size=3, max_size=3, unique=True),
       st.lists(st.floats(0.0, 5.0), min_size=3, max_size=3, unique=True))
def test_strict_order_is_transitive(fam, strengths, temps):
    # chains with both strength and temperature increasing
    s, t = sorted(strengths), sorted(temps)
    ks = [kern(fam, s[i], 1.0 + s[i], t[i]) for i in range(3)]
    v01 = compare_environments(ks[1], ks[0], GRID).verdict
    v12 = compare_environments(ks[2], ks[1], GRID).verdict
    v02 = compare_environments(ks[2], ks[0], GRID).verdict
    if v01 is Verdict.STRICTLY_GREATER and v12 is Verdict.STRICTLY_GREATER:
        assert v02 is Verdict.STRICTLY_GREATER


# --- two-reservoir pairing ---------------------------------------------------

@pytest.mark.parametrize("family", list(Family))
def test_lutz_pairing(family):
    assert lutz_compare(1.0, 10.0, 2.0, 5.0, 1.0, family).verdict is Verdict.STRICTLY_GREATER
    assert lutz_compare(1.0, 10.0, 2.0, 3.0, 3.0, family).verdict is Verdict.EQUIVALENT
    assert lutz_compare(1.0, 4.0, 4.0, 5.0, 1.0, family).verdict is Verdict.EQUIVALENT


def test_lutz_rejects_swapped_parameters():
    with pytest.raises(InvalidParameters):
        lutz_compare(1.0, 2.0, 10.0, 5.0, 1.0)
    with pytest.raises(InvalidParameters):
        lutz_compare(1.0, 10.0, 2.0, 1.0, 5.0)


# --- effective temperature ----------------------------------------------------

@pytest.mark.parametrize("temp", [0.0, 0.3, 2.0, 8.0])
def test_fdr_fit_single_reservoir(temp):
    spec = ThermalReservoirSpec(Family.DRUDE, 0.3, 5.0, temp)
    t_star, resid = fdr_fit(reservoir_kernel(spec), total_damping([spec]), FrequencyGrid.symmetric(20, 801))
    assert resid < 1e-6
    assert t_star == pytest.approx(temp, rel=1e-6, abs=1e-12)


def test_fdr_fit_two_temperatures_fails():
    a = ThermalReservoirSpec(Family.DRUDE, 0.1, 10.0, 8.0)
    b = ThermalReservoirSpec(Family.DRUDE, 0.2, 5.0, 0.5)
    k = composite_correlation([reservoir_kernel(a), reservoir_kernel(b)], [[0], [0]])
    _, resid = fdr_fit(k, total_damping([a, b]), FrequencyGrid.symmetric(20, 801))
    assert resid > 0.05


def test_fdr_fit_brute_force_oracle():
    # independent scan over T confirms the golden-section optimum
    from deco.spectral import fdr_kernel
    a = ThermalReservoirSpec(Family.EXPONENTIAL, 0.1, 10.0, 8.0)
    b = ThermalReservoirSpec(Family.EXPONENTIAL, 0.2, 5.0, 0.5)
    k = composite_correlation([reservoir_kernel(a), reservoir_kernel(b)], [[0], [0]])
    grid = FrequencyGrid.symmetric(20, 401)
    gam = total_damping([a, b])
    t_star, resid = fdr_fit(k, gam, grid)
    om = grid.points
    kappa = k.freq_eval(om)[:, 0, 0].real / gam(om) + om
    scan = min(np.max(np.abs(kappa - fdr_kernel(om, t))) for t in np.linspace(0.01, 20, 20000))
    assert resid * np.max(np.abs(kappa)) <= scan + 1e-9


def test_fdr_fit_vanishing_damping():
    spec = ThermalReservoirSpec(Family.EXPONENTIAL, 1.0, 0.001, 1.0)
    with pytest.raises(DampingVanishes):
        fdr_fit(reservoir_kernel(spec), total_damping([spec]), FrequencyGrid.symmetric(20, 101))


def test_documented_positivity_examples():
    from deco.spectral import white_noise_kernel, sample_on_grid
    k = kern(Family.DRUDE, 1.0, 5.0, 2.0)
    grid = FrequencyGrid.symmetric(100.0, 200)
    assert check_kernel_positive(k, grid).is_psd
    neg = check_kernel_positive(k * -1.0, grid)
    assert not neg.is_psd and neg.min_eigenvalue < 0
    tg = TimeGrid(0.0, 1.0, 11)
    vals = sample_on_grid(white_noise_kernel(2.0), tg, np.full(11, tg.step))
    rep = check_kernel_positive(SampledKernel(tg, vals))
    assert rep.is_psd and rep.min_eigenvalue == pytest.approx(2.0 / tg.step)


def test_documented_comparisons():
    assert compare_environments(kern(Family.DRUDE, 1, 5, 4), kern(Family.DRUDE, 0.5, 5, 1),
                                GRID).verdict is Verdict.STRICTLY_GREATER
    wide = FrequencyGrid.symmetric(1000.0, 2001)
    res = compare_environments(kern(Family.DRUDE, 0.1, 50, 10), kern(Family.DRUDE, 1.0, 50, 0.1), wide)
    assert res.verdict is Verdict.INCOMPARABLE
