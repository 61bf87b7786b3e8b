import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.special import j0

from wannierdot.coulomb import ScreenedKernel, neighbor_V, onsite_tensor, realspace_element
from wannierdot.device import COULOMB_CONST, DeviceConfig, NumericsConfig
from wannierdot.stages import Runner
from wannierdot.wannier import wannier_2d

KERNEL = ScreenedKernel(13.0, 30.0)
BARE = ScreenedKernel(13.0, math.inf)


def test_screening_limits():
    assert KERNEL.screening(0.0) == 1.0
    r = 1e4
    assert KERNEL.screening(r) == pytest.approx(2 * 30.0**2 / r**2, rel=1e-3)
    assert np.all(BARE.screening([1.0, 1e3]) == 1.0)


def test_kernel_at_one_period():
    assert KERNEL.value(100.0) == pytest.approx(0.158, abs=5e-4)
    assert BARE.value(100.0) == pytest.approx(COULOMB_CONST / 1300, rel=1e-12)


@settings(max_examples=10, deadline=None)
@given(st.floats(5.0, 300.0), st.floats(5.0, 80.0))
def test_fourier_transform_against_hankel_quadrature(r, d):
    # V(r) = (1/2pi) int q V(q) J0(q r) dq; the 1/r part is analytic, the image part decays like exp(-2 q d)
    k = ScreenedKernel(13.0, d)
    c = 2 * math.pi * k.prefactor
    image = quad(lambda q: (k.q_times_fourier(q) / c - 1.0) * j0(q * r), 0, 60.0 / d,
                 limit=5000, epsabs=1e-13, epsrel=1e-10)[0]
    value = k.prefactor * (1.0 / r + image)
    assert value == pytest.approx(float(k.value(r)), rel=1e-4)


def test_fourier_small_q_limit():
    assert float(KERNEL.fourier(0.0)) == pytest.approx(4 * math.pi * KERNEL.prefactor * 30.0)
    assert float(KERNEL.fourier(1e-6)) == pytest.approx(4 * math.pi * KERNEL.prefactor * 30.0, rel=1e-4)


@pytest.fixture(scope="module")
def tensor_b(runner_b):
    return runner_b.coulomb().tensor


def test_tensor_permutation_symmetry(tensor_b):
    u = tensor_b.values
    for perm in [(3, 1, 2, 0), (0, 2, 1, 3), (1, 0, 3, 2), (2, 3, 0, 1)]:
        assert np.allclose(u, u.transpose(perm), atol=1e-12)


def test_tensor_xy_invariance(tensor_b):
    swap = lambda o: (o[1], o[0])  # noqa: E731
    for a, b in [((1, 1), (1, 2)), ((1, 2), (2, 1)), ((1, 3), (2, 2))]:
        assert tensor_b.element(a, b, b, a) == pytest.approx(tensor_b.element(swap(a), swap(b), swap(b), swap(a)))


def test_tensor_small_elements_zeroed(tensor_b):
    mag = np.abs(tensor_b.values)
    assert np.all((mag == 0) | (mag >= 1e-6))


def test_direct_elements_positive(tensor_b):
    m = len(tensor_b.orbitals)
    for i in range(m):
        for j in range(m):
            assert tensor_b.values[i, j, j, i] > 0


@pytest.mark.parametrize("element", [
    ((1, 1), (1, 1), (1, 1), (1, 1)),
    ((1, 1), (1, 2), (1, 2), (1, 1)),
    ((1, 1), (1, 2), (1, 1), (1, 2)),
    ((1, 2), (2, 1), (1, 2), (2, 1)),
])
def test_momentum_matches_real_space(runner_b, tensor_b, element):
    w = runner_b.wannier()
    orbs = [wannier_2d(w[o[0] - 1], w[o[1] - 1]) for o in element]
    fine = realspace_element(*orbs, runner_b.kernel(), stride=1)
    coarse = realspace_element(*orbs, runner_b.kernel(), stride=2)
    assert tensor_b.element(*element) == pytest.approx(fine, rel=0.02)
    # the cell-averaged singular term leaves an O(h) error, removed by one Richardson step
    assert tensor_b.element(*element) == pytest.approx(2 * fine - coarse, rel=5e-3)


def test_neighbor_V_matches_real_space(runner_b):
    w = runner_b.wannier()
    o = wannier_2d(w[0], w[0])
    direct = realspace_element(o, o, o, o, runner_b.kernel(), stride=2, shift=(1, 0))
    v, _ = neighbor_V(o, runner_b.kernel(), 100.0, runner_b.num.q_max_nm_inv, 128, 96)
    assert v == pytest.approx(direct, rel=0.02)


def test_screened_not_above_bare(runner_b):
    w = runner_b.wannier()
    num = runner_b.num
    orbs1d = w[:3]
    labels = [(1, 1), (1, 2), (2, 1), (2, 2), (1, 3)]
    s = onsite_tensor(orbs1d, labels, runner_b.kernel(), num.q_max_nm_inv, 64, 48).values
    b = onsite_tensor(orbs1d, labels, runner_b.kernel(bare=True), num.q_max_nm_inv, 64, 48).values
    for i in range(len(labels)):
        for j in range(len(labels)):
            assert s[i, j, j, i] <= b[i, j, j, i]
    o = wannier_2d(w[0], w[0])
    vs, _ = neighbor_V(o, runner_b.kernel(), 100.0, num.q_max_nm_inv, 64, 48)
    vb, _ = neighbor_V(o, runner_b.kernel(bare=True), 100.0, num.q_max_nm_inv, 64, 48)
    assert vs < vb


def test_onsite_grows_with_depth(runner_b):
    w = runner_b.wannier()
    num = runner_b.num
    values = [onsite_tensor(w[:1], [(1, 1)], ScreenedKernel(13.0, d), num.q_max_nm_inv, 64, 48).values[0, 0, 0, 0]
              for d in (5.0, 10.0, 30.0, 100.0, math.inf)]
    assert all(a < b for a, b in zip(values, values[1:]))


def test_point_charge_limit_for_tight_orbitals():
    # deep wells: orbital width ~ 7 nm, so the neighbour term approaches the kernel at one period
    r = Runner(DeviceConfig(v0_mev=100.0), NumericsConfig(plane_wave_cutoff=24))
    w = r.wannier()
    o = wannier_2d(w[0], w[0])
    for kernel in (r.kernel(), r.kernel(bare=True)):
        v, _ = neighbor_V(o, kernel, 100.0, r.num.q_max_nm_inv, 128, 96)
        assert v == pytest.approx(float(kernel.value(100.0)), rel=0.02)
