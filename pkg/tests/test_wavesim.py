import numpy as np
import pytest

from sdpinn import wavesim
from sdpinn.wavesim import (
    NON_NEGATIVE,
    NON_POSITIVE,
    CoefficientField,
    GridSpec,
    Mask,
    add_noise,
    make_lowrank_field,
    sample_mask,
    sample_submask,
    simulate,
)

GRID30 = GridSpec(30, 30, 198)


# -- low-rank fields ---------------------------------------------------------

def test_constant_field_is_rank_one():
    f = make_lowrank_field(GRID30, 1, (4.0, 4.0), NON_NEGATIVE, seed=0)
    assert np.all(f.values == 4.0)
    s = np.linalg.svd(f.values, compute_uv=False)
    assert s[0] == pytest.approx(4.0 * np.sqrt(30 * 30))
    assert s[1] == pytest.approx(0.0, abs=1e-10)


def test_rank3_field_svd_criterion():
    f = make_lowrank_field(GRID30, 3, (1.0, 4.0), NON_NEGATIVE, seed=1)
    s = np.linalg.svd(f.values, compute_uv=False)
    assert s[3] < 1e-10 * s[0]
    assert s[2] > 1e-6 * s[0]


def test_rank2_range_bounds():
    f = make_lowrank_field(GRID30, 2, (0.0, 10.0), NON_NEGATIVE, seed=2)
    assert f.values.min() >= 0.0
    assert f.values.max() <= 10.0
    assert f.values.min() == pytest.approx(0.0, abs=1e-12)
    assert f.values.max() == pytest.approx(10.0, abs=1e-12)


@pytest.mark.parametrize("rank", [1, 2, 3, 5])
@pytest.mark.parametrize("seed", [0, 7, 23])
def test_exact_rank_for_many_draws(rank, seed):
    f = make_lowrank_field(GRID30, rank, (1.0, 4.0), NON_NEGATIVE, seed=seed)
    assert wavesim.matrix_rank_exact(f.values, rank)


def test_field_deterministic_per_seed():
    a = make_lowrank_field(GRID30, 3, (1.0, 4.0), NON_NEGATIVE, seed=9)
    b = make_lowrank_field(GRID30, 3, (1.0, 4.0), NON_NEGATIVE, seed=9)
    assert np.array_equal(a.values, b.values)


def test_infeasible_sign_range():
    with pytest.raises(ValueError):
        make_lowrank_field(GRID30, 2, (-1.0, 4.0), NON_NEGATIVE, seed=0)
    with pytest.raises(ValueError):
        make_lowrank_field(GRID30, 2, (-1.0, 4.0), NON_POSITIVE, seed=0)


# -- simulator ---------------------------------------------------------------

def _uniform(grid, value, sign=NON_NEGATIVE):
    return CoefficientField(np.full((grid.M1, grid.M2), float(value)), sign)


def test_zero_initial_field_stays_zero():
    grid = GridSpec(12, 12, 40)
    wave = simulate(_uniform(grid, 0.0), _uniform(grid, 2.0), grid, initial="zero")
    assert np.all(wave.data == 0.0)


def test_cfl_violation_reports_max_dt():
    grid = GridSpec(10, 10, 20, dx=0.01, dy=0.01)  # dt=0.01 far too large
    with pytest.raises(ValueError, match="max stable"):
        simulate(_uniform(grid, 0.0), _uniform(grid, 4.0), grid)


def test_negative_attenuation_rejected():
    grid = GridSpec(8, 8, 10)
    bad = CoefficientField(np.full((8, 8), -0.5))
    with pytest.raises(ValueError, match="non-negative"):
        simulate(bad, _uniform(grid, 1.0), grid)


def test_energy_conservation_without_damping():
    # Discrete leapfrog invariant for the mirror-boundary Laplacian:
    #   E = ||(U^{n+1}-U^n)/dt||_W^2 + c^2 a(U^{n+1}, U^n)
    # with boundary-halved weights W and the summation-by-parts gradient
    # form a(u, w).  Exactly conserved, so 1% drift is a wide margin.
    grid = GridSpec(30, 30, 198)
    c2 = 2.25
    wave = simulate(_uniform(grid, 0.0), _uniform(grid, c2), grid, seed=4)
    u = wave.data
    wx = np.ones(grid.M1)
    wx[0] = wx[-1] = 0.5
    wy = np.ones(grid.M2)
    wy[0] = wy[-1] = 0.5
    w2 = wx[:, None] * wy[None, :]

    def grad_form(a, b):
        sx = (np.diff(a, axis=0) * np.diff(b, axis=0) / grid.dx**2 * wy[None, :]).sum()
        sy = (np.diff(a, axis=1) * np.diff(b, axis=1) / grid.dy**2 * wx[:, None]).sum()
        return sx + sy

    def energy(k):
        v = (u[:, :, k + 1] - u[:, :, k]) / grid.dt
        return (w2 * v**2).sum() + c2 * grad_form(u[:, :, k + 1], u[:, :, k])

    e0 = energy(0)
    drift = max(abs(energy(k) - e0) for k in range(0, grid.T - 1, 14))
    assert drift <= 0.01 * abs(e0)


def test_uniform_damping_decays_amplitude():
    grid = GridSpec(20, 20, 160)
    wave = simulate(_uniform(grid, 5.0), _uniform(grid, 2.0), grid, seed=8)
    rms_mid = np.sqrt((wave.data[:, :, grid.T // 2] ** 2).mean())
    rms_end = np.sqrt((wave.data[:, :, -1] ** 2).mean())
    assert rms_end < rms_mid


def test_simulated_field_satisfies_discrete_equation():
    # interior-point centered-difference residual of the returned frames
    grid = GridSpec(20, 20, 120, dx=0.15, dy=0.15)
    alpha = make_lowrank_field(grid, 2, (0.0, 5.0), NON_NEGATIVE, seed=3)
    c2 = make_lowrank_field(grid, 3, (1.0, 4.0), NON_NEGATIVE, seed=4)
    wave = simulate(alpha, c2, grid, seed=5)
    u = wave.data
    utt = (u[:, :, 2:] - 2 * u[:, :, 1:-1] + u[:, :, :-2]) / grid.dt**2
    ut = (u[:, :, 2:] - u[:, :, :-2]) / (2 * grid.dt)
    lap = (
        (u[2:, 1:-1, :] - 2 * u[1:-1, 1:-1, :] + u[:-2, 1:-1, :]) / grid.dx**2
        + (u[1:-1, 2:, :] - 2 * u[1:-1, 1:-1, :] + u[1:-1, :-2, :]) / grid.dy**2
    )[:, :, 1:-1]
    resid = (
        utt[1:-1, 1:-1]
        + alpha.values[1:-1, 1:-1, None] * ut[1:-1, 1:-1]
        - c2.values[1:-1, 1:-1, None] * lap
    )
    assert np.sqrt((resid**2).mean()) <= 1e-2 * np.sqrt((utt[1:-1, 1:-1] ** 2).mean())


def test_simulation_deterministic():
    grid = GridSpec(10, 10, 30)
    a = simulate(_uniform(grid, 1.0), _uniform(grid, 2.0), grid, seed=11)
    b = simulate(_uniform(grid, 1.0), _uniform(grid, 2.0), grid, seed=11)
    assert np.array_equal(a.data, b.data)


# -- noise -------------------------------------------------------------------

def test_zero_noise_identity():
    grid = GridSpec(8, 8, 20)
    wave = simulate(_uniform(grid, 0.0), _uniform(grid, 1.0), grid, seed=1)
    noisy = add_noise(wave, 0.0, seed=5)
    assert np.array_equal(noisy.data, wave.data)


def test_noise_std_fraction():
    grid = GridSpec(30, 30, 198)
    wave = simulate(_uniform(grid, 0.0), _uniform(grid, 2.0), grid, seed=2)
    noisy = add_noise(wave, 10.0, seed=3)
    ratio = (noisy.data - wave.data).std() / wave.data.std()
    assert abs(ratio - 0.10) < 0.003


def test_noise_seeds_independent():
    grid = GridSpec(10, 10, 50)
    wave = simulate(_uniform(grid, 0.0), _uniform(grid, 2.0), grid, seed=2)
    n1 = add_noise(wave, 20.0, seed=1)
    n2 = add_noise(wave, 20.0, seed=2)
    assert not np.array_equal(n1.data, n2.data)
    avg_err = ((n1.data + n2.data) / 2 - wave.data).std()
    assert avg_err < (n1.data - wave.data).std()


# -- masks -------------------------------------------------------------------

def test_rbd_count_on_30x30():
    mask = sample_mask(GRID30, "rbd")
    assert len(mask) == 88


def test_diagonal_coverage():
    mask = sample_mask(GRID30, "diagonal")
    assert len(mask) == 30
    assert np.unique(mask.rows).size == 30
    assert np.unique(mask.cols).size == 30


def test_even_grid_30_covers_5_rows_6_cols():
    mask = sample_mask(GRID30, "even_grid", 30)
    assert len(mask) == 30
    assert np.unique(mask.rows).size == 5
    assert np.unique(mask.cols).size == 6


def test_full_and_boundary_masks():
    grid = GridSpec(12, 9, 5)
    assert len(sample_mask(grid, "full")) == 108
    b = sample_mask(grid, "boundary")
    assert len(b) == 2 * 12 + 2 * 9 - 4


def test_random_fraction_counts_and_determinism():
    m1 = sample_mask(GRID30, "random_fraction", 0.5, seed=4)
    m2 = sample_mask(GRID30, "random_fraction", 0.5, seed=4)
    assert len(m1) == 450
    assert np.array_equal(m1.rows, m2.rows) and np.array_equal(m1.cols, m2.cols)
    m3 = sample_mask(GRID30, "random_fraction", 30, seed=4)
    assert len(m3) == 30


def test_unknown_mask_kind():
    with pytest.raises(ValueError, match="unknown mask kind"):
        sample_mask(GRID30, "spiral")


def test_submask_and_complement():
    base = sample_mask(GRID30, "full")
    sub = sample_submask(base, 0.25, seed=1)
    assert len(sub) == 225
    comp = sub.complement()
    assert len(comp) == 900 - 225
    assert len(sub.intersect(comp)) == 0
    assert len(sub.union(comp)) == 900


def test_mask_out_of_bounds():
    with pytest.raises(ValueError):
        Mask.from_indices((5, 5), [5], [0])
