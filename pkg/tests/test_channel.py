import numpy as np
import pytest

from ssafsim.channel import (
    ChannelRealization,
    FadingRealization,
    ProtocolConfig,
    build_H,
    cascade_coefficients,
    draw_fading,
    ebn0_to_n0,
    effective_relay_index,
    noise_covariance,
    realize,
    relay_gains,
    row_fading_sets,
    simulate_frame,
    whiten,
)

from oracles import theta_by_expansion


def _fixed_fading(beta, seed=0, size=()):
    rng = np.random.default_rng(seed)
    cfg = ProtocolConfig(beta=beta)
    return draw_fading(cfg, rng, size)


def _slot_links(fading, beta, m):
    idx = [effective_relay_index(i, beta) - 1 for i in range(1, m + 1)]
    h_sr = np.asarray(fading.h_sr)[idx]
    h_rd = np.asarray(fading.h_rd)[idx]
    h_rr = np.array([fading.h_rr[idx[i], idx[i + 1]] for i in range(m - 1)])
    return h_sr, h_rd, h_rr


def test_relay_index_examples():
    assert effective_relay_index(1, 2) == 1
    assert effective_relay_index(3, 2) == 1 and effective_relay_index(4, 2) == 2
    assert all(effective_relay_index(i, 1) == 1 for i in range(1, 9))
    with pytest.raises(ValueError):
        effective_relay_index(0, 2)


def test_config_defaults_and_validation():
    cfg = ProtocolConfig(beta=2)
    assert cfg.energies == (1.0, 0.5, 0.5) and cfg.m_slots == 3
    assert ProtocolConfig(beta=3, alpha=2).m_slots == 6
    for bad in (dict(beta=0), dict(beta=1, alpha=1), dict(beta=2, energies=(1, 1)), dict(beta=2, energies=(1, 2, 0))):
        with pytest.raises(ValueError):
            ProtocolConfig(**bad)
    with pytest.raises(ValueError):
        ProtocolConfig(beta=2, relay_mode="magic")


def test_gain_single_relay_example():
    cfg = ProtocolConfig(beta=1, energies=(1.0, 0.5), n0=0.5)
    fading = FadingRealization(np.array(1.0 + 0j), np.array([1.0 + 0j]), np.array([1.0 + 0j]), np.ones((1, 1)))
    assert relay_gains(fading, cfg)[0] == pytest.approx(1 / np.sqrt(2))


def test_gain_ideal_noiseless():
    cfg = ProtocolConfig(beta=1, energies=(1.0, 0.5), n0=0.0, relay_mode="ideal")
    fading = draw_fading(cfg, np.random.default_rng(0))
    assert relay_gains(fading, cfg)[0] == pytest.approx(1.0)


def test_gain_rejects_zero_power():
    cfg = ProtocolConfig(beta=1, energies=(0.0, 0.5), n0=0.0, relay_mode="ideal")
    fading = draw_fading(cfg, np.random.default_rng(0))
    with pytest.raises(ValueError):
        relay_gains(fading, cfg)


def test_h_two_slot_example():
    cfg = ProtocolConfig(beta=1, energies=(1.0, 0.5), n0=0.3)
    f = _fixed_fading(1)
    g = relay_gains(f, cfg)
    h = build_H(f, g, cfg)
    e1, e2 = cfg.energies
    want = np.array(
        [
            [np.sqrt(e1) * f.h_sd, np.sqrt(e1 * (1 - e2)) * g[0] * f.h_sr[0] * f.h_rd[0]],
            [0, np.sqrt(e2) * f.h_sd],
        ]
    )
    np.testing.assert_allclose(h, want, atol=1e-14)


def test_h_three_slot_corner():
    cfg = ProtocolConfig(beta=2, n0=0.2)
    f = _fixed_fading(2, seed=4)
    g = relay_gains(f, cfg)
    h = build_H(f, g, cfg)
    e = cfg.energies
    want = np.sqrt(e[0] * (1 - e[1]) * (1 - e[2])) * g[0] * g[1] * f.h_sr[0] * f.h_rr[0, 1] * f.h_rd[1]
    assert h[0, 2] == pytest.approx(want, abs=1e-14)
    assert np.all(np.tril(h, -1) == 0)


def test_h_matches_expansion_for_long_frames():
    for beta, alpha in [(2, 0), (3, 0), (2, 2), (3, 2)]:
        cfg = ProtocolConfig(beta=beta, alpha=alpha, n0=0.1)
        m = cfg.m_slots
        f = _fixed_fading(beta, seed=beta + alpha)
        g = relay_gains(f, cfg)
        h = build_H(f, g, cfg)
        h_sr, h_rd, h_rr = _slot_links(f, beta, m)
        e = np.array(cfg.energies)
        theta = theta_by_expansion(h_rd, h_rr, g, e)
        np.testing.assert_allclose(noise_covariance(f, g, cfg), theta, atol=1e-12)
        # Off-diagonal row i of H is the source-relay copy pushed through the relay cascade.
        upper = np.triu_indices(m, 1)
        c = cascade_coefficients(f, g, cfg)
        np.testing.assert_allclose(h[upper], (np.sqrt(e)[:, None] * h_sr[:, None] * c)[upper], atol=1e-14)


def test_no_cooperation_is_diagonal():
    cfg = ProtocolConfig(beta=2, relay_mode="off", n0=0.1)
    real = realize(cfg, np.random.default_rng(0))
    np.testing.assert_allclose(real.H, np.diag(np.sqrt(cfg.energies) * real.fading.h_sd))
    np.testing.assert_allclose(real.theta, np.eye(3))


def test_theta_two_slot_example():
    cfg = ProtocolConfig(beta=1, energies=(1.0, 0.5), n0=0.25)
    f = _fixed_fading(1, seed=2)
    g = relay_gains(f, cfg)
    theta = noise_covariance(f, g, cfg)
    want = np.diag([1.0, 1 + (1 - 0.5) * g[0] ** 2 * abs(f.h_rd[0]) ** 2])
    np.testing.assert_allclose(theta, want, atol=1e-14)


def test_theta_hermitian_pd_batch():
    cfg = ProtocolConfig(beta=3, alpha=1, n0=0.05)
    real = realize(cfg, np.random.default_rng(1), size=50)
    th = real.theta
    np.testing.assert_allclose(th, np.conj(np.swapaxes(th, -1, -2)), atol=1e-14)
    assert np.all(np.linalg.eigvalsh(th) > 0)
    np.testing.assert_allclose(th[..., 0, 0], 1.0)


def test_whiten_examples():
    np.testing.assert_allclose(whiten(np.eye(3)), np.eye(3))
    np.testing.assert_allclose(whiten(np.diag([1.0, 4.0])), np.diag([1.0, 0.5]))
    with pytest.raises(ValueError):
        whiten(np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_whiten_factorisation():
    cfg = ProtocolConfig(beta=2, n0=0.1)
    real = realize(cfg, np.random.default_rng(5), size=20)
    psi = np.linalg.inv(real.psi_inv)
    recon = np.conj(np.swapaxes(psi, -1, -2)) @ psi
    rel = np.linalg.norm(recon - real.theta, axis=(-2, -1)) / np.linalg.norm(real.theta, axis=(-2, -1))
    assert rel.max() < 1e-10
    # Psi is upper triangular.
    assert np.allclose(np.tril(psi, -1), 0)


def test_noiseless_identity_path():
    cfg = ProtocolConfig(beta=1, energies=(1.0, 1.0), n0=0.0, relay_mode="off")
    fading = FadingRealization(np.array(1.0 + 0j), np.ones(1, complex), np.ones(1, complex), np.ones((1, 1), complex))
    real = ChannelRealization.from_fading(cfg, fading)
    z = np.array([[1 + 1j, -1 + 0.5j]])
    np.testing.assert_allclose(simulate_frame(z, None, real, np.random.default_rng(0)), z)


def test_simulate_matches_matrix_model():
    cfg = ProtocolConfig(beta=3, alpha=1, n0=0.0, relay_mode="ideal")
    rng = np.random.default_rng(8)
    real = realize(cfg, rng, size=4)
    z = rng.standard_normal((4, 7, 5)) + 1j * rng.standard_normal((4, 7, 5))
    s = np.linalg.qr(rng.standard_normal((5, 5)))[0]
    y = simulate_frame(z, s, real, rng)
    np.testing.assert_allclose(y, z @ s @ real.H, atol=1e-12)


def test_simulate_dimension_mismatch():
    cfg = ProtocolConfig(beta=2)
    real = realize(cfg, np.random.default_rng(0))
    with pytest.raises(ValueError):
        simulate_frame(np.zeros((1, 2)), None, real, np.random.default_rng(0))


def test_noise_only_covariance_matches_theta():
    cfg = ProtocolConfig(beta=2, n0=0.3)
    real = realize(cfg, np.random.default_rng(11))
    rng = np.random.default_rng(12)
    w = simulate_frame(np.zeros((200_000, 3)), None, real, rng)
    emp = w.T.conj() @ w / len(w)
    want = 2 * cfg.n0 * real.theta
    assert np.linalg.norm(emp - want) / np.linalg.norm(want) < 0.02


def test_statistical_normalisation_runs():
    cfg = ProtocolConfig(beta=2, n0=0.1, normalization="statistical")
    real = realize(cfg, np.random.default_rng(0), size=3)
    assert np.all(np.isfinite(real.gamma)) and np.all(real.gamma > 0)


def test_equal_average_energy_per_slot():
    # With E = (1, 0.5) every slot of the two-slot frame carries unit average energy.
    cfg = ProtocolConfig(beta=1, energies=(1.0, 0.5), n0=0.0, relay_mode="ideal", g_rd=1.0)
    rng = np.random.default_rng(3)
    real = realize(cfg, rng, size=200_000)
    energy = np.mean(np.abs(real.H) ** 2, axis=0).sum(axis=0)
    np.testing.assert_allclose(energy, [1.0, 1.0], rtol=0.02)


def test_row_fading_sets_nested():
    rows = row_fading_sets(2)
    assert rows[0] == {"sd", "r1d", "r2d"} and rows[1] == {"sd", "r2d"} and rows[2] == {"sd"}
    rows = row_fading_sets(2, alpha=2)
    assert [len(r) for r in rows] == [3, 3, 3, 2, 1]
    for a, b in zip(rows, rows[1:]):
        assert b <= a


def test_rows_depend_only_on_their_fading_set():
    """Perturbing a relay-destination link changes exactly the rows that list it."""
    cfg = ProtocolConfig(beta=3, alpha=1, n0=0.0, relay_mode="ideal")
    rng = np.random.default_rng(2)
    f = draw_fading(cfg, rng)
    gamma = relay_gains(f, cfg)
    h0 = build_H(f, gamma, cfg)
    rows = row_fading_sets(3, 1)
    for j in range(cfg.beta):
        h_rd = f.h_rd.copy()
        h_rd[j] *= 2.0
        h1 = build_H(FadingRealization(f.h_sd, f.h_sr, h_rd, f.h_rr), gamma, cfg)
        changed = np.any(np.abs(h1 - h0) > 1e-12, axis=1)
        assert list(changed) == [f"r{j + 1}d" in r for r in rows]


def test_ebn0_convention():
    # Eb/N0 = 0 dB at R = 1: complex noise variance 2 n0 equals Es.
    assert ebn0_to_n0(0.0, 1.0) == pytest.approx(0.5)
    assert ebn0_to_n0(10.0, 2.0) == pytest.approx(1 / 40)
    assert ebn0_to_n0(np.inf, 1.0) == 0.0
