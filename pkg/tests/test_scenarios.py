import io
from functools import reduce

import numpy as np
import pytest
from scipy.linalg import expm

from effdyn.exact import assemble_qd_full
from effdyn.hilbert import make_profile
from effdyn.scenarios import (ConfigError, DefectDistribution, SingleExcitationBranches,
                              TimeSeries, analytic_three_state, config_from_dict,
                              eval_in_N, memory_cycle, memory_fidelity, mixed_p_up, run,
                              sweep, thermal_p_up, three_state_amplitudes, transfer_time)
from effdyn.scenarios.dot import up_defect_states
from effdyn.observables import fidelity


def random_profile(N, seed=0):
    rng = np.random.default_rng(seed)
    return make_profile("explicit", N, {"values": rng.uniform(0.2, 1.2, N)})


def random_defect(N, seed=1):
    a = np.random.default_rng(seed).normal(size=N)
    return a / np.linalg.norm(a)


# --------------------------------------------------------------------------- #
# independent small-N central-spin Hamiltonian from Kronecker products

SP = np.array([[0.0, 1.0], [0.0, 0.0]])           # |up><down| and |1><0|
SZ = np.diag([0.5, -0.5])
I2 = np.eye(2)


def site_op(op, i, N):
    mats = [I2] * N
    mats[i] = op
    return reduce(np.kron, mats)


def kron_hamiltonian(alpha):
    """Electron (index 0 = up) times N spins (|0> = first basis vector)."""
    N = len(alpha)
    abar = np.mean(alpha)
    D = 2 ** N
    # nuclear raising takes |0> to |1>, i.e. first to second basis vector
    up_n = SP.T
    H = np.zeros((2 * D, 2 * D))
    count = np.zeros((D, D))
    for i, a in enumerate(alpha):
        s_plus_i = site_op(up_n, i, N)
        flip = np.kron(SP, s_plus_i.T)                   # S+ I-_i
        H += 0.5 * a * (flip + flip.T)
        count += site_op(np.diag([0.0, 1.0]), i, N)
    H += abar * np.kron(SZ * 2, count) / 2
    return H


def single_exc(N, j):
    """|1_j> in the Kronecker nuclear basis (site 0 is the most significant factor)."""
    v = np.zeros(2 ** N)
    v[1 << (N - 1 - j)] = 1.0
    return v


def kron_to_engine(N):
    """Permutation from the Kronecker layout to the engine layout (e * 2^N + bits)."""
    D = 2 ** N
    perm = np.empty(2 * D, dtype=int)
    for e_k, e_eng in ((0, 1), (1, 0)):
        for s in range(D):
            bits = int(format(s, f"0{N}b")[::-1], 2)
            perm[e_k * D + s] = e_eng * D + bits
    return perm


def test_kron_oracle_matches_engine():
    prof = random_profile(4, 11)
    Hk = kron_hamiltonian(prof.values)
    He = assemble_qd_full(prof).toarray()
    p = kron_to_engine(4)
    P = np.zeros_like(Hk)
    P[p, np.arange(p.size)] = 1
    np.testing.assert_allclose(P @ Hk @ P.T, He, atol=1e-14)


# --------------------------------------------------------------------------- #

class TestDefects:
    def test_uniform(self):
        d = DefectDistribution("uniform", 9)
        np.testing.assert_allclose(d.amplitudes, 1 / 3)

    def test_lorentzian_shape(self):
        d = DefectDistribution("lorentzian", 50, j0=20, Gamma=4.0)
        j = np.arange(1, 51)
        ref = 4.0 / ((j - 20) ** 2 + 4.0)
        np.testing.assert_allclose(d.amplitudes, ref / np.linalg.norm(ref), rtol=1e-13)
        assert np.argmax(d.amplitudes) == 19

    @pytest.mark.parametrize("kind,kw", [("uniform", {}), ("single_site", {"j0": 3}),
                                         ("lorentzian", {"j0": 1, "Gamma": 0.3})])
    def test_normalized(self, kind, kw):
        d = DefectDistribution(kind, 7, **kw)
        assert abs(np.sum(d.amplitudes ** 2) - 1) < 1e-12
        assert d.ket().norm() == pytest.approx(1.0)

    @pytest.mark.parametrize("kw", [{"kind": "lorentzian", "j0": 0, "Gamma": 1},
                                    {"kind": "lorentzian", "j0": 2, "Gamma": -1},
                                    {"kind": "single_site"}, {"kind": "other"}])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            DefectDistribution(N=5, **kw)

    @pytest.mark.parametrize("expr,val", [("N", 1000), ("N/50", 20.0), ("3N/4", 750.0),
                                          ("(N-1)/2", 499.5), (5, 5), ("2*N+1", 2001)])
    def test_eval_in_N(self, expr, val):
        assert eval_in_N(expr, 1000) == val

    @pytest.mark.parametrize("expr", ["__import__('os')", "N**2", "", "abs(N)"])
    def test_eval_rejects(self, expr):
        with pytest.raises(ValueError):
            eval_in_N(expr, 10)


class TestThreeState:
    def test_initial(self):
        prof = random_profile(5)
        a1, b1, c1 = three_state_amplitudes(prof, random_defect(5), [0.0])
        assert (a1[0], b1[0], c1[0]) == (1, 0, 0)

    def test_bright_defect_has_no_dark_part(self):
        prof = random_profile(6, 2)
        d = prof.values / prof.norm
        t = np.linspace(0, 40, 200)
        a1, b1, c1 = three_state_amplitudes(prof, d, t)
        assert np.abs(c1).max() < 1e-14
        np.testing.assert_allclose(np.abs(a1) ** 2 + np.abs(b1) ** 2, 1, atol=1e-12)

    @pytest.mark.parametrize("N", [4, 6, 8])
    def test_matches_full_space(self, N):
        prof = random_profile(N, N)
        a = random_defect(N, N + 1)
        t = np.linspace(0, 3 * transfer_time(prof), 40)
        a1, b1, c1 = three_state_amplitudes(prof, a, t)
        H = kron_hamiltonian(prof.values)
        D = 2 ** N
        nuc = sum(a[j] * single_exc(N, j) for j in range(N))
        psi0 = np.concatenate([np.zeros(D), nuc])           # |down> (x) |d>
        alpha, omega = prof.values, prof.norm
        gamma = a @ alpha
        beta = np.sqrt(omega ** 2 - gamma ** 2)
        B = alpha / omega
        Dk = (omega * a - gamma * B) / beta
        perp = (beta / omega) * B - (gamma / omega) * Dk
        perp_ket = np.concatenate([np.zeros(D), sum(perp[j] * single_exc(N, j) for j in range(N))])
        up0 = np.zeros(2 * D)
        up0[0] = 1.0
        for k, tk in enumerate(t):
            psi = expm(-1j * tk * H) @ psi0
            assert abs(np.vdot(psi0, psi) - a1[k]) < 1e-9
            assert abs(np.vdot(up0, psi) - b1[k]) < 1e-9
            assert abs(np.vdot(perp_ket, psi) - c1[k]) < 1e-9

    def test_resonant_limit(self):
        prof = random_profile(5, 4)
        a = prof.values / prof.norm
        t = np.linspace(0, 10, 50)
        _, b1, _ = three_state_amplitudes(prof, a, t, detuning=0.0)
        np.testing.assert_allclose(np.abs(b1), np.abs(np.sin(prof.norm * t / 2)), atol=1e-14)

    def test_transfer_time_is_first_maximum(self):
        N = 1000
        prof = make_profile("explicit", N, {"values": np.full(N, 1.0 / N)})
        tau = transfer_time(prof)
        t = np.linspace(0, 2 * tau, 601)
        s = analytic_three_state(prof, DefectDistribution("uniform", N), t)
        assert abs(t[np.argmax(s["abs_b1"])] - tau) <= t[1] - t[0]

    def test_series_columns(self):
        prof = random_profile(4)
        s = analytic_three_state(prof, random_defect(4), np.linspace(0, 5, 11))
        assert set(s.names) == {"abs_a1", "abs_b1", "abs_c1", "P_down", "tangle"}
        np.testing.assert_allclose(s["P_down"] + s["abs_b1"] ** 2, 1, atol=1e-12)


class TestTransferTime:
    def test_uniform(self):
        N, A = 1000, 1.0
        prof = make_profile("explicit", N, {"values": np.full(N, A / N)})
        assert transfer_time(prof) == pytest.approx(np.pi * np.sqrt(N) / A, rel=1e-12)

    def test_single(self):
        assert transfer_time(make_profile("explicit", 1, {"values": [0.4]})) == pytest.approx(np.pi / 0.4)


def dot_config(scenario, N, **extra):
    doc = {"schema": "effdyn/1", "scenario": scenario, "N": N,
           "profile": {"kind": "gaussian_dot", "A": 1.0, "r0": 1.0},
           "times": {"stop": 2, "unit": "tau", "points": 80}}
    doc.update(extra)
    return config_from_dict(doc)


class TestUpDefect:
    def test_matches_exact_before_divergence(self):
        N = 8
        kw = dict(initial={"defect": {"kind": "lorentzian", "j0": 3, "Gamma": 2.5}},
                  observables=["P_T", "P_up"])
        eff = run(dot_config("up_defect", N, engine={"kind": "effective", "max_row": 6}, **kw))
        ex = run(dot_config("up_defect", N, engine={"kind": "exact"}, **kw))
        tau = eff.info["tau"]
        early = eff.series.times <= tau
        for name in ("P_T", "P_up"):
            assert np.abs(eff.series[name] - ex.series[name])[early].max() < 1e-6

    def test_homogeneous_closure(self):
        N = 12
        prof = make_profile("explicit", N, {"values": np.full(N, 0.3)})
        states, labels, basis = up_defect_states(prof, DefectDistribution("uniform", N),
                                                 np.linspace(0, 30, 5))
        assert len(labels) == 2
        assert any(why != "truncated" and norm < 1e-9 for _, norm, why in basis.residual_log)
        np.testing.assert_allclose(np.sum(np.abs(states) ** 2, axis=1), 1, atol=1e-12)

    def test_populations_sum(self):
        res = run(dot_config("up_defect", 30, initial={"defect": {"kind": "uniform"}},
                             observables=["P_up", "P_down", "P_T"]))
        s = res.series
        np.testing.assert_allclose(s["P_up"] + s["P_down"], 1, atol=1e-12)
        assert np.all((s["P_T"] >= -1e-10) & (s["P_T"] <= 1 + 1e-10))


class TestTangleRunner:
    @pytest.mark.parametrize("defect", [{"kind": "uniform"},
                                        {"kind": "lorentzian", "j0": "N", "Gamma": 1.5}])
    def test_effective_equals_exact(self, defect):
        kw = dict(initial={"defect": defect, "electron": [1, [0, 1]]},
                  observables=["tangle", "P_up", "P_down"])
        eff = run(dot_config("tangle", 7, engine={"kind": "effective", "max_row": None}, **kw))
        ex = run(dot_config("tangle", 7, engine={"kind": "exact"}, **kw))
        for name in ("tangle", "P_up"):
            assert np.abs(eff.series[name] - ex.series[name]).max() < 1e-9
        np.testing.assert_allclose(eff.series["P_up"] + eff.series["P_down"], 1, atol=1e-12)


class TestMemory:
    def test_vanishing_storage_time(self):
        prof = random_profile(20, 3)
        d = DefectDistribution("uniform", 20)
        down = memory_cycle(prof, d, (0, 1), 1e-9)
        up = memory_cycle(prof, d, (1, 0), 1e-9)
        assert fidelity(down, [0, 1]) == pytest.approx(1.0, abs=1e-12)
        assert fidelity(up, [1, 0]) == pytest.approx(0.0, abs=1e-12)

    def test_defect_free_baseline(self):
        prof = make_profile("gaussian_dot", 200, {"A": 1.0, "r0": 1.0})
        assert memory_fidelity(prof, None, M=50) >= 0.98

    def test_output_is_state(self):
        prof = random_profile(15, 4)
        rho = memory_cycle(prof, DefectDistribution("lorentzian", 15, j0=15, Gamma=2.0),
                           (0.6, 0.8j), transfer_time(prof))
        assert np.trace(rho.entries).real == pytest.approx(1.0, abs=1e-10)
        assert np.linalg.eigvalsh(rho.entries).min() > -1e-10


def density_matrix_p_up(alpha, rho_e, rho_nuc, times):
    H = kron_hamiltonian(alpha)
    rho = np.kron(rho_e, rho_nuc)
    D = rho_nuc.shape[0]
    out = []
    for t in times:
        U = expm(-1j * t * H)
        r = U @ rho @ U.conj().T
        out.append(np.trace(r[:D, :D]).real)
    return np.array(out)


class TestMixed:
    def test_matches_density_matrix(self):
        N = 8
        prof = random_profile(N, 5)
        w = np.random.default_rng(6).uniform(size=N)
        w /= w.sum()
        u, v = 0.6, 0.8j
        t = np.linspace(0, 3 * transfer_time(prof), 9)
        rho_nuc = sum(w[j] * np.outer(single_exc(N, j), single_exc(N, j)) for j in range(N))
        psi = np.array([u, v])
        ref = density_matrix_p_up(prof.values, np.outer(psi, psi.conj()), rho_nuc, t)
        assert np.abs(mixed_p_up(prof, w, u, v, t) - ref).max() < 1e-9

    def test_single_branch_is_pure_run(self):
        N, j0 = 12, 5
        t_cfg = {"stop": 3, "unit": "tau", "points": 60}
        mixed = run(dot_config("mixed", N, times=t_cfg, engine={"kind": "exact"},
                               initial={"electron": [1, 1],
                                        "mixture": {"kind": "single_site", "j0": j0}}))
        pure = run(dot_config("tangle", N, times=t_cfg, observables=["P_up"],
                              engine={"kind": "effective", "max_row": None},
                              initial={"electron": [1, 1],
                                       "defect": {"kind": "single_site", "j0": j0}}))
        assert np.abs(mixed.series["P_up"] - pure.series["P_up"]).max() < 1e-10

    def test_weighted_sum_of_branches(self):
        N = 10
        prof = random_profile(N, 7)
        t = np.linspace(0, 50, 101)
        br = SingleExcitationBranches(prof, t)
        w = np.arange(1.0, N + 1)
        w /= w.sum()
        total = sum(w[j] * br.branch(j, 0.6, 0.8) for j in range(N))
        a = mixed_p_up(prof, w, 0.6, 0.8, t, br)
        np.testing.assert_allclose(a, total, rtol=0, atol=1e-14)
        assert np.array_equal(a, mixed_p_up(prof, w, 0.6, 0.8, t, br))

    @pytest.mark.parametrize("w", [np.full(4, 0.3), np.array([0.5, 0.6, -0.1, 0.0]), np.ones(3) / 3])
    def test_invalid_weights(self, w):
        with pytest.raises(ValueError):
            mixed_p_up(random_profile(4), w, 1, 0, [0.0])


class TestThermal:
    @pytest.mark.parametrize("k", [0.0, 0.1, 0.37])
    def test_two_spins_match_density_matrix(self, k):
        prof = random_profile(2, 8)
        t = np.linspace(0, 30, 13)
        th = np.diag([1 - k, k])
        psi = np.array([1.0, 1.0j]) / np.sqrt(2)
        ref = density_matrix_p_up(prof.values, np.outer(psi, psi.conj()), np.kron(th, th), t)
        got = thermal_p_up(prof, k, psi[0], psi[1], t)
        assert np.abs(got - ref).max() < 1e-10

    def test_zero_temperature_is_polarized_run(self):
        prof = random_profile(6, 9)
        t = np.linspace(0, 20, 41)
        u, v = 0.6, 0.8
        th = thermal_p_up(prof, 0.0, u, v, t)
        # polarized bath: |down, 0> is stationary and |up, 0> is the two-level
        # partner of |down, bright>, whose return probability is 1 - |b1|^2
        _, b1, _ = three_state_amplitudes(prof, prof.values / prof.norm, t)
        np.testing.assert_allclose(th, u ** 2 * (1 - np.abs(b1) ** 2), atol=1e-12)
        th_workers = thermal_p_up(prof, 0.2, u, v, t, workers=3)
        np.testing.assert_allclose(th_workers, thermal_p_up(prof, 0.2, u, v, t, workers=1),
                                   atol=1e-14)

    def test_guards(self):
        from effdyn.hilbert import GuardError
        with pytest.raises(GuardError):
            thermal_p_up(random_profile(13), 0.1, 1, 0, [0.0])
        with pytest.raises(ValueError):
            thermal_p_up(random_profile(3), 0.5, 1, 0, [0.0])


class TestItcRunner:
    def itc(self, **kw):
        doc = {"schema": "effdyn/1", "scenario": "itc", "N": 5,
               "profile": {"kind": "sine_cavity", "g": 1.0},
               "initial": {"nbar": 1.0, "field_dim": 5},
               "engine": {"kind": "effective", "max_row": 2},
               "times": {"stop": 10, "points": 40}, "observables": ["P0"]}
        doc.update(kw)
        return config_from_dict(doc)

    def test_vacuum_is_stationary(self):
        res = run(self.itc(initial={"nbar": 0.0, "field_dim": 5}))
        np.testing.assert_allclose(res.series["P0"], 1.0, atol=1e-14)

    def test_homogeneous_has_no_higher_rows(self):
        cfg = self.itc(profile={"kind": "explicit", "values": [0.7] * 5},
                       observables=["P0", "rows23"], engine={"kind": "effective", "max_row": 3})
        res = run(cfg)
        assert np.all(res.series["rows23"] == 0)
        with pytest.raises(KeyError):
            run(self.itc(observables=["rows23"]))          # max_row 2 never builds row 3

    def test_effective_untruncated_equals_exact(self):
        eff = run(self.itc(engine={"kind": "effective", "max_row": None}))
        ex = run(self.itc(engine={"kind": "exact"}))
        assert np.abs(eff.series["P0"] - ex.series["P0"]).max() < 1e-10


class TestConfig:
    BASE = {"schema": "effdyn/1", "scenario": "mixed", "N": 4,
            "profile": {"kind": "gaussian_dot", "A": 1, "r0": 1},
            "initial": {"mixture": {"kind": "uniform"}}, "times": {"stop": 1}}

    @pytest.mark.parametrize("change", [
        {"schema": "effdyn/0"}, {"scenario": "nope"}, {"N": 0}, {"N": True},
        {"times": {"stop": 0}}, {"times": {"stop": 1, "points": 1}},
        {"observables": ["P0"]}, {"engine": {"kind": "magic"}},
        {"engine": {"kind": "effective", "max_row": 0}}, {"initial": {}},
        {"profile": {"A": 1}}, {"initial": {"mixture": {}, "electron": [1]}}])
    def test_rejects(self, change):
        with pytest.raises(ConfigError):
            config_from_dict(dict(self.BASE, **change))

    def test_thermal_needs_exact_engine(self):
        doc = dict(self.BASE, scenario="thermal", initial={"k_mean": 0.1})
        with pytest.raises(ConfigError):
            config_from_dict(doc)
        config_from_dict(dict(doc, engine={"kind": "exact"}))

    def test_replace(self):
        cfg = config_from_dict(self.BASE)
        assert cfg.replace(N=9).N == 9
        assert cfg.replace(points=7).time_grid().size == 7
        with pytest.raises(KeyError):
            cfg.replace(colour="red")

    def test_tau_units(self):
        cfg = config_from_dict(dict(self.BASE, times={"stop": 2, "unit": "tau", "points": 3}))
        np.testing.assert_allclose(cfg.time_grid(5.0), [0, 5, 10])


class TestTimeSeries:
    def test_csv_full_precision(self):
        t = np.array([0.0, 0.1, 1 / 3])
        s = TimeSeries(t, {"P": np.array([1.0, np.pi / 4, 1e-17])})
        text = s.to_csv()
        lines = text.split("\n")
        assert lines[0] == "time,P"
        back = np.loadtxt(io.StringIO(text), delimiter=",", skiprows=1)
        assert np.array_equal(back[:, 0], t) and np.array_equal(back[:, 1], s["P"])
        assert "\r" not in text

    def test_requires_ascending(self):
        with pytest.raises(ValueError):
            TimeSeries(np.array([0.0, 0.0]), {"P": np.zeros(2)})
        with pytest.raises(ValueError):
            TimeSeries(np.array([0.0, 1.0]), {"P": np.zeros(3)})


class TestSweep:
    def test_rejects_unsorted_before_running(self, monkeypatch):
        import effdyn.scenarios as sc
        cfg = dot_config("tangle", 6, initial={"defect": {"kind": "lorentzian", "j0": 1,
                                                          "Gamma": 1}})
        monkeypatch.setattr(sc, "run", lambda *a, **k: pytest.fail("ran before validating"))
        with pytest.raises(ConfigError):
            sweep(cfg, "j0", ["N", 1])
        with pytest.raises(ConfigError):
            sweep(cfg, "colour", [1])

    def test_tangle_sweep_rows(self):
        cfg = dot_config("tangle", 10, initial={"defect": {"kind": "lorentzian", "j0": 1,
                                                           "Gamma": 2}})
        table = sweep(cfg, "j0", [1, "N/2", "N"], workers=2)
        assert table.key == "j0"
        np.testing.assert_array_equal(table.times, [1, 5, 10])
        assert {"tau", "min_tangle"} <= set(table.names)
