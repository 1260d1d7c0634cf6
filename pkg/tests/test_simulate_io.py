import json

import numpy as np
import pytest

from bfman import io
from bfman.baseline_mgps import active_columns, mgps_effective_factors, run_mgps
from bfman.gibbs import run_chain
from bfman.model import Hyperparams, validate
from bfman.simulate import ScenarioSpec, builtin_scenarios, generate, replicate_seed


def test_builtin_scenarios():
    sc = builtin_scenarios()
    assert [(s.n, s.p, s.k) for s in sc.values()] == [(100, 20, 3), (100, 20, 3), (30, 60, 5),
                                                      (3000, 60, 6)]
    assert sc[2].theta == (0.8, 0.6, 0.4)
    assert sc[4].theta == (0.8, 0.7, 0.6, 0.5, 0.4, 0.3)
    assert all(s.psi == 0.5 for s in sc.values())


def test_spec_validation():
    with pytest.raises(ValueError, match="theta"):
        ScenarioSpec(10, 5, 2, (0.5,))
    with pytest.raises(ValueError):
        ScenarioSpec(10, 5, 1, (0.0,))
    spec = builtin_scenarios()[1]
    assert ScenarioSpec.from_dict(spec.to_dict()) == spec
    assert spec.with_(n=500).n == 500


def test_generate_zero_rates_and_coupling():
    spec = ScenarioSpec(20_000, 3, 2, (0.8, 0.3))
    d = generate(spec)
    np.testing.assert_allclose(np.mean(d.eta == 0, axis=0), [0.2, 0.7], atol=0.01)
    np.testing.assert_array_equal(d.z == 0, d.eta == 0)
    assert np.all((d.sigma2 > 0) & (d.sigma2 < 1))


def test_generate_variance_decomposition():
    # Var(y_j) = sum_h lam_jh^2 theta_h 3 psi + sigma2_j
    spec = ScenarioSpec(200_000, 4, 2, (0.8, 0.4), seed=5)
    d = generate(spec)
    expected = (d.lam**2 * (np.array(spec.theta) * 3 * spec.psi)).sum(axis=1) + d.sigma2
    np.testing.assert_allclose(d.Y.var(axis=0), expected, rtol=0.02)


def test_generate_deterministic_per_replicate():
    spec = builtin_scenarios()[1]
    a, b, c = generate(spec, 3), generate(spec, 3), generate(spec, 4)
    np.testing.assert_array_equal(a.Y, b.Y)
    assert not np.array_equal(a.Y, c.Y)
    assert replicate_seed(0, 3).entropy == replicate_seed(0, 3).entropy


def test_truth_round_trip(tmp_path):
    d = generate(ScenarioSpec(10, 4, 2, (0.5, 0.5)))
    io.write_json(tmp_path / "t.json", d.truth_dict())
    back = type(d).from_truth(io.read_json(tmp_path / "t.json"), Y=d.Y)
    np.testing.assert_array_equal(back.eta, d.eta)
    np.testing.assert_array_equal(back.z, d.z)


def test_csv_round_trip_is_exact(tmp_path):
    M = np.random.default_rng(0).normal(size=(7, 3))
    io.write_matrix_csv(tmp_path / "y.csv", M)
    back, header = io.read_matrix_csv(tmp_path / "y.csv")
    np.testing.assert_array_equal(back, M)
    assert header == ["V1", "V2", "V3"]


@pytest.mark.parametrize("body,needle", [
    ("a,b\n1,2\n3\n", "row 3"),
    ("a,b\n1,x\n", "non-numeric"),
    ("a,b\n1,nan\n", "NaN"),
    ("a,b\n", "no data"),
])
def test_csv_parse_errors(tmp_path, body, needle):
    path = tmp_path / "bad.csv"
    path.write_text(body)
    with pytest.raises(io.ParseError, match=needle):
        io.read_matrix_csv(path)


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        io.read_matrix_csv(tmp_path / "nope.csv")


def test_draw_archive_round_trip(tmp_path):
    d = generate(ScenarioSpec(15, 4, 2, (0.6, 0.6)))
    hp = validate(Hyperparams(K=3, chain={"iters": 20, "burnin": 10, "thin": 2}), d.Y)
    draws = run_chain(d.Y, hp, np.random.default_rng(0))
    io.save_draws(tmp_path, draws)
    desc = json.loads((tmp_path / "draws.json").read_text())
    assert desc["dtype"] == "<f8" and desc["order"] == "C"
    back = io.load_draws(tmp_path)
    for name in io.DRAW_ARRAYS:
        np.testing.assert_array_equal(getattr(back, name), getattr(draws, name))
    assert back.z.dtype == np.int8


def test_mgps_baseline_runs_with_all_slab_scores():
    d = generate(builtin_scenarios()[1].with_(n=60))
    hp = validate(Hyperparams(K=6, chain={"iters": 200, "burnin": 100, "thin": 5}), d.Y)
    draws = run_mgps(d.Y, hp, np.random.default_rng(1))
    assert np.all(draws.z == 1) and draws.model == "mgps"
    assert np.all(np.isfinite(draws.eta))
    k_eff = mgps_effective_factors(draws)
    assert 1 <= k_eff <= 6


def test_active_columns_rule():
    lam = np.zeros((20, 3))
    lam[:2, 0] = 1.0    # 10% above eps: active
    lam[:1, 1] = 1.0    # 5%: not active (strict)
    lam[:, 2] = 0.005   # below eps
    assert active_columns(lam).tolist() == [True, False, False]
