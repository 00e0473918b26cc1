import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ptmetric.dynamics import default_steps
from ptmetric.families import random_schedule
from ptmetric.scenario import (
    DEFAULT_TOLERANCES,
    InvalidConfig,
    complex_vector,
    dump_json,
    load_scenario,
    parse_scenario,
    to_jsonable,
    write_series_csv,
)

PT = {"schema": 1, "hamiltonian": {"family": "pt2x2", "kappa": 1.0, "alpha": 0.5}, "tau": 1.0}
RANDOM = {"schema": 1, "hamiltonian": {"family": "random", "dim": 3, "seed": 4}, "tau": 1.0}


def with_(base, **kw):
    out = json.loads(json.dumps(base))
    out.update(kw)
    return out


class TestParse:
    def test_defaults(self):
        sc = parse_scenario(PT)
        assert sc.name == "scenario" and sc.dim == 2
        assert sc.steps % 2 == 0 and sc.steps >= default_steps(sc.schedule)
        assert np.array_equal(sc.eta0, np.eye(2))
        assert np.array_equal(sc.psi0(), [1, 0])
        assert sc.tolerances == DEFAULT_TOLERANCES
        assert sc.beta is None

    def test_overrides(self):
        sc = parse_scenario(RANDOM, steps=64, seed=9, tolerances={"jarzynski": 1e-6})
        assert sc.steps == 64
        assert sc.raw["hamiltonian"]["seed"] == 9
        assert np.allclose(sc.schedule(0.3), random_schedule(3, 9)(0.3))
        assert sc.tolerances["jarzynski"] == 1e-6
        # the input dict is left alone
        assert RANDOM["hamiltonian"]["seed"] == 4

    def test_complex_entries(self):
        sc = parse_scenario(with_(PT, hamiltonian={"family": "diagonal", "entries": [[1, 1], 2, [0, -1]]}))
        assert np.allclose(np.diag(sc.schedule(0.0)), [1 + 1j, 2, -1j])

    def test_pair_is_not_ambiguous_in_vectors(self):
        sc = parse_scenario(with_(PT, psi0=[1, 2]))
        v = sc.psi0()
        assert v.shape == (2,) and v[1] / v[0] == pytest.approx(2.0)

    def test_psi0_normalized_in_metric(self):
        sc = parse_scenario(with_(PT, eta0="biorthonormal", psi0=[[1, 0.5], 3]))
        psi = sc.psi0()
        assert np.linalg.norm(sc.eta0 @ psi) == pytest.approx(1.0)

    def test_eigenvector_psi0(self):
        sc = parse_scenario(with_(PT, psi0={"eigenvector": 1}))
        psi = sc.psi0()
        H = sc.schedule(0.0)
        lam = np.vdot(psi, H @ psi) / np.vdot(psi, psi)
        assert np.allclose(H @ psi, lam * psi)

    def test_eta0_matrix(self):
        sc = parse_scenario(with_(PT, eta0={"matrix": [[2, 0], [[0, 1], 1]]}))
        assert np.allclose(sc.eta0, [[2, 0], [1j, 1]])

    def test_grid_and_eta0_files(self, tmp_path):
        grid = {"times": [0.0, 0.5, 1.0], "matrices": [[[1, 0], [0, -1]], [[1, [0, 0.2]], [[0, 0.2], -1]], [[0, 1], [1, 0]]]}
        (tmp_path / "grid.json").write_text(json.dumps(grid))
        (tmp_path / "eta.json").write_text(json.dumps([[1, 0], [0, 2]]))
        cfg = with_(PT, hamiltonian={"family": "grid", "file": "grid.json"}, eta0={"file": "eta.json"})
        (tmp_path / "s.json").write_text(json.dumps(cfg))
        sc = load_scenario(tmp_path / "s.json")
        assert np.allclose(sc.schedule(0.25), [[1, 0.1j], [0.1j, -1]])
        assert np.allclose(sc.eta0, np.diag([1, 2]))

    @pytest.mark.parametrize("bad", [
        with_(PT, schema=2),
        with_(PT, tau=0),
        with_(PT, tau=-1.0),
        with_(PT, hamiltonian={"family": "pt2x2", "kappa": 1.0}),
        with_(PT, hamiltonian={"family": "pt2x2", "kappa": 1.0, "alpha": -0.5}),
        with_(PT, hamiltonian={"family": "random", "dim": 3}),
        with_(PT, hamiltonian={"family": "warp", "dim": 3}),
        with_(PT, hamiltonian={"family": "diagonal", "entries": [[1, 2, 3]]}),
        with_(PT, eta0="golden"),
        with_(PT, eta0={"matrix": [[1, 0, 0], [0, 1, 0]]}),
        with_(PT, eta0={"matrix": [[1, 0], [0, 1], [0, 0]]}),
        with_(PT, psi0={"basis": 5}),
        with_(PT, psi0=[0, 0]),
        with_(PT, psi0=[1, 0, 0]),
        with_(PT, dim=3),
        with_(PT, steps=2),
        with_(PT, beta=-1),
        with_(PT, tolerances={"bogus": 1.0}),
        with_(PT, extra=True),
    ])
    def test_invalid(self, bad):
        with pytest.raises(InvalidConfig):
            sc = parse_scenario(bad)
            sc.psi0()

    def test_seed_only_for_random(self):
        with pytest.raises(InvalidConfig):
            parse_scenario(PT, seed=3)

    @pytest.mark.parametrize("tol", [{"nope": 1.0}, {"jarzynski": 0.0}, {"jarzynski": math.inf}])
    def test_bad_tolerance_override(self, tol):
        with pytest.raises(InvalidConfig):
            parse_scenario(PT, tolerances=tol)

    def test_missing_files(self, tmp_path):
        with pytest.raises(InvalidConfig):
            load_scenario(tmp_path / "absent.json")
        (tmp_path / "junk.json").write_text("{ not json")
        with pytest.raises(InvalidConfig):
            load_scenario(tmp_path / "junk.json")
        (tmp_path / "list.json").write_text("[1, 2]")
        with pytest.raises(InvalidConfig):
            load_scenario(tmp_path / "list.json")

    def test_grid_must_span_tau(self, tmp_path):
        (tmp_path / "g.json").write_text(json.dumps({"times": [0.0, 0.5], "matrices": [[[1]], [[2]]]}))
        with pytest.raises(InvalidConfig):
            parse_scenario(with_(PT, hamiltonian={"family": "grid", "file": "g.json"}), tmp_path)


class TestSerialization:
    def test_to_jsonable(self):
        obj = {"z": np.array([1 + 2j]), "x": np.float64(np.nan), "n": np.int64(3), "b": np.bool_(True),
               "m": np.eye(2), 1: (np.complex128(-1j),)}
        assert to_jsonable(obj) == {"z": [[1.0, 2.0]], "x": None, "n": 3, "b": True,
                                    "m": [[1.0, 0.0], [0.0, 1.0]], "1": [[-0.0, -1.0]]}

    @given(st.floats(allow_nan=False, allow_infinity=False), st.floats(allow_nan=False, allow_infinity=False))
    def test_complex_round_trip(self, re, im):
        z = complex(re, im)
        assert complex_vector(json.loads(json.dumps(to_jsonable([z]))))[0] == z

    def test_dump_is_deterministic(self, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        dump_json({"b": 0.1, "a": [np.pi, 1j]}, a)
        dump_json({"a": [np.pi, 1j], "b": 0.1}, b)
        assert a.read_bytes() == b.read_bytes()
        assert json.loads(a.read_text())["a"][0] == np.pi

    def test_csv_layout(self, tmp_path):
        t = np.array([0.0, 0.5])
        M = np.array([[[1 + 2j, 3], [4, 5j]], [[np.pi, 0], [0, 1 / 3]]])
        write_series_csv(tmp_path / "m.csv", t, M, "W")
        rows = list(csv.reader(open(tmp_path / "m.csv")))
        assert rows[0] == ["t", "W_0_0_re", "W_0_0_im", "W_0_1_re", "W_0_1_im",
                           "W_1_0_re", "W_1_0_im", "W_1_1_re", "W_1_1_im"]
        assert len(rows) == 3
        back = np.array(rows[1:], dtype=float)
        assert np.array_equal(back[:, 0], t)
        assert np.array_equal(back[:, 1::2] + 1j * back[:, 2::2], M.reshape(2, -1))

    def test_csv_vectors(self, tmp_path):
        write_series_csv(tmp_path / "v.csv", [0.0], np.array([[1j, 2]]), "psi")
        rows = list(csv.reader(open(tmp_path / "v.csv")))
        assert rows[0] == ["t", "psi_0_re", "psi_0_im", "psi_1_re", "psi_1_im"]
