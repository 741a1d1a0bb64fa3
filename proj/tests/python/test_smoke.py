import json
import pathlib

import numpy as np
import pytest

import ncmfe

ROOT = pathlib.Path(__file__).resolve().parents[2]


def gent_thomas_energy(f):
    c = f.T @ f
    j = np.linalg.det(f)
    i1 = np.trace(c)
    i2 = 0.5 * (i1**2 - np.trace(c @ c))
    i1b, i2b = i1 * j ** (-2 / 3), i2 * j ** (-4 / 3)
    return 0.5 * (i1b - 3) + np.log(i2b / 3) + (j - 1) ** 2


def test_reference_state_is_stress_free():
    psi, tau, c = ncmfe.eval_point(ncmfe.gent_thomas_model(), np.eye(3))
    assert psi == pytest.approx(0.0, abs=1e-14)
    assert np.abs(tau).max() < 1e-13
    assert np.allclose(c, c.T, atol=1e-12)


@pytest.mark.parametrize("path", ["UT", "UC", "BT", "BC", "SS", "PS"])
def test_reference_energy_matches_closed_form(path):
    f = ncmfe.loading_path(path, 0.5)
    psi, _, _ = ncmfe.eval_point(ncmfe.gent_thomas_model(), f)
    assert psi == pytest.approx(gent_thomas_energy(f), rel=1e-12)


@pytest.mark.parametrize("arch", ["micnn", "cann", "ickan"])
def test_batch_matches_single_point(arch):
    model = ncmfe.random_model(arch, seed=3)
    rng = np.random.default_rng(0)
    fs = np.eye(3) + 0.1 * rng.standard_normal((7, 3, 3))
    psi, tau, c = ncmfe.eval_batch(model, fs)
    for p in range(len(fs)):
        q = ncmfe.eval_point(model, fs[p])
        assert psi[p] == q[0]
        assert np.array_equal(tau[p], q[1])
        assert np.array_equal(c[p], q[2])


def test_stress_is_energy_gradient():
    # Under F -> (I + h l) F the energy rate is tau : sym(l).
    model = ncmfe.random_model("cann", seed=5)
    f = ncmfe.loading_path("SS", 0.3)
    l = np.array([[0.1, 0.2, 0.0], [0.0, -0.1, 0.3], [0.1, 0.0, 0.05]])
    h = 1e-6
    dpsi = (ncmfe.eval_point(model, (np.eye(3) + h * l) @ f)[0]
            - ncmfe.eval_point(model, (np.eye(3) - h * l) @ f)[0]) / (2 * h)
    tau = ncmfe.eval_point(model, f)[1]
    d = 0.5 * (l + l.T)
    voigt = [(0, 0), (1, 1), (2, 2), (0, 1), (1, 2), (0, 2)]
    work = sum((1 if a < 3 else 2) * tau[a] * d[i, j] for a, (i, j) in enumerate(voigt))
    assert dpsi == pytest.approx(work, rel=1e-6, abs=1e-9)


def test_model_json_round_trip():
    model = ncmfe.random_model("micnn", seed=1)
    again = ncmfe.model_from_json(model.to_json())
    assert again.to_json() == model.to_json()
    f = ncmfe.loading_path("BT", 0.2)
    assert ncmfe.eval_point(again, f)[0] == ncmfe.eval_point(model, f)[0]


def test_loader_reports_field_path():
    doc = json.loads(ncmfe.random_model("micnn", seed=1).to_json())
    doc["layers"][1]["A"][0][0] = -1.0
    with pytest.raises(ncmfe.ValidationError, match=r"layers\[1\]\.A\[0\]\[0\]"):
        ncmfe.model_from_json(json.dumps(doc))


@pytest.mark.parametrize("name", ["micnn", "cann", "ickan"])
def test_bundled_models_load(name):
    model = ncmfe.load_model(str(ROOT / "models" / f"{name}.json"))
    assert model.architecture == name


def test_assembly_modes_agree():
    model = ncmfe.random_model("micnn", seed=2)
    fe = ncmfe.make_twist_cube(2)
    u = 0.01 * np.random.default_rng(4).standard_normal(fe.n_dofs)
    ref = ncmfe.assemble(model, fe, u, mode="trad")
    for mode in ["global", "batch", "partitioned"]:
        got = ncmfe.assemble(model, fe, u, mode=mode, n_batch=5, workers=2)
        for a, b in zip(ref, got):
            assert np.array_equal(a, b)


def test_twist_solve_converges():
    fe = ncmfe.make_twist_cube(2)
    u, report = ncmfe.newton_solve(ncmfe.gent_thomas_model(), fe, load_steps=5)
    assert report["converged"]
    assert report["final_lambda"] == pytest.approx(1.0)
    assert np.all(np.isfinite(u))


def test_path_scan_rows():
    rows = ncmfe.path_scan(ncmfe.gent_thomas_model(), gamma_max=0.5, steps=4)
    assert len(rows) == 6 * 5
    for _, _, psi_model, psi_ref, status in rows:
        assert status == "ok"
        assert psi_model == pytest.approx(psi_ref, abs=1e-12)
