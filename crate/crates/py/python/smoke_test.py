"""Smoke test for the gloria_py extension.

Build the module first, e.g. ``maturin develop -m crates/py/Cargo.toml`` or
``cargo build --release -p gloria-py --features extension-module`` followed by
copying ``target/release/libgloria_py.so`` to ``crates/py/python/gloria_py.so``.
"""

import json
import math
import pathlib
import sys
import tempfile

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent))

import gloria_py as g


def main():
    truth = g.synth_scene(3, json.dumps({"bands": 12, "width": 16, "height": 16, "patches": 4}))
    assert (truth.bands, truth.width, truth.height) == (12, 16, 16), truth

    obs = g.simulate(truth, 7, json.dumps({"ms_bands": 4, "kernel_size": 5, "factor": 2}))
    assert (obs.y_m.bands, obs.y_m.width) == (4, 16)
    assert (obs.y_h.bands, obs.y_h.width) == (12, 8)
    assert len(obs.spectral_response()) == 4

    est, report = obs.fuse(json.dumps({"patch_rows": 2, "patch_cols": 2}))
    assert report["solver"] == "gloria" and report["iterations"] > 0
    assert report["objective_trace"][-1] < report["objective_trace"][0]
    m = g.evaluate(truth, est, resolution_ratio=2.0)
    assert m["psnr_db"] > 15.0, m
    same = g.evaluate(truth, truth)
    assert (same["psnr_db"], same["sam_deg"], same["ergas"], same["uiqi"]) == (300.0, 0.0, 0.0, 1.0)

    _, nnm = obs.fuse(json.dumps({"solver": "nnm", "max_iter": 20}))
    assert nnm["solver"] == "nnm"

    x = [[3.0, 0.0], [0.0, 4.0]]
    assert abs(g.nuclear_norm(x) - 7.0) < 1e-12
    assert abs(g.phi(x, p=1.0, tau=1e-12) - 7.0) < 1e-9
    assert g.phi([[0.0, 0.0], [0.0, 0.0]], p=0.5, tau=1.0) == 2.0
    assert g.approx_rank([[1.0, 2.0], [2.0, 4.0]]) == 1
    rows = g.rank_table(truth, [1, 2])
    assert rows[0]["grid"] == 1 and rows[0]["mean_rank"] == rows[0]["global_rank"]

    with tempfile.TemporaryDirectory() as tmp:
        path = pathlib.Path(tmp) / "truth.hsrm"
        truth.write(str(path))
        back = g.Image.read(str(path))
        assert back.to_rows() == truth.to_rows()
        assert back.pixel(1, 2) == truth.pixel(1, 2)

        cfg = json.dumps({
            "scene": {"bands": 12, "width": 16, "height": 16, "patches": 4},
            "simulation": {"ms_bands": 4, "kernel_size": 5, "factor": 2, "snr_h_db": None},
            "solver": {"patch_rows": 2, "patch_cols": 2, "max_iter": 10},
        })
        rec = g.run_simulate(cfg, out_dir=tmp)
        assert rec["synthetic"] and rec["simulation"]["snr_h_db"] is None
        rep = g.run_fuse(cfg, out_dir=tmp)
        assert rep["iterations"] <= 10 and math.isfinite(rep["final_objective"])
        assert (pathlib.Path(tmp) / "report.json").exists()

    for bad in (lambda: g.phi(x, p=3.0), lambda: g.Image(2, 2, [[1.0]]), lambda: g.run_fuse('{"nope": 1}')):
        try:
            bad()
        except ValueError:
            pass
        else:
            raise AssertionError("expected ValueError")
    try:
        g.Image.read("/nonexistent/file.hsrm")
    except OSError:
        pass
    else:
        raise AssertionError("expected OSError")

    print("python smoke test: ok")


if __name__ == "__main__":
    main()
