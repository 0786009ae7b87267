"""Smoke test for the Python extension.

Build and install first, e.g. `maturin develop -m crates/py/Cargo.toml`
or `pip install ./crates/py`, then run `python python/smoke_test.py`.
"""

import json
import math
import tempfile

import invitesim


def main():
    p = invitesim.ModelParams.reference()
    assert (p.lam, p.r, p.beta, p.gamma, p.epsilon) == (1.0, 1000.0, 1.0, 2.0, 0.2)
    assert math.isclose(p.stability_bound(), 1.0)
    nu1, nu2 = p.eigenvalues()
    assert 0 < nu1 < nu2

    try:
        invitesim.ModelParams(1.0, 1000.0, 1.0, 2.0, 1.5)
    except ValueError:
        pass
    else:
        raise AssertionError("unstable epsilon accepted")

    small = p.with_scale(100.0)
    traj = invitesim.simulate_chain(small, 0, 100, horizon=5.0, seed=3)
    again = invitesim.simulate_chain(small, 0, 100, horizon=5.0, seed=3)
    assert traj.y == again.y and traj.x == again.x
    assert len(traj) == 501 and min(traj.x) >= 0
    assert traj.to_csv().startswith("t,y,x\n")
    assert len(traj.scaled()[0]) == 3

    a = invitesim.simulate_chain(small, 0, 0, horizon=2.0, seed=1, scheme="A", x_target=100.0)
    assert a.x_target is not None and all(t >= 0 for t in a.x_target)

    fl = invitesim.fluid(p, 20.0, -1.0, 100.0)
    assert fl.boundary_segments() == 1
    y, x = fl.state(100.0)
    assert abs(y) < 1e-3 and abs(x) < 1e-3
    assert fl.sample(1.0)[0][3] in ("interior", "boundary")

    v = invitesim.stationary_cov(p)
    assert [[round(e, 12) for e in row] for row in v] == [[0.5, -1.0], [-1.0, 2.1]]
    rows = invitesim.moments(p, 200.0)
    assert abs(rows[-1][3] - 0.5) < 1e-6 and abs(rows[-1][5] - 2.1) < 1e-6

    names = invitesim.preset_names()
    assert {"fig2a", "fig3", "fig4b"} <= set(names)
    cfg = json.loads(invitesim.preset_json("fig2a"))
    cfg["params"]["r"] = 50.0
    cfg["initial"] = [{"y": 0, "x": 0}]
    cfg["horizon"] = 5.0
    with tempfile.TemporaryDirectory() as out:
        manifest = json.loads(invitesim.run_config(json.dumps(cfg), out, workers=2))
        assert any(f["path"] == "plot_0.csv" for f in manifest["files"])

    summary = json.loads(invitesim.acceptance("closed-form"))
    assert summary["pass"] is True

    try:
        invitesim.preset_json("nope")
    except KeyError:
        pass
    else:
        raise AssertionError("unknown preset accepted")

    print("python smoke test: ok")


if __name__ == "__main__":
    main()
