"""Smoke test for the measure_transport_py extension module.

Build and install first, e.g. `maturin develop -m crates/python/Cargo.toml`.
"""

import math

import measure_transport_py as mt


def close(a, b, tol):
    assert abs(a - b) <= tol, f"{a} vs {b}"


def main():
    mu = mt.ParticleMeasure([(0.25, 0.5), (0.75, 0.5)])
    assert len(mu) == 2
    close(mu.total_mass(), 1.0, 1e-15)
    close(mt.flat_norm(mu), mu.tv_norm(), 1e-9)

    d0 = mt.ParticleMeasure.dirac(0.0, 1.0)
    d1 = mt.ParticleMeasure.dirac(1.0, 1.0)
    close(mt.flat_distance(d0, d1), 2.0 / 3.0, 1e-9)
    cert = mt.flat_norm_certificate(d0.combine(1.0, d1, -1.0))
    close(cert["value"], 2.0 / 3.0, 1e-9)

    pos, stopped, hit = mt.flow_map(0.3, 1.0, "constant 1")
    assert stopped and pos == 1.0
    close(hit, 0.7, 1e-9)

    traj = mt.mild_solve(mu, "constant 0", "constant -1", 1.0, [0.5])
    assert traj.times() == [0.0, 0.5, 1.0]
    close(traj.last_slice().tv_norm(), math.exp(-1.0), 1e-8)

    euler = mt.euler_solve(mu, "kernel linear -1", "constant 0", 1.0, 16, oversample=2)
    close(euler.last_slice().first_moment(), 0.5, 1e-12)

    rows = mt.convergence_table(mu, "kernel gaussian 2 0.3", "constant 0", 1.0, 4)
    assert [r[0] for r in rows] == [1, 2, 3]
    assert rows[-1][3] < rows[0][3]

    defects = mt.defect_sweep(euler, "kernel linear -1", "constant 0")
    assert defects and all(d >= 0.0 for _, d in defects)

    try:
        mt.flow_map(0.5, 1.0, "warp 9")
    except ValueError:
        pass
    else:
        raise AssertionError("bad velocity spec accepted")

    assert mt.run_cli(["scenarios"]) == 0
    print("smoke test passed")


if __name__ == "__main__":
    main()
