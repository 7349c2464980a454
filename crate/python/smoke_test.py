"""Smoke test for the slab_adjoint_py extension module.

Build and install first:

    pip install maturin
    cd crates/python && maturin build --release -o dist && pip install dist/*.whl
"""

import math

import slab_adjoint_py as sa


def close(x, y, rel):
    return abs(x - y) <= rel * max(abs(x), abs(y))


def main():
    p = sa.Parameters.nominal(10.0)
    assert math.isclose(p.k, math.sqrt(0.0197 / 0.16))

    r = sa.response(p)
    assert close(r, 3.77563e9, 1e-5), r

    quad = sa.first_order(p)
    exact = sa.first_order(p, method="closed-form")
    for a, b in zip(quad, exact):
        assert close(a, b, 1e-4), (a, b)
    rel = sa.first_order(p, relative=True)
    assert close(rel[2], 1.0, 1e-6) and close(rel[3], 1.0, 1e-6), rel

    m = sa.second_order(p, method="closed-form")
    for i in range(4):
        for j in range(4):
            assert m[i][j] == m[j][i]
    assert close(m[0][0], 1.9457e13, 1e-4), m[0][0]

    info = sa.analyze_response(p, n_nodes=2001)
    assert info["adjoint_solves"] == 4

    cases = dict(sa.standard_cases())
    mom = sa.moments(p, cases["case 1"])
    assert close(mom["relative_std_dev"], 0.15, 1e-9), mom
    assert mom["skewness"] == 0.0

    try:
        sa.Parameters.nominal(60.0)
    except ValueError:
        pass
    else:
        raise AssertionError("detector outside the slab was accepted")

    print("python smoke test passed: R =", r, "S =", quad)


if __name__ == "__main__":
    main()
