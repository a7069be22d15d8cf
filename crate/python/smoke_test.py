"""Build the extension with cargo and exercise it from Python.

    python3 python/smoke_test.py
"""

import os
import shutil
import subprocess
import sys
import tempfile

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def build():
    subprocess.run(
        ["cargo", "build", "--release", "-p", "relmotion-py", "--features", "extension-module"],
        cwd=ROOT,
        check=True,
    )
    lib = os.path.join(ROOT, "target", "release", "librelmotion_py.so")
    out = tempfile.mkdtemp()
    shutil.copy(lib, os.path.join(out, "relmotion_py.so"))
    return out


def main():
    sys.path.insert(0, build())
    import relmotion_py as rp

    case = rp.SystemCase.case_a()
    assert case.m == 2 and len(case) == 2

    p = rp.electrical_power(case, [0.3, 0.0])
    assert abs(p[0] - 0.29552020666133955) < 1e-15 and abs(p[0] + p[1]) < 1e-15

    eq = rp.solve_equilibrium(case)
    assert max(abs(d) for d in eq) < 1e-9

    ev = rp.eigenvalues(case, eq)
    w = (2.0 - 0.0025) ** 0.5
    assert abs(ev[0] - complex(-0.05, w)) < 1e-10
    assert abs(ev[2]) < 1e-10 and abs(ev[3] + 0.1) < 1e-10

    j = rp.jacobian(case, eq)
    assert j[2][0] == -1.0 and j[2][2] == -0.1

    report = rp.run_verification(case, samples=20)
    assert report["verification"]["overall_pass"], report["verification"]

    bad = rp.run_verification(rp.SystemCase.case_a_nonuniform(), samples=20)
    failing = [c["name"] for c in bad["verification"]["checks"] if not c["pass"]]
    assert failing == ["lemma_1_2", "lemma_1_4", "lemma_2_1", "claim_1", "claim_2"], failing

    t, deltas, speeds = rp.simulate(case, 1.0, 0.01, ddelta=[0.1, 0.0])
    assert len(t) == 101 and deltas[0] == [0.1, 0.0]

    rep = rp.decoupling_experiment(case, 10.0, 1e-3, ddelta=[0.1, 0.0])
    assert rep["max_pair"] < 1e-6, rep

    again = rp.SystemCase.from_json(case.to_json())
    assert again.C == case.C

    try:
        rp.SystemCase(20.0, [10, 10], [2, 2], [0, 0], [1, 1], [0, 0], [[0.5, 1], [1, 0]], [[0, 0], [0, 0]])
    except ValueError as e:
        assert "network.C[0][0]" in str(e)
    else:
        raise AssertionError("nonzero diagonal accepted")

    print("python smoke test ok")


if __name__ == "__main__":
    main()
