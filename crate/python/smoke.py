"""Build the extension, import it and exercise the bindings.

Run from anywhere: python3 python/smoke.py
"""

import importlib
import math
import shutil
import subprocess
import sys
import tempfile
from fractions import Fraction
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def build() -> Path:
    subprocess.run(
        ["cargo", "build", "--release", "-p", "tauer-path-py", "--features", "extension-module"],
        cwd=ROOT,
        check=True,
    )
    lib = ROOT / "target" / "release" / "libtauer_path_py.so"
    dest = Path(tempfile.mkdtemp()) / "tauer_path.so"
    shutil.copy(lib, dest)
    return dest.parent


def main() -> int:
    sys.path.insert(0, str(build()))
    tp = importlib.import_module("tauer_path")

    tower = tp.PrimeTower(4)
    assert tower.primes == ["2", "3", "7", "43"], tower.primes
    assert tower.products == ["2", "6", "42", "1806"]
    assert tower.grid(2) == ["0", "1/6", "1/3", "1/2", "2/3", "5/6", "1"]
    assert tower.canonical_level("11/21") == 3

    c = tp.Construction(4)
    assert c.seeding == "blockwise"
    labels = c.approximant("5/6", 2)
    assert len(labels) == 6 and len(set(labels)) == 6
    assert all(c.label_at("5/6", 2, m) == labels[m] for m in range(6))
    assert c.max_cross_pairing("11/21", 3) == 0.0
    assert len(c.gamma_projection("1/3", 3)) == 14

    # All minimal projections sum to 1; those below the cut to a projection of trace t.
    one = c.materialize("1/3", 2)
    assert all(abs(one[i][j] - (i == j)) < 1e-12 for i in range(6) for j in range(6))
    p = c.materialize("1/3", 2, count=c.cut("1/3", 2))
    p2 = [[sum(p[i][k] * p[k][j] for k in range(6)) for j in range(6)] for i in range(6)]
    assert all(abs(p2[i][j] - p[i][j]) < 1e-12 for i in range(6) for j in range(6))
    assert abs(sum(p[i][i] for i in range(6)) - 2) < 1e-12

    literal = tp.Construction(4, seeding="literal")
    assert literal.max_cross_pairing("5/6", 2) > 0.3
    assert literal.cutdown("1/6", "5/6", 3)["pass"]
    assert not c.cutdown("1/6", "5/6", 3)["pass"]

    gap = c.gap_estimate("0", "1", 2, probes=4, seed=3)
    assert gap["lower"] <= gap["upper"] + 1e-9 <= gap["bound"] + 1e-9
    assert math.isclose(gap["bound"], 2.0)
    assert gap["continuity"]["pass"]
    assert math.isclose(tp.distance_bound("1/6", "1/3"), 2 * math.sqrt(1 / 6))

    for cert in (
        c.singularity("1/2", 2),
        c.block_orthogonality("1/2", 2, 3, 4, 3),
        c.gamma_commutator("1/3", 3, samples=2),
        c.anticommutation("1/6", 2, [1, 3], unitary="projection"),
    ):
        assert cert["pass"], cert

    try:
        c.approximant("5/6", 1)
    except ValueError as err:
        assert "canonical" in str(err)
    else:
        raise AssertionError("level below the canonical one accepted")
    try:
        tp.Construction(4, seeding="other")
    except ValueError:
        pass
    else:
        raise AssertionError("unknown seeding accepted")

    t = Fraction(1, 3)
    assert Fraction(len(c.gamma_projection(str(t), 3)), 42) == t
    print("python smoke test: ok")
    return 0


if __name__ == "__main__":
    sys.exit(main())
