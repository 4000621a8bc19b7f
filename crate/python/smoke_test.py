"""Smoke test for the Python bindings.

Builds the extension with cargo (unless PLM_PY_LIB points at a built
library), loads it as module `plm` and exercises each entry point.
"""

import importlib.util
import math
import os
import pathlib
import shutil
import subprocess
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent


def locate_library():
    explicit = os.environ.get("PLM_PY_LIB")
    if explicit:
        return pathlib.Path(explicit)
    subprocess.run(["cargo", "build", "--release", "-p", "plm-py"], cwd=ROOT, check=True)
    for name in ("libplm_py.so", "libplm_py.dylib", "plm_py.dll"):
        path = ROOT / "target" / "release" / name
        if path.exists():
            return path
    sys.exit("built library not found")


def load(lib):
    tmp = pathlib.Path(tempfile.mkdtemp())
    target = tmp / ("plm.pyd" if lib.suffix == ".dll" else "plm.so")
    shutil.copy(lib, target)
    spec = importlib.util.spec_from_file_location("plm", target)
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module


def main():
    plm = load(locate_library())

    b = plm.bhattacharyya("exp:2", "exp:1")
    assert abs(b - 2 * math.sqrt(2) / 3) < 1e-8, b
    assert plm.threshold_margin(1.0, "exp:1", "exp:1") == 0.0
    assert abs(plm.exponential_threshold(10**6) - 4.0) < 1e-2

    text = plm.generate("exponential", 6, 3.0, seed=5)
    assert text.startswith("PLM v1 n=6")
    perm, error, objective = plm.solve(text)
    assert sorted(perm) == list(range(6))
    assert error is not None and 0.0 <= error <= 1.0
    assert math.isfinite(objective)

    dump = plm.posterior_dump(text).splitlines()
    assert len(dump) == 720
    total = sum(math.exp(float(line.split()[-1])) for line in dump)
    assert abs(total - 1.0) < 1e-9

    err2 = plm.asymptotic_error(2.0)
    assert abs(err2 - 0.210167) < 1e-5, err2

    inst = plm.generate("unweighted", 3000, 4.0, seed=1)
    report = plm.cyclefind(inst, [("subsets", "4")])
    assert report.splitlines()[-1].startswith("# trees=")

    config = "kind=phase_diagram\nmodel=unweighted\nn=100\nparam=0.5\ntrials=4\nseed=1\n"
    csv, passed = plm.experiment(config, workers=2)
    assert csv.splitlines()[0].startswith("model,n,param")
    assert passed

    csv, passed = plm.check(["matching_count"], seed=1)
    assert passed, csv

    try:
        plm.bhattacharyya("bogus", "exp:1")
    except ValueError:
        pass
    else:
        raise AssertionError("expected ValueError")

    print("smoke test passed")


if __name__ == "__main__":
    main()
