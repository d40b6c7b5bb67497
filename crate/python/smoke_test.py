"""Import the extension and exercise each binding once.

Build first with `cargo build --release -p decay-spectra-py`; the script copies
target/release/libdecay_spectra_py.so next to a temporary import path. Set
DECAY_SPECTRA_SO to use a different build, or install with maturin and the
installed module is used as is.
"""

import importlib
import math
import os
import shutil
import sys
import tempfile
from pathlib import Path


def load():
    try:
        return importlib.import_module("decay_spectra_py")
    except ImportError:
        pass
    root = Path(__file__).resolve().parent.parent
    built = Path(os.environ.get("DECAY_SPECTRA_SO", root / "target/release/libdecay_spectra_py.so"))
    if not built.exists():
        sys.exit(f"missing {built}; run cargo build --release -p decay-spectra-py")
    tmp = Path(tempfile.mkdtemp())
    shutil.copy(built, tmp / "decay_spectra_py.so")
    sys.path.insert(0, str(tmp))
    return importlib.import_module("decay_spectra_py")


def main():
    ds = load()

    assert abs(ds.tau(1.0) - 1 / 68) < 1e-12
    assert ds.tau(2.0, field="zero") == 0.0
    assert abs(ds.integral_a_squared(0.5, 0.0, 10.0) - math.asinh(10.0)) < 1e-10

    runs = ds.simulate("alpha = 1\nfield = zero\nlength = 100\nj_lo = 1\nj_hi = 2\nn_realizations = 2\n")
    assert [r["index"] for r in runs] == [0, 1]
    mean, sd, count = ds.gap_stats(runs[0]["points"])
    assert abs(mean - math.pi) < 1e-2 and count > 5

    clock = ds.oracle_points("clock", 0.0, 1000.0, 1)
    poisson = ds.oracle_points("poisson", 0.0, 1000.0, 2)
    sine = ds.oracle_points("sine_beta", -40.0, 40.0, 3, param=2.0)
    assert abs(ds.gap_stats(clock)[0] - math.pi) < 1e-9
    assert len(sine) > 10
    assert ds.ks_two_sample(clock, poisson) > 0
    assert ds.w1_empirical(clock, clock) == 0.0

    density, u = ds.expbm_measure(0.2, 7, cells=64)
    assert len(density) == 64 and 0.0 <= u <= 1.0
    assert abs(sum(density) / 64 - 1.0) < 1e-9

    try:
        ds.tau(1.0, field="sin")
    except ValueError:
        pass
    else:
        raise AssertionError("bad field accepted")
    print("python smoke test: ok")


if __name__ == "__main__":
    main()
