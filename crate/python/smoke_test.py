"""Smoke test for the qfound_py extension.

Build and install first:
    maturin build --release -m crates/qfound-py/Cargo.toml -o dist
    pip install dist/qfound_py-*.whl
or point QFOUND_PY_LIB at a cargo-built libqfound_py.so.
"""

import importlib.machinery
import importlib.util
import os
import sys
from fractions import Fraction


def load():
    path = os.environ.get("QFOUND_PY_LIB")
    if not path:
        import qfound_py

        return qfound_py
    loader = importlib.machinery.ExtensionFileLoader("qfound_py", path)
    spec = importlib.util.spec_from_loader("qfound_py", loader)
    mod = importlib.util.module_from_spec(spec)
    loader.exec_module(mod)
    return mod


def main():
    q = load()

    num, den, p = q.hardy_coincidence()
    assert (num, den) == (1, 16), (num, den)
    assert abs(p - 1 / 16) <= 1e-12
    probs = q.hardy_probabilities("both")
    assert sum(Fraction(v) for v in probs.values()) == 1, probs
    assert q.hardy_lhv_refuted()

    assert not q.ks_colorable(q.ks117_text())
    assert q.ks_colorable("1: 1 ; 0 ; 0\n2: 0 ; 1 ; 0\n3: 0 ; 0 ; 1\n")
    err, resid = q.gleason_roundtrip(7)
    assert err <= 1e-8 and resid <= 1e-8, (err, resid)

    assert q.fr_probability() == (1, 12)
    assert q.fr_verdict("plain").startswith("contradiction")
    assert not q.fr_verdict("contextual").startswith("contradiction")

    assert q.way_cutoff(1, 0.4) == 5
    assert q.hepp_coherence(3.141592653589793, 3) <= 1e-12

    results = q.accept("hardy")
    assert [r[0] for r in results] == [1, 2] and all(r[2] for r in results), results

    try:
        q.hardy_coincidence("sideways")
    except ValueError:
        pass
    else:
        raise AssertionError("bad config accepted")

    print("smoke test passed")


if __name__ == "__main__":
    sys.exit(main())
