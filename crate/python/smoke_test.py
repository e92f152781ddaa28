"""Quick end-to-end check of the Python extension.

    maturin develop -m crates/python/Cargo.toml --release
    python3 python/smoke_test.py
"""

import math
import tempfile

import gff_thinlab_py as g


def main():
    op = g.GreensOperator(2, 32)
    n = len(op)
    assert n == 31 * 31

    ones = [1.0] * n
    var = op.variance(ones)
    assert var > 0
    assert op.entry(0, 5) == op.entry(5, 0)

    s = op.sample(7)
    masses = s.open_cell_masses(2)
    assert len(masses) == 16
    assert s.at([0, 3]) == 0.0
    total = s.pair(ones)
    assert math.isfinite(total)

    assert abs(g.bm_hit_prob(6.0) - 0.6830913983096086) < 1e-12

    st = g.run_bbm(2, 1.0, 5, seed=3)
    st.check_invariants()
    recs = st.records()
    assert len(recs) == 6 and st.generation == 5
    assert st.box_count(5) >= st.active_count

    fop = g.GreensOperator(2, 64)
    fst = g.run_field_coupled(fop, 4, seed=1)
    fst.check_invariants()
    assert fst.observables(4)["telescoping_residual"] < 1e-9

    gb = g.gaussian_bound_check([0.0, 0.5], [0.01, 0.1, 0.3], [0.05])
    assert 2.0 < gb["fitted_constant"] < 3.0

    seg = "kind=segment from=0.1,0.3 to=0.9,0.3"
    rows = g.deterministic_thin_report(op, seg, 0, 3)
    assert rows[-1]["variance"] < rows[0]["variance"]
    assert g.box_count(seg, 2, 4) >= 12

    try:
        g.GreensOperator(2, 48)
    except ValueError:
        pass
    else:
        raise AssertionError("grid 48 should be rejected")

    with tempfile.TemporaryDirectory() as out:
        res = g.run_experiment("experiment = das-validate\nlevels = 3\n", out)
        assert res["all_pass"], res["criteria"]
        assert any(f.endswith("manifest.json") for f in res["files"])

    print("smoke test ok: version", g.__version__)


if __name__ == "__main__":
    main()
