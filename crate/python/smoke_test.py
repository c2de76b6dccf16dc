"""Smoke test for the homcap Python extension.

Build and install first, e.g. `maturin develop -m crates/py/Cargo.toml --release`
or `pip install crates/py`.
"""
import json
import math

import homcap_py as hc


def main():
    square = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]
    d = hc.persistence(square, 2.0)
    h1 = [p for p in d.pairs() if p[0] == 1]
    assert h1 == [(1, 1.0, math.sqrt(2.0))], h1
    assert d.betti_at(1.2, 1) == 1 and d.betti_at(1.5, 1) == 0
    assert hc.PersistenceDiagram.from_json(d.to_json()).pairs() == d.pairs()

    ring = [[True] * 3, [True, False, True], [True] * 3]
    assert hc.mask_homology(ring) == (1, 1)

    data = hc.make_dataset(2, 1, n=5000, seed=3)
    assert len(data) == 5000 and data.ground_truth == [2, 1]
    assert hc.recover_homology(data) == [2, 1]

    model, summary = hc.train_model(data, 1, 8, seed=1, max_steps=300)
    assert 0.0 <= summary["best_error"] <= 1.0
    assert len(model.predict(data.points[:5])) == 5
    b0, b1 = model.region_betti([[-3.5, -2.0], [3.5, 2.0]], 64)
    assert b0 >= 0 and b1 >= 0

    report = json.loads(hc.select_architecture(data, combine="positive"))
    assert report["profile"] == [2, 1], report["profile"]
    assert len(report["recommendations"]) == 4

    try:
        hc.persistence([[0.0, 0.0], [1.0]], 1.0)
    except ValueError as e:
        assert "dimension_mismatch" in str(e)
    else:
        raise AssertionError("ragged input accepted")
    print("python smoke test: ok")


if __name__ == "__main__":
    main()
