#!/usr/bin/env python3
"""Smoke test for the latentconn_py extension module.

Build the module first:

    cargo build --release -p latentconn-py

then run this script from the repository root:

    python3 python/smoke_test.py
"""

import json
import math
import shutil
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent


def import_module():
    built = REPO / "target" / "release" / "liblatentconn_py.so"
    if not built.exists():
        sys.exit("build the extension first: cargo build --release -p latentconn-py")
    staging = Path(tempfile.mkdtemp(prefix="latentconn_py_"))
    shutil.copy(built, staging / "latentconn_py.so")
    sys.path.insert(0, str(staging))
    import latentconn_py

    return latentconn_py


def approx(a, b, tol=1e-9):
    assert abs(a - b) < tol, f"{a} != {b} (tol {tol})"


def main():
    lc = import_module()

    # connectivity utilities on the worked 3-region example
    approx(lc.pearson_corr([1.0, 2.0, 3.0], [3.0, 2.0, 1.0]), -1.0)
    approx(lc.pearson_corr([1.0, 2.0, 3.0], [1.0, 3.0, 2.0]), 0.5)
    matrix = lc.build_connectivity([[1.0, 3.0, 1.0], [2.0, 2.0, 3.0], [3.0, 1.0, 2.0]])
    approx(matrix[0][1], 1.0)
    approx(matrix[0][2], 0.5)
    edges = lc.vectorize_upper(matrix)
    assert edges == [matrix[0][1], matrix[0][2], matrix[1][2]]
    back = lc.devectorize(edges)
    assert back == matrix
    strengths = lc.fcs(matrix)
    approx(strengths[0], 1.5)
    approx(strengths[2], 1.0)
    assert len(lc.aal90_labels()) == 90
    assert lc.aal90_labels()[0] == "PreCG.L"
    vec = lc.assemble_input([0.2, 0.3, 0.4], 16.5)
    assert len(vec) == 4 and abs(vec[-1] - 0.165) < 1e-12

    # statistics
    t, df, p = lc.ttest_ind([2.1, 2.0, 1.9, 2.0], [1.0, 1.1, 0.9, 1.0])
    approx(t, 10.0 * math.sqrt(3.0), 1e-9)
    assert df == 6.0 and p < 1e-5
    r, p, n = lc.pearson_with_p([1.0, 2.0, 3.0], [1.0, 3.0, 2.0])
    approx(r, 0.5)
    approx(p, 2.0 / 3.0)
    assert n == 3
    approx(lc.roc_auc([1.0, 3.0, 2.0, 4.0], [True, True, False, False]), 0.25)

    # a tiny end-to-end run: synthesize, train briefly, analyze, decode
    work = Path(tempfile.mkdtemp(prefix="latentconn_smoke_"))
    synth_dir = work / "synth"
    lc.synth_cohort(json.dumps({"subjects": 24, "seed": 13}), str(synth_dir))
    manifest = synth_dir / "manifest.csv"
    assert manifest.exists()
    assert len(list((synth_dir / "edges").glob("*.csv"))) == 24

    checkpoint = lc.train_model(
        str(manifest), str(synth_dir / "edges"), str(work / "train"), json.dumps({"epochs": 2})
    )
    report = json.loads(
        lc.analyze(checkpoint, str(manifest), str(synth_dir / "edges"), str(work / "analyze"))
    )
    assert report["n_subjects"] == 24
    assert report["checkpoint_hash"]

    model = lc.VaeModel.load(checkpoint)
    assert model.n_edges == 4005 and model.latent_dim == 2
    means, sds, mean_age = model.latent_stats()
    assert len(means) == 2 and len(sds) == 2 and mean_age > 0

    decoded = model.decode(means, mean_age)
    assert len(decoded) == 4005
    assert all(0.0 < v < 1.0 for v in decoded)
    generated = model.generate_matrix(means, mean_age)
    assert len(generated) == 90
    assert generated[0][0] == 0.0 and generated[3][7] == generated[7][3]
    delta = model.feature_delta(0, 0.0)
    assert all(v == 0.0 for row in delta for v in row)

    mean_code, log_var = model.encode(decoded, mean_age)
    assert len(mean_code) == 2 and len(log_var) == 2

    shutil.rmtree(work)
    print("smoke test passed")


if __name__ == "__main__":
    main()
