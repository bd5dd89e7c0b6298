#!/usr/bin/env python3
"""Smoke test for the levelset_lab_py extension module.

Builds the cdylib with cargo (release), copies it next to this script as
levelset_lab_py.so, imports it, and exercises the main types and operations.

Run from the repository root (or anywhere):  python3 python/smoke_test.py
"""

import math
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent


def build_extension() -> Path:
    subprocess.run(
        ["cargo", "build", "-p", "levelset-lab-py", "--release"],
        cwd=REPO,
        check=True,
    )
    built = REPO / "target" / "release" / "liblevelset_lab_py.so"
    if not built.exists():  # e.g. macOS
        built = REPO / "target" / "release" / "liblevelset_lab_py.dylib"
    target = Path(__file__).resolve().parent / "levelset_lab_py.so"
    shutil.copy2(built, target)
    return target


def main() -> int:
    build_extension()
    sys.path.insert(0, str(Path(__file__).resolve().parent))
    import levelset_lab_py as lab

    checks = 0

    def check(name, cond):
        nonlocal checks
        if not cond:
            print(f"FAIL: {name}")
            raise SystemExit(1)
        checks += 1
        print(f"ok: {name}")

    # deterministic sampling
    model = lab.FieldModel.iid(64, 1.0)
    kernel = model.factorize()
    a = kernel.sample(7, 3).values()
    b = kernel.sample(7, 3).values()
    c = kernel.sample(7, 4).values()
    check("sampling is reproducible per stream", a == b and a != c)

    # estimate vs the closed-form pair oracle
    pair = lab.FieldModel.iid(2, 1.0)
    est = lab.estimate_g(pair.factorize(), [0, 1], 50_000, 1, 0)
    exact = lab.analytic_g_pair(1.0, 1.0, 0.0)
    check(
        "estimate_g matches analytic pair value",
        abs(est.mean - exact) < 4 * est.stderr,
    )
    check("pair value is 1/sqrt(pi)", abs(exact - 1 / math.sqrt(math.pi)) < 1e-12)

    # tail helpers
    check("upper tail at 0 is one half", lab.gaussian_upper_tail(0.0) == 0.5)
    check(
        "concentration bound at z=0 is vacuous",
        lab.borell_tail_bound(0.0, 1.0) == 2.0,
    )
    check(
        "mixture gain peaks on the diagonal",
        abs(lab.mixture_coefficient(0.6, 0.6) - 1.0) < 1e-12,
    )

    # two-copy mixture endpoints
    bar = kernel.sample(9, 0)
    tilde = kernel.sample(9, 1)
    mixed = lab.decompose_sample(1.0, bar, tilde)
    check("mixture endpoint gamma=1 returns the first copy", mixed.values() == bar.values())

    # level set + conditional estimate on the lattice field
    dgff = lab.FieldModel.dgff(17)
    dkernel = dgff.factorize()
    g_v = lab.estimate_g(dkernel, list(range(dgff.size())), 400, 11, 0)
    sample = dkernel.sample(11, 1000)
    level = lab.extract_level_set(sample, 0.5, g_v.mean)
    check("level set threshold recorded", abs(level.threshold - 0.5 * g_v.mean) < 1e-12)
    if len(level) > 0:
        g_u = lab.conditional_g_estimate(dkernel, level, 200, 11, 2000)
        check("conditional estimate below the full-set estimate", g_u.mean < g_v.mean)

    # epsilon net on the sign field
    sign = lab.FieldModel.sign_field(2)
    centers, growth = lab.build_epsilon_net(sign, [0, 1, 2, 3], 0.5)
    check("sign n=2 net keeps all four points", len(centers) == 4)
    check("net passes the verification oracle", lab.verify_net(sign, [0, 1, 2, 3], centers, 0.5))

    # valley certificate with a floor below every value
    report = lab.find_multiple_valleys(lab.FieldModel.iid(16, 1.0), kernel_sample_16(lab), 2.0, 5.0, 0.5)
    check(
        "wide-floor valley certificate accepts the full pool",
        report["pool_size"] == 16 and report["cond_b"] and report["cond_c"],
    )

    # config-driven run through the library runner
    with tempfile.TemporaryDirectory() as tmp:
        cfg = Path(tmp) / "run.cfg"
        csv = Path(tmp) / "out.csv"
        cfg.write_text(
            "experiment = estimate-g\nmodel = sign\nsizes = 4\n"
            "outer_replicates = 1\ninner_replicates = 5000\nbase_seed = 3\n"
            f"csv_out = {csv}\n"
        )
        manifest = lab.run_config(str(cfg))
        check("runner reports row counts", '"size=4": 1' in manifest)
        header = csv.read_text().splitlines()[0]
        check("runner wrote the estimate-g CSV", header.startswith("experiment,model,size"))

    print(f"smoke test passed ({checks} checks)")
    return 0


def kernel_sample_16(lab):
    model = lab.FieldModel.iid(16, 1.0)
    return model.factorize().sample(21, 0)


if __name__ == "__main__":
    sys.exit(main())
