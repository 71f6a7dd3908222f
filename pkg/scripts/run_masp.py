"""Run the mini-MASP integration and compare merged values with the fixture generator's hand computation."""

from __future__ import annotations

import argparse
import importlib.util
import sys
import time
from pathlib import Path

from ologmerge.eqlogic import Lit
from ologmerge.integrate import integrate
from ologmerge.syntax import load
from ologmerge.vcemit import consistency_check

ROOT = Path(__file__).resolve().parent.parent


def _generator():
    spec = importlib.util.spec_from_file_location("make_masp_fixture", ROOT / "scripts" / "make_masp_fixture.py")
    mod = importlib.util.module_from_spec(spec)
    sys.modules[spec.name] = mod
    spec.loader.exec_module(mod)
    return mod


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", type=Path, default=ROOT / "fixtures" / "masp" / "problem.olog")
    args = ap.parse_args()

    doc = load(args.config)
    spec = next(iter(doc.problems.values()))
    t0 = time.perf_counter()
    r = integrate(doc.problem(spec.name), spec.bounds)
    elapsed = time.perf_counter() - t0
    print(f"integrated in {elapsed:.2f}s: {r.model.summary()}")
    for name, vcs in r.vcs.items():
        print(f"  {name}: " + ", ".join(f"{v.id}={v.status.value}" for v in vcs))
    print(f"  consistency: {consistency_check(r.model).verdict.value}")
    for node in sorted(r.diffs):
        d = r.diffs[node]
        print(f"  exchange into {node}: " + ("no changes" if d.is_empty else f"rows gained {sum(d.rows_gained.values())}"))

    gen = _generator()
    expected = sorted(v for k in gen.SECTIONS for v in gen.derived(gen.section(k))["burst70"])
    m = r.model
    col = m.schema.symbol("70% Burst (corrected)", "MASP Calc. Step 1")
    got = sorted(v.value for v in m.attr_values[col].values() if isinstance(v, Lit))
    print(f"70% Burst (corrected): {len(got)} known values, {len(expected)} expected, match={got == expected}")


if __name__ == "__main__":
    main()
