"""Structural screening of right-hand sides before any solve.

The qualitative conclusions (monotonicity, symmetry, uniqueness of the
reflected difference sign) rest on sampled structural properties of the
sources f_i(x, z, p): positivity, a Lipschitz + non-increasing split in
the own component, non-increasing cross dependence, evenness in each
coordinate and rotational invariance of the x dependence.  This script
screens a few systems, including two that fail on purpose, and prints
the witnesses the checker produces.
"""

import numpy as np

from masym import RhsSystem, check_hypotheses, parse, power_coupled_system

BOX = {
    "x": [[-1.0, 1.0], [-1.0, 1.0]],
    "z": [[-2.0, -0.1], [-2.0, -0.1]],
    "p": [[-1.0, 1.0], [-1.0, 1.0]],
}

CANDIDATES = [
    ("power pair a=1, b=2", power_coupled_system(1.0, 2.0)),
    ("exponential coupling",
     RhsSystem(components=(parse("exp(0 - z2)"), parse("1 + (0 - z1) ^ 2")), n=2)),
    ("x-dependent weight",
     RhsSystem(components=(parse("(3 - x1 ^ 2 - x2 ^ 2) * (0 - z2)"),
                           parse("0 - z1")), n=2)),
    ("sign violation (planted)",
     RhsSystem(components=(parse("z2"), parse("0 - z1")), n=2)),
    ("monotonicity violation (planted)",
     RhsSystem(components=(parse("z2 + 3"), parse("0 - z1")), n=2)),
]


def main():
    for label, system in CANDIDATES:
        rep = check_hypotheses(system, BOX, samples=2048, seed=0)
        failed = [k for k, v in rep.statuses.items() if v == "fail"]
        passed = [k for k, v in rep.statuses.items() if v == "pass"]
        print(f"\n{label}:")
        print(f"  pass: {', '.join(passed) if passed else '(none)'}")
        if failed:
            print(f"  FAIL: {', '.join(failed)}")
            for name in failed:
                w = rep.witnesses.get(name)
                if w is not None:
                    print(f"    witness for {name}: {w}")
        else:
            print(f"  uniform lower bound c_f = {rep.c_f:.4f}, "
                  f"Lipschitz estimate {rep.lipschitz_z_estimate}")
            print(f"  cross quotient sign ok: {rep.quotient_sign_ok}")


if __name__ == "__main__":
    main()
