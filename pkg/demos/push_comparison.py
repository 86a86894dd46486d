"""Teach, learn and replay a short two-arm lift, then push one arm.

Runs the bundled scenario cut to 6 s so it finishes in about a minute:
the demonstration is solved by inverse kinematics, the CMPs are learned from a
stiff run, and all four controller variants are replayed under a 25 N push.

    python demos/push_comparison.py
"""

import re

from bimanual_cmp.harness import scenario as sc
from bimanual_cmp.harness.config import default_scenario_path, parse_scenario

text = default_scenario_path().read_text().replace("duration = 30.0", "duration = 6.0")
text = re.sub(r"keyframes =\n(    .*\n)+", "keyframes =\n    0 0 0 0\n    1 0 0 0\n    3 0 0 0.1\n    6 0 0 0.1\n", text)
text = re.sub(r"segments =\n(    .*\n)+", "segments =\n    ramp 3.0 3.5 0 25 0 0 0 0\n"
              "    hold 3.5 4.5 0 25 0 0 0 0\n    release 4.5 5.0 0 25 0 0 0 0\n", text)
config = parse_scenario(text)

demo = sc.demonstrate(config)
print(f"demonstration: {len(demo.t)} samples, worst task error {demo.clik.error.max():.2e}")

learned = sc.learn(config, demo)
print(f"stiff learning: {learned.iterations} run(s), joint tracking error {learned.tracking_error:.2e} rad")

clean = sc.replay(config, learned.cmps, demo, "RecOnly", perturbation=None)
print(f"compliant replay without push: max abs error {1e3 * clean.metrics.max_abs_error:.2f} mm")

comparison = sc.compare_variants(config, learned.cmps, demo)
print()
print(comparison.table())
print()
for label, ok, detail in comparison.checks():
    print(f"{'ok  ' if ok else 'not '} {label}: {detail}")
