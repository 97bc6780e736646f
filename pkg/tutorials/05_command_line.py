"""
Running experiments from config files
=====================================

Every command of the ``qvilab`` CLI is a function call as well. This script
writes a config, runs all commands and lists the artifacts.
"""

import tempfile
from pathlib import Path

from qvilab import load_problem, run
from qvilab.harness import COMMANDS

config = """\
# impulse control on 32 interior nodes
problem = impulse
n = 32
kappa = 1

[parameter]
u = 10
h = 1
q = 1, 2, inf

[checks]
seed = 0
samples = 3
"""

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "impulse.ini"
    path.write_text(config)
    inst, cfg = load_problem(path)
    for command in COMMANDS:
        out = Path(tmp) / command
        result = run(command, inst, cfg, out)
        files = ", ".join(sorted(p.name for p in out.iterdir()))
        print(f"{command:10s} {'PASS' if result.passed else 'FAIL'}  {files}")
    print()
    print((Path(tmp) / "solve" / "summary.txt").read_text())
