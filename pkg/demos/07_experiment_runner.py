"""Running a scenario from Python and comparing curves.

Same entry points as ``noma-vlc run`` and ``noma-vlc compare``; the bundle
lands in a temporary directory.
"""
import json
import tempfile
from pathlib import Path

from noma_vlc.experiments import compare, resolve_config, run

out = Path(tempfile.mkdtemp(prefix="noma_vlc_"))
cfg = resolve_config({"scenario": "fig8", "trials": 100_000, "snr": [110.0, 120.0, 130.0]})
meta = run(cfg, out)
print("wrote", meta["files"], "to", out)
print((out / "bound.csv").read_text())

report = compare(out / "bound.csv", out / "mc.csv", rule="ge", tol=0.0)
print(json.dumps({k: report[k] for k in ("rule", "pass", "n_judged", "max_deviation")}, indent=2))
