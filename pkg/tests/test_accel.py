"""The HYPOGUARD_NUMBA env flag selects a pure-NumPy fallback that
produces bit-identical results to the JIT path."""

import json
import os
import subprocess
import sys
from pathlib import Path

from hypoguard._accel import NUMBA_ENV_VAR, numba_requested

DATA_DIR = Path(__file__).resolve().parents[1] / "src" / "hypoguard" / "data"

_PROBE = """
import json
import numpy as np
from hypoguard._accel import NUMBA_ENABLED
from hypoguard.population import load_patient_json
from hypoguard.simulator import ScenarioSample, load_sim_config, rollout

profile = load_patient_json({data_dir!r} + "/patient_adult.json")
sim, ctrl = load_sim_config({data_dir!r} + "/sim_adult.json")
sample = ScenarioSample(params=profile.nominal_params(), carbs_g=85.0,
                        fast_hours=9.0, seed=11)
r = rollout(sample, ctrl, sim)
print(json.dumps({{"numba": NUMBA_ENABLED, "min_bg": r.min_bg,
                  "bg_sum": float(r.bg.sum()), "ins_sum": float(r.insulin.sum())}}))
"""


def _probe(numba_flag):
    env = dict(os.environ)
    env[NUMBA_ENV_VAR] = numba_flag
    out = subprocess.run(
        [sys.executable, "-c", _PROBE.format(data_dir=str(DATA_DIR))],
        capture_output=True, text=True, env=env, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def test_env_flag_parsing(monkeypatch):
    for val in ("0", "false", "no", "OFF"):
        monkeypatch.setenv(NUMBA_ENV_VAR, val)
        assert not numba_requested()
    for val in ("1", "true", "anything"):
        monkeypatch.setenv(NUMBA_ENV_VAR, val)
        assert numba_requested()
    monkeypatch.delenv(NUMBA_ENV_VAR)
    assert numba_requested()


def test_fallback_bitwise_identical_to_jit():
    jit = _probe("1")
    fallback = _probe("0")
    assert jit["numba"] is True
    assert fallback["numba"] is False
    assert jit["min_bg"] == fallback["min_bg"]
    assert jit["bg_sum"] == fallback["bg_sum"]
    assert jit["ins_sum"] == fallback["ins_sum"]
