import json
import os
import subprocess
import sys

import numpy as np
import pytest

SCRIPT = r"""
import json
import numpy as np
from srflows import _jit, entropy, hamiltonian, integrate, models

m = models.make_suspension_model([[2, 1], [1, 1]])
H = hamiltonian.sr_hamiltonian(m)
x0 = hamiltonian.energy_shell_points(m, 1, seed=3)[0]
cfg = integrate.IntegratorConfig(dt=0.01)
tr = integrate.flow(H, x0, 2.0, cfg)
_, g = integrate.flow_with_tangent(H, x0, 5.0, cfg, reduce=m.quotient.reduce_phase)
span = entropy.spanning_entropy([[2, 1], [1, 1]], [0.05], range(2, 7))
print(json.dumps({
    "numba": _jit.HAS_NUMBA,
    "final": tr.final.tolist(),
    "rates": g.rates.tolist(),
    "logS": span.diagnostics["per_eps"][0]["log_S"],
}))
"""


def _run(disable: bool) -> dict:
    env = dict(os.environ, SRFLOWS_NO_NUMBA="1" if disable else "0")
    res = subprocess.run([sys.executable, "-c", SCRIPT], capture_output=True, text=True, env=env, timeout=600)
    assert res.returncode == 0, res.stderr
    return json.loads(res.stdout)


@pytest.mark.slow
def test_numba_and_numpy_paths_agree():
    fast, slow = _run(False), _run(True)
    assert fast["numba"] and not slow["numba"]
    assert np.allclose(fast["final"], slow["final"], rtol=0, atol=1e-12)
    assert np.allclose(fast["rates"], slow["rates"], rtol=0, atol=1e-10)
    assert fast["logS"] == slow["logS"]
