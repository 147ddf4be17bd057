"""The invariant battery itself: passes on a healthy build, and actually
catches an injected defect (mutation sanity)."""

import numpy as np

import streamhedge.verify as verify_mod
from streamhedge.families import grad_log_partition, log_partition


def test_battery_passes_on_fresh_build():
    lines = []
    failures = verify_mod.run_battery(print_fn=lines.append)
    assert failures == 0
    assert len(lines) == len(verify_mod.CHECKS)
    assert all(line.startswith("PASS") for line in lines)


def test_battery_catches_sign_flipped_kl(monkeypatch):
    # a wrong-signed divergence must trip the strong-convexity identity
    def broken_kl(model, theta1, theta2):
        mu1 = grad_log_partition(model, np.asarray(theta1, dtype=np.float64))
        t1 = np.asarray(theta1, dtype=np.float64)
        t2 = np.asarray(theta2, dtype=np.float64)
        return -(
            log_partition(model, t2)
            - log_partition(model, t1)
            - float(np.dot(mu1, t2 - t1))
        )

    monkeypatch.setattr(verify_mod, "kl_divergence", broken_kl)
    assert verify_mod._check_strong_convexity(n=50) is False
