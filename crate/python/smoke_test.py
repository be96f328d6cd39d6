"""Quick check that the extension imports and agrees with known values."""

import math

import fbsense


def close(a, b, tol=1e-9):
    return abs(a - b) <= tol * max(1.0, abs(b))


def main():
    cfg = fbsense.NetworkConfig(arrival_rate=0.1)
    sensing = fbsense.SensingConfig.for_network(cfg, 4)

    assert close(cfg.primary_outage(), 0.024806010626696)
    assert close(sum(sensing.idle_bins()), 0.9)

    silent = fbsense.AccessPolicy([0.0] * 4, "nofb")
    assert fbsense.throughput(cfg, sensing, silent) == 0.0
    assert close(fbsense.primary_service_rate(cfg, sensing, silent), 0.243798497343326)

    nofb = fbsense.solve_nofb(cfg, sensing)
    fb = fbsense.solve_feedback(cfg, sensing)
    hard = fbsense.baseline_hard_decision(cfg, sensing)
    genie = fbsense.baseline_genie(cfg)
    assert hard.objective <= nofb.objective <= fb.objective <= genie.objective
    assert fb.tau_star is not None and fb.feasible
    assert fbsense.delay(cfg, sensing, fb.policy) < fbsense.delay(cfg, sensing, nofb.policy)
    assert fbsense.delta_pi0(cfg, sensing, fb.policy) >= 0.0

    report = fbsense.simulate(cfg, sensing, fb.policy, slots=200_000, warmup=2_000, replications=4)
    mean, se = report["mu_s"]
    assert abs(mean - fb.objective) <= 5 * se, (mean, se, fb.objective)

    hot = fbsense.NetworkConfig(arrival_rate=0.3)
    assert fbsense.throughput(hot, sensing, silent) is None
    assert not fbsense.solve_nofb(hot, sensing).feasible

    csv = fbsense.run_sweep("sweep.values = [0.0, 0.1]\n")
    assert csv.splitlines()[0].startswith("sweep_value,scheme,feasible,mu_s")
    assert len(csv.splitlines()) == 1 + 2 * 4

    try:
        fbsense.run_sweep("network.r_pd = -1\n")
    except ValueError as e:
        assert "network.r_pd" in str(e)
    else:
        raise AssertionError("invalid config accepted")

    assert math.isfinite(fb.objective)
    print(f"ok: nofb {nofb.objective:.5f}, fb {fb.objective:.5f}, genie {genie.objective:.5f}")


if __name__ == "__main__":
    main()
