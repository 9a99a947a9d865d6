"""Shared pytest configuration.

Prints a one-line verdict per acceptance criterion after the run so the
acceptance gate's outcome is visible even with output capture enabled.
"""

ACCEPTANCE_TITLES = {
    "c01": "weight identity (log-gamma oracle, partial sums)",
    "c02": "discrete Caputo consistency (first-order convergence)",
    "c03": "alpha=1 reduction to backward-Euler convex splitting",
    "c04": "small-instance dense-oracle equivalence",
    "c05": "discrete mass conservation on the 2D presets",
    "c06": "energy dissipation / boundedness",
    "c07": "energy power-law exponent trend in alpha",
    "c08": "subdiffusive tumor mass dynamics",
    "c09": "Sobol estimator on a synthetic additive model",
    "c10": "sensitivity ranking of the tumor parameters",
    "c11": "clamped laws agree with the raw laws inside the band",
    "c12": "byte-identical reruns (determinism)",
}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = {}
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            name = getattr(rep, "nodeid", "")
            if "test_acceptance.py" not in name:
                continue
            for key in ACCEPTANCE_TITLES:
                if f"test_{key}_" in name:
                    verdict = "PASS" if outcome == "passed" else "FAIL"
                    results[key] = verdict
    if not results:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for key in sorted(ACCEPTANCE_TITLES):
        verdict = results.get(key, "NOT RUN")
        terminalreporter.write_line(
            f"criterion {key[1:]}: {verdict} - {ACCEPTANCE_TITLES[key]}")
