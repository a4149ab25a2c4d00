"""Shared test helpers.

The acceptance tests register one verdict line each; the terminal-summary
hook prints them at the end of the session so the pass/fail lines survive
pytest's output capture.
"""

import numpy as np

from levyfilter import derive_seed, project_observation, simulate_path
from levyfilter.simulate import TimeGrid

ACCEPTANCE_LINES = []


def record_acceptance(number, passed, detail):
    line = f"ACCEPTANCE {number:2d}: {'PASS' if passed else 'FAIL'} — {detail}"
    ACCEPTANCE_LINES.append((number, line))
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)


def observed_scenario(scen, n_steps, seed):
    """Simulate one path of a scenario and project the observation."""
    grid = TimeGrid(0.0, scen.spec.T, n_steps)
    record = simulate_path(scen.spec, grid, scen.prior_sampler, scen.y0, seed)
    return record, project_observation(record)


def rms(values):
    return float(np.sqrt(np.mean(np.square(values))))


def three_se_band(samples):
    """(mean, 3*standard error) of a 1-d sample."""
    a = np.asarray(samples, float)
    return float(a.mean()), float(3.0 * a.std(ddof=1) / np.sqrt(len(a)))
