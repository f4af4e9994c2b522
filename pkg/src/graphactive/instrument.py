"""Operation counters used by tests to verify complexity claims.

The counters are plain module-level tallies, not thread-safe; they exist so
tests can assert structural properties (no factorizations on rank-one paths,
mean-only risk sweeps, bounded work per sweep), not for production metrics.
"""

from dataclasses import dataclass, fields


@dataclass
class Counters:
    cholesky_factorizations: int = 0
    newton_solves: int = 0
    posterior_builds: int = 0
    lookahead_covariances: int = 0
    risk_sweep_cells: int = 0


counters = Counters()


def reset_counters() -> None:
    for f in fields(Counters):
        setattr(counters, f.name, 0)


def snapshot() -> dict:
    return {f.name: getattr(counters, f.name) for f in fields(Counters)}
