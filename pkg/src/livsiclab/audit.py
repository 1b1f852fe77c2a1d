"""Equivalence audit on the built-in suite.

For a zero-mean observable on a hyperbolic toral map the following are
equivalent, and the audit checks that the three executable proxies agree
with each other and with the known ground truth:

1. every periodic orbit sum vanishes (checked exactly up to a period);
2. a continuous transfer function exists (orbit reconstruction whose one-step
   residual sits at the grid noise floor);
3. a measurable transfer function exists (Birkhoff sums stay tight).
"""

from __future__ import annotations

from dataclasses import dataclass

from .livsic import Verdict, coboundary_residual, measurable_solution_test, random_start, solve_on_orbit
from .orbits import ZERO_TOL, max_obstruction_up_to
from .suite import CAT, full_suite


@dataclass(frozen=True)
class AuditRow:
    name: str
    coboundary: bool
    max_obstruction: float
    residual: float
    noise_floor: float
    verdict: str

    @property
    def periodic_ok(self) -> bool:
        return abs(self.max_obstruction) <= ZERO_TOL

    @property
    def continuous_ok(self) -> bool:
        return self.residual <= self.noise_floor

    @property
    def measurable_ok(self) -> bool:
        return self.verdict == Verdict.COBOUNDARY_LIKE.value

    @property
    def passed(self) -> bool:
        return self.periodic_ok == self.continuous_ok == self.measurable_ok == self.coboundary

    def to_dict(self) -> dict:
        return {"name": self.name, "coboundary": self.coboundary, "max_obstruction": self.max_obstruction,
                "periodic_ok": self.periodic_ok, "residual": self.residual, "noise_floor": self.noise_floor,
                "continuous_ok": self.continuous_ok, "verdict": self.verdict, "measurable_ok": self.measurable_ok,
                "passed": self.passed}


def equivalence_audit(seed: int, *, samples: int = 10000, steps: int = 10 ** 6, resolution: int = 32,
                      max_period: int = 8, schedule=(100, 1000, 10000), threads=None, tmap=CAT) -> list[AuditRow]:
    x0 = random_start(seed)
    rows = []
    for entry in full_suite(tmap):
        _, v = max_obstruction_up_to(entry.phi, tmap, max_period)
        grid = solve_on_orbit(entry.phi, tmap, x0, steps, resolution)
        res = coboundary_residual(grid, entry.phi, tmap, seed=seed)
        mv = measurable_solution_test(entry.phi, tmap, samples, schedule, seed=seed, threads=threads)
        rows.append(AuditRow(entry.name, entry.is_coboundary, v, res.residual, res.noise_floor, mv.verdict.value))
    return rows


def format_table(rows: list[AuditRow]) -> str:
    head = f"{'observable':28s} {'truth':10s} {'periodic':>9s} {'continuous':>10s} {'measurable':>10s}  result"
    lines = [head, "-" * len(head)]
    yn = {True: "yes", False: "no"}
    for r in rows:
        lines.append(f"{r.name:28s} {'cobound.' if r.coboundary else 'obstr.':10s} {yn[r.periodic_ok]:>9s} "
                     f"{yn[r.continuous_ok]:>10s} {yn[r.measurable_ok]:>10s}  {'PASS' if r.passed else 'FAIL'}")
    n = sum(r.passed for r in rows)
    lines.append(f"{n}/{len(rows)} observables consistent")
    return "\n".join(lines)
