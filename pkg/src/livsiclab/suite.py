"""Built-in observables with known ground truth.

``COBOUNDARY_GENERATORS`` are transfer functions ``psi``; the observables
``psi o T - psi`` are coboundaries by construction.  ``OBSTRUCTED`` are
observables with a nonzero periodic obstruction on the cat map.
"""

from __future__ import annotations

from dataclasses import dataclass

from .observables import TrigObservable, coboundary_from
from .torus import HyperbolicToralMap

C, S = TrigObservable.cos, TrigObservable.sin

CAT = HyperbolicToralMap(2, 1, 1, 1)

COBOUNDARY_GENERATORS = {
    "cos(x1)": C(1, 0),
    "sin(x2)": S(0, 1),
    "cos(x1+x2)": C(1, 1),
    "half sin(x1-x2)": 0.5 * S(1, -1),
    "cos(x1)+half sin(x1+x2)": C(1, 0) + 0.5 * S(1, 1),
    "mixed (2,1),(0,1)": 0.7 * C(2, 1) - 0.3 * S(0, 1),
    "mixed (1,2),(2,0)": 0.4 * C(1, 2) + 0.4 * S(2, 0),
    "cos(x1)+cos(x2)": C(1, 0) + C(0, 1),
    "mixed (3,1),(1,3)": 0.3 * C(3, 1) + 0.2 * S(1, 3),
    "offset mixed": 0.25 + 0.6 * S(1, 0) + 0.2 * C(2, -1),
}

OBSTRUCTION_TEST = C(1, 0) + C(0, 1)


def obstructed_observables(tmap: HyperbolicToralMap = CAT) -> dict:
    return {
        "cos(x1)+cos(x2)": OBSTRUCTION_TEST,
        "cos(x1)": C(1, 0),
        "sin(x1)+half sin(x1+x2)": S(1, 0) + 0.5 * S(1, 1),
        "coboundary+0.3cos(x2)": coboundary_from(C(1, 1), tmap) + C(0, 1, 0.3),
    }


@dataclass(frozen=True)
class SuiteEntry:
    name: str
    phi: TrigObservable
    psi: TrigObservable | None

    @property
    def is_coboundary(self) -> bool:
        return self.psi is not None


def coboundary_suite(tmap: HyperbolicToralMap = CAT) -> list[SuiteEntry]:
    return [SuiteEntry(name, coboundary_from(psi, tmap), psi) for name, psi in COBOUNDARY_GENERATORS.items()]


def full_suite(tmap: HyperbolicToralMap = CAT) -> list[SuiteEntry]:
    out = coboundary_suite(tmap)
    out += [SuiteEntry(name, phi, None) for name, phi in obstructed_observables(tmap).items()]
    return out
