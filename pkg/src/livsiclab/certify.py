"""Certificates for the tail-measure condition on Birkhoff sums.

For an observable with a positive orbit sum ``>= epsilon`` at a periodic
orbit, search ``1 <= k <= N_max`` for a time with
``m{phi_k > C} > 1/2 - epsilon``.  The measure is a uniform Monte-Carlo
estimate; a time is certified only when the estimate minus a 99% Hoeffding
radius still clears the threshold, so a false certificate is improbable but
not impossible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .clt import BirkhoffEnsemble, sample_birkhoff, tail_fraction
from .errors import MembershipError, NoObstructionError
from .observables import TrigObservable
from .orbits import PeriodicOrbit, max_obstruction_up_to, orbit_obstruction
from .specs import map_to_spec

MIN_COUNT = 10 ** 4
CONFIDENCE = 0.99
MEAN_TOL = 1e-12


def hoeffding_radius(count: int, confidence: float = CONFIDENCE) -> float:
    return math.sqrt(math.log(2.0 / (1.0 - confidence)) / (2.0 * count))


@dataclass(frozen=True)
class MembershipCheck:
    zero_mean: bool
    norm_ok: bool
    obstruction_ok: bool
    obstruction_value: float
    norm: float

    @property
    def member(self) -> bool:
        return self.zero_mean and self.norm_ok and self.obstruction_ok

    def to_dict(self) -> dict:
        return {"zero_mean": self.zero_mean, "norm_ok": self.norm_ok,
                "obstruction_ok": self.obstruction_ok, "obstruction_value": self.obstruction_value,
                "norm": self.norm, "member": self.member}


def check_membership(phi: TrigObservable, C_tilde: float, epsilon: float, orbit: PeriodicOrbit) -> MembershipCheck:
    if not epsilon > 0 or not C_tilde > 0:
        raise ValueError("epsilon and C_tilde must be positive")
    value = orbit_obstruction(phi, orbit)
    norm = phi.lipschitz_norm()
    return MembershipCheck(abs(phi.mean) <= MEAN_TOL, norm <= C_tilde, value >= epsilon, value, norm)


@dataclass(frozen=True)
class TypeCertificate:
    C: float
    C_tilde: float
    epsilon: float
    orbit: PeriodicOrbit
    k_found: Optional[int]
    N_max: int
    measure_estimate: float
    confidence_radius: float
    sample_count: int
    seed: int
    membership: MembershipCheck
    observable: TrigObservable = field(repr=False)
    tmap: object = field(repr=False)
    best_k: int = 0

    @property
    def threshold(self) -> float:
        return 0.5 - self.epsilon

    @property
    def degenerate(self) -> bool:
        """``1/2 - epsilon <= 0``: any nonnegative estimate meets the bound."""
        return self.threshold <= 0.0

    @property
    def certified(self) -> bool:
        return self.k_found is not None

    def to_dict(self) -> dict:
        return {
            "C": self.C,
            "C_tilde": self.C_tilde,
            "epsilon": self.epsilon,
            "threshold": self.threshold,
            "degenerate": self.degenerate,
            "orbit": self.orbit.to_dict(),
            "k_found": self.k_found,
            "best_k": self.best_k,
            "N_max": self.N_max,
            "measure_estimate": self.measure_estimate,
            "confidence_radius": self.confidence_radius,
            "confidence_level": CONFIDENCE,
            "sample_count": self.sample_count,
            "seed": self.seed,
            "membership": self.membership.to_dict(),
            "inputs": {"map": map_to_spec(self.tmap), "observable": self.observable.to_spec()},
            "note": "Monte-Carlo certificate: a false certificate is improbable (99% Hoeffding), not impossible; "
                    "k_found = null is a budget verdict, not a disproof.",
        }


def certify_type(tmap, phi: TrigObservable, C: float, epsilon: float, orbit: PeriodicOrbit, N_max: int,
                 count: int, seed: int, *, C_tilde: Optional[float] = None, check: bool = True,
                 chunk: int = 256, threads=None) -> TypeCertificate:
    """Smallest ``k <= N_max`` with ``estimate - radius > 1/2 - epsilon``.

    ``check=False`` skips the membership gate (used for control runs on
    coboundaries).  When no ``k`` qualifies, the certificate records the best
    near miss in ``best_k`` / ``measure_estimate``.
    """
    if count < MIN_COUNT:
        raise ValueError(f"count must be >= {MIN_COUNT}")
    if N_max < 1:
        raise ValueError("N_max must be >= 1")
    C_tilde = phi.lipschitz_norm() if C_tilde is None else float(C_tilde)
    member = check_membership(phi, max(C_tilde, 1e-300), epsilon, orbit)
    if check and not member.member:
        raise MembershipError(f"observable is not in the certified class: {member.to_dict()}")
    radius = hoeffding_radius(count)
    threshold = 0.5 - epsilon
    ens = BirkhoffEnsemble(phi, tmap, count, seed, threads=threads)
    best_k, best_est = 0, -1.0
    while ens.steps < N_max:
        start = ens.steps
        tails = ens.advance(min(chunk, N_max - start), thresholds=[C])[:, 0]
        est = tails / count
        hit = np.nonzero(est - radius > threshold)[0]
        if hit.size:
            j = int(hit[0])
            return TypeCertificate(C, C_tilde, epsilon, orbit, start + j + 1, N_max, float(est[j]), radius,
                                   count, seed, member, phi, tmap, start + j + 1)
        j = int(np.argmax(est))
        if est[j] > best_est:
            best_k, best_est = start + j + 1, float(est[j])
    return TypeCertificate(C, C_tilde, epsilon, orbit, None, N_max, best_est, radius, count, seed,
                           member, phi, tmap, best_k)


@dataclass(frozen=True)
class Replication:
    estimate: float
    radius: float
    sample_count: int
    seed: int
    within_two_radii: bool
    inequality_holds: bool

    def to_dict(self) -> dict:
        return self.__dict__.copy()


def replicate(cert: TypeCertificate, seed: int, factor: int = 4, threads=None) -> Replication:
    """Re-estimate ``m{phi_k > C}`` at the certified ``k`` with fresh samples."""
    if cert.k_found is None:
        raise ValueError("nothing to replicate: certificate has no k")
    count = cert.sample_count * factor
    sample = sample_birkhoff(cert.observable, cert.tmap, cert.k_found, count, seed, threads=threads)
    est = tail_fraction(sample.values, cert.C)
    radius = hoeffding_radius(count)
    return Replication(est, radius, count, seed,
                       abs(est - cert.measure_estimate) <= 2 * cert.confidence_radius,
                       est - radius > cert.threshold)


def certify_family(tmap, observables, C: float, epsilon: float, orbit: PeriodicOrbit, N_max: int, count: int,
                   seed: int, **kwargs) -> tuple[list[TypeCertificate], Optional[int]]:
    """Certify each observable of a finite family; return the certificates and the largest ``k``.

    The common time is ``None`` unless every member is certified.  A finite
    family says nothing about the uniform time over the whole class.
    """
    certs = [certify_type(tmap, phi, C, epsilon, orbit, N_max, count, seed, **kwargs) for phi in observables]
    if not certs or any(c.k_found is None for c in certs):
        return certs, None
    return certs, max(c.k_found for c in certs)


@dataclass(frozen=True)
class RigidityWitness:
    orbit: PeriodicOrbit
    obstruction: float
    scale: float
    C_original: float
    certificate: TypeCertificate

    @property
    def epsilon(self) -> float:
        """Size of the obstruction in the original units."""
        return abs(self.obstruction)

    @property
    def unbounded_mass(self) -> Optional[float]:
        """Lower bound on ``m{|Phi| > C_original / 2}`` for any measurable solution."""
        c = self.certificate
        if c.k_found is None:
            return None
        return (c.measure_estimate - c.confidence_radius) / 2.0

    @property
    def conclusion(self) -> str:
        c = self.certificate
        if c.k_found is None:
            return f"no time k <= {c.N_max} certified; budget verdict only"
        b = self.unbounded_mass
        return (f"any measurable Phi with phi = Phi o T - Phi a.e. has m{{|Phi| > {self.C_original / 2:.6g}}} >= {b:.6g} "
                f"(certified at k = {c.k_found}); equivalently no such Phi has m{{|Phi| <= {self.C_original / 2:.6g}}} "
                f"> {1 - b:.6g}")

    def to_dict(self) -> dict:
        return {
            "orbit": self.orbit.to_dict(),
            "obstruction": self.obstruction,
            "epsilon": self.epsilon,
            "scale": self.scale,
            "C_original": self.C_original,
            "unbounded_mass_lower_bound": self.unbounded_mass,
            "conclusion": self.conclusion,
            "certificate": self.certificate.to_dict(),
        }


def rigidity_witness(tmap, phi: TrigObservable, N_max: int, count: int, seed: int, *, C: float = 1.0,
                     epsilon: float = 0.1, max_period: int = 8, threads=None) -> RigidityWitness:
    """Certify the tail condition for ``phi`` rescaled to unit obstruction.

    Periods are searched in increasing order and the largest obstruction
    ``v`` at the first period carrying one is used, so the witness sits on the
    shortest obstructing orbit.  ``phi / v`` then has orbit sum exactly
    1 >= epsilon and is certified at threshold ``C``; the reported
    ``C_original = C * |v|`` is the same scale for ``phi`` itself.
    """
    orbit, v = None, 0.0
    for n in range(1, max_period + 1):
        orbit, v = max_obstruction_up_to(phi, tmap, n)
        if orbit is not None:
            break
    if orbit is None:
        raise NoObstructionError(f"all orbit sums up to period {max_period} vanish")
    if abs(phi.mean) > MEAN_TOL:
        raise MembershipError("observable must have zero mean")
    scale = 1.0 / v
    cert = certify_type(tmap, phi * scale, C, epsilon, orbit, N_max, count, seed, threads=threads)
    return RigidityWitness(orbit, v, scale, C * abs(v), cert)
