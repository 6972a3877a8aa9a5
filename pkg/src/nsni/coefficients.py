"""Monte Carlo estimation of the X- (signal-signal) and chi- (signal-noise) coefficients.

Every coefficient is an integral over 3, 4 or 5 angular frequencies of a
product of span-summed kernels. Each free frequency is drawn uniformly
from the Nyquist band that gates it; the frequencies that are fixed by
energy conservation are checked against their own band by rejection,
and the estimator is scaled by the volume of the sampled box.

Units: 3-D kinds (X1, X1s, X1ss, chi1, chi1s, chi1s', chi1ss) and the
4-D kinds are all m^2 after the 1/T or T prefactors; the variance
assemblies multiply them by gamma^2 P^2 or gamma^2 sigma_qn^2 P / P.
"""

from __future__ import annotations

import json
import logging
import zlib
from dataclasses import asdict, dataclass, field

import numpy as np

from . import closed_forms as cf
from .link import LinkModel, depletion_exponents, noise_accumulators

logger = logging.getLogger(__name__)

X_KINDS = ("X1", "X2", "X3", "X4", "X5", "X1s", "X3s", "X1ss")
CHI_KINDS = ("chi1", "chi2", "chi3", "chi1s", "chi1s_p", "chi3s", "chi1ss")
KINDS = X_KINDS + CHI_KINDS
BATCH = 1 << 15
# integration template (dimension and companion triple) of each kind
_BASE = {"X1": "X1", "X1s": "X1", "X1ss": "X1", "chi1": "X1", "chi1s": "X1",
         "chi1s_p": "X1", "chi1ss": "X1", "X2": "X2", "chi2": "X2", "X3": "X3",
         "X3s": "X3", "chi3": "X3", "chi3s": "X3", "X4": "X4", "X5": "X5"}


class EmptyRegionError(RuntimeError):
    """The FWM support of a coefficient is empty for this plan."""


@dataclass(frozen=True)
class CoefficientKind:
    """Coefficient tag plus its detuning indices.

    ``s`` and ``sp`` select the (s, s') FWM region. ``noise`` is the
    channel index whose ASE spectrum weights a chi-kind (0 for the COI).
    """

    tag: str
    s: int = 0
    sp: int = 0
    noise: int = 0

    def __post_init__(self):
        if self.tag not in KINDS:
            raise ValueError(f"unknown coefficient kind {self.tag!r}")
        if self.tag in ("X1s", "X3s", "chi1s", "chi1s_p", "chi3s") and self.s == 0:
            raise ValueError(f"{self.tag} needs a nonzero detuning index")
        if self.tag in ("X1ss", "chi1ss") and (self.s == 0 or self.sp == 0):
            raise ValueError(f"{self.tag} needs nonzero s and s'")

    @property
    def region(self):
        """(s, s') arguments of the kernel H_{w,s,s'}."""
        if self.tag in ("X1s", "X3s", "chi1s", "chi1s_p", "chi3s"):
            return 0, self.s
        if self.tag in ("X1ss", "chi1ss"):
            return self.s, self.sp
        return 0, 0

    @property
    def noise_channel(self):
        if self.tag == "chi1s_p":
            return self.s
        if self.tag == "chi1ss":
            return self.noise
        return 0

    @property
    def is_chi(self):
        return self.tag.startswith("chi")

    @property
    def key(self):
        return f"{self.tag}[{self.s},{self.sp},{self.noise_channel}]"

    @classmethod
    def from_key(cls, key):
        tag, rest = key.split("[")
        s, sp, q = (int(v) for v in rest.rstrip("]").split(","))
        return cls(tag, s, sp, q if tag == "chi1ss" else 0)


@dataclass
class MCEstimate:
    value: float
    stderr: float
    samples: int
    seed: int
    volume: float
    accepted: int = 0

    def __post_init__(self):
        if self.stderr < 0:
            raise ValueError("stderr must be >= 0")


def _rng(seed, kind, batch):
    tag_id = zlib.crc32(kind.tag.encode())
    return np.random.default_rng([seed, tag_id, kind.s + 4096, kind.sp + 4096,
                                  kind.noise_channel + 4096, batch])


def _draw(rng, n, centers, half):
    u = rng.uniform(-half, half, size=(n, len(centers)))
    return u + np.asarray(centers, dtype=float)


class _Integrand:
    """Samples one coefficient's integrand over its gated frequency box."""

    def __init__(self, kind, link, plan, power):
        self.kind = kind
        self.link = link
        self.plan = plan
        self.T = plan.symbol_time
        self.half = np.pi / self.T
        self.delta = depletion_exponents(link, power)[1]
        omega_noise = plan.detuning(kind.noise_channel)
        self.psi = noise_accumulators(link, power, omega_noise)[1]
        s, sp = kind.region
        self.s, self.sp = s, sp
        c1, c2, c3 = cf.band_centers(plan, s, sp)
        base = _BASE[kind.tag]
        self.base = base
        # box centers of the free frequencies
        self.centers = {
            "X1": [c1, c2, c3],
            "X2": [c1, c2, c3, c1],
            "X3": [c1, c2, c3, c2],
            "X4": [c1, c2, c1, c2],
            "X5": [c1, c2, c3, c1, c2],
        }[base]
        self.dim = len(self.centers)
        self.prefactor = {"X1": 1 / self.T, "X2": 1.0, "X3": 1.0, "X4": 1.0, "X5": self.T}[base]
        self.prefactor /= (2 * np.pi) ** self.dim
        if kind.is_chi:
            self.prefactor *= 2.0
        self.volume = (2 * self.half) ** self.dim

    def _r_sum(self, w):
        q = cf.dispersion_product(w)
        return cf.span_integrals(q, self.link, self.delta)

    def _inside(self, x, center):
        return np.abs(x - center) < self.half

    def triples(self, u):
        """Map samples to (w, w2, accepted) with w2 the companion triple."""
        c1, c2, c3 = cf.band_centers(self.plan, self.s, self.sp)
        w1, w2_, w3 = u[:, 0], u[:, 1], u[:, 2]
        if self.base == "X4":
            w = np.stack([w1, w2_, w2_], axis=-1)
            ok = self._inside(w1 - w2_ + w2_, 0.0)
            a, b = u[:, 2], u[:, 3]
            wp = np.stack([a, b, w1 - a + b], axis=-1)
            ok &= self._inside(wp[:, 2], c3)
            return w, wp, ok
        w = u[:, :3]
        ok = self._inside(w1 - w2_ + w3, 0.0)
        if self.base == "X1":
            return w, None, ok
        if self.base == "X2":
            w4 = u[:, 3]
            wp = np.stack([w4, w2_, w1 + w3 - w4], axis=-1)
            ok &= self._inside(wp[:, 2], c3)
        elif self.base == "X3":
            w4 = u[:, 3]
            wp = np.stack([w1, w4, w3 - w2_ + w4], axis=-1)
            ok &= self._inside(wp[:, 2], c3)
        else:  # X5
            w4, w5 = u[:, 3], u[:, 4]
            wp = np.stack([w4, w5, w1 - w2_ + w3 - w4 + w5], axis=-1)
            ok &= self._inside(wp[:, 2], c3)
        return w, wp, ok

    def __call__(self, u):
        w, wp, ok = self.triples(u)
        vals = np.zeros(len(u))
        if not np.any(ok):
            return vals, ok
        w = w[ok]
        gate2 = self.T**2
        r = gate2 * self._r_sum(w)
        if wp is None:
            if self.kind.is_chi:
                f = cf.assemble_R_diag(r, self.psi)
            else:
                f = np.abs(r.sum(axis=-1)) ** 2
        else:
            wp = wp[ok]
            rp = gate2 * self._r_sum(wp)
            if self.kind.is_chi:
                pair = gate2**2 * cf.span_pair_integrals(
                    cf.dispersion_product(w), cf.dispersion_product(wp), self.link, self.delta)
                f = np.real(cf.assemble_R(r, rp, pair, self.psi))
            else:
                f = np.real(r.sum(axis=-1) * np.conj(rp.sum(axis=-1)))
        vals[ok] = f
        return vals, ok


def estimate_coefficient(kind, link, plan, samples=1 << 16, seed=0, power=None):
    """Monte Carlo estimate of one coefficient.

    The result is reproducible given ``(seed, samples, link, plan)``;
    batches draw from independent substreams keyed on the batch index.
    """
    if isinstance(kind, str):
        kind = CoefficientKind(kind)
    if samples < 1000:
        raise ValueError(f"need at least 1000 samples, got {samples}")
    power = plan.power if power is None else power
    integrand = _Integrand(kind, link, plan, power)
    total = 0.0
    total_sq = 0.0
    accepted = 0
    done = 0
    batch = 0
    while done < samples:
        n = min(BATCH, samples - done)
        u = _draw(_rng(seed, kind, batch), n, integrand.centers, integrand.half)
        vals, ok = integrand(u)
        total += vals.sum()
        total_sq += np.dot(vals, vals)
        accepted += int(ok.sum())
        done += n
        batch += 1
    if accepted == 0:
        raise EmptyRegionError(
            f"no accepted samples for {kind.tag} at detunings (s={kind.s}, s'={kind.sp})")
    mean = total / samples
    var = max(total_sq / samples - mean**2, 0.0)
    scale = integrand.prefactor * integrand.volume
    return MCEstimate(value=float(scale * mean),
                      stderr=float(scale * np.sqrt(var / (samples - 1))),
                      samples=int(samples), seed=int(seed), volume=float(integrand.volume),
                      accepted=accepted)


def required_kinds(plan, include_x4=False, include_x2_x5=True):
    """Every coefficient kind entering the single- and cross-polarization budgets."""
    kinds = [CoefficientKind("X1"), CoefficientKind("X3")]
    if include_x2_x5:
        kinds += [CoefficientKind("X2"), CoefficientKind("X5")]
    if include_x4:
        kinds.append(CoefficientKind("X4"))
    kinds += [CoefficientKind("chi1"), CoefficientKind("chi2"), CoefficientKind("chi3")]
    for s in plan.interferers:
        kinds += [CoefficientKind("X1s", s), CoefficientKind("X3s", s),
                  CoefficientKind("chi1s", s), CoefficientKind("chi1s_p", s),
                  CoefficientKind("chi3s", s)]
    for s, sp in plan.ndfwm_pairs():
        kinds.append(CoefficientKind("X1ss", s, sp))
        for q in sorted({s, sp, s + sp}):
            kinds.append(CoefficientKind("chi1ss", s, sp, q))
    return kinds


def _flat_noise(link):
    return all(a.nsp_table is None for a in link.amplifiers)


@dataclass
class CoefficientSet:
    """All coefficient estimates for one (link, plan[, power]) combination."""

    fingerprint: str
    plan: dict
    power: float | None
    samples: int
    seed: int
    estimates: dict = field(default_factory=dict)
    x4: str = "zero"

    def __getitem__(self, key):
        if isinstance(key, CoefficientKind):
            key = key.key
        try:
            return self.estimates[key]
        except KeyError:
            raise KeyError(f"coefficient {key} missing from the set") from None

    def value(self, tag, s=0, sp=0, noise=0):
        kind = CoefficientKind(tag, s, sp, noise)
        if tag == "X4" and self.x4 == "zero" and kind.key not in self.estimates:
            return 0.0
        return self[kind].value

    def check_complete(self, plan):
        missing = [k.key for k in required_kinds(plan) if k.key not in self.estimates]
        if missing:
            raise KeyError(f"coefficient set incomplete, missing: {', '.join(missing)}")

    def to_json(self):
        d = asdict(self)
        d["estimates"] = {k: asdict(v) for k, v in self.estimates.items()}
        return json.dumps(d, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        d["estimates"] = {k: MCEstimate(**v) for k, v in d["estimates"].items()}
        return cls(**d)

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(fh.read())


def estimate_all(link: LinkModel, plan, samples=1 << 16, seed=0, power=None,
                 x4="zero", include_x2_x5=True, kinds=None):
    """Estimate every coefficient the variance budget needs.

    With frequency-flat amplifiers the primed chi-kinds coincide with their
    unprimed counterparts and are copied instead of re-sampled.
    ``x4`` is ``"zero"`` (omit, the default) or ``"mc"``.
    """
    power = plan.power if power is None else power
    if kinds is None:
        kinds = required_kinds(plan, include_x4=(x4 == "mc"), include_x2_x5=include_x2_x5)
    cset = CoefficientSet(fingerprint=link.fingerprint(), plan=asdict(plan),
                          power=power if link.mode == "power" else None,
                          samples=samples, seed=seed, x4=x4)
    flat = _flat_noise(link)
    for kind in kinds:
        if flat and kind.tag == "chi1s_p":
            cset.estimates[kind.key] = cset.estimates.get(CoefficientKind("chi1s", kind.s).key) \
                or estimate_coefficient(CoefficientKind("chi1s", kind.s), link, plan, samples, seed, power)
            continue
        if flat and kind.tag == "chi1ss" and kind.noise != kind.s:
            ref = CoefficientKind("chi1ss", kind.s, kind.sp, kind.s)
            if ref.key not in cset.estimates:
                cset.estimates[ref.key] = estimate_coefficient(ref, link, plan, samples, seed, power)
            cset.estimates[kind.key] = cset.estimates[ref.key]
            continue
        if kind.key in cset.estimates:
            continue
        logger.debug("estimating %s", kind.key)
        cset.estimates[kind.key] = estimate_coefficient(kind, link, plan, samples, seed, power)
    return cset
