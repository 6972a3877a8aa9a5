"""Physical link, channel plan and constellation models.

A link is an ordered list of fiber spans, each followed by a lumped EDFA.
The EDFAs either restore the span loss exactly (``"gain"`` mode) or hold
the per-channel output power at the launch power (``"power"`` mode), in
which case the signal is slowly depleted by the accumulated ASE.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.constants import pi

from . import units

logger = logging.getLogger(__name__)

MODES = ("gain", "power")
NOISE_CONVENTIONS = ("physical", "log-gain")


class ValidationError(ValueError):
    """Raised when a link, plan or constellation violates its invariants."""


@dataclass(frozen=True)
class SpanSpec:
    """Single homogeneous fiber span in SI units."""

    length: float  # m
    alpha: float  # 1/m, power attenuation
    beta2: float  # s^2/m
    gamma: float  # 1/(W m)

    def __post_init__(self):
        if not self.length > 0:
            raise ValidationError(f"span length must be > 0, got {self.length}")
        if self.alpha < 0:
            raise ValidationError(f"span alpha must be >= 0, got {self.alpha}")
        if self.gamma < 0:
            raise ValidationError(f"span gamma must be >= 0, got {self.gamma}")

    @classmethod
    def from_engineering(cls, length_km, alpha_db_km, dispersion_ps_nm_km,
                         gamma_per_w_km=None, aeff_um2=None, n2=2.6e-20,
                         wavelength=1550e-9):
        if gamma_per_w_km is None:
            if aeff_um2 is None:
                raise ValidationError("span needs either gamma or aeff")
            gamma = units.gamma_from_n2(n2, aeff_um2 * 1e-12, wavelength)
        else:
            gamma = gamma_per_w_km / 1e3
        return cls(
            length=length_km * 1e3,
            alpha=units.alpha_db_km_to_si(alpha_db_km),
            beta2=units.dispersion_to_beta2(dispersion_ps_nm_km, wavelength),
            gamma=gamma,
        )

    @property
    def loss(self):
        """Loss exponent l = alpha * length (nepers of power)."""
        return self.alpha * self.length


@dataclass(frozen=True)
class AmplifierSpec:
    """Lumped EDFA at the end of a span.

    ``nsp_table`` optionally gives a piecewise-linear n_sp(omega) as a pair
    ``(omega_offsets [rad/s], nsp_values)``; without it the ASE is flat.
    """

    nsp: float
    nsp_table: tuple | None = None

    def __post_init__(self):
        if self.nsp < 0:
            raise ValidationError(f"amplifier nsp must be >= 0, got {self.nsp}")
        if 0 < self.nsp < 0.5:
            warnings.warn(f"nsp={self.nsp} < 0.5 is below the quantum limit", stacklevel=3)

    @classmethod
    def from_noise_figure(cls, nf_db):
        return cls(nsp=units.nsp_from_nf(nf_db))

    def nsp_at(self, omega=0.0):
        if self.nsp_table is None:
            return self.nsp
        w, v = self.nsp_table
        return float(np.interp(omega, w, v))


@dataclass(frozen=True)
class ChannelPlan:
    """Uniform WDM grid of Nyquist channels; COI has index 0."""

    symbol_time: float  # T [s]
    spacing: float  # Delta Omega [rad/s]
    n_channels: int
    power: float  # per-channel launch power, both polarizations [W]

    def __post_init__(self):
        if not self.symbol_time > 0:
            raise ValidationError(f"symbol_time must be > 0, got {self.symbol_time}")
        if int(self.n_channels) != self.n_channels or self.n_channels < 1:
            raise ValidationError(f"n_channels must be an integer >= 1, got {self.n_channels}")
        if not self.power > 0:
            raise ValidationError(f"power must be > 0, got {self.power}")
        if self.n_channels > 1 and self.spacing < 2 * pi / self.symbol_time * (1 - 1e-12):
            raise ValidationError(
                f"channel overlap: spacing {self.spacing / 2 / pi / 1e9:.3f} GHz is below "
                f"the symbol rate {1e-9 / self.symbol_time:.3f} GBd")

    @classmethod
    def from_engineering(cls, symbol_rate_gbd, spacing_ghz, n_channels, power_dbm):
        return cls(
            symbol_time=1.0 / (symbol_rate_gbd * 1e9),
            spacing=2 * pi * spacing_ghz * 1e9,
            n_channels=int(n_channels),
            power=float(units.dbm2w(power_dbm)),
        )

    @property
    def symbol_rate(self):
        return 1.0 / self.symbol_time

    @property
    def channels(self):
        """Channel indices, COI = 0; even counts put the extra channel above."""
        lo = -((self.n_channels - 1) // 2)
        return list(range(lo, lo + self.n_channels))

    @property
    def interferers(self):
        return [s for s in self.channels if s != 0]

    def detuning(self, s):
        return s * self.spacing

    def with_power(self, power):
        return replace(self, power=float(power))

    def ndfwm_pairs(self):
        """Ordered (s, s') with s, s' != 0 and s + s' a channel of the plan.

        Includes s == s' (degenerate pump pair feeding channel 2s).
        """
        chans = set(self.channels)
        return [(s, t) for s in self.interferers for t in self.interferers if s + t in chans]


@dataclass(frozen=True)
class ConstellationSpec:
    """Symbol alphabet normalized to unit mean energy.

    ``points=None`` denotes a circular complex Gaussian source.
    """

    name: str
    points: np.ndarray | None = None

    def __post_init__(self):
        if self.points is None:
            return
        pts = np.asarray(self.points, dtype=complex).ravel()
        if pts.size == 0:
            raise ValidationError("empty constellation")
        pts = pts - 0.0
        if abs(pts.mean()) > 1e-9 * np.sqrt(np.mean(abs(pts) ** 2)):
            raise ValidationError("constellation must have zero mean")
        pts = pts / np.sqrt(np.mean(abs(pts) ** 2))
        object.__setattr__(self, "points", pts)

    @property
    def is_gaussian(self):
        return self.points is None

    @property
    def size(self):
        return np.inf if self.points is None else self.points.size

    @classmethod
    def qam(cls, m):
        k = int(round(np.sqrt(m)))
        if k * k != m:
            raise ValidationError(f"square QAM needs a square order, got {m}")
        levels = np.arange(-(k - 1), k, 2, dtype=float)
        pts = (levels[:, None] + 1j * levels[None, :]).ravel()
        return cls(f"{m}qam", pts)

    @classmethod
    def psk(cls, m, offset=np.pi / 4):
        return cls(f"{m}psk", np.exp(1j * (2 * np.pi * np.arange(m) / m + offset)))

    @classmethod
    def gaussian(cls):
        return cls("gaussian", None)

    @classmethod
    def by_name(cls, name):
        key = name.lower().replace("-", "")
        if key in ("qpsk", "4qam"):
            return cls("qpsk", cls.psk(4).points)
        if key == "gaussian":
            return cls.gaussian()
        if key.endswith("qam"):
            return cls.qam(int(key[:-3]))
        if key.endswith("psk"):
            return cls.psk(int(key[:-3]))
        raise ValidationError(f"unknown constellation {name!r}")


def constellation_moments(spec):
    """Return (mu2, mu4, mu6) of |a| for the unit-energy alphabet."""
    if spec.is_gaussian:
        # E|a|^{2k} = k! for a unit-variance circular Gaussian
        return 1.0, 2.0, 6.0
    a2 = abs(spec.points) ** 2
    return float(a2.mean()), float((a2**2).mean()), float((a2**3).mean())


@dataclass(frozen=True)
class LinkModel:
    """Multi-span amplified link.

    ``ase_bandwidth`` [Hz] is the ASE bandwidth attributed to one channel
    when computing the power-mode depletion ratio zeta_n = sigma_n^2 / P.
    ``noise_convention`` selects how a lumped amplifier with gain exponent
    g contributes to the noise accumulator: ``"physical"`` uses e^g - 1
    (matches the split-step simulator), ``"log-gain"`` uses g.
    """

    spans: tuple
    amplifiers: tuple
    mode: str = "gain"
    wavelength: float = 1550e-9
    ase_bandwidth: float = 50e9
    noise_convention: str = "physical"
    z: np.ndarray = field(init=False, repr=False, compare=False)
    loss: np.ndarray = field(init=False, repr=False, compare=False)
    eta: np.ndarray = field(init=False, repr=False, compare=False)
    alpha: np.ndarray = field(init=False, repr=False, compare=False)
    beta2: np.ndarray = field(init=False, repr=False, compare=False)
    acc_dispersion: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        spans = tuple(self.spans)
        amps = tuple(self.amplifiers)
        if not spans:
            raise ValidationError("link needs at least one span")
        if len(amps) != len(spans):
            raise ValidationError(f"{len(spans)} spans but {len(amps)} amplifiers")
        if self.mode not in MODES:
            raise ValidationError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.noise_convention not in NOISE_CONVENTIONS:
            raise ValidationError(f"noise_convention must be one of {NOISE_CONVENTIONS}")
        object.__setattr__(self, "spans", spans)
        object.__setattr__(self, "amplifiers", amps)
        lengths = np.array([s.length for s in spans])
        z = np.concatenate([[0.0], np.cumsum(lengths)])
        alpha = np.array([s.alpha for s in spans])
        beta2 = np.array([s.beta2 for s in spans])
        acc = np.concatenate([[0.0], np.cumsum(beta2 * lengths)])
        for name, val in (("z", z), ("loss", alpha * lengths), ("eta", np.exp(-alpha * lengths)),
                          ("alpha", alpha), ("beta2", beta2), ("acc_dispersion", acc)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    @property
    def n_spans(self):
        return len(self.spans)

    @property
    def length(self):
        return float(self.z[-1])

    @property
    def gamma(self):
        g = {s.gamma for s in self.spans}
        if len(g) != 1:
            raise ValidationError("z-dependent gamma is not supported")
        return g.pop()

    @property
    def photon_energy(self):
        return units.photon_energy(self.wavelength)

    def replace(self, **changes):
        return replace(self, **changes)

    def with_gamma(self, gamma):
        return replace(self, spans=tuple(replace(s, gamma=gamma) for s in self.spans))

    def with_nsp(self, nsp):
        return replace(self, amplifiers=tuple(replace(a, nsp=nsp, nsp_table=None)
                                              for a in self.amplifiers))

    def fingerprint(self):
        """Short stable hash of everything that affects the coefficients."""
        import hashlib
        parts = [self.mode, self.noise_convention, repr(self.wavelength), repr(self.ase_bandwidth)]
        parts += [repr((s.length, s.alpha, s.beta2)) for s in self.spans]
        parts += [repr((a.nsp, a.nsp_table)) for a in self.amplifiers]
        return hashlib.sha256("|".join(parts).encode()).hexdigest()[:16]


def build_link(n_spans, span_length_km, alpha_db_km, dispersion_ps_nm_km, nf_db,
               gamma_per_w_km=None, aeff_um2=None, n2=2.6e-20, wavelength=1550e-9,
               mode="gain", ase_bandwidth=None, plan=None, noise_convention="physical"):
    """Homogeneous link from engineering units.

    ``ase_bandwidth`` defaults to the channel spacing of ``plan`` (or 50 GHz).
    """
    if n_spans < 1:
        raise ValidationError(f"n_spans must be >= 1, got {n_spans}")
    span = SpanSpec.from_engineering(span_length_km, alpha_db_km, dispersion_ps_nm_km,
                                     gamma_per_w_km, aeff_um2, n2, wavelength)
    amp = AmplifierSpec.from_noise_figure(nf_db)
    if ase_bandwidth is None:
        ase_bandwidth = plan.spacing / (2 * pi) if plan is not None and plan.n_channels > 1 else 50e9
    return LinkModel((span,) * n_spans, (amp,) * n_spans, mode=mode, wavelength=wavelength,
                     ase_bandwidth=ase_bandwidth, noise_convention=noise_convention)


def _nsp(link, omega):
    return np.array([a.nsp_at(omega) for a in link.amplifiers])


def depletion_exponents(link, power):
    """Signal gain depletion exponents.

    Returns ``(d, delta)`` with ``d[n-1] = d_n`` for spans 1..N and
    ``delta[n] = delta_n`` for n = 0..N (``delta[0] = 0``).
    """
    if not power > 0:
        raise ValueError(f"power must be > 0, got {power}")
    n = link.n_spans
    if link.mode == "gain":
        d = np.zeros(n)
    else:
        # ASE in both polarizations over ase_bandwidth against the dual-pol channel power
        sigma2 = 2.0 * link.photon_energy * _nsp(link, 0.0) * link.ase_bandwidth
        zeta = sigma2 / power
        d = np.log1p(np.expm1(link.loss) * zeta / (1 + zeta))
    return d, np.concatenate([[0.0], np.cumsum(d)])


def gain_exponents(link, power):
    d, _ = depletion_exponents(link, power)
    return link.loss - d


def noise_accumulators(link, power, omega=0.0):
    """Per-amplifier noise weights xi_n(omega) and their prefix sums psi_n.

    ``xi[n-1] = xi_n`` and ``psi[n-1] = psi_n = sum_{j<n} xi_j`` for
    n = 1..N, so ``psi[0] == 0`` always.
    """
    _, delta = depletion_exponents(link, power)
    g = gain_exponents(link, power)
    amp = np.expm1(g) if link.noise_convention == "physical" else g
    xi = amp * np.exp(delta[1:]) * _nsp(link, omega)
    psi = np.concatenate([[0.0], np.cumsum(xi)[:-1]])
    return xi, psi


def quantum_noise_variance(link, plan):
    """sigma_qn^2 = hbar omega_0 / T [W]."""
    return link.photon_energy / plan.symbol_time


def ase_variance(link, plan):
    """Single-polarization ASE variance normalized to the signal power."""
    xi, _ = noise_accumulators(link, plan.power, 0.0)
    return quantum_noise_variance(link, plan) / plan.power * float(xi.sum())
