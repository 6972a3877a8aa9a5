"""Engineering-unit conversions.

Everything inside the package is SI (m, s, W, rad/s). Config files use
km, dB/km, ps/nm/km, GBd, GHz and dBm; these helpers are the only place
that converts between the two.
"""

import numpy as np
from scipy.constants import c, hbar, pi

DB_PER_NEPER = 10.0 / np.log(10.0)


def db2lin(x):
    return 10.0 ** (np.asarray(x, dtype=float) / 10.0)


def lin2db(x):
    return 10.0 * np.log10(x)


def dbm2w(p_dbm):
    return 1e-3 * db2lin(p_dbm)


def w2dbm(p_w):
    return lin2db(np.asarray(p_w, dtype=float) / 1e-3)


def alpha_db_km_to_si(alpha_db_km):
    """Power attenuation dB/km -> 1/m."""
    return alpha_db_km / DB_PER_NEPER / 1e3


def alpha_si_to_db_km(alpha):
    return alpha * DB_PER_NEPER * 1e3


def dispersion_to_beta2(d_ps_nm_km, wavelength=1550e-9):
    """Dispersion parameter D [ps/nm/km] -> beta2 [s^2/m]."""
    d_si = d_ps_nm_km * 1e-12 / 1e-9 / 1e3
    return -d_si * wavelength**2 / (2 * pi * c)


def beta2_to_dispersion(beta2, wavelength=1550e-9):
    d_si = -beta2 * 2 * pi * c / wavelength**2
    return d_si / (1e-12 / 1e-9 / 1e3)


def gamma_from_n2(n2, aeff, wavelength=1550e-9):
    """Kerr coefficient [1/(W m)] from n2 [m^2/W] and effective area [m^2]."""
    return 2 * pi * n2 / (wavelength * aeff)


def nsp_from_nf(nf_db):
    """Spontaneous-emission factor from the noise figure (high-gain limit)."""
    return float(db2lin(nf_db)) / 2.0


def photon_energy(wavelength=1550e-9):
    """hbar * omega_0 [J]."""
    return hbar * 2 * pi * c / wavelength
