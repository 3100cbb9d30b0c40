"""Network geometry, large-scale path loss and Rician/Rayleigh block fading.

All links of the downlink are modelled here: the direct AP->user / AP->Eve
scalars (Rayleigh) and the RIS-related vectors AP->RIS, RIS->user, RIS->Eve
(Rician with geometric steering phases).  The module also computes the
distribution parameters (delta_k^2, upsilon_k) consumed by the analytic
delay machinery.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

REFERENCE_DISTANCE_M = 1.0


def db_to_linear(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)


def dbm_to_watts(x_dbm: float) -> float:
    return 10.0 ** ((x_dbm - 30.0) / 10.0)


@dataclass
class Topology:
    """Node coordinates (metres) plus the RIS array description.

    RIS elements form a uniform linear array along the x axis, centred on
    ``ris_pos``.  ``element_spacing`` defaults to half the carrier
    wavelength when left as None.
    """

    ap_pos: np.ndarray
    ris_pos: np.ndarray
    eve_pos: np.ndarray
    user_pos: np.ndarray          # (K, 2)
    n_elements: int
    carrier_wavelength: float = 0.1
    element_spacing: float | None = None
    placement_radius: float = 2.0

    def __post_init__(self):
        self.ap_pos = np.asarray(self.ap_pos, dtype=float).reshape(2)
        self.ris_pos = np.asarray(self.ris_pos, dtype=float).reshape(2)
        self.eve_pos = np.asarray(self.eve_pos, dtype=float).reshape(2)
        self.user_pos = np.atleast_2d(np.asarray(self.user_pos, dtype=float))
        if self.user_pos.shape[1] != 2:
            raise ValueError("user_pos must be (K, 2)")
        if self.n_elements < 0:
            raise ValueError("n_elements must be >= 0")
        if self.carrier_wavelength <= 0:
            raise ValueError("carrier_wavelength must be positive")
        if self.element_spacing is None:
            self.element_spacing = self.carrier_wavelength / 2.0
        for name, d in (("ap-ris", self.dist_ap_ris),
                        ("ap-eve", self.dist_ap_eve)):
            if d <= 0:
                raise ValueError(f"degenerate {name} link distance")
        if np.any(self.dist_ap_user <= 0) or np.any(self.dist_ris_user <= 0):
            raise ValueError("degenerate user link distance")
        off = np.linalg.norm(self.user_pos - self.eve_pos[None, :], axis=1)
        if np.any(off > self.placement_radius + 1e-9):
            raise ValueError("user outside the placement radius around Eve")

    @property
    def n_users(self) -> int:
        return self.user_pos.shape[0]

    @property
    def dist_ap_ris(self) -> float:
        return float(np.linalg.norm(self.ap_pos - self.ris_pos))

    @property
    def dist_ap_eve(self) -> float:
        return float(np.linalg.norm(self.ap_pos - self.eve_pos))

    @property
    def dist_ap_user(self) -> np.ndarray:
        return np.linalg.norm(self.user_pos - self.ap_pos[None, :], axis=1)

    @property
    def dist_ris_user(self) -> np.ndarray:
        return np.linalg.norm(self.user_pos - self.ris_pos[None, :], axis=1)

    @property
    def dist_ris_eve(self) -> float:
        return float(np.linalg.norm(self.eve_pos - self.ris_pos))

    def element_positions(self) -> np.ndarray:
        """(N, 2) element coordinates of the ULA."""
        n = np.arange(self.n_elements, dtype=float)
        offs = (n - (self.n_elements - 1) / 2.0) * self.element_spacing
        pos = np.tile(self.ris_pos, (self.n_elements, 1))
        pos[:, 0] += offs
        return pos


@dataclass
class FadingParams:
    """Large/small-scale channel statistics shared by all links."""

    pl0_db: float = -30.0
    alpha_direct: float = 4.0
    alpha_ris: float = 2.2
    rician_k_r: float = 3.0
    rician_k_gk: float = 3.0
    noise_power_dbm: float = -85.0
    eve_mean_snr: float | None = None   # 1/lambda_Eve; None = calibrate later

    def __post_init__(self):
        if self.pl0_db >= 0:
            raise ValueError("pl0_db must be negative (a loss)")
        if self.alpha_direct < 2 or self.alpha_ris < 2:
            raise ValueError("path loss exponents must be >= 2")
        if self.rician_k_r < 0 or self.rician_k_gk < 0:
            raise ValueError("Rician factors must be >= 0")
        if not np.isfinite(self.noise_power_dbm):
            raise ValueError("noise power must be finite")
        if self.eve_mean_snr is not None and self.eve_mean_snr <= 0:
            raise ValueError("eve_mean_snr must be positive")

    @property
    def noise_power_watts(self) -> float:
        return dbm_to_watts(self.noise_power_dbm)


@dataclass
class PhaseShiftConfig:
    """Unit-modulus RIS reflection phases, one per element."""

    phases: np.ndarray

    def __post_init__(self):
        self.phases = np.mod(np.asarray(self.phases, dtype=float).ravel(), 2 * np.pi)

    @property
    def n_elements(self) -> int:
        return self.phases.size

    @property
    def coefficients(self) -> np.ndarray:
        """exp(j*phi_n); |theta_n| = 1 by construction."""
        return np.exp(1j * self.phases)


@dataclass
class ChannelRealization:
    """One block-fading draw of every complex link."""

    h_direct: np.ndarray        # (K,) AP->user
    g_ris: np.ndarray           # (N,) AP->RIS
    f_user: np.ndarray          # (K, N) RIS->user
    f_eve: np.ndarray           # (N,) RIS->Eve
    h_direct_eve: complex

    def __post_init__(self):
        for arr in (self.h_direct, self.g_ris, self.f_user, self.f_eve):
            if not np.all(np.isfinite(arr)):
                raise ValueError("non-finite channel entry")
        n = self.g_ris.size
        if self.f_eve.size != n or (self.f_user.size and self.f_user.shape[-1] != n):
            raise ValueError("RIS vector length mismatch")


@dataclass
class LinkStats:
    """Distribution parameters of one user's SNR model.

    delta_k_sq is the variance of the composite gain around its LoS mean,
    upsilon_k the squared LoS composite |f^H Theta g|^2, rho the transmit
    SNR P_k/sigma_n^2 and lambda_eve the exponential rate (1/mean linear
    SNR) of the eavesdropper model.
    """

    delta_k_sq: float
    upsilon_k: float
    rho: float
    lambda_eve: float

    def __post_init__(self):
        vals = (self.delta_k_sq, self.upsilon_k, self.rho, self.lambda_eve)
        if not all(np.isfinite(v) for v in vals):
            raise ValueError("non-finite link statistic")
        if self.delta_k_sq <= 0 or self.rho <= 0 or self.lambda_eve <= 0:
            raise ValueError("delta_k_sq, rho and lambda_eve must be positive")
        if self.upsilon_k < 0:
            raise ValueError("upsilon_k must be >= 0")


def path_loss(d: float, alpha: float, pl0_db: float) -> float:
    """Linear power gain PL0 * (d/d0)^-alpha with d0 = 1 m."""
    if d <= 0:
        raise ValueError("distance must be positive")
    return db_to_linear(pl0_db) * (d / REFERENCE_DISTANCE_M) ** (-alpha)


def steering_vector(src_pos: np.ndarray, topology: Topology) -> np.ndarray:
    """Unit-magnitude LoS phases exp(-j*2*pi*l_n/lambda) to all elements."""
    elem = topology.element_positions()
    l_n = np.linalg.norm(elem - np.asarray(src_pos, dtype=float)[None, :], axis=1)
    return np.exp(-2j * np.pi * l_n / topology.carrier_wavelength)


def _cn(rng: np.random.Generator, shape) -> np.ndarray:
    """Circularly-symmetric complex Gaussian, unit variance per entry."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def _rician_vector(rng, steering, pl, k_factor):
    """sqrt(PL) * (sqrt(K/(K+1)) * LoS + sqrt(1/(K+1)) * NLoS).

    Path loss and the Rician mixing weights are applied exactly once so
    that E|entry|^2 equals the link path loss.
    """
    los = np.sqrt(k_factor / (k_factor + 1.0)) * steering
    nlos = np.sqrt(1.0 / (k_factor + 1.0)) * _cn(rng, steering.shape)
    return np.sqrt(pl) * (los + nlos)


def los_components(topology: Topology, fading: FadingParams):
    """Fully scaled LoS parts of (g_ris, f_user[k], f_eve).

    Entries carry sqrt(PL * K/(K+1)) * steering phase; these are the means
    of the corresponding Rician vectors.
    """
    pl_r = path_loss(topology.dist_ap_ris, fading.alpha_ris, fading.pl0_db)
    g_los = np.sqrt(pl_r * fading.rician_k_r / (fading.rician_k_r + 1.0)) * \
        steering_vector(topology.ap_pos, topology)
    k_g = fading.rician_k_gk
    f_user_los = []
    for k in range(topology.n_users):
        pl_g = path_loss(topology.dist_ris_user[k], fading.alpha_ris, fading.pl0_db)
        f_user_los.append(np.sqrt(pl_g * k_g / (k_g + 1.0)) *
                          steering_vector(topology.user_pos[k], topology))
    pl_e = path_loss(topology.dist_ris_eve, fading.alpha_ris, fading.pl0_db)
    f_eve_los = np.sqrt(pl_e * k_g / (k_g + 1.0)) * \
        steering_vector(topology.eve_pos, topology)
    return g_los, f_user_los, f_eve_los


def sample_channels(topology: Topology, fading: FadingParams,
                    rng: np.random.Generator) -> ChannelRealization:
    """Draw one block-fading realization of every link."""
    g_steer = steering_vector(topology.ap_pos, topology)
    pl_r = path_loss(topology.dist_ap_ris, fading.alpha_ris, fading.pl0_db)
    g_ris = _rician_vector(rng, g_steer, pl_r, fading.rician_k_r)

    n_users = topology.n_users
    h_direct = np.empty(n_users, dtype=complex)
    f_user = np.empty((n_users, topology.n_elements), dtype=complex)
    for k in range(n_users):
        pl_d = path_loss(topology.dist_ap_user[k], fading.alpha_direct, fading.pl0_db)
        h_direct[k] = np.sqrt(pl_d) * _cn(rng, ())
        pl_g = path_loss(topology.dist_ris_user[k], fading.alpha_ris, fading.pl0_db)
        f_user[k] = _rician_vector(rng, steering_vector(topology.user_pos[k], topology),
                                   pl_g, fading.rician_k_gk)

    pl_fe = path_loss(topology.dist_ris_eve, fading.alpha_ris, fading.pl0_db)
    f_eve = _rician_vector(rng, steering_vector(topology.eve_pos, topology),
                           pl_fe, fading.rician_k_gk)
    pl_de = path_loss(topology.dist_ap_eve, fading.alpha_direct, fading.pl0_db)
    h_direct_eve = complex(np.sqrt(pl_de) * _cn(rng, ()))
    return ChannelRealization(h_direct, g_ris, f_user, f_eve, h_direct_eve)


def composite_gain(h: complex, f: np.ndarray, theta: PhaseShiftConfig,
                   g: np.ndarray) -> complex:
    """h + f^H Theta g, the effective scalar channel through the RIS."""
    f = np.asarray(f)
    g = np.asarray(g)
    if f.size != g.size or f.size != theta.n_elements:
        raise ValueError("vector length mismatch")
    return complex(h + np.vdot(f, theta.coefficients * g))


def snr(gain: complex, p_tx: float, noise_watts: float) -> float:
    """|gain|^2 * P / sigma_n^2 (linear)."""
    if noise_watts <= 0:
        raise ValueError("noise power must be positive")
    if p_tx < 0:
        raise ValueError("transmit power must be >= 0")
    return (abs(gain) ** 2) * p_tx / noise_watts


def delta_sq_closed_form(topology: Topology, fading: FadingParams, user: int) -> float:
    """Composite-gain variance: direct path loss + RIS fluctuation term.

    beta0*d^-alpha0 + beta0^2 * d_r^-a1 * d_g^-a2 * N*(1+K_g+K_r)/((1+K_g)(1+K_r))
    """
    beta0 = db_to_linear(fading.pl0_db)
    direct = path_loss(topology.dist_ap_user[user], fading.alpha_direct, fading.pl0_db)
    kr, kg = fading.rician_k_r, fading.rician_k_gk
    ris = (beta0 ** 2
           * topology.dist_ap_ris ** (-fading.alpha_ris)
           * topology.dist_ris_user[user] ** (-fading.alpha_ris)
           * topology.n_elements * (1.0 + kg + kr)
           / ((1.0 + kg) * (1.0 + kr)))
    return direct + ris


def link_stats(topology: Topology, fading: FadingParams, theta: PhaseShiftConfig,
               p_tx: float, user: int = 0,
               lambda_eve: float | None = None) -> LinkStats:
    """Distribution parameters for one user under a given phase config.

    upsilon_k is computed from the LoS components only (the mean of the
    reflected sum); delta_k_sq from the closed form.  lambda_eve falls back
    to 1/fading.eve_mean_snr when not supplied.
    """
    if theta.n_elements != topology.n_elements:
        raise ValueError("phase config length mismatch")
    g_los, f_user_los, _ = los_components(topology, fading)
    if topology.n_elements > 0:
        mean_reflect = np.vdot(f_user_los[user], theta.coefficients * g_los)
        upsilon = float(abs(mean_reflect) ** 2)
    else:
        upsilon = 0.0
    if lambda_eve is None:
        if fading.eve_mean_snr is None:
            raise ValueError("lambda_eve not supplied and eve_mean_snr unset")
        lambda_eve = 1.0 / fading.eve_mean_snr
    rho = p_tx / fading.noise_power_watts
    return LinkStats(delta_k_sq=delta_sq_closed_form(topology, fading, user),
                     upsilon_k=upsilon, rho=rho, lambda_eve=lambda_eve)


def user_snr_pdf(gamma, stats: LinkStats):
    """Approximate density of the user SNR (sub-normalised for upsilon > 0):

        f(gamma) = exp(-(gamma + rho*upsilon)/(rho*delta^2)) / (rho*delta^2)

    Integrates to exp(-upsilon/delta^2) over [0, inf); the missing mass is
    the high-SNR tail dropped by the approximation.
    """
    gamma = np.asarray(gamma, dtype=float)
    scale = stats.rho * stats.delta_k_sq
    out = np.exp(-(gamma + stats.rho * stats.upsilon_k) / scale) / scale
    return np.where(gamma < 0, 0.0, out)


def estimate_eve_mean_snr(topology: Topology, fading: FadingParams, p_tx: float,
                          rng: np.random.Generator, n_draws: int = 2000) -> float:
    """Mean simulated Eve SNR under random phase configs; 1/lambda_Eve."""
    noise = fading.noise_power_watts
    acc = 0.0
    for _ in range(n_draws):
        real = sample_channels(topology, fading, rng)
        theta = PhaseShiftConfig(rng.uniform(0.0, 2 * np.pi, topology.n_elements))
        gain = composite_gain(real.h_direct_eve, real.f_eve, theta, real.g_ris)
        acc += snr(gain, p_tx, noise)
    return acc / n_draws
