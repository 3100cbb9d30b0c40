"""Finite-blocklength secrecy-rate arithmetic.

Normal-approximation secrecy rate for short packets:

    R = C - sqrt(V_k/n)*Qinv(eps_e)*log2(e) - sqrt(V_e/n)*Qinv(sigma)*log2(e)

with secrecy capacity C = log2((1+gamma_k)/(1+gamma_e)) and channel
dispersion V = 1 - (1+gamma)^-2.  Negative rates are clamped to zero (no
secure transmission in that slot).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

LOG2E = float(np.log2(np.e))


@dataclass
class SecrecyParams:
    """Decoding error rate, leakage probability and blocklength.

    The blocklength is kept continuous (it is an RL control); round for
    reporting only.
    """

    epsilon_e: float = 2e-6
    sigma_leak: float = 1e-3
    blocklength: float = 128.0

    def __post_init__(self):
        if not 0.0 < self.epsilon_e < 1.0:
            raise ValueError("epsilon_e must be in (0, 1)")
        if not 0.0 < self.sigma_leak < 1.0:
            raise ValueError("sigma_leak must be in (0, 1)")
        if self.blocklength < 1.0:
            raise ValueError("blocklength must be >= 1")

    @property
    def blocklength_int(self) -> int:
        return max(1, int(round(self.blocklength)))


def q_func(z):
    """Gaussian tail Q(z) = 0.5*erfc(z/sqrt(2)) = Phi(-z)."""
    return ndtr(-np.asarray(z, dtype=float))


def q_inv(p: float) -> float:
    """Inverse of the Gaussian Q function; Q(q_inv(p)) = p."""
    if not 0.0 < p < 1.0:
        raise ValueError("q_inv argument must be in (0, 1)")
    return float(-ndtri(p))


def dispersion(gamma):
    """Channel dispersion V = 1 - (1+gamma)^-2, in [0, 1)."""
    gamma = np.asarray(gamma, dtype=float)
    return 1.0 - 1.0 / (1.0 + gamma) ** 2


def secrecy_capacity(gamma_user, gamma_eve):
    """log2((1+gamma_k)/(1+gamma_e)); negative when Eve's channel is better."""
    gu = np.asarray(gamma_user, dtype=float)
    ge = np.asarray(gamma_eve, dtype=float)
    return np.log2(1.0 + gu) - np.log2(1.0 + ge)


def fbc_secrecy_rate(gamma_user, gamma_eve, params: SecrecyParams,
                     dispersion_mode: str = "exact"):
    """Secrecy rate in bits per channel use, clamped below at 0.

    dispersion_mode="user_approx_one" replaces the user dispersion V_k by 1
    (valid above ~5 dB); the Eve dispersion is always exact.
    """
    if dispersion_mode not in ("exact", "user_approx_one"):
        raise ValueError(f"unknown dispersion_mode: {dispersion_mode}")
    gu = np.asarray(gamma_user, dtype=float)
    ge = np.asarray(gamma_eve, dtype=float)
    n = params.blocklength
    v_user = np.ones_like(gu) if dispersion_mode == "user_approx_one" else dispersion(gu)
    v_eve = dispersion(ge)
    rate = (secrecy_capacity(gu, ge)
            - np.sqrt(v_user / n) * q_inv(params.epsilon_e) * LOG2E
            - np.sqrt(v_eve / n) * q_inv(params.sigma_leak) * LOG2E)
    out = np.maximum(rate, 0.0)
    return float(out) if out.ndim == 0 else out
