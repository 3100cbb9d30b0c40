"""Discrete-time FCFS fluid-bit queue: Monte-Carlo oracle for the delay bounds.

Each slot, Poisson(lambda) packets of x bits arrive and the server drains a
random number of service bits drawn from a pluggable per-slot sampler.  The
Lindley backlog recursion is evaluated in closed (vectorised) form and
per-packet sojourn times are recovered from cumulative departures.

Two samplers are provided: the physical one (n_k * clamped secrecy rate on
decode success, 0 on failure) and a model-matched one that serves exactly
what the Mellin analysis assumes, making the analytic bound a sharp oracle.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import LinkStats
from .fbc import SecrecyParams, dispersion, fbc_secrecy_rate, q_inv
from .mellin import ArrivalModel

FLUSH_BITS = 1e30   # stands in for an infinite-service slot


@dataclass
class QueueResult:
    """Per-packet delays in slots.

    ``delays`` is the virtual delay W (0 = fully served within the arrival
    slot; inf = not departed within the horizon) — the quantity the kernel
    bound controls at matching horizon.  ``sojourns`` is the slots-in-system
    view W + 1.
    """

    delays: np.ndarray
    n_slots: int
    warmup_slots: int

    @property
    def n_packets(self) -> int:
        return self.delays.size

    @property
    def sojourns(self) -> np.ndarray:
        return self.delays + 1.0

    def tail_prob(self, t: float):
        """(p_hat, half_width) for Pr{W > t} with a 95% normal CI."""
        n = self.n_packets
        if n == 0:
            return math.nan, math.nan
        p = float(np.mean(self.delays > t))
        half = 1.96 * math.sqrt(max(p * (1.0 - p), 1.0 / n) / n)
        return p, half

    def window_prob(self, t_min: float, t_max: float):
        """(p_hat, half_width) for Pr{t_min < W < t_max}."""
        n = self.n_packets
        if n == 0:
            return math.nan, math.nan
        hit = (self.delays > t_min) & (self.delays < t_max)
        p = float(np.mean(hit))
        half = 1.96 * math.sqrt(max(p * (1.0 - p), 1.0 / n) / n)
        return p, half

    def empirical_cdf(self):
        """Sorted (w, F(w)) points over the finite delays."""
        fin = np.sort(self.delays[np.isfinite(self.delays)])
        if fin.size == 0:
            return np.empty(0), np.empty(0)
        return fin, np.arange(1, fin.size + 1) / self.n_packets


def simulate_queue(arrival: ArrivalModel, service_sampler, horizon_slots: int,
                   n_packets: int, rng: np.random.Generator,
                   warmup_slots: int = 200, censor_margin: int = 200) -> QueueResult:
    """Run the fluid-bit FCFS queue and collect packet delays.

    Simulates ``horizon_slots`` slots; packets arriving inside
    [warmup_slots, horizon - censor_margin) are analysed, truncated to the
    first ``n_packets``.  Arrivals join at the start of a slot and can be
    served within it: a packet arriving and fully served in slot t has
    virtual delay 0 (sojourn 1).
    """
    t_slots = int(horizon_slots)
    arrivals = rng.poisson(arrival.lambda_pkts, t_slots)
    service = np.asarray(service_sampler(rng, t_slots), dtype=float)
    if service.shape != (t_slots,):
        raise ValueError("service sampler must return one value per slot")

    x = float(arrival.pkt_bits)
    cum_arr = np.cumsum(arrivals) * x
    # a flush slot only ever needs to drain the whole offered load; capping
    # there keeps the cumulative sums small enough for exact float arithmetic
    flush_cap = cum_arr[-1] + x if cum_arr.size else x
    cum_srv = np.cumsum(np.where(service >= FLUSH_BITS, flush_cap, service))
    # Lindley in closed form: backlog(t) = Y(t) - min_{u<=t} Y(u), Y = A - C
    y = cum_arr - cum_srv
    run_min = np.minimum.accumulate(np.minimum(y, 0.0))
    departures = cum_srv + run_min
    departures = np.maximum.accumulate(departures)   # departed bits never recede

    pkt_slot = np.repeat(np.arange(t_slots), arrivals)
    if pkt_slot.size == 0:
        return QueueResult(np.empty(0), t_slots, warmup_slots)
    pkt_level = x * np.arange(1, pkt_slot.size + 1)
    dep_idx = np.searchsorted(departures, pkt_level, side="left")
    delay = (dep_idx - pkt_slot).astype(float)
    delay[dep_idx >= t_slots] = np.inf

    keep = (pkt_slot >= warmup_slots) & (pkt_slot < t_slots - censor_margin)
    delay = delay[keep][:n_packets]
    return QueueResult(delay, t_slots, warmup_slots)


def sample_user_snr(stats: LinkStats, rng: np.random.Generator, size: int,
                    model: str = "rice") -> np.ndarray:
    """Per-slot user SNR draws.

    "rice": the exact power of a complex Gaussian around the LoS mean
    (what the sub-normalised analytic density approximates);
    "exponential": the normalised analytic density itself.
    """
    scale = stats.rho * stats.delta_k_sq
    if model == "exponential":
        return rng.exponential(scale, size)
    if model == "rice":
        los = math.sqrt(stats.rho * stats.upsilon_k)
        sd = math.sqrt(scale / 2.0)
        re = rng.normal(los, sd, size)
        im = rng.normal(0.0, sd, size)
        return re ** 2 + im ** 2
    raise ValueError(f"unknown SNR model: {model}")


def fbc_service_sampler(stats: LinkStats, secrecy: SecrecyParams,
                        dispersion_mode: str = "exact",
                        snr_model: str = "rice",
                        per_channel_use: bool = False):
    """Physical per-slot service: n_k * R(gamma_k, gamma_e) on success, else 0.

    SNRs are drawn independently per slot (block fading); the rate uses the
    exact dispersion by default.  With per_channel_use=True the blocklength
    multiplier is dropped, i.e. the slot serves R bits.
    """
    n_mult = 1.0 if per_channel_use else float(secrecy.blocklength)

    def sampler(rng: np.random.Generator, n_slots: int) -> np.ndarray:
        gamma_e = rng.exponential(1.0 / stats.lambda_eve, n_slots)
        gamma_k = sample_user_snr(stats, rng, n_slots, snr_model)
        rate = fbc_secrecy_rate(gamma_k, gamma_e, secrecy, dispersion_mode)
        success = rng.random(n_slots) >= secrecy.epsilon_e
        return n_mult * rate * success

    return sampler


def model_matched_service_sampler(stats: LinkStats, secrecy: SecrecyParams):
    """Service distribution whose Mellin transform is exactly the analytic one.

    Per success slot: log2(u) bits on the wedge {finite gamma_k >= gamma_e}
    (possibly negative in the penalty sliver), and a queue flush elsewhere —
    the sub-normalised user density and the wedge restriction both encode
    "infinite service" mass.  Decode failures serve 0 bits.  Against this
    sampler the kernel bound is a sharp (theory-exact) upper bound.
    """
    n_cbl = secrecy.blocklength
    pen_u = q_inv(secrecy.epsilon_e) / math.sqrt(n_cbl)
    qinv_sigma = q_inv(secrecy.sigma_leak)
    finite_mass = math.exp(-stats.upsilon_k / stats.delta_k_sq)
    scale = stats.rho * stats.delta_k_sq

    def sampler(rng: np.random.Generator, n_slots: int) -> np.ndarray:
        gamma_e = rng.exponential(1.0 / stats.lambda_eve, n_slots)
        gamma_k = rng.exponential(scale, n_slots)
        finite = rng.random(n_slots) < finite_mass
        wedge = finite & (gamma_k >= gamma_e)
        pen_e = np.sqrt(dispersion(gamma_e) / n_cbl) * qinv_sigma
        log2_u = (np.log2(1.0 + gamma_k) - np.log2(1.0 + gamma_e)
                  - (pen_u + pen_e) / math.log(2.0))
        bits = np.where(wedge, log2_u, FLUSH_BITS)
        success = rng.random(n_slots) >= secrecy.epsilon_e
        return bits * success

    return sampler
