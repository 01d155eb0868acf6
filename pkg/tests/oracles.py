"""Direct, package-independent evaluations used as test oracles."""

import math


def ssd(v, Tr=1.5, a_comf=-2.0):
    return v * Tr + v**2 / (2 * abs(a_comf))


def lognorm_pdf(S, mu, sigma):
    return 1.0 / (S * sigma * math.sqrt(2 * math.pi)) * math.exp(-((math.log(S) - mu) ** 2) / (2 * sigma**2))


def f_eff(S, v, s0=2.0, T=1.5, sigma=1.0):
    s_star = s0 + v * T
    # mode of the log-normal is exp(mu - sigma^2)
    mu = math.log(s_star) + sigma**2
    return lognorm_pdf(S, mu, sigma) / lognorm_pdf(s_star, mu, sigma)


def f_ttc(gap, dv, thr=4.0):
    if dv >= 0:
        return 0.0
    ttc = gap / (-dv)
    return (ttc / thr) ** 2 - 1 if 0 <= ttc < thr else 0.0


def f_signal_go(d_tl, v, a):
    """Amber, stop-line margin non-positive, braking, leader beyond the line."""
    if a >= 0:
        return 0.0
    # the go branch lives in [-1, 0]; past d_tl = SSD braking is unpenalised
    return min(0.0, (d_tl / ssd(v)) ** 2 - 1)


def f_acc(a, a_min=-4.0, a_max=2.0):
    return -((a / a_min) ** 0.5) if a <= 0 else -((a / a_max) ** 0.5)


def f_jerk(j, a_min=-4.0, a_max=2.0, dt=0.04):
    return -((abs(j) / ((a_max - a_min) / dt)) ** 0.25)


def f_speed(v, lim=15.0):
    return -(((v - lim) / lim) ** 2) if v > lim else 0.0


W = (1.0, 1.5, 1.5, 0.3, 2.0, 2.0, 50.0)


def reward(f_sig, gap, dv, v, a, a_prev, collided, dt=0.04):
    """Weighted total for a car-following step; ``gap``/``dv`` refer to the leader ahead."""
    if collided:
        return -W[6]
    parts = (
        f_sig,
        f_ttc(gap, dv),
        f_eff(gap, v),
        f_acc(a),
        f_jerk((a - a_prev) / dt),
        f_speed(v),
    )
    return sum(w * p for w, p in zip(W, parts))


# -- a 10-step trace whose metrics were worked out by hand ---------------------------
# every number below is a short binary fraction so the hand values are exact
HAND_DT = 0.04
HAND_V = 10.0
HAND_GAP = [30.0, 20.0, 10.0, 6.25, 8.0, 12.0, math.inf, 50.0, 100.0, 3.0]
HAND_DV = [-1.0, -2.0, 0.0, -0.125, 1.0, -0.5, math.nan, -0.5, -1.0, 0.0]
HAND_ACTIONS = [0.0, 0.04, 0.04, 0.0, -0.08, -0.08, -0.08, 0.0, 0.16, 0.16]
# closing steps: 30/1, 20/2, 6.25/0.125 (exactly the 50 s cap), 12/0.5; 50/0.5 and 100/1 exceed the cap
HAND_TTC = [10.0, 24.0, 30.0, 50.0]
HAND_GAPS_SORTED = [3.0, 6.25, 8.0, 10.0, 12.0, 20.0, 30.0, 50.0, 100.0]
HAND_JERK = [0.0, 1.0, 0.0, -1.0, -2.0, 0.0, 0.0, 2.0, 4.0, 0.0]
HAND_JERK_ECDF = {-2.0: 0.1, -1.0: 0.2, 0.0: 0.7, 1.0: 0.8, 2.0: 0.9, 4.0: 1.0}
HAND_MEAN_ABS_JERK = 1.0
HAND_FRAC_COMFORT = 0.7
