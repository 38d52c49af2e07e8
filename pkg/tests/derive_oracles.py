"""Derive the frozen oracle values in oracles.json with mpmath only, without
importing the package.  Re-run by hand:  python3 tests/derive_oracles.py"""
import json
from pathlib import Path

import mpmath as mp

mp.mp.dps = 30


def stationary(Q):
    n = len(Q)
    A = mp.matrix([[Q[k][j] for k in range(n)] for j in range(n - 1)] + [[1] * n])
    b = mp.matrix([0] * (n - 1) + [1])
    return [mp.mpf(v) for v in mp.lu_solve(A, b)]


def shoot_lambda(theta0, guess):
    """First Dirichlet eigenvalue of -m'' = lam m on (0, theta0) by shooting."""
    def end(lam):
        f = mp.odefun(lambda t, y: [y[1], -lam * y[0]], 0, [0, 1])
        return f(theta0)[0]
    return mp.findroot(end, guess)


def psi(theta, a, d):
    i = mp.mpc(0, 1)
    return (mp.gamma((-i * theta + a) / 2) / mp.gamma(-i * theta / 2)
            * mp.gamma((i * theta + d) / 2) / mp.gamma((i * theta + d - a) / 2))


out = {}
out["pi_Q_1_2"] = [float(v) for v in stationary([[-1, 1], [2, -2]])]
out["pi_sym"] = [float(v) for v in stationary([[-1, 1], [1, -1]])]

# long-run speed of the two-state battery spec with all ingredients
pi = stationary([[-1, 1], [2, -2]])
state_drift = [mp.mpf("0.3") + mp.mpf("0.5") * mp.mpf(1) / 2,
               mp.mpf("-0.5") + 1 * (mp.mpf("0.6") / mp.mpf("1.5") - mp.mpf("0.4") / 1)]
switch = pi[0] * 1 * mp.mpf("0.25") + pi[1] * 2 * (-mp.mpf(1) / 3)
out["speed_wr2"] = float(pi[0] * state_drift[0] + pi[1] * state_drift[1] + switch)
out["speed_drifts_1_-3"] = float(pi[0] * 1 + pi[1] * (-3))
out["speed_jump_entrance"] = float((-1 + 2 / mp.mpf("1.5")) / 2 + (-mp.mpf("0.5") + mp.mpf("1.5")) / 2)

# E[exp(i lam xi_t); Theta_t = k | Theta_0 = j] for a two-state Gaussian MAP
lam, t = 1, 1
Q = [[-1, 1], [2, -2]]
a, s = [1, -1], [1, mp.mpf("0.5")]
i = mp.mpc(0, 1)
F = mp.matrix([[Q[j][k] + (i * lam * a[j] - (s[j] * lam) ** 2 / 2 if j == k else 0)
                for k in range(2)] for j in range(2)])
E = mp.expm(F * t)
out["mexp_gauss2"] = {"Q": Q, "drift": a, "sigma": [float(v) for v in s], "lam": lam, "t": t,
                      "re": [[float(mp.re(E[j, k])) for k in range(2)] for j in range(2)],
                      "im": [[float(mp.im(E[j, k])) for k in range(2)] for j in range(2)]}

out["clock_unit_drift_t1"] = float(mp.quad(lambda u: mp.e ** u, [0, 1]))
out["lambda1"] = {"pi": float(shoot_lambda(mp.pi, 0.9)), "pi/2": float(shoot_lambda(mp.pi / 2, 3.5)),
                  "pi/3": float(shoot_lambda(mp.pi / 3, 8.5)),
                  "3pi/2": float(shoot_lambda(3 * mp.pi / 2, 0.4))}
out["kappa_alpha1_lam2"] = float(mp.gamma(mp.mpf(3) / 2) / mp.gamma(1))
out["psi_alpha1.5_d2"] = {str(th): [float(mp.re(psi(th, mp.mpf("1.5"), 2))),
                                    float(mp.im(psi(th, mp.mpf("1.5"), 2)))] for th in (0.1, 1, 5)}
out["w1_exp1_exp2"] = float(mp.quad(lambda z: abs(mp.e ** (-2 * z) - mp.e ** (-z)), [0, mp.inf]))
# all-time max of BM drift -1, sigma 1 is Exp(2): H+(y) = 1 - e^{2y}
out["hplus_bm"] = {"ln2_half": float(1 - mp.e ** (-mp.log(2))), "minus10": float(1 - mp.e ** -20)}
out["hplus_y_half"] = float(-mp.log(2) / 2)

Path(__file__).with_name("oracles.json").write_text(json.dumps(out, indent=1, sort_keys=True) + "\n")
