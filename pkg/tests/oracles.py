"""Independent oracles used by the unit and acceptance tests.

Everything here is computed without touching the package's engine: the
contact process on the 2x2 torus is a 16-state CTMC whose generator is
written out directly from the rate definitions and exponentiated with
scipy.
"""

import numpy as np
from scipy.linalg import expm

# 2x2 torus: site i at (x, y) = (i % 2, i // 2); horizontal partner flips
# bit 0, vertical partner flips bit 1.  Each geometric neighbor is reached
# by two of the four kernel offsets, so it carries weight 1/2.
_H_PARTNER = [1, 0, 3, 2]
_V_PARTNER = [2, 3, 0, 1]


def contact_generator_2x2(beta: float, delta: float) -> np.ndarray:
    """Generator of the contact process on the 2x2 torus (16 configs,
    config c has site i occupied iff bit i of c is set)."""
    Q = np.zeros((16, 16))
    for c in range(16):
        for i in range(4):
            occ = (c >> i) & 1
            flipped = c ^ (1 << i)
            if occ:
                rate = delta
            else:
                f1 = 0.5 * ((c >> _H_PARTNER[i]) & 1) \
                    + 0.5 * ((c >> _V_PARTNER[i]) & 1)
                rate = beta * f1
            Q[c, flipped] += rate
        Q[c, c] = -Q[c].sum()
    return Q


def contact_occupation_probability(beta: float, delta: float, c0: int,
                                   site: int, t: float) -> float:
    """P(site occupied at time t | initial config c0), exact."""
    P = expm(contact_generator_2x2(beta, delta) * t)
    mask = np.array([(c >> site) & 1 for c in range(16)], dtype=float)
    return float(P[c0] @ mask)


def bistable_front_speed(beta: float) -> float:
    """Exact traveling-wave speed for u_t = u_xx + u(-1 + beta*u*(1-u)).

    Substituting u = rho2*v maps the cubic onto the standard bistable form
    v_t = v_xx + b*v(1-v)(v-a) with b = beta*rho2^2 and a = rho1/rho2,
    whose front speed is sqrt(b/2)*(1-2a); since rho1 + rho2 = 1 this
    collapses to sqrt(beta/2)*(3*rho2 - 2).
    """
    rho2 = 0.5 * (1.0 + np.sqrt(1.0 - 4.0 / beta))
    return float(np.sqrt(beta / 2.0) * (3.0 * rho2 - 2.0))
