"""Derive three-mode preset plans by nullifier-variance minimisation.

A preset is a DecompositionPlan for N = 3 (interactions T12^(1), T13^(1),
T12^(2) plus final phases alpha).  Interactions that are switched off are
full exchanges (omega = 0, phi = 0).  For p-squeezed inputs the infinite
squeezing limit of a nullifier g.x_out + h.p_out vanishes iff its x_in
coefficient g^T Re(U) + h^T Im(U) is zero, so the objective is the squared
norm of those coefficients summed over the preset's nullifiers.

Usage: python3 scripts/derive_presets.py
"""
import itertools
import numpy as np
from scipy.optimize import least_squares, minimize


def t_matrix(n, m, omega, phi):
    t = np.eye(n, dtype=complex)
    s, c = np.sin(omega), np.cos(omega)
    t[0, 0] = np.exp(1j * phi) * s
    t[0, m] = -np.exp(1j * phi) * c
    t[m, 0] = c
    t[m, m] = s
    return t


# (layer, m) in application order; m is 0-based column index
SLOTS = [(1, 1), (1, 2), (2, 1)]


def unitary(params, on):
    it = iter(params)
    u = np.eye(3, dtype=complex)
    for k, (layer, m) in enumerate(SLOTS):
        if k in on:
            omega, phi = next(it), next(it)
        else:
            omega, phi = 0.0, 0.0
        u = np.linalg.inv(t_matrix(3, m, omega, phi)) @ u
    alphas = [next(it) for _ in range(3)]
    return np.diag(np.exp(1j * np.array(alphas))) @ u


def nullifiers(name):
    x = lambda i: (np.eye(3)[i], np.zeros(3))
    p = lambda i: (np.zeros(3), np.eye(3)[i])

    def comb(*terms):
        g, h = np.zeros(3), np.zeros(3)
        for coef, (gi, hi) in terms:
            g += coef * gi
            h += coef * hi
        return g, h

    table = {
        "op1": [comb((1, p(0))), comb((1, p(1))), comb((1, p(2)))],
        "op2i": [comb((1, x(0)), (-1, x(2))), comb((1, p(0)), (1, p(2))), comb((1, p(1)))],
        "op2ii": [comb((1, x(1)), (-1, x(2))), comb((1, p(1)), (1, p(2))), comb((1, p(0)))],
        "op2iii": [comb((1, x(0)), (-1, x(1))), comb((1, p(0)), (1, p(1))), comb((1, p(2)))],
        "ghz": [comb((1, x(0)), (-1, x(1))), comb((1, x(1)), (-1, x(2))),
                comb((1, p(0)), (1, p(1)), (1, p(2)))],
        "triangle": [comb((1, p(0)), (-1, x(1)), (-1, x(2))), comb((1, p(1)), (-1, x(0)), (-1, x(2))),
                     comb((1, p(2)), (-1, x(0)), (-1, x(1)))],
        "linear": [comb((1, p(0)), (-1, x(2))), comb((1, p(1)), (-1, x(2))),
                   comb((1, p(2)), (-1, x(0)), (-1, x(1)))],
    }
    return table[name]


def objective(params, on, nulls):
    u = unitary(params, on)
    total = 0.0
    for g, h in nulls:
        leak = g @ u.real + h @ u.imag
        total += leak @ leak
    return total


def residuals(params, on, nulls, pinned):
    full = expand(params, on, pinned)
    u = unitary(full, on)
    return np.concatenate([g @ u.real + h @ u.imag for g, h in nulls])


def expand(params, on, pinned):
    """Insert pinned omegas (by interaction index) into the free parameter vector."""
    it = iter(params)
    full = []
    for k in on:
        full.append(pinned[k] if k in pinned else next(it))
        full.append(next(it))
    full.extend(it)
    return np.array(full)


def solve(name, on, pinned=None, seed=0, restarts=200):
    pinned = pinned or {}
    rng = np.random.default_rng(seed)
    nulls = nullifiers(name)
    n_free = 2 * len(on) + 3 - len(pinned)
    best = None
    for _ in range(restarts):
        x0 = rng.uniform(0, 2 * np.pi, n_free)
        res = minimize(lambda v: np.sum(residuals(v, on, nulls, pinned) ** 2), x0, method="BFGS",
                       options={"gtol": 1e-14})
        if best is None or res.fun < best.fun:
            best = res
    polished = least_squares(residuals, best.x, args=(on, nulls, pinned), xtol=1e-15, ftol=1e-15, gtol=1e-15)
    full = expand(polished.x, on, pinned)
    return full, float(np.sum(polished.fun ** 2))


# exchange fraction cos^2(omega) = 1/3 for the first active GHZ interaction
THIRD = float(np.arccos(np.sqrt(1.0 / 3.0)))

PRESETS = [
    ("op1", "op1", (), {}),
    ("op2i", "op2i", (0,), {}),
    ("op2ii", "op2ii", (1,), {}),
    ("op2iii", "op2iii", (2,), {}),
    ("op3i", "ghz", (0, 1), {0: THIRD}),
    ("op3ii", "ghz", (1, 2), {1: THIRD}),
    ("op3iii", "ghz", (0, 2), {0: THIRD}),
    ("op4i", "triangle", (0, 1, 2), {}),
    ("op4ii", "linear", (0, 1, 2), {}),
]

if __name__ == "__main__":
    for preset, nulls, on, pinned in PRESETS:
        full, resid = solve(nulls, on, pinned)
        params = np.mod(full, 2 * np.pi)
        it = iter(params)
        inter = []
        for k in range(3):
            inter.append((float(next(it)), float(next(it))) if k in on else (0.0, 0.0))
        alphas = [float(next(it)) for _ in range(3)]
        print(f"{preset}: residual={resid:.3e}")
        for k, (om, ph) in enumerate(inter):
            print(f"    interaction {k + 1}: omega={om!r} phi={ph!r} exchange={np.cos(om) ** 2:.12f}")
        print(f"    alphas={alphas!r}")
