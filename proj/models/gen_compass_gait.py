#!/usr/bin/env python3
"""Generates compass_gait.json.

Taylor-expands the passive compass-gait walker dynamics (hip mass 10 kg, leg
mass 5 kg, a = b = 1 m, slope 0.05 rad) to total degree 5 about the origin and
linearizes the impact map about a nominal inter-leg half-angle of 0.15 rad.
The file documents the model class; it is not wired into any test.
"""
import json
import math

import sympy as sp

m, mh, a, b = 5.0, 10.0, 1.0, 1.0
l = a + b
gamma = 0.05
g = 9.81

s, t, ds, dt = sp.symbols("bsw bst bswd bstd")

M = sp.Matrix([[m * b**2, -m * l * b * sp.cos(t - s)],
               [-m * l * b * sp.cos(t - s), (mh + m) * l**2 + m * a**2]])
C = sp.Matrix([[0, m * l * b * sp.sin(t - s) * dt],
               [m * l * b * sp.sin(t - s) * ds, 0]])
N = sp.Matrix([m * b * g * sp.sin(s), -(mh * l + m * a + m * l) * g * sp.sin(t)])

acc = -M.inv() * (C * sp.Matrix([ds, dt]) + N)


def taylor5(expr):
    """Total-degree-5 Taylor polynomial about the origin."""
    variables = [s, t, ds, dt]
    eps = sp.symbols("_eps")
    scaled = expr.subs({v: eps * v for v in variables}, simultaneous=True)
    series = sp.series(scaled, eps, 0, 6).removeO()
    return sp.expand(series.subs(eps, 1))


def poly_string(expr):
    poly = sp.Poly(expr, s, t, ds, dt)
    parts = []
    for monom, coeff in zip(poly.monoms(), poly.coeffs()):
        c = float(coeff)
        if abs(c) < 1e-14:
            continue
        term = repr(c)
        for var, e in zip(["bsw", "bst", "bswd", "bstd"], monom):
            if e == 1:
                term += f"*{var}"
            elif e > 1:
                term += f"*{var}^{e}"
        parts.append(term)
    if not parts:
        return "0"
    out = parts[0]
    for p in parts[1:]:
        out += (" - " + p[1:]) if p.startswith("-") else (" + " + p)
    return out


f_sw = poly_string(taylor5(acc[0]))
f_st = poly_string(taylor5(acc[1]))

# Impact map linearized at inter-leg half-angle alpha* = 0.15.
alpha_star = 0.15
c2 = math.cos(2 * alpha_star)
Qm = [[-m * a * b, -m * a * b + (mh * l**2 + 2 * m * a * l) * c2], [0.0, -m * a * b]]
Qp = [[m * b * (b - l * c2), m * l * (l - b * c2) + m * a**2 + mh * l**2],
      [m * b**2, -m * b * l * c2]]
det = Qp[0][0] * Qp[1][1] - Qp[0][1] * Qp[1][0]
Qpi = [[Qp[1][1] / det, -Qp[0][1] / det], [-Qp[1][0] / det, Qp[0][0] / det]]
W = [[Qpi[0][0] * Qm[0][0] + Qpi[0][1] * Qm[1][0], Qpi[0][0] * Qm[0][1] + Qpi[0][1] * Qm[1][1]],
     [Qpi[1][0] * Qm[0][0] + Qpi[1][1] * Qm[1][0], Qpi[1][0] * Qm[0][1] + Qpi[1][1] * Qm[1][1]]]

model = {
    "name": "compass_gait",
    "description": (
        "Passive compass-gait walker (hip mass 10 kg, leg mass 5 kg, a = b = 1 m) on a "
        "0.05 rad slope; degree-5 Taylor dynamics about the origin, impact map linearized "
        "at inter-leg half-angle 0.15 rad. Target: configurations within 0.1 of the nominal "
        "origin configuration at T = 1. Shipped for documentation; not an acceptance target."
    ),
    "horizon": 1.0,
    "modes": [
        {
            "id": 1,
            "states": ["bsw", "bst", "bswd", "bstd"],
            "box": [[-0.4, 0.4], [-0.4, 0.4], [-2.0, 2.0], [-2.0, 2.0]],
            "dynamics": ["bswd", "bstd", f_sw, f_st],
            "target_ineqs": ["-bsw^2 - bst^2 - bswd^2 - bstd^2 + 0.01"],
        }
    ],
    "edges": [
        {
            "from": 1,
            "to": 1,
            "guard_eqs": [f"bsw + bst + {2 * gamma}"],
            "guard_ineqs": ["-bswd - bstd"],
            "reset": [
                "bst",
                "bsw",
                f"{repr(W[0][0])}*bswd + {repr(W[0][1])}*bstd",
                f"{repr(W[1][0])}*bswd + {repr(W[1][1])}*bstd",
            ],
        }
    ],
}

with open("compass_gait.json", "w") as fh:
    json.dump(model, fh, indent=2)
    fh.write("\n")
print("wrote compass_gait.json")
