"""Independent reference values, frozen into tests/oracle_values.hpp.

Run: python3 tests/oracle/oracles.py > tests/oracle_values.hpp
Uses mpmath at 120 digits and cvxpy for the entropy projection.
"""
import math

import cvxpy as cp
import mpmath as mp
import numpy as np

mp.mp.dps = 120
out = []


def emit(name, value):
    out.append(f"inline constexpr double {name} = {mp.nstr(mp.mpf(value), 20)};")


def emit_array(name, values):
    body = ", ".join(mp.nstr(mp.mpf(v), 20) for v in values)
    out.append(f"inline constexpr double {name}[] = {{{body}}};")


# Poisson pair.
for tag, u in [("m05", -0.5), ("p1", 1.0), ("p3", 3.0)]:
    emit(f"kTau_{tag}", mp.e ** u - u - 1)
    emit(f"kTauStar_{tag}", (u + 1) * mp.log(u + 1) - u)


def stationary_resets(fwd, bwd, zmax):
    # Balance equations of the chain with resets on {0..zmax}, solved in exact-ish arithmetic.
    n = zmax + 1
    A = mp.zeros(n, n)
    for z in range(n):
        if z < zmax:
            A[z + 1, z] += fwd(z)
            A[z, z] -= fwd(z)
        if z > 0:
            A[0, z] += bwd(z)
            A[z, z] -= bwd(z)
    for z in range(n):
        A[n - 1, z] = 1
    b = mp.zeros(n, 1)
    b[n - 1] = 1
    return mp.lu_solve(A, b)


# wlan_decay(1,1) on {0..40}; the infinite-state law is (z+1)/(z+2)!.
pi = stationary_resets(lambda z: mp.mpf(1) / (z + 1), lambda z: 1, 40)
emit_array("kWlanDecayStationary", [pi[z] for z in range(41)])
emit_array("kFactorialLaw", [mp.mpf(z + 1) / mp.factorial(z + 2) for z in range(41)])

# wlan_decay(2,1) on {0..30}.
pi21 = stationary_resets(lambda z: mp.mpf(2) / (z + 1), lambda z: 1, 30)
emit_array("kWlanDecay21Stationary", [pi21[z] for z in range(31)])


# Interacting model: fixed point of xi -> stationary law at frozen field xi(0).
def interacting_fixed_point(kappa, zmax):
    f = lambda x0: stationary_resets(lambda z: (1 + kappa * x0) / (z + 1), lambda z: 1 + kappa * (1 - x0), zmax)[0] - x0
    x0 = mp.findroot(f, mp.mpf("0.5"))
    return stationary_resets(lambda z: (1 + kappa * x0) / (z + 1), lambda z: 1 + kappa * (1 - x0), zmax)


pik = interacting_fixed_point(mp.mpf("0.5"), 40)
emit_array("kInteracting05Stationary", [pik[z] for z in range(41)])
pik3 = interacting_fixed_point(mp.mpf("0.3"), 25)
emit_array("kInteracting03Stationary", [pik3[z] for z in range(26)])

theta = lambda z: 0 if z == 0 else z * mp.log(z)
emit("kInteractingThetaMoment", mp.fsum(theta(z) * pik[z] for z in range(41)))


# Single-segment edge integral by quadrature.
def edge_integral(a, p1, D, f, lam):
    phi = lambda t: a + (p1 - a) * t / D
    return mp.quad(lambda t: f * mp.log(f / (lam * phi(t))) - f + lam * phi(t), [0, D])


emit("kEdgeIntegralA", edge_integral(mp.mpf("0.3"), mp.mpf("0.1"), mp.mpf("0.7"), mp.mpf("0.4"), mp.mpf("1.5")))
emit("kEdgeIntegralB", edge_integral(mp.mpf("0.2"), mp.mpf("0.2000001"), mp.mpf("0.5"), mp.mpf("2.0"), mp.mpf("0.5")))
emit("kEdgeIntegralC", edge_integral(mp.mpf("0.0"), mp.mpf("0.6"), mp.mpf("1.0"), mp.mpf("0.6"), mp.mpf("1.0")))


# delta_0 -> delta_2 under wlan_decay(1,1), z_max = 3: two unit moves of duration 1.
def cost_delta0_to_delta2():
    lf = lambda z: mp.mpf(1) / (z + 1)
    total = mp.mpf(0)
    # Segment 1: phi0 = 1 - t, phi1 = t; flux 1 on (0,1).
    total += mp.quad(lambda t: mp.log(1 / (lf(0) * (1 - t))) - 1 + lf(0) * (1 - t), [0, 1])
    total += mp.quad(lambda t: lf(1) * t + 1 * t, [0, 1])  # idle (1,2) and (1,0)
    # Segment 2: phi1 = 1 - t, phi2 = t; flux 1 on (1,2).
    total += mp.quad(lambda t: mp.log(1 / (lf(1) * (1 - t))) - 1 + lf(1) * (1 - t), [0, 1])
    total += mp.quad(lambda t: 1 * (1 - t), [0, 1])  # idle (1,0)
    total += mp.quad(lambda t: lf(2) * t + 1 * t, [0, 1])  # idle (2,3) and (2,0)
    return total


emit("kCostDelta0ToDelta2", cost_delta0_to_delta2())


# cm_bound for delta_2 with lambda bounds 1, including the sweep leg from the truncated law.
def cm_bound_delta2(zmax):
    xi = {2: mp.mpf(1)}
    main = 1 / mp.e
    for z in range(1, 3):
        p = xi.get(z, 0)
        main += 3 * (mp.log(z) / z**2 + theta(z) * p)
        main += (z * mp.log(z) + z) * p + z * p * (mp.log(1) + 2)
        main += 2 * z * p
    pi_t = stationary_resets(lambda z: mp.mpf(1) / (z + 1), lambda z: 1, zmax)
    leg = mp.fsum(pi_t[z] * mp.log(1 / pi_t[z]) + pi_t[z] * 2 for z in range(1, zmax + 1))
    return main + leg


emit("kCmBoundDelta2Zmax10", cm_bound_delta2(10))


# Heavy-tail targets against the mm1(1,2) geometric law.
def heavy_tail_entropy(K):
    w = [0, 0] + [1 / (mp.mpf(z) ** 2 * mp.log(z) ** 2) for z in range(2, K + 1)]
    s = mp.fsum(w)
    xi = [x / s for x in w]
    return mp.fsum(xi[z] * mp.log(xi[z] / (mp.mpf(1) / 2 ** (z + 1))) for z in range(2, K + 1)), mp.fsum(
        theta(z) * xi[z] for z in range(2, K + 1)
    )


for K in (50, 200, 800):
    e, t = heavy_tail_entropy(K)
    emit(f"kHeavyEntropyK{K}", e)
    emit(f"kHeavyThetaK{K}", t)


# Entropy projection on a TV ball, solved by a generic convex solver.
def sanov_cvx(nu, center, delta):
    zeta = cp.Variable(len(nu))
    # kl_div(x, y) = x log(x/y) - x + y; the linear part sums to 0 on probability vectors.
    obj = cp.sum(cp.kl_div(zeta, nu))
    cons = [zeta >= 0, cp.sum(zeta) == 1, 0.5 * cp.norm1(zeta - center) <= delta]
    prob = cp.Problem(cp.Minimize(obj), cons)
    prob.solve(solver=cp.CLARABEL, tol_gap_abs=1e-12, tol_gap_rel=1e-12, tol_feas=1e-12)
    return prob.value


# Closed form for center delta_0, nu = geometric(1/2) truncated at 30 with the tail kept.
S = mp.mpf(1) / 2 - mp.mpf(2) ** -31
emit("kSanovDelta0Geom", mp.mpf("0.9") * mp.log(mp.mpf("0.9") / mp.mpf("0.5")) + mp.mpf("0.1") * mp.log(mp.mpf("0.1") / S))

# Generic instance: nu and center on {0..5}, no tails.
nu6 = np.array([0.3, 0.25, 0.2, 0.12, 0.08, 0.05])
ce6 = np.array([0.05, 0.05, 0.1, 0.2, 0.3, 0.3])
emit("kSanovGeneric", sanov_cvx(nu6, ce6, 0.2))
emit_array("kSanovGenericNu", nu6)
emit_array("kSanovGenericCenter", ce6)

# Two-state dual: maximize a*alpha - w01 (e^a - 1) - w10 (e^-a - 1) over the difference a.
w01, w10, v = mp.mpf("0.7"), mp.mpf("0.4"), mp.mpf("0.25")
a = mp.findroot(lambda a: v - w01 * mp.e ** a + w10 * mp.e ** (-a), 0)
emit("kDualTwoState", a * v - w01 * (mp.e ** a - 1) - w10 * (mp.e ** (-a) - 1))

# Exact binomial tail reference for the TV ball around delta_0 under mm1(1,2), z_max = 30.
p0 = (mp.mpf(1) / 2) / (1 - mp.mpf(2) ** -31)
for N in (100, 200, 400):
    k0 = int(math.ceil(0.9 * N - 1e-9))
    tail = mp.fsum(mp.binomial(N, k) * p0**k * (1 - p0) ** (N - k) for k in range(k0, N + 1))
    emit(f"kBinomialRateN{N}", -mp.log(tail) / N)

print("#pragma once")
print("// Generated by tests/oracle/oracles.py; do not edit by hand.")
print()
print("namespace oracle {")
print()
print("\n".join(out))
print()
print("}  // namespace oracle")
