"""Quick end-to-end check of the Python bindings. Run after `pip install -e crates/py`."""

import math

import geoqm_py as g

r = 1 / math.sqrt(2)
singlet = g.PureState([0, r, -r, 0])
rep = g.entanglement_measure(singlet)
assert abs(rep.delta - math.pi / 2) < 1e-10, rep.delta
assert rep.maximal

product = g.PureState([1, 0, 0, 0])
assert g.entanglement_measure(product).delta < 1e-10
assert g.brute_force_delta(product) < 1e-8

# Rescaling a representative does not move the ray.
psi = g.PureState([0.6, 0.48j, 0.64])
same = g.PureState([c * (2 - 3j) for c in psi.components])
assert psi.distance(same) < 1e-12
assert g.PureState.from_json(psi.to_json()).distance(psi) < 1e-15

probs = g.spin_measure(g.PureState([1, 1, 1]), (1, 0))
assert [round(l, 12) for l, _ in probs] == [1.0, 0.0, -1.0]
assert all(abs(p - 1 / 3) < 1e-12 for _, p in probs)

h = g.Observable([[0, 0, 0], [0, 1, 0], [0, 0, math.sqrt(2)]])
speed, spread = g.speed_check(h, psi)
assert abs(speed - spread) < 1e-5 * spread
exact = g.evolve_exact(h, psi, 3.0)
flowed = g.flow_state(h, psi, 3.0, 1e-3)
assert exact.distance(flowed) < 1e-8
assert abs(h.variance(psi) - h.geometric_variance(psi)) < 1e-6

sx = g.Observable([[0, 0.5], [0.5, 0]])
sz = g.Observable([[0.5, 0], [0, -0.5]])
lhs, slack, sharp = g.kahler_inequality(sx, sz, g.PureState([0.8, 0.36 + 0.48j]))
assert slack >= -1e-10 and sharp >= -1e-10
assert abs(g.bracket_constant() + 0.5) < 1e-12

equator = [g.PureState([r, r * complex(math.cos(p), math.sin(p))]) for p in (2 * math.pi * k / 64 for k in range(64))]
assert abs(abs(g.holonomy_phase(equator)) - math.pi) < 1e-9
assert abs(abs(g.surface_phase(equator, g.PureState([1, 0]))) - math.pi) < 1e-9

gap = g.Observable([[0, 0], [0, 1]])
rho = g.gibbs_density(gap, 0.0)
assert abs(rho[0][0].real - 0.5) < 1e-12
mean, err = g.maxent_density(gap, 0.0, 20000, 3)
assert abs(mean[0][0].real - 0.5) < 4 * err[0][0] + 1e-12

ok, report = g.run_criterion(1, seed=7)
assert ok, report

try:
    g.PureState([0, 0])
except ValueError as e:
    assert "zero" in str(e)
else:
    raise AssertionError("zero vector accepted")

print("python bindings ok")
