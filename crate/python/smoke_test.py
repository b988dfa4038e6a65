"""Quick end-to-end check of the Python bindings.

Build first:  maturin develop -m crates/python/Cargo.toml --release
"""
import itertools
import math
import pathlib

import ris_ising as ri

ROOT = pathlib.Path(__file__).resolve().parent.parent

toy = ri.Scene.load(str(ROOT / "scenarios" / "toy_8.scn"))
assert toy.n_ris == 8 and toy.n_bs == 64
ch = toy.channels()
model = ch.binary_model()
assert model.n == 8

# energy tracks -gain for every spin configuration
for spins in itertools.product([1, -1], repeat=8):
    idx = model.decode(list(spins))
    lin = 10 ** (ch.gain_db(idx) / 10)
    assert math.isclose(model.energy(list(spins)), -lin, rel_tol=1e-9)

ex = ri.solve_exhaustive(model)
sa = ri.solve_sa(model, seed=3)
bif = ri.solve_bifurcation(model, seed=3)
assert math.isclose(sa.best_energy, ex.best_energy, rel_tol=1e-12)
assert math.isclose(bif.best_energy, ex.best_energy, rel_tol=1e-12)
print("toy:", ex)

red = ri.reduce(model)
merged = red.merge(ri.solve_exhaustive(red.reduced_model).best_spins)
assert math.isclose(model.energy(merged), ex.best_energy, rel_tol=1e-12)

quat = ri.optimize(toy, method="exhaustive", level=4)
cont, _ = ch.continuous_reference()
assert cont + 1e-9 >= quat.gain_db >= ex.gain_db - 1e-9

try:
    ri.optimize(toy, method="fresnel", level=4)
except ValueError:
    pass
else:
    raise AssertionError("fresnel at level 4 should be rejected")

scene = ri.Scene.reference(74)
run = ri.optimize(scene, method="cim-sa", seed=0)
print(f"N={scene.n_ris}: {run.gain_db:.2f} dB in {run.wall_time:.2f} s")
assert abs(run.gain_db - (-63.70)) <= 0.5

d, g = ri.sweep(scene, run.coefficients, 40.0, 60.0, 0.5)
assert len(d) == 41 and abs(d[g.index(max(g))] - 50.0) <= 1.0

print("smoke test passed")
