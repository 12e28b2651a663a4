import numpy as np, warnings, json, itertools, time
from eitkit.mesh import generate_disk_mesh, ElectrodeLayout, build_transfer
from eitkit.forward import CEMForwardModel
from eitkit.phantoms import Phantom, Inclusion
from eitkit.inversion import SplitBregmanReconstruction

warnings.simplefilter('ignore')
lay = ElectrodeLayout(16)
fine = generate_disk_mesh(1968, lay)
coarse = generate_disk_mesh(492, lay)
transfer = build_transfer(fine, coarse)
fwd_fine = CEMForwardModel(fine, lay)
fwd_coarse = CEMForwardModel(coarse, lay)

results = []
for rad in (0.12, 0.15, 0.18):
    ph = Phantom('X', [Inclusion((0.42, 0.36), rad, 1.0),
                       Inclusion((-0.42, -0.36), rad, 8.0)])
    truth_c = transfer.map_values(ph.element_values(fine))
    clean = fwd_fine.voltages(ph.element_values(fine))
    for t in (3e4, 1e5, 3e5, 1e6):
        row = dict(rad=rad, t=t)
        for key, domain, beta, reset in (
                ('alg1', 'transform', 0.1, True),
                ('alg2', 'space', 0.1, True),
                ('l2', 'transform', 1.0, True),
                ('alg1c', 'transform', 0.1, False),
                ('alg2c', 'space', 0.1, False)):
            t0 = time.time()
            est = SplitBregmanReconstruction(
                fwd_coarse, domain=domain, beta=beta, alpha0=t * 1e-6,
                q_alpha=0.6, mu=t * 1e-10, sigma_ref=0.25, outer_max=30,
                reset_bregman=reset).fit(clean, truth=truth_c)
            res = np.array([h.residual for h in est.history_])
            viol = int(np.sum(np.diff(res) > 0))
            row[key] = dict(re=round(est.history_[-1].re, 4), viol=viol,
                            ratio=float(res[-1] / res[0]),
                            min_re=round(min(h.re for h in est.history_), 4),
                            secs=round(time.time() - t0, 1))
        results.append(row)
        print(json.dumps(row), flush=True)

with open('/root/pkg/scratch_grid.json', 'w') as fh:
    json.dump(results, fh, indent=1)
