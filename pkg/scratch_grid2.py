import numpy as np, warnings, json, time
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

def trial(incs, t, om=80, q=0.6, a0=1e-6):
    ph = Phantom('X', incs)
    truth_c = transfer.map_values(ph.element_values(fine))
    clean = fwd_fine.voltages(ph.element_values(fine))
    out = {}
    for key, domain, beta, reset in (
            ('b01', 'transform', 0.1, False), ('b05', 'transform', 0.5, False),
            ('b10', 'transform', 1.0, False), ('alg2', 'space', 0.1, False)):
        est = SplitBregmanReconstruction(
            fwd_coarse, domain=domain, beta=beta, alpha0=t * a0 / 1e-6 * 1e-6,
            q_alpha=q, mu=t * 1e-10, sigma_ref=0.25, outer_max=om,
            reset_bregman=reset).fit(clean, truth=truth_c)
        r = np.array([h.residual for h in est.history_])
        out[key] = (round(est.history_[-1].re, 4),
                    int(np.sum(np.diff(r) > 0)), round(float(r[-1] / r[0]), 5))
    return out

for rad in (0.12, 0.15, 0.18, 0.21):
    incs = [Inclusion((0.42, 0.36), rad, 1.0), Inclusion((-0.42, -0.36), rad, 8.0)]
    for t in (1e5, 3e5):
        res = trial(incs, t)
        print(json.dumps(dict(rad=rad, t=t, **{k: list(v) for k, v in res.items()})), flush=True)
