"""Two trajectories of the smex1 DAE on [0, 20], their distance, and the certificate.

Writes traj_a.csv, traj_b.csv, distance.csv, mu.csv, states.svg, distance.svg.
"""

import numpy as np

from _common import out_dir
from daecontract import registry
from daecontract.certify import certify_contraction, fit_decay, pairwise_distance
from daecontract.dae import simulate, write_csv
from daecontract.svgplot import line_chart


def main():
    out = out_dir(__doc__, "out/smex1")
    ex = registry.get_example("smex1")
    pre = ex.preset
    trajs = [simulate(ex.system, 0.0, w0, zg, pre.t_end, 1e-3) for w0, zg in ex.default_ics]
    for name, traj in zip("ab", trajs):
        traj.to_csv(out / f"traj_{name}.csv")
    t, d = pairwise_distance(*trajs)
    write_csv(out / "distance.csv", ["t", "distance"], np.column_stack([t, d]))
    keep = d > 1e-13
    fit = fit_decay(t[keep], d[keep])

    cert = certify_contraction(ex.system, ex.default_ics, (0.0, pre.t_end), gamma=pre.gamma, p=pre.p,
                               metric=pre.metric, beta_min=pre.beta_min, step=1e-3)
    cert.to_csv(out / "mu.csv")

    series = []
    for name, traj in zip("ab", trajs):
        for i in range(traj.w.shape[1]):
            series.append((f"w{i + 1} ({name})", traj.t, traj.w[:, i]))
        series.append((f"z1 ({name})", traj.t, traj.z[:, 0]))
    line_chart(series, out / "states.svg", title="smex1 trajectories", ylabel="state")
    line_chart([("log10 distance", t[keep], np.log10(d[keep]))], out / "distance.svg",
               title="distance between trajectories", ylabel="log10 |x_a - x_b|")
    print(cert.verdict)
    print(f"mu_max {cert.mu_max:.6f}; fitted pairwise decay rate {fit.alpha:.4f}")


if __name__ == "__main__":
    main()
