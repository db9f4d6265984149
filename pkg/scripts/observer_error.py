"""Observer error for the oex1 plant with and without output injection.

Writes error_gains.csv, error_zero.csv, error.svg and prints fitted decay rates.
"""

import numpy as np

from _common import out_dir
from daecontract import registry
from daecontract.certify import fit_decay
from daecontract.observer import ObserverSpec, simulate_observer, zero_injection
from daecontract.svgplot import line_chart


def main():
    out = out_dir(__doc__, "out/observer")
    ex = registry.get_example("oex1_observer")
    spec = ex.system
    what0, w0 = ex.default_ics[0]
    t_end = ex.preset.t_end
    runs = {
        "gains": simulate_observer(spec, w0, what0, t_end),
        "zero": simulate_observer(ObserverSpec(spec.plant, zero_injection(2, 1)), w0, what0, t_end),
    }
    series = []
    for name, run in runs.items():
        run.to_csv(out / f"error_{name}.csv")
        fit = fit_decay(run.t, run.err_norm)
        series.append((f"{name} injection", run.t, np.log10(run.err_norm)))
        print(f"{name}: |e({t_end:g})| = {run.err_norm[-1]:.4g}, fitted rate {fit.alpha:.4f}")
    line_chart(series, out / "error.svg", title="observer error", ylabel="log10 |e|")


if __name__ == "__main__":
    main()
