"""Sweep the learned receiver across photon numbers and watch its strategy drift.

At each photon number the receiver is re-learned for the noisy channel
(multi-start: conditional-nulling init, Dolinar init, and a warm start from
the neighboring point).  The table compares its error against the classic
receivers under the same noise, and the last columns measure which classic
design the learned displacements resemble via the mean absolute dB gap of
the per-node displacement report: strongly Dolinar-like at low photon
numbers, drifting toward the CN design as the photon number grows.
"""

import numpy as np

from coherentrx.baselines import cn_receiver, dolinar_receiver, homodyne_sql_bpsk
from coherentrx.constellation import bpsk
from coherentrx.formulator import FormulatorConfig, optimize_sweep
from coherentrx.photonics import lab_noise
from coherentrx.simulator import averaged_distribution, error_rate
from coherentrx.tree import displacement_report

SWEEP = (0.4, 0.8, 1.2, 1.6, 2.0)
EVAL_BATCH, EVAL_SEED = 200, 2026


def mean_abs_db(tree, reference):
    amp_db, _ = displacement_report(tree, reference)
    return float(np.nanmean(np.abs(amp_db)))


def main():
    nm = lab_noise(visibility=0.9975, efficiency=0.85)
    cfg = FormulatorConfig(max_iterations=500, batch_size=16, seed=11)
    print(f"noise: {nm}\n")
    print(f"{'nbar':>5} {'learned':>9} {'CN':>9} {'Dolinar':>9} {'SQL':>9} "
          f"{'vs CN dB':>9} {'vs Dol dB':>10}  closer to")
    for nbar, res in optimize_sweep(bpsk, SWEEP, 4, 2, nm, cfg):
        c = bpsk(nbar)
        learned = error_rate(
            averaged_distribution(res.tree, c, nm, EVAL_BATCH, EVAL_SEED), res.table
        )
        cn_t, cn_b = cn_receiver(c, 4, 2)
        do_t, do_b = dolinar_receiver(nbar, 4)
        cn_err = error_rate(averaged_distribution(cn_t, c, nm, EVAL_BATCH, EVAL_SEED), cn_b)
        do_err = error_rate(averaged_distribution(do_t, c, nm, EVAL_BATCH, EVAL_SEED), do_b)
        d_cn = mean_abs_db(res.tree, cn_t)
        d_do = mean_abs_db(res.tree, do_t)
        print(
            f"{nbar:5.2f} {learned:9.6f} {cn_err:9.6f} {do_err:9.6f} "
            f"{homodyne_sql_bpsk(nbar):9.6f} {d_cn:9.2f} {d_do:10.2f}  "
            + ("CN" if d_cn < d_do else "Dolinar")
        )


if __name__ == "__main__":
    main()
