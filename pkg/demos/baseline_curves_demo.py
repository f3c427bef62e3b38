"""Tabulate the reference bounds and receivers over a mean-photon sweep.

Prints one row per photon number: the Helstrom bound, the homodyne and
heterodyne standard quantum limits, the Kennedy receiver, and the simulated
ideal-noise errors of the conditional-nulling and Dolinar trees.  Everything
here is binary-phase encoding; the heterodyne column shows its 3 dB penalty
against homodyne.
"""

import numpy as np

from coherentrx.baselines import (
    cn_receiver,
    dolinar_receiver,
    helstrom_bpsk,
    heterodyne_sql,
    homodyne_sql_bpsk,
    kennedy_bpsk,
)
from coherentrx.constellation import bpsk
from coherentrx.photonics import NoiseModel
from coherentrx.simulator import error_rate, exact_distribution

ROUNDS = 4


def main():
    ideal = NoiseModel()
    print(f"{'nbar':>5} {'helstrom':>10} {'homodyne':>10} {'heterodyne':>11} "
          f"{'kennedy':>10} {'CN(4,2)':>10} {'Dolinar(4,2)':>13}")
    for nbar in np.round(np.geomspace(0.1, 2.5, 9), 4):
        c = bpsk(float(nbar))
        cn_t, cn_b = cn_receiver(c, ROUNDS, 2)
        do_t, do_b = dolinar_receiver(float(nbar), ROUNDS)
        row = (
            helstrom_bpsk(float(nbar)),
            homodyne_sql_bpsk(float(nbar)),
            heterodyne_sql(c),
            kennedy_bpsk(float(nbar)),
            error_rate(exact_distribution(cn_t, c, ideal), cn_b),
            error_rate(exact_distribution(do_t, c, ideal), do_b),
        )
        print(f"{nbar:5.2f} " + " ".join(f"{v:10.6f}" for v in row[:5]) + f" {row[5]:13.6f}")
    print("\nordering: helstrom <= Dolinar <= kennedy at every row; the")
    print("Dolinar tree also beats the homodyne SQL through the low-photon regime.")


if __name__ == "__main__":
    main()
