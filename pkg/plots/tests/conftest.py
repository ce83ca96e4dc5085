import csv
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parents[1]))


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


@pytest.fixture()
def pipeline_dir(tmp_path):
    """Synthetic but schema-exact pipeline output directory."""
    rng = np.random.default_rng(0)

    epochs = np.arange(60)
    total = 3.0 * np.exp(-epochs / 12.0) + 0.01
    write_csv(tmp_path / "loss_history.csv",
              ["epoch", "total", "physics", "initial", "boundary"],
              [(e, total[e], 0.5 * total[e], 0.3 * total[e], 0.2 * total[e])
               for e in epochs])

    xs = np.linspace(0.0, 0.007, 8)
    ts = np.linspace(0.0, 300.0, 10)
    fdm_rows, pinn_rows, err_rows = [], [], []
    for scheme in ("explicit", "implicit"):
        for t in ts:
            for x in xs:
                temp = 25.0 + 0.5 * t + 1000.0 * x
                fdm_rows.append((x, t, temp, scheme))
    for t in ts:
        for x in xs:
            temp = 25.0 + 0.5 * t + 1000.0 * x
            noise = 2.0 * np.sin(x * 500) * np.cos(t / 40)
            pinn_rows.append((x, t, temp + noise))
            err_rows.append((x, t, abs(noise)))
    write_csv(tmp_path / "field_fdm.csv", ["x_m", "t_s", "T_C", "scheme"], fdm_rows)
    write_csv(tmp_path / "field_pinn.csv", ["x_m", "t_s", "T_C"], pinn_rows)
    write_csv(tmp_path / "field_error.csv", ["x_m", "t_s", "abs_error_C"], err_rows)

    header = ["k", "rho_cp", "alpha", "T_back_pinn", "T_back_fdm", "weight"]
    n = 200
    for r, mean_t in (("0.95", 242.0), ("0.99", 238.0), ("0.99999", 229.0)):
        k = rng.uniform(0.1, 1.0, n)
        rho_cp = rng.uniform(0.8e6, 2.4e6, n)
        t_back = rng.normal(mean_t, 5.0, n)
        rows = [
            (k[i], rho_cp[i], k[i] / rho_cp[i], t_back[i] + rng.normal(0, 1),
             t_back[i], 1.0 / n)
            for i in range(n)
        ]
        write_csv(tmp_path / f"samples_R{r}.csv", header, rows)

    write_csv(tmp_path / "bench_inference.csv", ["batch", "fdm_time_s", "pinn_time_s"],
              [(m, 0.0012 * m, 0.0001 + 2e-6 * m) for m in (1, 10, 100, 1000, 10000)])
    write_csv(tmp_path / "bench_smc.csv", ["workers", "time_s"],
              [(1, 2.0), (2, 1.15), (4, 1.1)])
    return tmp_path
