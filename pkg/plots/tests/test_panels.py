import csv
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
from matplotlib.collections import PathCollection

import panels

MAKE_ALL = Path(__file__).resolve().parents[1] / "make_all"


def run_make_all(directory):
    return subprocess.run(
        [sys.executable, str(MAKE_ALL), str(directory)],
        capture_output=True, text=True,
    )


class TestMakeAll:
    def test_full_directory_renders_all_panels(self, pipeline_dir):
        result = run_make_all(pipeline_dir)
        assert result.returncode == 0, result.stderr
        for name in ("fig_loss.png", "fig_field.png", "fig_posterior.png", "fig_bench.png"):
            assert (pipeline_dir / name).exists(), name

    def test_rerun_is_deterministic(self, pipeline_dir):
        assert run_make_all(pipeline_dir).returncode == 0
        first = {n: (pipeline_dir / n).read_bytes()
                 for n in ("fig_loss.png", "fig_posterior.png")}
        assert run_make_all(pipeline_dir).returncode == 0
        for name, blob in first.items():
            assert (pipeline_dir / name).read_bytes() == blob

    def test_missing_file_reported_by_name(self, pipeline_dir):
        (pipeline_dir / "bench_smc.csv").unlink()
        result = run_make_all(pipeline_dir)
        assert result.returncode == 1
        assert "bench_smc.csv" in result.stderr

    def test_empty_directory_fails(self, tmp_path):
        result = run_make_all(tmp_path)
        assert result.returncode == 1


class TestPosteriorPanel:
    def _sample_paths(self, pipeline_dir):
        return {p.stem.removeprefix("samples_R"): p
                for p in sorted(pipeline_dir.glob("samples_R*.csv"))}

    def test_scatter_point_counts_match_rows(self, pipeline_dir):
        fig, stats = panels.plot_posterior(self._sample_paths(pipeline_dir))
        row_total = sum(s["n"] for s in stats.values())
        for ax in (fig.axes[2], fig.axes[3]):  # the two scatter panels
            pts = sum(len(c.get_offsets()) for c in ax.collections
                      if isinstance(c, PathCollection))
            assert pts == row_total

    def test_three_level_overlay_means_decrease(self, pipeline_dir):
        _, stats = panels.plot_posterior(self._sample_paths(pipeline_dir))
        labels = sorted(stats, key=float)
        means = [stats[l]["mean_T_back"] for l in labels]
        assert len(means) == 3
        assert means[0] > means[1] > means[2]

    def test_single_row_csv_renders(self, tmp_path):
        path = tmp_path / "samples_R0.9.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "rho_cp", "alpha", "T_back_pinn", "T_back_fdm", "weight"])
            w.writerow([0.5, 1.5e6, 0.5 / 1.5e6, 240.0, 241.0, 1.0])
        fig, stats = panels.plot_posterior({"0.9": path})
        assert stats["0.9"]["n"] == 1

    def test_missing_column_named(self, tmp_path):
        path = tmp_path / "samples_R0.9.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "rho_cp", "alpha", "T_back_pinn", "weight"])
            w.writerow([0.5, 1.5e6, 3e-7, 240.0, 1.0])
        with pytest.raises(panels.SchemaError, match="T_back_fdm"):
            panels.plot_posterior({"0.9": path})


class TestOtherPanels:
    def test_single_epoch_loss_plot(self, tmp_path):
        path = tmp_path / "loss_history.csv"
        path.write_text("epoch,total,physics,initial,boundary\n0,1.0,0.5,0.3,0.2\n")
        fig = panels.plot_loss(path)
        assert fig.axes[0].get_yscale() == "log"

    def test_field_error_max_annotated(self, pipeline_dir):
        fig = panels.plot_field(
            pipeline_dir / "field_fdm.csv",
            pipeline_dir / "field_pinn.csv",
            pipeline_dir / "field_error.csv",
        )
        error_ax = fig.axes[2]  # data axes come first, colorbar axes after
        assert any("max" in t.get_text() for t in error_ax.texts)

    def test_field_heatmaps_share_scale(self, pipeline_dir):
        fig = panels.plot_field(
            pipeline_dir / "field_fdm.csv",
            pipeline_dir / "field_pinn.csv",
            pipeline_dir / "field_error.csv",
        )
        fdm_im = fig.axes[0].collections[0]
        pinn_im = fig.axes[1].collections[0]
        assert fdm_im.get_clim() == pinn_im.get_clim()

    def test_bench_axes_positive_loglog(self, pipeline_dir):
        fig = panels.plot_bench(
            pipeline_dir / "bench_inference.csv", pipeline_dir / "bench_smc.csv"
        )
        ax = fig.axes[0]
        assert ax.get_xscale() == "log" and ax.get_yscale() == "log"

    def test_fd_bins_degenerate_input(self):
        assert panels.fd_bins(np.array([1.0])) == 1
        assert panels.fd_bins(np.full(50, 3.0)) == 10
