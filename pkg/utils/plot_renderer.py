# [file name]: utils/plot_renderer.py
"""
SVG report plots (presentation only; every number also lands in a CSV).
"""

from enum import Enum
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from utils.log import get_logger

logger = get_logger("PlotRenderer")

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "atomsense"
    matplotlib.rcParams["svg.fonttype"] = "none"
    MATPLOTLIB_AVAILABLE = True
except ImportError:
    MATPLOTLIB_AVAILABLE = False
    logger.warning("matplotlib not available, plots disabled")


class PlotKind(Enum):
    """Report figure families"""
    ADEV = "adev"
    TRACK = "track"
    CORRELATION = "correlation"
    FRINGES = "fringes"
    LINEARITY = "linearity"
    SPECTRUM = "spectrum"
    TPLS = "tpls"
    BUDGET = "budget"


class PlotRenderer:
    """Writes static SVG figures into a run's output directory."""

    def __init__(self, out_dir, enabled: bool = True, config_hash: str = "", seed: Optional[int] = None):
        self.out_dir = Path(out_dir)
        self.enabled = enabled and MATPLOTLIB_AVAILABLE
        self.written: list[Path] = []
        # same run identity as the CSV headers, in the SVG <dc:description>
        self.description = f"config_hash={config_hash} seed={seed}"

    def _save(self, fig, name: str, kind: PlotKind) -> Optional[Path]:
        path = self.out_dir / name
        try:
            self.out_dir.mkdir(parents=True, exist_ok=True)
            fig.savefig(path, format="svg", metadata={"Date": None, "Description": self.description})
        except (OSError, ValueError) as e:
            logger.warning(f"skipped {kind.value} plot {name}: {e}")
            return None
        finally:
            plt.close(fig)
        self.written.append(path)
        return path

    def adev(self, name: str, curves: dict, title: str, units: str) -> Optional[Path]:
        """Log-log Allan deviations with 1σ bars; curves maps label -> AdevCurve."""
        if not self.enabled:
            return None
        fig, ax = plt.subplots(figsize=(6, 4.5))
        for label, curve in curves.items():
            err = np.vstack([curve.sigmas - curve.ci_low, curve.ci_high - curve.sigmas])
            ax.errorbar(curve.taus, curve.sigmas, yerr=err, marker="o", ms=3, capsize=2, label=label)
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("τ (s)")
        ax.set_ylabel(f"Allan deviation ({units})")
        ax.set_title(title)
        ax.grid(True, which="both", alpha=0.3)
        ax.legend()
        return self._save(fig, name, PlotKind.ADEV)

    def tracks(self, name: str, t, series: dict, ylabel: str) -> Optional[Path]:
        if not self.enabled:
            return None
        fig, ax = plt.subplots(figsize=(7, 3.5))
        for label, values in series.items():
            ax.plot(t, values, lw=0.6, label=label)
        ax.set_xlabel("t (s)")
        ax.set_ylabel(ylabel)
        ax.legend()
        return self._save(fig, name, PlotKind.TRACK)

    def correlation(self, name: str, x, y, r: float) -> Optional[Path]:
        if not self.enabled:
            return None
        fig, ax = plt.subplots(figsize=(4.5, 4.5))
        ax.plot(x, y, ".", ms=2)
        ax.set_xlabel("a_conv (m/s²)")
        ax.set_ylabel("atomic acceleration − configuration mean (m/s²)")
        ax.set_title(f"r = {r:.3f}")
        return self._save(fig, name, PlotKind.CORRELATION)

    def fringes(self, name: str, scans: Sequence[tuple], T: float) -> Optional[Path]:
        """scans: (label, alphas, p2, FringeFit or None)."""
        if not self.enabled:
            return None
        fig, ax = plt.subplots(figsize=(6, 4))
        for label, alphas, p2, fit in scans:
            line, = ax.plot(alphas, p2, ".", ms=4, label=label)
            if fit is not None:
                dense = np.linspace(np.min(alphas), np.max(alphas), 400)
                ax.plot(dense, fit.model(dense, T), "-", lw=0.8, color=line.get_color())
        ax.set_xlabel("chirp rate α (rad/s²)")
        ax.set_ylabel("P₂")
        ax.legend(fontsize=7)
        return self._save(fig, name, PlotKind.FRINGES)

    def linearity(self, name: str, drive, recovered, reference=None) -> Optional[Path]:
        if not self.enabled:
            return None
        fig, ax = plt.subplots(figsize=(5, 4))
        ax.plot(drive, recovered, "o", label="recovered")
        if reference is not None:
            ax.plot(drive, reference, "s", mfc="none", label="classical gyroscope")
        ax.set_xlabel("Ω_d (rad/s)")
        ax.set_ylabel("Ω (rad/s)")
        ax.legend()
        return self._save(fig, name, PlotKind.LINEARITY)

    def spectrum(self, name: str, freqs, p2, model=None) -> Optional[Path]:
        if not self.enabled:
            return None
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot(np.asarray(freqs) / 1e3, p2, ".", ms=3)
        if model is not None:
            ax.plot(np.asarray(freqs) / 1e3, model, "-", lw=0.8)
        ax.set_xlabel("Raman detuning (kHz)")
        ax.set_ylabel("P₂")
        return self._save(fig, name, PlotKind.SPECTRUM)

    def tpls(self, name: str, pulses, uncorrected, corrected, err, truth: float) -> Optional[Path]:
        if not self.enabled:
            return None
        fig, ax = plt.subplots(figsize=(5, 4))
        us = np.asarray(pulses) * 1e6
        ax.errorbar(us, uncorrected, yerr=err, fmt="o", label="uncorrected")
        ax.errorbar(us, corrected, yerr=err, fmt="s", label="TPLS corrected")
        ax.axhline(truth, color="k", lw=0.6)
        ax.set_xlabel("pulse duration (µs)")
        ax.set_ylabel("v (m/s)")
        ax.legend()
        return self._save(fig, name, PlotKind.TPLS)

    def budget_table(self, name: str, entries) -> Optional[Path]:
        if not self.enabled:
            return None
        fig, ax = plt.subplots(figsize=(7, 0.4 * len(entries) + 1))
        ax.axis("off")
        cells = [[e.term, e.axis, f"{e.value:.3e}", e.units] for e in entries]
        table = ax.table(cellText=cells, colLabels=["term", "axis", "value", "units"], loc="center")
        table.auto_set_font_size(False)
        table.set_fontsize(8)
        return self._save(fig, name, PlotKind.BUDGET)
