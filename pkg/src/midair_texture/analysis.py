"""Single-bin spectral checks of rendered amplitude envelopes."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .stimulus import EnvelopeSeries, StimulusSpec

__all__ = ["WindowError", "SpectrumReport", "EnvelopeCheck", "spectrum", "verify_envelope"]


class WindowError(ValueError):
    """The series does not cover a whole number of periods of a probe frequency."""


@dataclass(frozen=True)
class SpectrumReport:
    dc: float
    components: tuple[tuple[float, float], ...]  # (frequency Hz, amplitude)
    residual_rms: float
    phases: tuple[float, ...] = ()

    def amplitude(self, frequency: float) -> float:
        for f, a in self.components:
            if f == frequency:
                return a
        raise KeyError(frequency)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["frequency_hz", "amplitude"])
            w.writerow([0.0, repr(self.dc)])
            for f, a in self.components:
                w.writerow([f, repr(a)])
            w.writerow(["residual_rms", repr(self.residual_rms)])

    def to_text(self) -> str:
        lines = [f"DC          {self.dc:.9f}"]
        lines += [f"{f:8.3f} Hz {a:.9f}" for f, a in self.components]
        lines.append(f"residual    {self.residual_rms:.3e}")
        return "\n".join(lines)


def spectrum(series: EnvelopeSeries, probe_freqs) -> SpectrumReport:
    """DC plus cosine amplitude at each probe frequency by direct projection.

    The window must hold an integer number of periods of every probe so the
    projections are exact and mutually orthogonal.
    """
    x = np.asarray(series.samples, float)
    n = len(x)
    if n == 0:
        raise WindowError("empty series")
    span = n / series.sample_rate
    t = np.arange(n) / series.sample_rate
    dc = float(x.mean())
    recon = np.full(n, dc)
    comps, phases = [], []
    for f in probe_freqs:
        f = float(f)
        cycles = f * span
        if f <= 0 or abs(cycles - round(cycles)) > 1e-9 * max(1.0, cycles):
            raise WindowError(f"{f} Hz: window of {span} s holds {cycles} periods, not an integer")
        if 2 * f >= series.sample_rate:
            raise WindowError(f"{f} Hz is at or above Nyquist for {series.sample_rate} Hz sampling")
        z = 2.0 / n * np.sum(x * np.exp(-2j * np.pi * f * t))
        comps.append((f, float(abs(z))))
        phases.append(float(np.angle(z)))
        recon += abs(z) * np.cos(2 * np.pi * f * t + np.angle(z))
    resid = float(np.sqrt(np.mean((x - recon) ** 2)))
    return SpectrumReport(dc, tuple(comps), resid, tuple(phases))


@dataclass
class EnvelopeCheck:
    passed: bool
    report: SpectrumReport
    expected: dict[str, float]
    failures: list[str] = field(default_factory=list)


def verify_envelope(spec: StimulusSpec, series: EnvelopeSeries, tol: float = 1e-6) -> EnvelopeCheck:
    """Compare a rendered envelope with the DC and line amplitudes its stimulus parameters imply."""
    freqs = sorted({spec.f_am1, spec.f_am2} - {0.0})
    report = spectrum(series, freqs)
    depth = spec.a_am * spec.a_max / 2
    expected_lines: dict[float, float] = {}
    expected_lines[spec.f_am1] = expected_lines.get(spec.f_am1, 0.0) + depth * spec.lam
    expected_lines[spec.f_am2] = expected_lines.get(spec.f_am2, 0.0) + depth * (1 - spec.lam)
    expected = {"dc": spec.a_max * (1 - spec.a_am / 2)}
    # a zero-frequency "modulation" is a constant offset
    expected["dc"] += expected_lines.pop(0.0, 0.0)
    failures = []
    if abs(report.dc - expected["dc"]) > tol:
        failures.append(f"dc {report.dc:.9g} != expected {expected['dc']:.9g}")
    for f, amp in report.components:
        want = expected_lines.get(f, 0.0)
        expected[f"{f:g} Hz"] = want
        if abs(amp - want) > tol:
            failures.append(f"{f:g} Hz amplitude {amp:.9g} != expected {want:.9g}")
    if report.residual_rms > tol:
        failures.append(f"residual rms {report.residual_rms:.3e} exceeds tolerance {tol:g}")
    return EnvelopeCheck(not failures, report, expected, failures)
