"""Countermeasures against frequency-trace fingerprinting, and the harness
that measures how much accuracy each one costs the attacker.

Transforms operate on recorded traces: sample-and-hold resolution
reduction (length-preserving, so classifier dimensions are unchanged),
seeded plateau-shaped noise bursts (a governor reacting to injected
workloads produces plateaus, not white noise), and constant masking.
Access restriction is not a trace transform — it is the source policy
that refuses reads — so applying it here is a usage error.

The evaluation harness trains the attacker on defended data too: a real
attacker profiles the system as deployed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .classify import EvalReport, TrainedModel, evaluate
from .dataset import LabeledDataset, split_dataset, stable_seed
from .profiles import get_profile
from .trace import FrequencyTrace

KIND_RESOLUTION = "resolution_reduce"
KIND_NOISE = "noise_inject"
KIND_MASK = "constant_mask"
KIND_RESTRICT = "access_restrict"

DEFENSE_KINDS = (KIND_RESOLUTION, KIND_NOISE, KIND_MASK, KIND_RESTRICT)

NOISE_WIDTHS = (3, 8)  # plateau width range in samples, inclusive


@dataclass(frozen=True)
class Defense:
    kind: str
    factor: int = 1
    burst_rate_hz: float = 0.0
    burst_height: float = 0.5
    mask_freq_khz: int | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in DEFENSE_KINDS:
            raise ValueError(f"unknown defense kind {self.kind!r}")
        if self.kind == KIND_RESOLUTION:
            if not isinstance(self.factor, int) or self.factor < 1:
                raise ValueError("resolution factor must be an integer >= 1")
        elif self.kind == KIND_NOISE:
            if self.burst_rate_hz < 0:
                raise ValueError("burst_rate_hz must be >= 0")
            if not 0.0 <= self.burst_height <= 1.0:
                raise ValueError("burst_height must be a fraction of range in [0, 1]")
        elif self.kind == KIND_MASK:
            if not self.mask_freq_khz or self.mask_freq_khz <= 0:
                raise ValueError("constant_mask needs a positive mask_freq_khz")

    @property
    def applied_stage(self) -> str:
        return "source" if self.kind == KIND_RESTRICT else "trace"

    def param_label(self) -> str:
        if self.kind == KIND_RESOLUTION:
            return str(self.factor)
        if self.kind == KIND_NOISE:
            return f"{self.burst_rate_hz:g}x{self.burst_height:g}"
        if self.kind == KIND_MASK:
            return str(self.mask_freq_khz)
        return "-"


def resolution_reduce(factor: int) -> Defense:
    return Defense(kind=KIND_RESOLUTION, factor=factor)


def noise_inject(burst_rate_hz: float, burst_height: float = 0.5, seed: int = 0) -> Defense:
    return Defense(kind=KIND_NOISE, burst_rate_hz=burst_rate_hz,
                   burst_height=burst_height, seed=seed)


def constant_mask(freq_khz: int) -> Defense:
    return Defense(kind=KIND_MASK, mask_freq_khz=freq_khz)


def access_restrict() -> Defense:
    return Defense(kind=KIND_RESTRICT)


def _freq_range(trace: FrequencyTrace) -> tuple[int, int]:
    # known devices clip against the profile; ad-hoc devices fall back to
    # the observed range of the trace itself
    try:
        profile = get_profile(trace.device)
    except KeyError:
        return min(trace.samples), max(trace.samples)
    return profile.min_freq_khz, profile.boost_cap_khz


def apply_defense(d: Defense, t: FrequencyTrace, salt: int = 0) -> FrequencyTrace:
    """Transform one trace. `salt` decorrelates the noise pattern between
    traces that share a defense seed; other kinds ignore it."""
    if d.applied_stage != "trace":
        raise ValueError(
            "access_restrict is a source policy (see sources.POLICY_MASKED);"
            " it cannot be applied to a recorded trace"
        )
    if d.kind == KIND_RESOLUTION:
        f = d.factor
        samples = [t.samples[(i // f) * f] for i in range(len(t.samples))]
    elif d.kind == KIND_MASK:
        try:
            profile = get_profile(t.device)
        except KeyError:
            profile = None
        if profile is not None and d.mask_freq_khz not in profile.pstates:
            raise ValueError(
                f"mask frequency {d.mask_freq_khz} is not a pstate of {t.device}"
            )
        samples = [d.mask_freq_khz] * len(t.samples)
    else:
        samples = _inject_noise(d, t, salt)
    return FrequencyTrace(
        samples=samples,
        interval_ms=t.interval_ms,
        device=t.device,
        label=t.label,
        start_index=t.start_index,
    )


def _inject_noise(d: Defense, t: FrequencyTrace, salt: int) -> list[int]:
    n = len(t.samples)
    duration_s = n * t.interval_ms / 1000.0
    n_bursts = int(round(d.burst_rate_hz * duration_s))
    if n_bursts == 0:
        return list(t.samples)
    lo, hi = _freq_range(t)
    span = hi - lo
    rng = np.random.default_rng(stable_seed(d.seed, "noise-inject", salt))
    positions = rng.integers(0, n, n_bursts)
    widths = rng.integers(NOISE_WIDTHS[0], NOISE_WIDTHS[1] + 1, n_bursts)
    scales = rng.uniform(0.5, 1.0, n_bursts)
    out = list(t.samples)
    for pos, width, scale in zip(positions, widths, scales):
        delta = int(round(d.burst_height * scale * span))
        for i in range(pos, min(pos + width, n)):
            out[i] = max(lo, min(hi, out[i] + delta))
    return out


def defended_dataset(d: Defense, ds: LabeledDataset) -> LabeledDataset:
    """Apply a defense to every measurement; per-trace salts keep noise
    patterns independent across traces while staying reproducible."""
    measurements = {}
    for label in ds.classes:
        traces = ds.measurements[label]
        measurements[label] = [
            apply_defense(d, t, salt=stable_seed("trace-salt", label, i))
            for i, t in enumerate(traces)
        ]
    return LabeledDataset(
        classes=list(ds.classes),
        measurements=measurements,
        split_seed=ds.split_seed,
        split_fractions=ds.split_fractions,
    )


Trainer = Callable[[LabeledDataset], TrainedModel]


def evaluate_defense(d: Defense, ds: LabeledDataset, trainer: Trainer,
                     topk: tuple[int, ...] = (1, 5)) -> tuple[EvalReport, EvalReport]:
    """(clean report, defended report) under identical split seeds. The
    defense is applied to train and test alike before splitting; split
    membership is a function of (seed, label, index) so both runs compare
    the same measurement partition."""
    clean_train, _, clean_test = split_dataset(ds)
    clean_report = evaluate(trainer(clean_train), clean_test, topk=topk)

    dds = defended_dataset(d, ds)
    def_train, _, def_test = split_dataset(dds)
    defended_report = evaluate(trainer(def_train), def_test, topk=topk)
    return clean_report, defended_report


@dataclass(frozen=True)
class SweepRow:
    kind: str
    param: str
    top1_clean: float
    top1_defended: float


def defense_sweep(defenses: list[Defense], ds: LabeledDataset, trainer: Trainer,
                  topk: tuple[int, ...] = (1, 5)) -> list[SweepRow]:
    """Evaluate several defenses against one dataset; the clean baseline is
    trained once and shared across rows."""
    clean_train, _, clean_test = split_dataset(ds)
    clean_report = evaluate(trainer(clean_train), clean_test, topk=topk)
    rows = []
    for d in defenses:
        dds = defended_dataset(d, ds)
        def_train, _, def_test = split_dataset(dds)
        report = evaluate(trainer(def_train), def_test, topk=topk)
        rows.append(SweepRow(
            kind=d.kind,
            param=d.param_label(),
            top1_clean=clean_report.top1_accuracy,
            top1_defended=report.top1_accuracy,
        ))
    return rows


def sweep_csv_lines(rows: list[SweepRow]) -> list[str]:
    out = ["defense,param,top1_clean,top1_defended"]
    for r in rows:
        out.append(f"{r.kind},{r.param},{r.top1_clean:.6f},{r.top1_defended:.6f}")
    return out


def sweep_plot_lines(rows: list[SweepRow]) -> list[str]:
    """Whitespace-separated columns, one block per defense kind."""
    out = ["# defense param top1_clean top1_defended"]
    for r in rows:
        out.append(f"{r.kind} {r.param} {r.top1_clean:.6f} {r.top1_defended:.6f}")
    return out
