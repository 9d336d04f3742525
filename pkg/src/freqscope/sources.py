"""Frequency reading backends behind one small interface.

Three backends: live sysfs, governor simulation, and recorded-trace replay.
All expose read_freq() and advance(dt_ms); virtual backends move simulated
time, the sysfs backend sleeps toward absolute deadlines so long runs do
not drift. A source constructed with the masked policy refuses every read,
modeling the access-restriction countermeasure.
"""

from __future__ import annotations

import os
import time

from .governors import SimConfig, WorkloadTrace, init_state, step_governor
from .trace import FrequencyTrace

ENV_SYSFS_ROOT = "FREQSCOPE_SYSFS_ROOT"
DEFAULT_SYSFS_ROOT = "/sys/devices/system/cpu"

POLICY_OPEN = "open"
POLICY_MASKED = "masked"


class AccessDeniedError(PermissionError):
    """Read attempted against a masked source."""


class ReplayExhaustedError(RuntimeError):
    """Replay cursor moved past the final recorded sample."""


class SysfsReadError(RuntimeError):
    """The sysfs attribute could not be read or parsed."""


class FreqSource:
    """Base: policy gate plus the two-method contract."""

    device = "unknown"

    def __init__(self, policy: str = POLICY_OPEN):
        if policy not in (POLICY_OPEN, POLICY_MASKED):
            raise ValueError(f"unknown policy {policy!r}")
        self.policy = policy

    def read_freq(self) -> int:
        if self.policy == POLICY_MASKED:
            raise AccessDeniedError("frequency interface access is restricted")
        return self._read()

    def advance(self, dt_ms: int) -> None:
        if dt_ms < 0:
            raise ValueError("dt_ms must be >= 0")
        if dt_ms:
            self._advance(dt_ms)

    def _read(self) -> int:
        raise NotImplementedError

    def _advance(self, dt_ms: int) -> None:
        raise NotImplementedError


class SimSource(FreqSource):
    """Governor simulation; the workload cycles when exhausted so arbitrarily
    long sampling sessions stay live."""

    def __init__(self, cfg: SimConfig, workload: WorkloadTrace, policy: str = POLICY_OPEN):
        super().__init__(policy)
        self.cfg = cfg
        self.workload = workload
        self.device = cfg.profile.name
        self._state = init_state(cfg)
        self._cursor = 0
        self._carry_ms = 0

    def _read(self) -> int:
        return self._state.current_freq_khz

    def _advance(self, dt_ms: int) -> None:
        self._carry_ms += dt_ms
        ticks, self._carry_ms = divmod(self._carry_ms, self.workload.tick_ms)
        loads = self.workload.loads
        for _ in range(ticks):
            load = loads[self._cursor % len(loads)]
            self._state = step_governor(self._state, load, self.cfg, self.workload.tick_ms)
            self._cursor += 1


class ReplaySource(FreqSource):
    """Plays back a recorded trace; advancing saturates at the end, reading
    past the end raises."""

    def __init__(self, trace: FrequencyTrace, policy: str = POLICY_OPEN):
        super().__init__(policy)
        self.trace = trace
        self.device = trace.device
        self._cursor = 0
        self._carry_ms = 0

    def _read(self) -> int:
        if self._cursor >= len(self.trace.samples):
            raise ReplayExhaustedError(
                f"replay of {len(self.trace.samples)} samples exhausted"
            )
        return self.trace.samples[self._cursor]

    def _advance(self, dt_ms: int) -> None:
        self._carry_ms += dt_ms
        steps, self._carry_ms = divmod(self._carry_ms, self.trace.interval_ms)
        self._cursor = min(len(self.trace.samples), self._cursor + steps)


class SysfsSource(FreqSource):
    """Reads scaling_cur_freq under a cpufreq policy directory.

    Root resolution order: explicit argument, FREQSCOPE_SYSFS_ROOT, then the
    real /sys tree. Tests point the env var at fixture directories.
    """

    def __init__(self, root: str | None = None, policy_index: int = 0,
                 policy: str = POLICY_OPEN):
        super().__init__(policy)
        self.root = root or os.environ.get(ENV_SYSFS_ROOT) or DEFAULT_SYSFS_ROOT
        self.policy_index = policy_index
        self.path = os.path.join(
            self.root, "cpufreq", f"policy{policy_index}", "scaling_cur_freq"
        )
        self.device = f"sysfs-policy{policy_index}"
        self._deadline: float | None = None

    def _read(self) -> int:
        try:
            with open(self.path, "r", encoding="ascii") as fh:
                text = fh.read()
        except OSError as exc:
            raise SysfsReadError(f"cannot read {self.path}: {exc}") from exc
        try:
            return int(text.strip())
        except ValueError:
            raise SysfsReadError(f"non-integer content in {self.path}: {text!r}") from None

    def _advance(self, dt_ms: int) -> None:
        # absolute deadlines: start + cumulative dt, immune to per-sleep drift
        now = time.monotonic()
        if self._deadline is None:
            self._deadline = now
        self._deadline += dt_ms / 1000.0
        remaining = self._deadline - now
        if remaining > 0:
            time.sleep(remaining)
