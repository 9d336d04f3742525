"""Per-tick simulation of Linux scaling governors plus a turbo budget.

Each governor is a deterministic update law mapping (state, load) to the
next frequency, always quantized onto the profile's P-state table with
exact midpoints rounding upward. The normative laws:

  performance   pin max_freq
  powersave     pin min_freq; on intel_pstate parts it follows the ondemand
                law under the turbo ceiling (the driver picks states itself)
  userspace     set_speed plus at most one load-dependent pstate step
  ondemand      min + load * (max - min)
  conservative  walk one pstate index per tick toward the ondemand target
  interactive   boost to hispeed_freq on load >= trigger, hold for the
                boostpulse duration, change at most once per min_sample_time,
                decay three pstate indices per tick
  schedutil     PELT tracking (half-life 32 ms), freq = min + 1.25*pelt*span

Turbo, when enabled, caps output at the ceiling and charges a leaky-bucket
budget for every tick spent above base frequency; with the budget drained
the output is clamped to base until idle ticks (load < 0.1) refill it.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .profiles import GOVERNORS, DeviceProfile
from .trace import FrequencyTrace

PELT_HALF_LIFE_MS = 32
SCHEDUTIL_MARGIN = 1.25
TURBO_IDLE_LOAD = 0.1
INTERACTIVE_DECAY_STEPS = 3  # pstate indices shed per tick on the way down


@dataclass(frozen=True)
class WorkloadTrace:
    loads: tuple[float, ...]
    tick_ms: int

    def __post_init__(self) -> None:
        if not self.loads:
            raise ValueError("workload needs at least one tick")
        if self.tick_ms < 1:
            raise ValueError("tick_ms must be >= 1")
        if any(l < 0.0 or l > 1.0 for l in self.loads):
            raise ValueError("loads must lie in [0, 1]")

    def __len__(self) -> int:
        return len(self.loads)


@dataclass(frozen=True)
class InteractiveParams:
    hispeed_freq_khz: int
    boostpulse_duration_ms: int = 80
    min_sample_time_ms: int = 20
    load_trigger: float = 0.3

    def __post_init__(self) -> None:
        if self.boostpulse_duration_ms < 0 or self.min_sample_time_ms < 0:
            raise ValueError("interactive durations must be non-negative")
        if not 0.0 < self.load_trigger <= 1.0:
            raise ValueError("load_trigger must lie in (0, 1]")


@dataclass(frozen=True)
class TurboParams:
    enabled: bool = False
    ceiling_khz: int | None = None
    budget_gain_per_idle_tick: float = 0.05
    budget_cost_per_boost_tick: float = 0.02

    def __post_init__(self) -> None:
        if self.budget_gain_per_idle_tick < 0 or self.budget_cost_per_boost_tick < 0:
            raise ValueError("turbo budget rates must be non-negative")


def default_interactive_params(profile: DeviceProfile) -> InteractiveParams:
    # 1.2 GHz is off most grids; quantize so hispeed is a real pstate.
    return InteractiveParams(hispeed_freq_khz=profile.quantize(1_200_000))


def default_turbo_params(profile: DeviceProfile) -> TurboParams:
    return TurboParams(enabled=profile.turbo_boost, ceiling_khz=profile.boost_cap_khz)


@dataclass(frozen=True)
class SimConfig:
    profile: DeviceProfile
    governor: str
    interactive: InteractiveParams | None = None
    conservative_step_khz: int = 100_000
    turbo: TurboParams | None = None
    set_speed_khz: int | None = None
    seed: int = 0
    allow_unsupported_governor: bool = False

    def __post_init__(self) -> None:
        if self.governor not in GOVERNORS:
            raise ValueError(f"unknown governor {self.governor!r}")
        if self.governor not in self.profile.supported_governors and not self.allow_unsupported_governor:
            raise ValueError(
                f"governor {self.governor!r} not supported by {self.profile.name} "
                f"(supported: {', '.join(self.profile.supported_governors)})"
            )
        if self.conservative_step_khz < 1:
            raise ValueError("conservative_step_khz must be positive")
        turbo = self.effective_turbo()
        if turbo.enabled:
            if self.profile.base_freq_khz is None:
                raise ValueError(f"turbo requires a base frequency; {self.profile.name} has none")
            if turbo.ceiling_khz is not None and turbo.ceiling_khz > self.profile.max_freq_khz:
                raise ValueError("turbo ceiling above profile max")
            if self.governor == "interactive":
                raise ValueError("turbo is not modeled under the interactive governor")
        ia = self.effective_interactive()
        if ia.hispeed_freq_khz not in self.profile.pstates:
            raise ValueError("hispeed_freq_khz must be a profile pstate")

    def effective_interactive(self) -> InteractiveParams:
        return self.interactive or default_interactive_params(self.profile)

    def effective_turbo(self) -> TurboParams:
        turbo = self.turbo or default_turbo_params(self.profile)
        if turbo.enabled and turbo.ceiling_khz is None:
            turbo = replace(turbo, ceiling_khz=self.profile.boost_cap_khz)
        return turbo

    def effective_set_speed(self) -> int:
        if self.set_speed_khz is not None:
            return self.set_speed_khz
        if self.profile.base_freq_khz is not None:
            return self.profile.quantize(self.profile.base_freq_khz)
        mid = len(self.profile.pstates) // 2
        return self.profile.pstates[mid]


@dataclass
class GovernorState:
    governor: str
    current_freq_khz: int
    set_speed_khz: int | None = None
    pelt_load: float = 0.0
    boost_remaining_ms: int = 0
    turbo_budget: float = 1.0
    ms_since_change: int = 1 << 30  # large: first change is never rate-limited
    boost_pending: bool = False


def init_state(cfg: SimConfig) -> GovernorState:
    profile = cfg.profile
    governor = cfg.governor
    if governor == "performance":
        start = profile.max_freq_khz
    elif governor == "userspace":
        start = profile.quantize(cfg.effective_set_speed())
    else:
        start = profile.min_freq_khz
    return GovernorState(
        governor=governor,
        current_freq_khz=start,
        set_speed_khz=cfg.effective_set_speed() if governor == "userspace" else None,
    )


def _ondemand_target(profile: DeviceProfile, load: float) -> float:
    return profile.min_freq_khz + load * (profile.max_freq_khz - profile.min_freq_khz)


def _pelt_alpha(tick_ms: int) -> float:
    return 1.0 - 2.0 ** (-tick_ms / PELT_HALF_LIFE_MS)


def step_governor(state: GovernorState, load: float, cfg: SimConfig, tick_ms: int = 10) -> GovernorState:
    """Advance one tick; returns the next state, input state untouched."""
    if not 0.0 <= load <= 1.0:
        raise ValueError(f"load {load} outside [0, 1]")
    if state.governor != cfg.governor:
        raise ValueError("state/config governor mismatch")

    profile = cfg.profile
    governor = cfg.governor
    nxt = replace_state(state)

    if governor == "interactive":
        _step_interactive(nxt, load, cfg, tick_ms)
        return nxt

    if governor == "performance":
        target = float(profile.max_freq_khz)
    elif governor == "powersave":
        if profile.scaling_driver == "intel_pstate":
            # the driver schedules states itself; approximate with ondemand
            target = _ondemand_target(profile, load)
        else:
            target = float(profile.min_freq_khz)
    elif governor == "userspace":
        if nxt.set_speed_khz is None:
            raise ValueError("userspace governor requires set_speed_khz")
        # real parts show small workload-coupled wiggle around the pin
        target = nxt.set_speed_khz + load * _grid_step(profile)
    elif governor == "ondemand":
        target = _ondemand_target(profile, load)
    elif governor == "conservative":
        desired = profile.quantize(_ondemand_target(profile, load))
        # turbo clamping can leave current off-grid; re-anchor before walking
        cur_idx = profile.pstate_index(profile.quantize(nxt.current_freq_khz))
        want_idx = profile.pstate_index(desired)
        step = 0 if want_idx == cur_idx else (1 if want_idx > cur_idx else -1)
        nxt.current_freq_khz = profile.pstates[cur_idx + step]
        _apply_turbo(nxt, load, cfg, tick_ms)
        return nxt
    elif governor == "schedutil":
        alpha = _pelt_alpha(tick_ms)
        nxt.pelt_load = alpha * load + (1.0 - alpha) * nxt.pelt_load
        span = profile.max_freq_khz - profile.min_freq_khz
        target = profile.min_freq_khz + SCHEDUTIL_MARGIN * nxt.pelt_load * span
        target = min(target, float(profile.max_freq_khz))
    else:
        raise ValueError(f"unknown governor {governor!r}")

    nxt.current_freq_khz = profile.quantize(target)
    _apply_turbo(nxt, load, cfg, tick_ms)
    return nxt


def replace_state(state: GovernorState) -> GovernorState:
    return GovernorState(
        governor=state.governor,
        current_freq_khz=state.current_freq_khz,
        set_speed_khz=state.set_speed_khz,
        pelt_load=state.pelt_load,
        boost_remaining_ms=state.boost_remaining_ms,
        turbo_budget=state.turbo_budget,
        ms_since_change=state.ms_since_change,
        boost_pending=state.boost_pending,
    )


def _grid_step(profile: DeviceProfile) -> float:
    span = profile.max_freq_khz - profile.min_freq_khz
    return span / (len(profile.pstates) - 1) if len(profile.pstates) > 1 else 0.0


def _apply_turbo(state: GovernorState, load: float, cfg: SimConfig, tick_ms: int) -> None:
    turbo = cfg.effective_turbo()
    if not turbo.enabled:
        return
    profile = cfg.profile
    base = profile.base_freq_khz
    assert base is not None  # enforced by SimConfig
    freq = min(state.current_freq_khz, turbo.ceiling_khz)
    if freq > base:
        if state.turbo_budget > turbo.budget_cost_per_boost_tick:
            state.turbo_budget = max(0.0, state.turbo_budget - turbo.budget_cost_per_boost_tick)
        else:
            freq = profile.quantize(base)
    state.current_freq_khz = freq
    if load < TURBO_IDLE_LOAD:
        state.turbo_budget = min(1.0, state.turbo_budget + turbo.budget_gain_per_idle_tick)


def _step_interactive(state: GovernorState, load: float, cfg: SimConfig, tick_ms: int) -> None:
    profile = cfg.profile
    ia = cfg.effective_interactive()

    if load >= ia.load_trigger:
        state.boost_pending = True

    desired = profile.quantize(_ondemand_target(profile, load))
    if state.boost_pending or state.boost_remaining_ms > 0:
        desired = max(desired, ia.hispeed_freq_khz)

    cur_idx = profile.pstate_index(state.current_freq_khz)
    want_idx = profile.pstate_index(desired)
    if want_idx > cur_idx:
        next_idx = want_idx  # upward moves are immediate
    elif want_idx < cur_idx:
        next_idx = max(want_idx, cur_idx - INTERACTIVE_DECAY_STEPS)
    else:
        next_idx = cur_idx
    next_freq = profile.pstates[next_idx]

    # this tick's time elapses before the change decision, so a change is
    # legal once a full min_sample_time window has passed since the last one
    state.ms_since_change = min(state.ms_since_change + tick_ms, 1 << 30)
    if next_freq != state.current_freq_khz and state.ms_since_change < ia.min_sample_time_ms:
        next_freq = state.current_freq_khz  # rate limited, retry next tick

    if next_freq != state.current_freq_khz:
        state.ms_since_change = 0
    state.current_freq_khz = next_freq

    # boost countdown starts once the frequency actually reaches hispeed
    if state.boost_pending and state.current_freq_khz >= ia.hispeed_freq_khz:
        state.boost_remaining_ms = ia.boostpulse_duration_ms
        state.boost_pending = False
    state.boost_remaining_ms = max(0, state.boost_remaining_ms - tick_ms)


def simulate(workload: WorkloadTrace, cfg: SimConfig) -> FrequencyTrace:
    """Run the governor over a workload; output sample k is the frequency
    during workload tick k."""
    state = init_state(cfg)
    samples = []
    for load in workload.loads:
        state = step_governor(state, load, cfg, workload.tick_ms)
        samples.append(state.current_freq_khz)
    return FrequencyTrace(
        samples=samples,
        interval_ms=workload.tick_ms,
        device=cfg.profile.name,
    )
