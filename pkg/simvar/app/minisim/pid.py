"""PID controller used for lateral (cross-track) and speed control."""
from __future__ import annotations

from dataclasses import dataclass, replace


@dataclass(frozen=True, slots=True)
class PidGains:
    kp: float
    ki: float = 0.0
    kd: float = 0.0
    integral_bound: float = float("inf")


LATERAL_GAINS = PidGains(kp=2.0, ki=0.1, kd=0.0, integral_bound=1.0)
SPEED_GAINS = PidGains(kp=1.5, ki=0.2, kd=0.0, integral_bound=2.0)


@dataclass(frozen=True, slots=True)
class PidState:
    gains: PidGains
    integral: float = 0.0
    previous_error: float | None = None

    def reset(self) -> "PidState":
        return PidState(self.gains)


def pid_step(state: PidState, error: float, dt: float) -> tuple[float, PidState]:
    """
    One controller update.

    The integral is clamped to ``±gains.integral_bound`` (anti-windup); the
    derivative term is zero on the first call.

    Returns:
        (command, updated state)
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    g = state.gains
    integral = min(max(state.integral + error * dt, -g.integral_bound), g.integral_bound)
    derivative = 0.0 if state.previous_error is None else (error - state.previous_error) / dt
    command = g.kp * error + g.ki * integral + g.kd * derivative
    return command, replace(state, integral=integral, previous_error=error)
