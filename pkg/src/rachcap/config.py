"""System parameters for the random-access procedure.

All timing quantities are expressed in subframes (1 ms each).  Rates used
inside the package are per subframe; the CLI converts from attempts per
second at the boundary.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path


@dataclass(frozen=True)
class SystemConfig:
    """Static cell configuration shared by the model and the simulator.

    d: number of contention preambles available per access opportunity.
    delta_rao: access-opportunity period in subframes.
    m: maximum number of retransmissions (m + 1 total attempts).
    mu: grant-service capacity of the downlink response queue, grants
        per subframe.
    w_c: backoff window in subframes; a failed device waits uniform
        integer [0, w_c] before becoming eligible again.
    t_rar: response-window length in subframes.  A request not granted
        within this window is abandoned.
    t_crt: contention-resolution timer in subframes.  Devices whose
        uplink message collided give up after this long.
    t_enb_proc: base-station processing delay in subframes.
    t_ue_proc: device processing delay in subframes.
    """

    d: int = 54
    delta_rao: int = 5
    m: int = 9
    mu: int = 3
    w_c: int = 20
    t_rar: int = 5
    t_crt: int = 48
    t_enb_proc: int = 3
    t_ue_proc: int = 3

    def __post_init__(self) -> None:
        if self.d < 1:
            raise ValueError(f"d must be >= 1, got {self.d}")
        if not 1 <= self.delta_rao <= 20:
            raise ValueError(f"delta_rao must be in [1, 20], got {self.delta_rao}")
        if self.m < 0:
            raise ValueError(f"m must be >= 0, got {self.m}")
        if self.mu < 1:
            raise ValueError(f"mu must be >= 1, got {self.mu}")
        if self.w_c < 1:
            raise ValueError(f"w_c must be >= 1, got {self.w_c}")
        if self.t_rar < 1:
            raise ValueError(f"t_rar must be >= 1, got {self.t_rar}")
        if self.t_crt <= self.t_rar:
            raise ValueError(
                f"t_crt must exceed t_rar, got t_crt={self.t_crt} t_rar={self.t_rar}"
            )
        if self.t_enb_proc < 0 or self.t_ue_proc < 0:
            raise ValueError("processing delays must be >= 0")

    @property
    def t_d(self) -> int:
        """Grant-queue drain budget: requests servable within one response window."""
        return self.mu * self.t_rar

    @property
    def tau_q(self) -> float:
        """Patience parameter of the grant queue: the waiting-time
        budget, in subframes, before a queued request is written off.
        Equals the drain budget t_d minus one mean service."""
        return self.mu * self.t_rar - 1.0 / self.mu


# keys accepted by load_config, mapped to SystemConfig field names
_CONFIG_KEYS = {
    "d": "d",
    "delta_rao": "delta_rao",
    "m": "m",
    "mu": "mu",
    "w_c": "w_c",
    "t_rar": "t_rar",
    "t_crt": "t_crt",
    "t_enb_proc": "t_enb_proc",
    "t_ue_proc": "t_ue_proc",
}


def load_config(path: str | Path, base: SystemConfig | None = None) -> SystemConfig:
    """Read a flat key = value file and overlay it on *base*.

    Lines starting with '#' and blank lines are ignored.  Unknown keys
    raise ValueError so typos do not silently fall back to defaults.
    """
    base = base if base is not None else SystemConfig()
    overrides: dict[str, int] = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _CONFIG_KEYS:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            overrides[_CONFIG_KEYS[key]] = int(value)
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: {key} must be an integer") from exc
    return replace(base, **overrides)
