"""Vacuum + weak-decoy lower bounds on the single-photon teleportation fidelity."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Optional

from ..errors import BoundUndefinedError, ConfigurationError, FormatError

DECOY_STATES = ("e", "l", "+")
VACUUM_ERROR = 0.5


@dataclass(frozen=True)
class DecoyRow:
    mu: float
    gain: float
    fidelity: float

    def __post_init__(self):
        for name in ("mu", "gain", "fidelity"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ConfigurationError(f"{name} must be finite")
            object.__setattr__(self, name, v)
        if self.mu < 0:
            raise ConfigurationError(f"mean photon number must be >= 0, got {self.mu}")
        if self.gain < 0:
            raise ConfigurationError(f"gain must be >= 0, got {self.gain}")
        if not 0.0 <= self.fidelity <= 1.0:
            raise ConfigurationError(f"fidelity must lie in [0, 1], got {self.fidelity}")

    @property
    def error(self) -> float:
        return 1.0 - self.fidelity


@dataclass(frozen=True)
class DecoyDataset:
    """Rows per prepared state; each state needs a vacuum row and two nonzero intensities."""

    rows: dict

    def __post_init__(self):
        rows = {}
        for state, rs in dict(self.rows).items():
            if state not in DECOY_STATES:
                raise ConfigurationError(f"unknown prepared state {state!r}")
            rs = sorted((r if isinstance(r, DecoyRow) else DecoyRow(*r) for r in rs), key=lambda r: r.mu)
            mus = [r.mu for r in rs]
            if len(set(mus)) != len(mus):
                raise ConfigurationError(f"state {state!r}: intensities must be distinct")
            if len(rs) < 3:
                raise ConfigurationError(f"state {state!r}: need signal, decoy and vacuum rows")
            if rs[0].mu != 0.0:
                raise ConfigurationError(f"state {state!r}: missing vacuum row")
            rows[state] = tuple(rs)
        if not rows:
            raise ConfigurationError("dataset has no states")
        object.__setattr__(self, "rows", rows)

    def states(self):
        return [s for s in DECOY_STATES if s in self.rows]


class StateBound(NamedTuple):
    fidelity: float
    yield_lower: float
    error_upper: float
    mu: float
    nu: float


class DecoyBound(NamedTuple):
    per_state: dict
    average: Optional[float]

    def __getitem__(self, key):
        if isinstance(key, str):
            return self.per_state[key].fidelity
        return tuple.__getitem__(self, key)


def bound_state(rows, e0: float = VACUUM_ERROR) -> StateBound:
    """Bound from the vacuum row, the weakest decoy ``nu`` and the strongest signal ``mu``."""
    rows = sorted(rows, key=lambda r: r.mu)
    y0 = rows[0].gain
    dec, sig = rows[1], rows[-1]
    mu, nu = sig.mu, dec.mu
    q_mu, q_nu = sig.gain, dec.gain
    y1 = (mu / (mu * nu - nu * nu)) * (
        q_nu * math.exp(nu) - q_mu * math.exp(mu) * (nu / mu) ** 2 - ((mu * mu - nu * nu) / (mu * mu)) * y0
    )
    if not y1 > 0:
        raise BoundUndefinedError(f"single-photon yield bound {y1:.3e} is not positive: dataset is not informative")
    e1 = (dec.error * q_nu * math.exp(nu) - e0 * y0) / (nu * y1)
    f = min(1.0, max(0.0, 1.0 - e1))
    return StateBound(f, y1, e1, mu, nu)


def decoy_bound(data: DecoyDataset, e0: float = VACUUM_ERROR) -> DecoyBound:
    """Lower bounds per state and, with all three states present, their weighted average."""
    per = {s: bound_state(data.rows[s], e0) for s in data.states()}
    avg = None
    if all(s in per for s in DECOY_STATES):
        avg = (per["e"].fidelity + per["l"].fidelity + 4.0 * per["+"].fidelity) / 6.0
    return DecoyBound(per, avg)


# ----------------------------------------------------------------- CSV IO


def read_decoy_csv(src) -> DecoyDataset:
    """Parse ``state,mu,gain,fidelity`` rows; ``#`` lines are comments."""
    text = Path(src).read_text() if isinstance(src, (str, Path)) else src.read()
    rows: dict = {}
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), 1):
        if not row or not "".join(row).strip() or row[0].lstrip().startswith("#"):
            continue
        cells = [c.strip() for c in row]
        if cells == ["state", "mu", "gain", "fidelity"]:
            continue
        if len(cells) != 4:
            raise FormatError(f"row {lineno}: expected state,mu,gain,fidelity")
        state = cells[0]
        if state not in DECOY_STATES:
            raise FormatError(f"row {lineno}: unknown state {state!r}")
        try:
            vals = [float(c) for c in cells[1:]]
        except ValueError:
            raise FormatError(f"row {lineno}: non-numeric value") from None
        try:
            rows.setdefault(state, []).append(DecoyRow(*vals))
        except ConfigurationError as exc:
            raise FormatError(f"row {lineno}: {exc}") from None
    try:
        return DecoyDataset(rows)
    except ConfigurationError as exc:
        raise FormatError(str(exc)) from None


def write_decoy_csv(data: DecoyDataset, dest=None) -> Optional[str]:
    lines = ["state,mu,gain,fidelity"]
    for s in data.states():
        for r in data.rows[s]:
            lines.append(f"{s},{r.mu!r},{r.gain!r},{r.fidelity!r}")
    text = "\n".join(lines) + "\n"
    if dest is None:
        return text
    if isinstance(dest, (str, Path)):
        Path(dest).write_text(text)
    else:
        dest.write(text)
    return None
