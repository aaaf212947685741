"""Scenario configuration.

A :class:`SystemConfig` carries every parameter of a link-level scenario.
Config files are YAML (JSON is accepted too, being a YAML subset) whose
top-level keys are exactly the dataclass field names; unknown keys are
rejected.
"""

from dataclasses import asdict, dataclass, fields, replace
from math import factorial, floor, log2
from pathlib import Path

import numpy as np
import yaml

from ._validation import ConfigurationError

SCHEMES = ("CPSC", "CPSC-RIS", "CPSC-RIS-IM")
DETECTORS = ("ML", "ZF", "MMSE", "IM-ML", "IM-LC")


@dataclass(frozen=True)
class SystemConfig:
    N: int = 8
    M: int = 2
    R: int = 2
    N_G: int = 8
    L: int = 2
    delta: int | None = None
    taps: int | tuple = 2
    m: int | tuple = 2
    pdp_decay: float = 1.0
    D0: float = 50.0
    D1: float = 5.0
    D2: float = 50.0
    pl_exp_direct: float = 2.5
    pl_exp_tx_ris: float = 2.0
    pl_exp_ris_rx: float = 2.0
    snr_db: tuple = (20.0, 25.0, 30.0, 35.0, 40.0)
    detectors: tuple = ("ML", "MMSE", "ZF")
    scheme: str = "CPSC-RIS"
    csi: str = "perfect"
    pilot: str = "zc"
    varpi: int = 1
    denoise: bool = False
    lc_equalizer: str = "MMSE"
    master_seed: int = 0
    min_trials: int = 100_000
    min_bit_errors: int | None = 200
    chunk_size: int = 2000
    noiseless: bool = False

    def __post_init__(self):
        # normalise list-valued fields so configs are hashable and comparable
        for name in ("snr_db", "detectors"):
            val = getattr(self, name)
            if isinstance(val, (int, float, str)):
                val = (val,)
            object.__setattr__(self, name, tuple(val))
        object.__setattr__(self, "snr_db", tuple(float(s) for s in self.snr_db))
        for name in ("taps", "m"):
            val = getattr(self, name)
            if not isinstance(val, (int, np.integer)):
                object.__setattr__(self, name, tuple(int(t) for t in val))
        if self.delta is None:
            object.__setattr__(self, "delta", self.L)
        self.validate()

    # derived quantities -------------------------------------------------

    @property
    def n_links(self):
        return self.R + 1

    @property
    def link_taps(self):
        if isinstance(self.taps, tuple):
            return self.taps
        return (int(self.taps),) * self.n_links

    @property
    def link_m(self):
        if isinstance(self.m, tuple):
            return self.m
        return (int(self.m),) * self.n_links

    @property
    def L_s(self):
        return sum(self.link_taps)

    @property
    def N_R(self):
        return self.N_G * self.R

    @property
    def bits_per_symbol(self):
        return int(log2(self.M))

    @property
    def im(self):
        return self.scheme == "CPSC-RIS-IM"

    @property
    def b1(self):
        return floor(log2(factorial(self.R))) if self.im and self.R >= 1 else 0

    @property
    def b2(self):
        return self.N * self.bits_per_symbol

    @property
    def bits_per_block(self):
        return self.b1 + self.b2

    @property
    def energy_per_bit(self):
        return (self.N + self.L) / self.bits_per_block

    def noise_power(self, snr_db):
        """N0 for an Eb/N0 given in dB."""
        if self.noiseless:
            return 0.0
        return self.energy_per_bit / 10.0 ** (float(snr_db) / 10.0)

    # validation ---------------------------------------------------------

    def validate(self):
        if self.N < 1:
            raise ConfigurationError("N must be >= 1")
        if self.M < 2 or self.M & (self.M - 1):
            raise ConfigurationError(f"M must be a power of two >= 2, got {self.M}")
        if self.R < 0:
            raise ConfigurationError("R must be >= 0")
        if self.scheme not in SCHEMES:
            raise ConfigurationError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.scheme == "CPSC" and self.R != 0:
            raise ConfigurationError("scheme CPSC has no RIS: R must be 0")
        if self.scheme != "CPSC" and self.R < 1:
            raise ConfigurationError(f"scheme {self.scheme} needs R >= 1")
        for name, vals in (("taps", self.link_taps), ("m", self.link_m)):
            if len(vals) != self.n_links:
                raise ConfigurationError(f"{name} needs {self.n_links} entries (R+1), got {len(vals)}")
            if min(vals) < 1:
                raise ConfigurationError(f"every entry of {name} must be >= 1")
        if self.L >= self.N:
            raise ConfigurationError(f"CP length L={self.L} must be < N={self.N}")
        if self.L < max(self.link_taps):
            raise ConfigurationError(f"L >= max link taps violated: L={self.L} < {max(self.link_taps)}")
        if self.R >= 1:
            upper = self.N // (self.R + 1)
            if not self.L <= self.delta:
                raise ConfigurationError(f"L <= delta violated: L={self.L}, delta={self.delta}")
            if not self.delta <= upper:
                raise ConfigurationError(
                    f"delta <= floor(N/(R+1)) violated: delta={self.delta}, floor({self.N}/{self.R + 1})={upper}"
                )
        if self.pdp_decay < 0:
            raise ConfigurationError("pdp_decay must be >= 0")
        if min(self.D0, self.D1, self.D2) <= 0:
            raise ConfigurationError("distances must be positive")
        if self.N_G < 1:
            raise ConfigurationError("N_G must be >= 1")
        if self.csi not in ("perfect", "estimated"):
            raise ConfigurationError(f"csi must be 'perfect' or 'estimated', got {self.csi!r}")
        if self.csi == "estimated" and self.N % 2:
            raise ConfigurationError("estimated CSI uses Zadoff-Chu pilots and needs even N")
        if self.pilot not in ("zc", "random_psk"):
            raise ConfigurationError(f"pilot must be 'zc' or 'random_psk', got {self.pilot!r}")
        if self.lc_equalizer not in ("ZF", "MMSE"):
            raise ConfigurationError("lc_equalizer must be 'ZF' or 'MMSE'")
        allowed = ("IM-ML", "IM-LC") if self.im else ("ML", "ZF", "MMSE")
        bad = [d for d in self.detectors if d not in allowed]
        if bad:
            raise ConfigurationError(f"detectors {bad} not available for scheme {self.scheme}; choose from {allowed}")
        if self.min_trials < 1 or self.chunk_size < 1:
            raise ConfigurationError("min_trials and chunk_size must be >= 1")

    # (de)serialisation ---------------------------------------------------

    @classmethod
    def from_mapping(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigurationError(f"unknown config keys: {unknown}")
        return cls(**data)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            data = yaml.safe_load(fh) or {}
        if not isinstance(data, dict):
            raise ConfigurationError(f"{path}: top level must be a mapping")
        return cls.from_mapping(data)

    def to_dict(self):
        out = asdict(self)
        for k, v in out.items():
            if isinstance(v, tuple):
                out[k] = list(v)
        return out

    def dump(self, path):
        Path(path).write_text(yaml.safe_dump(self.to_dict(), sort_keys=False))

    def replace(self, **changes):
        return replace(self, **changes)
