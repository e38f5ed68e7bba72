"""The 16-register holding image an IMU serves over Modbus-TCP.

======  =====================================  ==========
reg     content                                encoding
======  =====================================  ==========
0-1     max charge, pC                         u32
2       repetition rate, pps x10               u16
3       max temperature, degC x10              s16
4       max gradient, degC/m x10               u16
5       max rise rate, degC/min x10            u16
6       FSM state (0 normal, 1 attn, 2 sev)    u16
7       quality flags                          u16
8-9     compensated current, A x100            s32
10      vibration RMS x1000                    u16
11-12   record sequence number                 u32
13-14   record time, unix seconds              u32
15      image schema version (1)               u16
======  =====================================  ==========

Multi-register values are big-endian (high word first). Values outside the
encodable range saturate and set :attr:`Quality.SATURATED`.
"""

from __future__ import annotations

from dataclasses import dataclass

from .record import FeatureRecord, FsmLevel, Quality

N_REGISTERS = 16
SCHEMA_VERSION = 1

U16_MAX = 0xFFFF
U32_MAX = 0xFFFF_FFFF
S16 = (-0x8000, 0x7FFF)
S32 = (-0x8000_0000, 0x7FFF_FFFF)


@dataclass(frozen=True)
class RegisterRecord:
    """What a poller can recover from the register image."""

    max_charge_pc: float
    rate_pps: float
    max_temp_c: float
    max_gradient_c_per_m: float
    max_rise_rate_c_per_min: float
    fsm_state: FsmLevel
    quality: int
    current_a: float
    vibration_rms: float
    seq: int
    time: float

    def metrics(self) -> dict[str, float]:
        return {
            "pd_magnitude_pc": self.max_charge_pc,
            "pd_rate_pps": self.rate_pps,
            "temp_c": self.max_temp_c,
            "temp_rise_c_per_min": self.max_rise_rate_c_per_min,
            "temp_gradient_c_per_m": self.max_gradient_c_per_m,
            "current_a": self.current_a,
            "vibration_rms": self.vibration_rms,
        }


class _Saturating:
    def __init__(self) -> None:
        self.saturated = False

    def fit(self, value: float, scale: float, lo: int, hi: int) -> int:
        v = round(value * scale)
        if v < lo:
            self.saturated = True
            return lo
        if v > hi:
            self.saturated = True
            return hi
        return v


def _split32(v: int) -> tuple[int, int]:
    v &= U32_MAX
    return v >> 16, v & U16_MAX


def _join32(hi: int, lo: int, signed: bool = False) -> int:
    v = (hi << 16) | lo
    if signed and v & 0x8000_0000:
        v -= 1 << 32
    return v


def encode_registers(rec: FeatureRecord) -> list[int]:
    sat = _Saturating()
    charge = sat.fit(rec.max_charge_pc, 1, 0, U32_MAX)
    rate = sat.fit(rec.rate_pps, 10, 0, U16_MAX)
    temp = sat.fit(rec.max_temp_c, 10, *S16)
    grad = sat.fit(rec.max_gradient_c_per_m, 10, 0, U16_MAX)
    rise = sat.fit(rec.max_rise_rate_c_per_min, 10, 0, U16_MAX)
    current = sat.fit(rec.current_a, 100, *S32)
    vib = sat.fit(rec.vibration_rms, 1000, 0, U16_MAX)
    seq = sat.fit(rec.seq, 1, 0, U32_MAX)
    t = sat.fit(int(rec.time), 1, 0, U32_MAX)
    quality = (rec.quality | (Quality.SATURATED if sat.saturated else 0)) & U16_MAX
    return [
        *_split32(charge),
        rate,
        temp & U16_MAX,
        grad,
        rise,
        int(rec.fsm_state),
        quality,
        *_split32(current),
        vib,
        *_split32(seq),
        *_split32(t),
        SCHEMA_VERSION,
    ]


def decode_registers(regs: list[int] | tuple[int, ...]) -> RegisterRecord:
    if len(regs) != N_REGISTERS:
        raise ValueError(f"expected {N_REGISTERS} registers, got {len(regs)}")
    if any(not 0 <= r <= U16_MAX for r in regs):
        raise ValueError("register values must be 16-bit unsigned")
    if regs[15] != SCHEMA_VERSION:
        raise ValueError(f"unsupported register schema version {regs[15]}")
    temp = regs[3] - 0x10000 if regs[3] & 0x8000 else regs[3]
    try:
        state = FsmLevel(regs[6])
    except ValueError:
        raise ValueError(f"invalid FSM state code {regs[6]}") from None
    return RegisterRecord(
        max_charge_pc=float(_join32(regs[0], regs[1])),
        rate_pps=regs[2] / 10,
        max_temp_c=temp / 10,
        max_gradient_c_per_m=regs[4] / 10,
        max_rise_rate_c_per_min=regs[5] / 10,
        fsm_state=state,
        quality=regs[7],
        current_a=_join32(regs[8], regs[9], signed=True) / 100,
        vibration_rms=regs[10] / 1000,
        seq=_join32(regs[11], regs[12]),
        time=float(_join32(regs[13], regs[14])),
    )
