#!/usr/bin/env python3
"""Regenerate src/activation_tables.inc.

Knots sit at x = -8 + k/64 for k = 0..1024 (1024 interpolation segments over
the Q8.8 input range [-8, 8)). Values are Q1.15, round-half-even, saturated.
Computed with mpmath so the frozen table does not depend on the host libm.
"""
import sys
from pathlib import Path

import mpmath

mpmath.mp.dps = 50
KNOTS = 1025


def q15(v):
    scaled = v * 32768
    r = int(mpmath.nint(scaled))  # nint rounds half to even
    return max(-32768, min(32767, r))


def knots(fn):
    return [q15(fn(mpmath.mpf(-8) + mpmath.mpf(k) / 64)) for k in range(KNOTS)]


def emit(name, values):
    lines = [f"inline constexpr std::array<std::int16_t, {KNOTS}> {name} = {{"]
    for i in range(0, len(values), 12):
        lines.append("    " + ", ".join(str(v) for v in values[i:i + 12]) + ",")
    lines.append("};")
    return "\n".join(lines)


def main():
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parents[1] / "src" / "activation_tables.inc"
    sigmoid = knots(lambda x: 1 / (1 + mpmath.exp(-x)))
    tanh = knots(mpmath.tanh)
    body = "// Generated by scripts/gen_activation_tables.py. Do not edit.\n\n"
    body += emit("kSigmoidKnots", sigmoid) + "\n\n" + emit("kTanhKnots", tanh) + "\n"
    out.write_text(body)


if __name__ == "__main__":
    main()
