"""
Brute-force check of the shipped ripple fixture.

Recomputes every state's SNR under the boxed inputs (20 dB baseline, 7 dB
fixed loss, 10 dB threshold) and counts the states at or below threshold.
Exits non-zero unless exactly 20 of 64 states drop out.

    python scripts/verify_ripple_fixture.py [fixture_name]
"""
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from app.repositories.fixture_repository import fixture_repository  # noqa: E402

BASELINE_SNR_DB = 20.0
FIXED_LOSS_DB = 4.0 + 1.0 + 2.0
THRESHOLD_DB = 10.0
EXPECTED_STATES = 64
EXPECTED_BELOW = 20


def main(name: str = "ripple_m64") -> int:
    ripple = fixture_repository.ripple_values(name)
    below = []
    for m, r in enumerate(ripple):
        snr = BASELINE_SNR_DB - FIXED_LOSS_DB - r
        if not snr > THRESHOLD_DB:
            below.append(m)

    print(f"{name}: {len(ripple)} states, peak ripple {max(ripple):.2f} dB")
    print(f"below threshold ({len(below)}): {below}")
    print(f"M_eff = {len(ripple) - len(below)}")

    ok = len(ripple) == EXPECTED_STATES and len(below) == EXPECTED_BELOW
    print("OK" if ok else "MISMATCH")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main(*sys.argv[1:2]))
