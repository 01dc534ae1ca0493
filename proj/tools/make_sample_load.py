#!/usr/bin/env python3
"""Generate the bundled 30-day commercial base-load profile.

Writes data/commercial_base_load_15min.csv: 15-minute samples starting
Monday 2012-01-02, with a weekday business-hours plateau, reduced weekend
activity, and small high-frequency noise. Deterministic (fixed seed).
"""

import math
import pathlib
import random


def daily_shape(hour: float, weekend: bool) -> float:
    """Smooth kW level for one day: night base plus a daytime plateau."""
    night = 78.0
    # Plateau ramps up 7..9h, down 17..20h, peaks early afternoon.
    up = 0.5 * (1.0 + math.tanh((hour - 8.0) / 0.9))
    down = 0.5 * (1.0 + math.tanh((17.5 - hour) / 1.4))
    plateau = up * down
    bump = 1.0 + 0.12 * math.exp(-((hour - 13.8) ** 2) / 4.5)
    amplitude = 118.0 * (0.45 if weekend else 1.0)
    return night + amplitude * plateau * bump


def main() -> None:
    rng = random.Random(20120102)
    out = pathlib.Path(__file__).resolve().parent.parent / "data"
    out.mkdir(exist_ok=True)
    path = out / "commercial_base_load_15min.csv"

    start_day = 2  # 2012-01-02 is a Monday
    lines = ["timestamp,kw"]
    drift = 0.0
    for day in range(30):
        date = start_day + day
        weekend = day % 7 in (5, 6)
        day_scale = 1.0 + 0.05 * math.sin(2.0 * math.pi * day / 11.0)
        for slot in range(96):
            hour = slot / 4.0
            drift = 0.92 * drift + rng.gauss(0.0, 1.1)
            kw = daily_shape(hour, weekend) * day_scale + drift
            kw = max(kw, 0.0)
            minute = slot * 15
            stamp = "2012-01-%02dT%02d:%02d:00" % (date, minute // 60, minute % 60)
            lines.append("%s,%.2f" % (stamp, kw))
    path.write_text("\n".join(lines) + "\n")
    print("wrote", path, len(lines) - 1, "rows")


if __name__ == "__main__":
    main()
