"""Writes ieee37.json: the public IEEE 37-node feeder topology reduced to a
single-phase equivalent with per-unit series impedances.

Segment lengths and line configurations follow the published feeder data.
Impedances use the positive-sequence (r, x) of each configuration in ohm/mile,
base 4.8 kV and 100 MVA. Buses without load other than the substation are
zero-injection nodes.
"""
import json
import pathlib

SEGMENTS = [
    (701, 702, 960, 722), (702, 705, 400, 724), (702, 713, 360, 723), (702, 703, 1320, 722),
    (703, 727, 240, 724), (703, 730, 600, 723), (704, 714, 80, 724), (704, 720, 800, 723),
    (705, 742, 320, 724), (705, 712, 240, 724), (706, 725, 280, 724), (707, 724, 760, 724),
    (707, 722, 120, 724), (708, 733, 320, 723), (708, 732, 320, 724), (709, 731, 600, 723),
    (709, 708, 320, 723), (710, 735, 200, 724), (710, 736, 1280, 724), (711, 741, 400, 723),
    (711, 740, 200, 724), (713, 704, 520, 723), (714, 718, 520, 724), (720, 707, 920, 724),
    (720, 706, 600, 723), (727, 744, 280, 723), (730, 709, 200, 723), (733, 734, 560, 723),
    (734, 737, 640, 723), (734, 710, 520, 724), (737, 738, 400, 723), (738, 711, 400, 723),
    (744, 728, 200, 724), (744, 729, 280, 724), (775, 709, 0, "XFM"), (799, 701, 1850, 721),
]
CONFIG = {721: (0.2926, 0.1973), 722: (0.4751, 0.2973), 723: (1.2936, 0.6713), 724: (2.0952, 0.7758)}
LOADS = {701, 712, 713, 714, 718, 720, 722, 724, 725, 727, 728, 729, 730, 731, 732, 733, 734, 735, 736, 737,
         738, 740, 741, 742, 744}
SUBSTATION = 799
V_BASE_KV = 4.8
S_BASE_MVA = 100.0
XFM_RATING_MVA = 0.5
XFM_R_PU, XFM_X_PU = 0.0009, 0.0181


def main():
    z_base = V_BASE_KV**2 / S_BASE_MVA
    names = sorted({n for s in SEGMENTS for n in s[:2]}, key=lambda n: (n != SUBSTATION, n))
    index = {n: i for i, n in enumerate(names)}
    buses = [{"id": index[n], "zero_injection": n not in LOADS and n != SUBSTATION, "name": str(n)} for n in names]
    lines = []
    for k, (a, b, feet, cfg) in enumerate(SEGMENTS):
        if cfg == "XFM":
            scale = S_BASE_MVA / XFM_RATING_MVA
            r, x = XFM_R_PU * scale, XFM_X_PU * scale
        else:
            miles = feet / 5280.0
            r, x = CONFIG[cfg][0] * miles / z_base, CONFIG[cfg][1] * miles / z_base
        lines.append({"id": k, "from": index[a], "to": index[b], "r": round(r, 10), "x": round(x, 10)})
    doc = {"buses": buses, "lines": lines, "slack": index[SUBSTATION], "base_voltage": 1.0}
    out = pathlib.Path(__file__).with_name("ieee37.json")
    out.write_text(json.dumps(doc, indent=1) + "\n")


if __name__ == "__main__":
    main()
