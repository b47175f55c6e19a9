#!/usr/bin/env python3
"""Writes the DORV/HLHS network, inflow and run-config files under data/.

Geometry is the published vessel table; connectivity, posture orientation and
the synthetic inflow shapes are modelling choices documented in README.md.
"""
import json
import math
from pathlib import Path

DATA = Path(__file__).resolve().parent.parent / "data"

# id: (name, (L, r_in, r_out) DORV, (L, r_in, r_out) HLHS)
DIMENSIONS = {
    1: ("Ascending aorta", (4.07, 1.20, 1.10), (3.87, 1.96, 1.88)),
    2: ("Aortic arch I", (1.95, 1.10, 1.10), (1.93, 1.60, 1.20)),
    3: ("Brachiocephalic", (1.23, 0.57, 0.49), (1.60, 0.57, 0.52)),
    4: ("Aortic arch II", (1.94, 0.95, 0.88), (3.77, 1.55, 1.06)),
    5: ("L common carotid", (20.23, 0.36, 0.36), (20.1, 0.36, 0.36)),
    6: ("R vertebral", (14.4, 0.20, 0.19), (14.3, 0.20, 0.19)),
    7: ("R subclavian", (3.67, 0.59, 0.37), (3.27, 0.46, 0.39)),
    8: ("Thoracic aorta", (15.17, 0.88, 0.70), (15.07, 1.44, 0.69)),
    9: ("L subclavian", (3.67, 0.59, 0.37), (3.27, 0.46, 0.39)),
    10: ("R brachial", (20.23, 0.35, 0.30), (20.1, 0.34, 0.30)),
    11: ("L vertebral", (14.4, 0.20, 0.19), (14.3, 0.20, 0.19)),
    12: ("L external carotid", (17.22, 0.32, 0.32), (17.01, 0.31, 0.31)),
    13: ("L internal carotid I", (17.12, 0.32, 0.32), (17.01, 0.31, 0.31)),
    14: ("R external carotid", (17.22, 0.32, 0.32), (17.01, 0.31, 0.31)),
    15: ("R internal carotid I", (17.12, 0.32, 0.32), (17.01, 0.31, 0.31)),
    16: ("R common carotid", (17.22, 0.39, 0.39), (17.10, 0.39, 0.39)),
    17: ("L brachial", (20.23, 0.35, 0.30), (20.1, 0.34, 0.30)),
    18: ("Basilar", (2.76, 0.15, 0.15), (2.74, 0.15, 0.15)),
    19: ("L PCA I", (0.48, 0.10, 0.10), (0.47, 0.10, 0.10)),
    20: ("R PCA I", (0.48, 0.10, 0.10), (0.47, 0.10, 0.10)),
    21: ("L PCA II", (8.18, 0.10, 0.10), (8.13, 0.10, 0.10)),
    22: ("L PCoA", (1.43, 0.07, 0.07), (1.42, 0.07, 0.07)),
    23: ("R PCA II", (8.18, 0.10, 0.10), (8.13, 0.10, 0.10)),
    24: ("R PCoA", (1.43, 0.07, 0.07), (1.42, 0.07, 0.07)),
    25: ("L internal carotid II", (0.48, 0.19, 0.19), (0.47, 0.19, 0.19)),
    26: ("R internal carotid II", (0.48, 0.19, 0.19), (0.47, 0.19, 0.19)),
    27: ("L MCA", (11.32, 0.14, 0.14), (11.24, 0.14, 0.14)),
    28: ("L ACA I", (1.14, 0.11, 0.11), (1.13, 0.11, 0.11)),
    29: ("R MCA", (11.32, 0.14, 0.14), (11.24, 0.14, 0.14)),
    30: ("R ACA I", (1.14, 0.11, 0.11), (1.13, 0.11, 0.11)),
    31: ("L ACA II", (9.8, 0.11, 0.11), (9.73, 0.11, 0.11)),
    32: ("ACoA", (0.29, 0.07, 0.07), (0.28, 0.07, 0.07)),
    33: ("R ACA II", (9.8, 0.11, 0.11), (9.73, 0.11, 0.11)),
    34: ("Celiac axis I", (1.95, 0.37, 0.37), (1.93, 0.37, 0.37)),
    35: ("Abdominal aorta I", (5.16, 0.59, 0.57), (5.12, 0.59, 0.47)),
    36: ("Superior mesenteric", (5.74, 0.29, 0.29), (5.70, 0.29, 0.29)),
    37: ("Abdominal aorta II", (0.97, 0.57, 0.55), (0.97, 0.57, 0.55)),
    38: ("L renal", (3.11, 0.25, 0.25), (3.09, 0.25, 0.25)),
    39: ("Abdominal aorta III", (0.97, 0.55, 0.53), (0.97, 0.55, 0.53)),
    40: ("R renal", (3.11, 0.25, 0.25), (3.09, 0.25, 0.25)),
    41: ("Abdominal aorta IV", (10.31, 0.53, 0.51), (10.24, 0.53, 0.50)),
    42: ("Inferior mesenteric", (4.86, 0.16, 0.16), (4.83, 0.15, 0.15)),
    43: ("Abdominal aorta V", (0.97, 0.51, 0.48), (0.97, 0.50, 0.48)),
    44: ("L external iliac", (14.01, 0.27, 0.26), (13.91, 0.27, 0.26)),
    45: ("R external iliac", (14.01, 0.27, 0.26), (13.91, 0.27, 0.26)),
    46: ("L internal iliac", (4.86, 0.26, 0.26), (4.83, 0.26, 0.26)),
    47: ("L femoral I", (13.09, 0.24, 0.21), (13.00, 0.21, 0.21)),
    48: ("R internal iliac", (4.86, 0.26, 0.26), (4.83, 0.26, 0.26)),
    49: ("R femoral I", (13.09, 0.24, 0.21), (13.00, 0.21, 0.21)),
    50: ("L femoral II", (43.09, 0.21, 0.21), (42.81, 0.21, 0.21)),
    51: ("L deep femoral", (12.26, 0.15, 0.12), (12.17, 0.14, 0.12)),
    52: ("R femoral II", (43.09, 0.21, 0.21), (42.81, 0.21, 0.21)),
    53: ("R deep femoral", (12.26, 0.15, 0.12), (12.17, 0.14, 0.12)),
    54: ("Splenic", (5.99, 0.21, 0.19), (5.95, 0.21, 0.19)),
    55: ("Celiac axis II", (1.90, 0.25, 0.25), (1.89, 0.25, 0.25)),
    56: ("Left gastric", (6.75, 0.15, 0.14), (6.71, 0.15, 0.14)),
    57: ("Hepatic", (6.28, 0.26, 0.21), (6.24, 0.26, 0.21)),
}

CHILDREN = {
    1: [2, 3], 2: [4, 5], 3: [7, 16], 4: [8, 9],
    7: [6, 10], 9: [11, 17], 5: [12, 13], 16: [14, 15],
    11: [18], 18: [19, 20], 19: [21, 22], 20: [23, 24],
    13: [25], 15: [26], 25: [27, 28], 26: [29, 30], 28: [31, 32], 30: [33],
    8: [34, 35], 34: [54, 55], 55: [56, 57], 35: [36, 37], 37: [38, 39],
    39: [40, 41], 41: [42, 43], 43: [44, 45], 44: [46, 47], 45: [48, 49],
    47: [50, 51], 49: [52, 53],
}

UP = {1, 3, 5, 6, 11, 12, 13, 14, 15, 16, 18, 25, 26}
DOWN = {8, 10, 17, 35, 36, 37, 39, 41, 42, 43, 44, 45, 46, 47, 48, 49, 50, 51, 52, 53}

PARAMETERS = {
    "dorv": {
        "k3": {(6, 11): 7.6e5, (10, 17): 7.6e5, (12, 14, 13, 15): 2.66e6, (21, 23): 1.9e6},
        "r_min": {(10, 17): 0.03, (12, 14, 21, 23, 27, 29, 31, 33): 0.001},
    },
    "hlhs": {
        "k3": {
            (1, 2, 4, 7, 8, 9): 5.7e5, (5, 16): 4.56e5, (6, 11): 1.9e6, (10, 17): 3.8e5,
            (12, 14, 13, 15): 2.66e6, (21, 23): 2.66e6,
            (35, 37, 39, 41, 43, 44, 45, 46, 47, 48, 49, 50, 51, 52): 3.04e5,
        },
        "r_min": {(10, 17): 0.03, (12, 14, 21, 23, 27, 29, 31, 33): 0.001, (46, 48, 50, 51, 52, 53): 0.10},
    },
}

# Measured and target mean flows (L/min) at the 4D-MRI planes.
FLOW_PLANES = {
    "dorv": {
        "inflow": 4.06,
        "planes": [
            ("Asc. Aorta", 4.14, None, "trunk", 4.06),
            ("Aortic Arch I", 3.69, "Asc. Aorta", "trunk", 3.32),
            ("Brachiocephalic", 1.95, "Asc. Aorta", "branch", None),
            ("Aortic Arch II", 4.22, "Aortic Arch I", "trunk", 3.13),
            ("L Comm. Carotid", 1.19, "Aortic Arch I", "branch", None),
            ("Thoracic Aorta", 2.95, "Aortic Arch II", "trunk", 2.62),
            ("L Subclavian", 0.82, "Aortic Arch II", "branch", None),
        ],
    },
    "hlhs": {
        "inflow": 5.08,
        "planes": [
            ("Asc. Aorta", 4.49, None, "trunk", 5.08),
            ("Aortic Arch I", 4.75, "Asc. Aorta", "trunk", 4.51),
            ("Brachiocephalic", 1.04, "Asc. Aorta", "branch", None),
            ("Aortic Arch II", 4.16, "Aortic Arch I", "trunk", 4.12),
            ("L Comm. Carotid", 0.54, "Aortic Arch I", "branch", None),
            ("Thoracic Aorta", 3.67, "Aortic Arch II", "trunk", 3.67),
            ("L Subclavian", 0.74, "Aortic Arch II", "branch", None),
        ],
    },
}

SCENARIOS = {
    "dorv": {"period": 0.658, "mean_lmin": 4.06, "systolic_mmhg": 110.0, "diastolic_mmhg": 67.0, "column": 1},
    "hlhs": {"period": 0.615, "mean_lmin": 5.08, "systolic_mmhg": 116.0, "diastolic_mmhg": 65.0, "column": 2},
}


def orientation(vid):
    if vid in UP:
        return "up"
    if vid in DOWN:
        return "down"
    return "horizontal"


def network(patient):
    column = SCENARIOS[patient]["column"]
    parent = {c: p for p, cs in CHILDREN.items() for c in cs}
    vessels = []
    for vid in sorted(DIMENSIONS):
        name, *dims = DIMENSIONS[vid]
        length, r_in, r_out = dims[column - 1]
        vessels.append({
            "id": vid,
            "name": name,
            "length_cm": length,
            "r_in_cm": r_in,
            "r_out_cm": r_out,
            "parent": parent.get(vid),
            "orientation": orientation(vid),
            "terminal": vid not in CHILDREN,
        })
    return {
        "fluid": {"rho": 1.057, "mu": 0.032, "g": 981.0},
        "stiffness": {"k1": 2.0e6, "k2": -35.0, "k3": 3.8e5, "p0": 0.0, "convention": "decaying"},
        "taper_n2": 0.10,
        "vessels": vessels,
    }


def inflow(patient, samples=256):
    """Systolic-peaked ejection, a short backflow notch, quiet diastole."""
    sc = SCENARIOS[patient]
    period = sc["period"]
    mean = sc["mean_lmin"] * 1000.0 / 60.0
    ejection = 0.37 * period
    notch_t, notch_w, notch_depth = ejection + 0.035, 0.012, 0.04

    def shape(t):
        value = 0.0
        if t < ejection:
            tau = (t / ejection) ** 0.8
            value = math.sin(math.pi * tau) ** 1.4
        return value - notch_depth * math.exp(-0.5 * ((t - notch_t) / notch_w) ** 2)

    # The periodic spline through uniform samples has the sample average as its mean.
    avg = sum(shape(period * i / samples) for i in range(samples)) / samples
    scale = mean / avg
    rows = [(period * i / samples, scale * shape(period * i / samples)) for i in range(samples)]
    rows.append((period, rows[0][1]))
    return rows


def overrides(patient):
    out = []
    for key in ("k3", "r_min"):
        for ids, value in PARAMETERS[patient][key].items():
            out.append({"vessels": list(ids), key: value})
    return out


def config(patient):
    sc = SCENARIOS[patient]
    return {
        "network": f"{patient}_network.json",
        "inflow": f"{patient}_rest_inflow.csv",
        "measured_flows": f"{patient}_flows.json",
        "posture": "supine",
        "exercise": {"enabled": False, "flow_factor": 2.0, "period_factor": 0.6},
        "reference_pressure": {"mode": "cuff_mean", "vessel": 17,
                               "systolic_mmhg": sc["systolic_mmhg"], "diastolic_mmhg": sc["diastolic_mmhg"]},
        "stiffness": {"k1": 2.0e6, "k2": -35.0, "k3": 3.8e5, "convention": "decaying"},
        "structured_tree": {"alpha": 0.90, "beta": 0.60, "r_min": 0.01, "lrr": 50.0,
                            "exact_harmonics": 1024, "high_band_stride": 8},
        "overrides": overrides(patient),
        "grid": {"dx_cm": 0.2, "cfl_safety": 0.5, "max_cycles": 40, "min_cycles": 2,
                 "periodicity_tolerance": 1e-3, "output_samples": 512, "workers": 1},
        "analysis": {
            "wia_vessels": [1, 2, 4, 8],
            "aortic_vessel": 1,
            "brachial_vessel": 17,
            "regions": {"cerebral": [13, 15, 18], "liver_and_gut": [34, 36, 42], "lower_body": [44, 45]},
        },
        "output": f"out/{patient}_rest",
    }


def flows(patient):
    fp = FLOW_PLANES[patient]
    planes = []
    for name, measured, parent, role, target in fp["planes"]:
        entry = {"name": name, "mean_lmin": measured, "parent": parent, "role": role}
        if target is not None:
            entry["target_lmin"] = target
        planes.append(entry)
    return {"inflow_lmin": fp["inflow"], "planes": planes}


def main():
    DATA.mkdir(exist_ok=True)
    for patient in ("dorv", "hlhs"):
        (DATA / f"{patient}_network.json").write_text(json.dumps(network(patient), indent=2) + "\n")
        with open(DATA / f"{patient}_rest_inflow.csv", "w") as fh:
            fh.write("t_s,q_mls\n")
            for t, q in inflow(patient):
                fh.write(f"{t:.9g},{q:.12g}\n")
        (DATA / f"{patient}_rest.json").write_text(json.dumps(config(patient), indent=2) + "\n")
        (DATA / f"{patient}_flows.json").write_text(json.dumps(flows(patient), indent=2) + "\n")


if __name__ == "__main__":
    main()
