"""Published reference values (percentages) used by the reproduction checks."""

OBJECTIVES = ("all2all", "th-10%", "th-50%", "acc-2%", "acc-5%")

# (noise, rule) -> objective -> value, infinite-population predictions
THEORY = {
    ("identity", "borda"): dict(zip(OBJECTIVES, (92.01, 96.94, 94.13, 93.57, 95.47))),
    ("real6", "opt"): dict(zip(OBJECTIVES, (80.01, 87.61, 83.62, 81.27, 82.97))),
    ("real6", "borda"): dict(zip(OBJECTIVES, (79.57, 87.18, 83.43, 80.73, 82.42))),
    ("mallows6", "opt"): dict(zip(OBJECTIVES, (85.15, 92.05, 88.39, 86.52, 88.42))),
    ("mallows6", "borda"): dict(zip(OBJECTIVES, (84.38, 90.52, 87.80, 85.72, 87.61))),
}

# simulated exams with 10^4 students, 1000 runs
SIMULATED = {
    ("perfect", "borda"): dict(zip(OBJECTIVES, (92.02, 96.95, 94.14, 93.57, 95.47))),
    ("realistic", "opt"): dict(zip(OBJECTIVES, (80.09, 87.60, 83.62, 81.27, 82.97))),
    ("realistic", "borda"): dict(zip(OBJECTIVES, (79.57, 87.17, 83.43, 80.74, 82.42))),
    ("mallows", "opt"): dict(zip(OBJECTIVES, (85.16, 92.07, 88.40, 86.52, 88.42))),
    ("mallows", "borda"): dict(zip(OBJECTIVES, (84.39, 90.54, 87.81, 85.73, 87.62))),
}

# rules optimized on sampled approximations of the Mallows matrix, predicted under Mallows
APPROXIMATION_THEORY = {
    "p100": dict(zip(OBJECTIVES, (84.95, 91.82, 88.21, 86.31, 88.19))),
    "p1000": dict(zip(OBJECTIVES, (85.14, 92.05, 88.39, 86.51, 88.41))),
    "mallows6": dict(zip(OBJECTIVES, (85.15, 92.05, 88.39, 86.52, 88.42))),
}
APPROXIMATION_SIMULATED = {
    "p100": dict(zip(OBJECTIVES, (84.95, 91.85, 88.21, 86.31, 88.20))),
    "p1000": dict(zip(OBJECTIVES, (85.15, 92.04, 88.38, 86.51, 88.41))),
    "mallows6": dict(zip(OBJECTIVES, (85.16, 92.07, 88.40, 86.52, 88.42))),
}

# component-size histograms: noise -> objective -> bin -> count
COMPONENT_BINS = ("1", "3-7", "8-11", ">=12", "max")
COMPONENTS = {
    "real6": {
        "all2all": dict(zip(COMPONENT_BINS, (448, 13, 1, 0, 10))),
        "th-50%": dict(zip(COMPONENT_BINS, (460, 2, 0, 0, 3))),
        "acc-2%": dict(zip(COMPONENT_BINS, (449, 12, 1, 0, 10))),
        "acc-5%": dict(zip(COMPONENT_BINS, (451, 10, 1, 0, 10))),
    },
    "mallows6": {
        "all2all": dict(zip(COMPONENT_BINS, (453, 6, 2, 1, 20))),
        "th-50%": dict(zip(COMPONENT_BINS, (459, 3, 0, 0, 4))),
        "acc-2%": dict(zip(COMPONENT_BINS, (449, 10, 2, 1, 20))),
        "acc-5%": dict(zip(COMPONENT_BINS, (449, 12, 0, 1, 20))),
    },
}

# first 14 types of the all2all-optimal orderings
_M = [
    (1, 1, 1, 1, 1, 1), (1, 1, 1, 1, 1, 6), (1, 1, 1, 1, 1, 5), (1, 1, 1, 1, 1, 2), (1, 1, 1, 1, 1, 4),
    (1, 1, 1, 1, 1, 3), (1, 1, 1, 1, 2, 6), (1, 1, 1, 1, 2, 2), (1, 1, 1, 1, 6, 6), (1, 1, 1, 1, 2, 5),
    (1, 1, 1, 1, 5, 6), (1, 1, 1, 1, 2, 4), (1, 1, 1, 1, 2, 3), (1, 1, 1, 1, 5, 5),
]
_P100 = [
    (1, 1, 1, 1, 1, 1), (1, 1, 1, 1, 1, 5), (1, 1, 1, 1, 1, 2), (1, 1, 1, 1, 1, 4), (1, 1, 1, 1, 1, 3),
    (1, 1, 1, 1, 1, 6), (1, 1, 1, 1, 2, 2), (1, 1, 1, 1, 2, 5), (1, 1, 1, 1, 5, 5), (1, 1, 1, 1, 2, 4),
    (1, 1, 1, 1, 2, 3), (1, 1, 1, 1, 3, 5), (1, 1, 1, 1, 4, 5), (1, 1, 1, 1, 3, 3),
]
_P1000 = [
    (1, 1, 1, 1, 1, 1), (1, 1, 1, 1, 1, 6), (1, 1, 1, 1, 1, 5), (1, 1, 1, 1, 1, 2), (1, 1, 1, 1, 1, 4),
    (1, 1, 1, 1, 1, 3), (1, 1, 1, 1, 2, 6), (1, 1, 1, 1, 2, 2), (1, 1, 1, 1, 2, 5), (1, 1, 1, 1, 6, 6),
    (1, 1, 1, 1, 5, 6), (1, 1, 1, 1, 5, 5), (1, 1, 1, 1, 2, 4), (1, 1, 1, 1, 2, 3),
]
RULE_PREFIXES = {"mallows6": _M, "p100": _P100, "p1000": _P1000}
