"""Benchmark parameters, calibration tables and default thresholds"""

# Robertson chemical kinetics rates
ROBERTSON_PARAMS = {
    "a": 0.04,
    "b": 1.0e4,
    "c": 3.0e7,
}
ROBERTSON_U0 = (1.0, 0.0, 0.0)
ROBERTSON_SPAN = (0.0, 1.0e6)
ROBERTSON_INITIAL_DT = 1.0e-6
ROBERTSON_LABELS = ("x", "y", "z")
# Magnification used when plotting y next to x and z
ROBERTSON_Y_SCALE = 1.0e4

# Reference values of the Robertson solution at t = 40
ROBERTSON_REFERENCE_T40 = (0.7158270687193, 9.185534764529e-6, 0.2841637457458)

# Lorenz 1984 Hadley circulation model
LORENZ84_PARAMS = {
    "a": 0.25,
    "b": 4.0,
    "F": 8.0,
    "G": 1.0,
}
LORENZ84_U0 = (0.96, -1.1, 0.5)
LORENZ84_SPAN = (0.0, 30.0)
LORENZ84_LABELS = ("X", "Y", "Z")

LINEAR_PARAMS = {
    "lam": -1.0,
    "u0": 1.0,
}
LINEAR_SPAN = (0.0, 1.0)
LINEAR_LABELS = ("u",)

# Linear mode-count estimators K = slope * N_e + intercept, keyed by accuracy
MODE_ESTIMATORS = {
    0.01: (1.5, 3.5),
    0.001: (1.7, 4.4),
}

# Stiff/chaotic classification defaults
CHAOS_THRESHOLD = 1.0e-8
STIFF_THRESHOLD = 10.0
SPREAD_FACTOR = 100.0

# Finite-difference step: max(FD_STEP_FLOOR, FD_STEP_RELATIVE * |x|)
FD_STEP_FLOOR = 1.0e-7
FD_STEP_RELATIVE = 1.0e-7

# Dense grid density used by the steepness metric (points per temporal mode)
STEEPNESS_POINTS_PER_MODE = 1000

# Samples per GWRM interval used when counting extrema
EXTREMA_SAMPLES_PER_INTERVAL = 100

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_PARTIAL = 2
EXIT_INTERNAL = 3
