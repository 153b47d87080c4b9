"""Published reference operating points used by the report command.

Each row records externally reported values for a two-description system
with unit-variance Gaussian source and side information; the bound columns
are reproduced deterministically by :mod:`mdquant.rd_bound` and compared at
a +-0.05 dB tolerance.
"""

# Loss-rate sweep at rho = 0.8, noiseless channels.
# Columns: mu (both descriptions), R1, R2, reported minimum average
# distortion bound (dB), reported simulated distortion (dB).
BOUND_VS_LOSS = [
    {"mu": 0.3, "r1": 2.265, "r2": 2.269, "bound_db": -13.758, "sim_db": -13.289},
    {"mu": 0.2, "r1": 2.28, "r2": 2.259, "bound_db": -16.365, "sim_db": -15.605},
    {"mu": 0.1, "r1": 2.276, "r2": 2.271, "bound_db": -19.896, "sim_db": -18.496},
    {"mu": 0.05, "r1": 2.321, "r2": 2.319, "bound_db": -22.608, "sim_db": -20.619},
    {"mu": 0.02, "r1": 2.389, "r2": 2.498, "bound_db": -25.751, "sim_db": -22.497},
    {"mu": 0.01, "r1": 2.459, "r2": 2.53, "bound_db": -27.622, "sim_db": -24.206},
    {"mu": 0.005, "r1": 2.635, "r2": 2.546, "bound_db": -29.676, "sim_db": -25.149},
]

# Correlation sweep at mu = 0.05, noiseless channels.
# sim_blind_enc: SI ignored at the encoder only; sim_blind_both: SI ignored
# at encoder and decoder.
BOUND_VS_CORRELATION = [
    {"rho": 0.0, "r1": 2.80, "r2": 2.81, "bound_db": -20.509, "sim_db": -18.654,
     "sim_blind_enc_db": -18.654, "sim_blind_both_db": -18.653},
    {"rho": 0.2, "r1": 2.78, "r2": 2.78, "bound_db": -20.565, "sim_db": -18.696,
     "sim_blind_enc_db": -18.694, "sim_blind_both_db": -18.653},
    {"rho": 0.4, "r1": 2.71, "r2": 2.69, "bound_db": -20.784, "sim_db": -18.827,
     "sim_blind_enc_db": -18.823, "sim_blind_both_db": -18.653},
    {"rho": 0.6, "r1": 2.54, "r2": 2.53, "bound_db": -21.188, "sim_db": -19.160,
     "sim_blind_enc_db": -19.091, "sim_blind_both_db": -18.653},
    {"rho": 0.8, "r1": 2.32, "r2": 2.32, "bound_db": -22.608, "sim_db": -20.619,
     "sim_blind_enc_db": -19.714, "sim_blind_both_db": -18.653},
    {"rho": 0.9, "r1": 2.25, "r2": 2.22, "bound_db": -24.935, "sim_db": -22.882,
     "sim_blind_enc_db": -20.4204, "sim_blind_both_db": -18.653},
    {"rho": 0.95, "r1": 2.20, "r2": 2.22, "bound_db": -27.689, "sim_db": -25.576,
     "sim_blind_enc_db": -21.2014, "sim_blind_both_db": -18.653},
    {"rho": 0.99, "r1": 2.16, "r2": 2.16, "bound_db": -34.327, "sim_db": -30.894,
     "sim_blind_enc_db": -23.687, "sim_blind_both_db": -18.653},
]

# Bit-error-rate sweep at R1 = R2 = 3 raw bits, mu = 0.05, rho = 0.8.
# Columns: BER, mean side distortion, central distortion, average distortion.
BSC_SWEEP_REFERENCE = [
    {"p": 0.1, "d_side_db": -8.102, "d_central_db": -10.946, "d_av_db": -10.546},
    {"p": 0.01, "d_side_db": -11.631, "d_central_db": -19.244, "d_av_db": -17.407},
    {"p": 0.001, "d_side_db": -12.877, "d_central_db": -22.858, "d_av_db": -19.799},
    {"p": 0.0001, "d_side_db": -13.084, "d_central_db": -24.285, "d_av_db": -20.489},
    {"p": 1e-05, "d_side_db": -13.101, "d_central_db": -24.592, "d_av_db": -20.612},
    {"p": 0.0, "d_side_db": -13.109, "d_central_db": -24.601, "d_av_db": -20.619},
]

# Full-scale reference operating point (256-level quantizer, 8 indices per
# description): simulated average distortion at rho=0.8, mu=0.05, noiseless.
FULL_SCALE_TARGET_DB = -20.619

BOUND_TOLERANCE_DB = 0.05
