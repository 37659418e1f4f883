"""Link-level simulator for multi-cell high-mobility OFDM.

Models a railway deployment where evenly spaced base stations cover
overlapping track segments.  A train-mounted receiver uses its position
and speed to select per-cell Doppler images, separates the overlapping
cell signals, inverts the Doppler-induced inter-carrier interference,
and recovers sparse delay-domain channels from a small set of pilots
via compressed sensing.  The harness subpackage runs seeded Monte Carlo
sweeps (MSE / BER versus SNR, position, and velocity) and emits CSV
plus rendered figures.
"""

__version__ = "0.1.0"
