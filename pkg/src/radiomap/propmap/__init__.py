"""Propagation-map estimation: kriged Kalman filtering and radio tomography."""
