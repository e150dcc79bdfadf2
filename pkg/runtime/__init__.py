"""Runtime package: samples, training loop, checkpoints and experiment sweeps"""
