"""mmWave NLoS localization lab.

Street-grid scenes, an image-method ray tracer, beamformed OFDM channel
responses, CSI features, numpy positioning networks and an EKF benchmark.
"""

__version__ = "0.1.0"
