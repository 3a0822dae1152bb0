"""Link-level simulation of full-duplex mmWave transceivers with hybrid beamforming."""

__version__ = "0.1.0"
