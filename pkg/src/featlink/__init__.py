"""Link-level simulator for digital MIMO transport of image feature pyramids.

Modules
-------
channel   Rayleigh block-fading N x N channel, SVD precoding and combining.
baseband  Stream mapping, tanh, midrise quantizer, bit packing, QPSK.
neuro     Forward passes of the fusion/split and channel-aware stacks.
metrics   Monte Carlo BER, feature distortion, sweeps and report formats.
pipeline  Pyramid -> link -> pyramid glue used by the ``transmit`` command.
"""

__version__ = "0.1.0"
