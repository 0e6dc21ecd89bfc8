"""Style-conditioned radiance-field generator with 2D upsampling.

A low-resolution feature map is produced by volume rendering a
style-modulated field, then upsampled in image space with
consistency-preserving operators. Training is adversarial with a
low-resolution render-path regularizer.
"""

__version__ = "0.1.0"
