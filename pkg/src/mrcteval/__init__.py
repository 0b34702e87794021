"""Measurement and auditing harness for bidirectional MR-CT image translation.

Subpackages cover full-reference quality metrics (PSNR, SSIM, UQI, VIF),
CycleGAN objective and schedule audits, architecture-notation shape
inference, batch evaluation and reporting, latent-space projection, and a
blinded perceptual-study engine with an HTTP rating service.
"""

__version__ = "0.1.0"
