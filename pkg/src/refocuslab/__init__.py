"""refocuslab: a desk-scale focal-stack refocusing laboratory.

Synthetic thin-lens focal-stack rendering, stack processing (undistortion,
breathing alignment, all-in-focus compositing, depth-from-focus), a small
deterministic NN kernel with a toy denoiser, diffusion training/sampling
with position-dependent conditioning, evaluation metrics, and a CLI that
ties it all together.
"""

__version__ = "0.1.0"
