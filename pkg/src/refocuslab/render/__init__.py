from .breathing import BreathingProfile, default_breathing_profile, simulate_breathing, warp_breathe
from .defocus import DEPTH_LAYERS, render_defocus, render_stack
from .lens import LensConfig, coc_radius, coc_radius_map, focus_distances_inverse_linear, toy_lens
from .psf import disc_psf
from .scene import LAYOUTS, MIN_HF_ENERGY, TEXTURES, SceneSpec, gen_scene

__all__ = [
    "LensConfig", "coc_radius", "coc_radius_map", "focus_distances_inverse_linear", "toy_lens",
    "disc_psf",
    "SceneSpec", "gen_scene", "LAYOUTS", "TEXTURES", "MIN_HF_ENERGY",
    "render_defocus", "render_stack", "DEPTH_LAYERS",
    "BreathingProfile", "default_breathing_profile", "simulate_breathing", "warp_breathe",
]
