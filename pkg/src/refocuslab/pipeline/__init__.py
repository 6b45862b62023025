from .align import AlignmentError, align_stack, estimate_scale, estimate_stack_scales, scale_image
from .bundle import VIEWER_VERSION, export_viewer_bundle, load_viewer_bundle
from .composite import composite_aif, dof_edit
from .focus import FOCUS_WINDOW, IndexMap, SharpnessMap, depth_index_map, focus_measure
from .undistort import DistortionError, invert_radial, undistort

__all__ = [
    "undistort", "invert_radial", "DistortionError",
    "estimate_scale", "estimate_stack_scales", "align_stack", "scale_image", "AlignmentError",
    "focus_measure", "depth_index_map", "SharpnessMap", "IndexMap", "FOCUS_WINDOW",
    "composite_aif", "dof_edit",
    "export_viewer_bundle", "load_viewer_bundle", "VIEWER_VERSION",
]
