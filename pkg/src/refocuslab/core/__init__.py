from .image import DepthMap, FocalStack, FocusSetting, Image, InvariantError, StackManifest
from .io import (
    CorruptHeaderError,
    ImageIOError,
    SchemaError,
    UnsupportedFormatError,
    load_image,
    read_manifest,
    read_tensor,
    save_image,
    tensor_from_bytes,
    tensor_to_bytes,
    write_manifest,
    write_tensor,
)
from .rng import Rng

__all__ = [
    "Image", "DepthMap", "FocusSetting", "FocalStack", "StackManifest", "InvariantError",
    "Rng",
    "load_image", "save_image", "read_manifest", "write_manifest",
    "read_tensor", "write_tensor", "tensor_to_bytes", "tensor_from_bytes",
    "ImageIOError", "CorruptHeaderError", "UnsupportedFormatError", "SchemaError",
]
