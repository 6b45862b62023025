from .config import ConfigError, RunConfig, apply_overrides, load_config, paper_preset, parse_config_text
from .data import DataError, dataset_hash, generate_dataset, load_dataset, load_scene_stack, read_index
from .main import main
from .serve import list_bundles, make_server, start_background
from .trainer import arch_for_mode, run_training, schedule_from_config, train_config

__all__ = [
    "RunConfig", "load_config", "parse_config_text", "apply_overrides", "paper_preset", "ConfigError",
    "generate_dataset", "load_dataset", "load_scene_stack", "read_index", "dataset_hash", "DataError",
    "run_training", "arch_for_mode", "schedule_from_config", "train_config",
    "make_server", "start_background", "list_bundles",
    "main",
]
