"""Configuration constants and re-exports for scaresnet."""

from scaresnet.config.loader import load_config, _get_config_dir


# --- Initialize Configuration ---
_CONFIG = load_config()

# General
_gen = _CONFIG["general"]
LOG_LEVEL = _gen.get("log_level", "INFO")
LOG_FILE = _gen.get("log_file", "~/.config/scaresnet/scaresnet.log")
DEFAULT_SEED = _gen.get("seed", 0)
DEFAULT_DTYPE = _gen.get("dtype", "float32")

# Model
_model = _CONFIG["model"]
DEFAULT_PRESET = _model.get("preset", "mini")
DEFAULT_INTERPRETATION = _model.get("interpretation", "literal")
DEFAULT_LEVELS = tuple(_model.get("levels", [9, 6, 2, 11]))
CCA_HEADS = _model.get("heads", 4)
CCA_RECURRENCE = _model.get("recurrence", 2)
CCA_PE_BASE = float(_model.get("pe_base", 10000.0))
SE_RATIO = _model.get("se_ratio", 16)
DSE_KERNEL = _model.get("dse_kernel", 3)
GROUP_NORM_GROUPS = _model.get("group_norm_groups", 8)

# Training demo
_training = _CONFIG["training"]
TRAIN_LR = float(_training.get("lr", 0.001))
TRAIN_MOMENTUM = float(_training.get("momentum", 0.9))
TRAIN_WEIGHT_DECAY = float(_training.get("weight_decay", 0.0001))
TRAIN_BATCH = _training.get("batch", 2)
TRAIN_STEPS = _training.get("steps", 200)

# Synthetic data
_synthetic = _CONFIG["synthetic"]
SYNTHETIC_SIZE_MIN = _synthetic.get("size_min", 96)
SYNTHETIC_SIZE_MAX = _synthetic.get("size_max", 128)
SYNTHETIC_WORKERS = _synthetic.get("workers", 1)

# Gradient checks
_gradcheck = _CONFIG["gradcheck"]
GRADCHECK_EPS = float(_gradcheck.get("eps", 1e-5))
GRADCHECK_THRESHOLD = float(_gradcheck.get("threshold", 1e-4))
GRADCHECK_BACKBONE_THRESHOLD = float(_gradcheck.get("backbone_threshold", 1e-3))
GRADCHECK_FLOOR = float(_gradcheck.get("floor", 1e-3))
GRADCHECK_SAMPLES = _gradcheck.get("samples_per_tensor", 12)

CONFIG_DIR = _get_config_dir()
