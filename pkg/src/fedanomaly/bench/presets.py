"""Per-dataset defaults: model sizes, batch sizes, epoch budget."""

from ..models import ModelKind

# latent sizes and model-specific settings per dataset
MODEL_PRESETS = {
    "arrhythmia": {
        ModelKind.DAE: {"latent_dim": 3},
        ModelKind.DSEBM: {"latent_dim": 2},
        ModelKind.DEEPSVDD: {"svdd_output_features": 64},
        ModelKind.NEUTRALAD: {"latent_dim": 32, "neutralad_trans_type": "residual"},
        ModelKind.MEMAE: {"latent_dim": 3, "memae_memory_dim": 50},
    },
    "thyroid": {
        ModelKind.DAE: {"latent_dim": 2},
        ModelKind.DSEBM: {"latent_dim": 2},
        ModelKind.DEEPSVDD: {"svdd_output_features": 1},
        ModelKind.NEUTRALAD: {"latent_dim": 24, "neutralad_trans_type": "residual"},
        ModelKind.MEMAE: {"latent_dim": 3, "memae_memory_dim": 50},
    },
    "kdd10": {
        ModelKind.DAE: {"latent_dim": 2},
        ModelKind.DSEBM: {"latent_dim": 512},
        ModelKind.DEEPSVDD: {"svdd_output_features": 29},
        ModelKind.NEUTRALAD: {"latent_dim": 32, "neutralad_trans_type": "multiplicative"},
        ModelKind.MEMAE: {"latent_dim": 3, "memae_memory_dim": 50},
    },
    "nslkdd": {
        ModelKind.DAE: {"latent_dim": 2},
        ModelKind.DSEBM: {"latent_dim": 512},
        ModelKind.DEEPSVDD: {"svdd_output_features": 31},
        ModelKind.NEUTRALAD: {"latent_dim": 32, "neutralad_trans_type": "multiplicative"},
        ModelKind.MEMAE: {"latent_dim": 3, "memae_memory_dim": 50},
    },
}

BATCH_SIZE = {"arrhythmia": 128, "thyroid": 128, "kdd10": 1024, "nslkdd": 1024}
DEFAULT_BATCH_SIZE = 128
DEFAULT_EPOCHS = 200
DEFAULT_SEEDS = (0, 1, 2)
LOCAL_EPOCHS = 10
LR = 1e-4
WEIGHT_DECAY = 1e-4

MODEL_ORDER = [k.value for k in ModelKind]
DATASET_ORDER = ["arrhythmia", "thyroid", "kdd10", "nslkdd"]


def model_defaults(dataset_id: str, kind: ModelKind) -> dict:
    return dict(MODEL_PRESETS.get(dataset_id, {}).get(kind, {}))
