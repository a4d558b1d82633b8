import numpy as np
import pytest
import torch

from config.configuracion import (
    ConfigModelo,
    DatasetSpec,
    EncoderConfig,
    FusionConfig,
    TrainConfig,
)
from utils.datos import generar_conjunto, synth_clip
from utils.rig_metricas import make_synthetic_rig


@pytest.fixture(scope="session", autouse=True)
def _algoritmos_deterministas():
    torch.use_deterministic_algorithms(True)
    yield
    torch.use_deterministic_algorithms(False)


# ------------------ Configuraciones ------------------
@pytest.fixture
def config_pequena() -> ConfigModelo:
    """Modelo diminuto: d_model 16, d_fused 16."""
    return ConfigModelo(
        codificador=EncoderConfig(d_model=16, n_blocks=1, n_heads=2, d_inner=32, n_emotions=3, canales_frontend=8),
        fusion=FusionConfig(d_emotion=4, d_content=8, d_style=2, d_level=2, n_heads=2),
        semilla=0,
    )


@pytest.fixture
def config_pequena_f64(config_pequena) -> ConfigModelo:
    return ConfigModelo(codificador=config_pequena.codificador, fusion=config_pequena.fusion,
                        semilla=0, precision="float64")


@pytest.fixture
def train_config_pequena() -> TrainConfig:
    return TrainConfig(learning_rate=1e-3, batch_size=2, epochs=1, pasos_por_epoca=3, seed=0)


# ------------------ Datos ------------------
@pytest.fixture
def spec_pequena() -> DatasetSpec:
    return DatasetSpec(contenidos=2, emociones=2, hablantes=1, niveles=1, clips_por_celda=2,
                       tomas_prueba=1, duracion_s=0.5)


@pytest.fixture
def conjunto_pequeno(spec_pequena):
    return generar_conjunto(spec_pequena, seed=0)


@pytest.fixture
def clip_un_segundo():
    return synth_clip(1, 2, 0, 0, 1.0, seed=3)


# ------------------ Rig ------------------
@pytest.fixture(scope="session")
def rig_pequeno():
    return make_synthetic_rig(200, seed=0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(autouse=True)
def _semilla_torch():
    torch.manual_seed(0)
