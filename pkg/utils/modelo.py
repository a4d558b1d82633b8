"""
Modelo completo: dos extractores de audio y el decodificador de fusión.
"""
from typing import Tuple

import torch
from torch import nn

from config.configuracion import ConfigModelo
from utils.capas import inicializar_parametros
from utils.codificadores import ExtractorAudio, audio_a_tensor
from utils.datos import AudioClip
from utils.decodificador import DecodificadorFusion
from utils.logger import get_logger

logger = get_logger(__name__)

_DTYPES = {"float32": torch.float32, "float64": torch.float64}


class ModeloAnimacion(nn.Module):
    def __init__(self, config: ConfigModelo):
        super().__init__()
        config.validar()
        self.config = config
        self.codificador_contenido = ExtractorAudio(config.codificador, con_clasificador=False)
        self.codificador_emocion = ExtractorAudio(config.codificador, con_clasificador=True)
        self.decodificador = DecodificadorFusion(config.fusion, config.codificador.d_model)
        inicializar_parametros(self, config.semilla)
        self.to(_DTYPES[config.precision])

    def rasgos(self, clip: AudioClip, target_T: int) -> Tuple[torch.Tensor, torch.Tensor]:
        """(contenido, emoción) del mismo clip, ambos T×d_model."""
        audio = audio_a_tensor(clip, self)
        return self.codificador_contenido(audio, target_T), self.codificador_emocion(audio, target_T)

    def predecir(self, contenido: torch.Tensor, emocion: torch.Tensor, style_id: int, level_id: int) -> torch.Tensor:
        fusionado = self.decodificador.fusionar(emocion, contenido, style_id, level_id)
        return self.decodificador(fusionado, emocion)


def crear_modelo(config: ConfigModelo) -> ModeloAnimacion:
    modelo = ModeloAnimacion(config)
    n_total = sum(p.numel() for p in modelo.parameters())
    n_entrenables = sum(p.numel() for p in modelo.parameters() if p.requires_grad)
    logger.info("Modelo creado: %d parámetros (%d entrenables)", n_total, n_entrenables)
    return modelo
