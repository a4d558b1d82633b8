"""
Extractores de rasgos de contenido y de emoción.

Estructura de cada extractor: front-end convolucional con stride total 320
(16 kHz -> 50 Hz), congelado tras la inicialización; proyección a d_model;
interpolación lineal a la longitud objetivo; bloques transformer pre-norm y
LayerNorm final. El extractor de emoción además tiene la cabeza de
clasificación (promedio temporal -> afín -> softmax).
"""
import hashlib
from typing import List, Tuple, Union

import torch
from torch import nn
from torch.nn import functional as F

from config.configuracion import EncoderConfig
from config.opciones import CAMPO_RECEPTIVO_FRONTEND, CAPAS_FRONTEND
from utils.capas import BloqueTransformer
from utils.datos import AudioClip, FeatureSequence
from utils.errores import ErrorConfiguracion, ErrorLongitud


class FrontEndConvolucional(nn.Module):
    def __init__(self, canales: int):
        super().__init__()
        capas = []
        entrada = 1
        for kernel, stride in CAPAS_FRONTEND:
            capas += [nn.Conv1d(entrada, canales, kernel, stride=stride), nn.GELU()]
            entrada = canales
        self.capas = nn.Sequential(*capas)

    def forward(self, audio: torch.Tensor) -> torch.Tensor:
        """(N,) muestras -> (L, canales) cuadros a ~50 Hz."""
        return self.capas(audio.reshape(1, 1, -1))[0].transpose(0, 1)


# ======================
# INTERPOLACIÓN TEMPORAL
# ======================
def _interpolar(valores: torch.Tensor, target_T: int) -> torch.Tensor:
    T = valores.shape[0]
    if T < 1 or target_T < 1:
        raise ErrorLongitud(f"interp_time necesita T >= 1 y target_T >= 1 (T={T}, target_T={target_T})")
    if target_T == T:
        return valores
    if target_T == 1 or T == 1:
        return valores[:1].expand(target_T, -1) if T == 1 else valores[:1]
    # (T, D) -> (1, D, T) para F.interpolate; align_corners mapea extremos a extremos
    salida = F.interpolate(valores.t().unsqueeze(0), size=target_T, mode="linear", align_corners=True)
    return salida[0].t()


def interp_time(seq: Union[FeatureSequence, torch.Tensor], target_T: int) -> Union[FeatureSequence, torch.Tensor]:
    """Interpolación lineal por canal sobre el eje temporal normalizado [0, 1]."""
    if isinstance(seq, FeatureSequence):
        fps = seq.fps * (target_T - 1) / (seq.T - 1) if seq.T > 1 and target_T > 1 else seq.fps
        return FeatureSequence(values=_interpolar(seq.values, target_T), fps=fps)
    return _interpolar(seq, target_T)


# ======================
# EXTRACTOR
# ======================
class ExtractorAudio(nn.Module):
    def __init__(self, config: EncoderConfig, con_clasificador: bool = False):
        super().__init__()
        config.validar()
        self.config = config
        self.frontend = FrontEndConvolucional(config.canales_frontend)
        self.proyeccion = nn.Linear(config.canales_frontend, config.d_model)
        self.bloques = nn.ModuleList(
            BloqueTransformer(config.d_model, config.n_heads, config.d_ffn) for _ in range(config.n_blocks)
        )
        self.ln_final = nn.LayerNorm(config.d_model)
        self.clasificador = nn.Linear(config.d_model, config.n_emotions) if con_clasificador else None
        if config.conv_frontend_frozen:
            self.frontend.requires_grad_(False)

    def forward(self, audio: torch.Tensor, target_T: int) -> torch.Tensor:
        if audio.numel() < CAMPO_RECEPTIVO_FRONTEND:
            raise ErrorLongitud(
                f"El audio tiene {audio.numel()} muestras; el front-end necesita al menos {CAMPO_RECEPTIVO_FRONTEND}"
            )
        if target_T < 1:
            raise ErrorLongitud(f"target_T debe ser >= 1, se recibió {target_T}")
        h = self.proyeccion(self.frontend(audio))
        h = _interpolar(h, target_T)
        for bloque in self.bloques:
            h = bloque(h)
        return self.ln_final(h)

    def probabilidades(self, rasgos: torch.Tensor) -> torch.Tensor:
        if self.clasificador is None:
            raise ErrorConfiguracion("Este extractor no tiene cabeza de clasificación")
        if rasgos.shape[0] < 1:
            raise ErrorLongitud("classify_emotion necesita al menos un cuadro")
        return torch.softmax(self.clasificador(rasgos.mean(dim=0)), dim=-1)


def audio_a_tensor(clip: AudioClip, modulo: nn.Module) -> torch.Tensor:
    referencia = next(modulo.parameters())
    return torch.as_tensor(clip.samples, dtype=referencia.dtype, device=referencia.device)


def _extraer(params: ExtractorAudio, clip: AudioClip, target_T: int) -> FeatureSequence:
    if clip.samples.size == 0:
        raise ErrorLongitud("Audio vacío")
    valores = params(audio_a_tensor(clip, params), target_T)
    return FeatureSequence(values=valores, fps=target_T / clip.duracion_s)


def extract_content(params: ExtractorAudio, clip: AudioClip, target_T: int) -> FeatureSequence:
    """Rasgos de contenido (T×d_model) alineados a target_T cuadros."""
    return _extraer(params, clip, target_T)


def extract_emotion(params: ExtractorAudio, clip: AudioClip, target_T: int) -> FeatureSequence:
    """Rasgos de emoción (T×d_model) alineados a target_T cuadros."""
    return _extraer(params, clip, target_T)


def classify_emotion(params: ExtractorAudio, emo_features: Union[FeatureSequence, torch.Tensor]) -> torch.Tensor:
    valores = emo_features.values if isinstance(emo_features, FeatureSequence) else emo_features
    return params.probabilidades(valores)


# ------------------ Parámetros congelados ------------------
def parametros_entrenables(modulo: nn.Module) -> List[Tuple[str, nn.Parameter]]:
    return [(nombre, p) for nombre, p in modulo.named_parameters() if p.requires_grad]


def checksum_frontend(modulo: nn.Module) -> str:
    """SHA-256 de los pesos de todos los front-ends convolucionales del módulo."""
    h = hashlib.sha256()
    for nombre, sub in modulo.named_modules():
        if isinstance(sub, FrontEndConvolucional):
            for nombre_p, p in sub.named_parameters():
                h.update(f"{nombre}.{nombre_p}".encode("utf-8"))
                h.update(p.detach().cpu().contiguous().numpy().tobytes())
    return h.hexdigest()
