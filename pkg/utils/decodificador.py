"""
Decodificador de fusión: concatena rasgos de emoción, contenido, estilo y
nivel; suma la codificación posicional periódica; aplica bloques con
auto-atención causal sesgada (ALiBi), atención guiada por emoción y FFN;
una cabeza lineal produce los 52 coeficientes por cuadro.
"""
from typing import Optional, Union

import numpy as np
import torch
from torch import nn

from config.configuracion import FusionConfig
from config.opciones import N_BLENDSHAPES
from utils.capas import AtencionMultiCabeza
from utils.datos import BlendshapeSequence, FeatureSequence
from utils.errores import ErrorAlineacion, ErrorConfiguracion, ErrorRango


# ======================
# CODIFICACIÓN POSICIONAL Y SESGOS
# ======================
def periodic_positional_encoding(T: int, d: int, period: int, dtype: torch.dtype = torch.float32) -> torch.Tensor:
    """
    Seno/coseno de (t mod period) / 10000^(2i/d): pares en seno, impares en coseno.
    Filas t y t+period son idénticas.
    """
    if d % 2 != 0:
        raise ErrorConfiguracion(f"La dimensión de la codificación posicional debe ser par, se recibió {d}")
    if period < 1:
        raise ErrorConfiguracion(f"period debe ser >= 1, se recibió {period}")
    t = (torch.arange(T, dtype=torch.float64) % period).unsqueeze(1)
    divisor = torch.pow(10000.0, torch.arange(0, d, 2, dtype=torch.float64) / d)
    pe = torch.zeros(T, d, dtype=torch.float64)
    pe[:, 0::2] = torch.sin(t / divisor)
    pe[:, 1::2] = torch.cos(t / divisor)
    return pe.to(dtype)


def pendientes_alibi(n_heads: int) -> torch.Tensor:
    """m_h = 2^(-8h/n) para h = 1..n."""
    h = torch.arange(1, n_heads + 1, dtype=torch.float64)
    return torch.pow(2.0, -8.0 * h / n_heads)


def sesgo_causal(T: int, n_heads: int, dtype: torch.dtype = torch.float32,
                 device: Optional[torch.device] = None) -> torch.Tensor:
    """
    Sesgo (cabezas×T×T): m_h·(j − i) para j <= i y −inf para j > i.
    La diagonal siempre es finita, así ninguna fila queda completamente enmascarada.
    """
    posiciones = torch.arange(T, dtype=torch.float64)
    distancia = posiciones.unsqueeze(0) - posiciones.unsqueeze(1)
    sesgo = pendientes_alibi(n_heads)[:, None, None] * distancia
    futuro = distancia > 0
    sesgo = sesgo.masked_fill(futuro, float("-inf"))
    return sesgo.to(dtype=dtype, device=device)


def mascara_causal(T: int, dtype: torch.dtype = torch.float32,
                   device: Optional[torch.device] = None) -> torch.Tensor:
    """Máscara T×T: 0 en y bajo la diagonal, −inf sobre ella; se difunde sobre las cabezas."""
    futuro = torch.ones(T, T, dtype=torch.bool).triu(diagonal=1)
    mascara = torch.zeros(T, T, dtype=torch.float64).masked_fill(futuro, float("-inf"))
    return mascara.to(dtype=dtype, device=device)


# ======================
# BLOQUES
# ======================
class BloqueDecodificador(nn.Module):
    def __init__(self, d_fused: int, n_heads: int, atencion_emocional: bool = True):
        super().__init__()
        self.ln_auto = nn.LayerNorm(d_fused)
        self.auto_atencion = AtencionMultiCabeza(d_fused, n_heads)
        self.ln_emocional = nn.LayerNorm(d_fused) if atencion_emocional else None
        self.atencion_emocional = AtencionMultiCabeza(d_fused, n_heads) if atencion_emocional else None
        self.ln_ffn = nn.LayerNorm(d_fused)
        self.ffn = nn.Sequential(nn.Linear(d_fused, 2 * d_fused), nn.GELU(), nn.Linear(2 * d_fused, d_fused))

    def subcapa_emocional(self, x: torch.Tensor, guia: torch.Tensor, mascara: torch.Tensor) -> torch.Tensor:
        """x + Atención(LN(x), guía) causal: el cuadro t solo mira la guía en cuadros <= t."""
        if self.atencion_emocional is None:
            return x
        return x + self.atencion_emocional(self.ln_emocional(x), memoria=guia, sesgo=mascara)[0]

    def forward(self, x: torch.Tensor, guia: torch.Tensor, sesgo: torch.Tensor,
                mascara: torch.Tensor) -> torch.Tensor:
        x = x + self.auto_atencion(self.ln_auto(x), sesgo=sesgo)[0]
        x = self.subcapa_emocional(x, guia, mascara)
        return x + self.ffn(self.ln_ffn(x))


class DecodificadorFusion(nn.Module):
    def __init__(self, config: FusionConfig, d_model: int):
        super().__init__()
        config.validar()
        self.config = config
        self.proy_emocion = nn.Linear(d_model, config.d_emotion)
        self.proy_contenido = nn.Linear(d_model, config.d_content)
        self.estilo = nn.Embedding(config.n_styles, config.d_style)
        self.nivel = nn.Embedding(config.n_levels, config.d_level)
        self.proy_guia = nn.Linear(d_model, config.d_fused)
        self.bloques = nn.ModuleList(
            BloqueDecodificador(config.d_fused, config.n_heads, config.atencion_emocional)
            for _ in range(config.n_decoder_blocks)
        )
        self.cabeza = nn.Linear(config.d_fused, N_BLENDSHAPES)

    def fusionar(self, emo: torch.Tensor, contenido: torch.Tensor, style_id: int, level_id: int) -> torch.Tensor:
        """Concatenación por cuadro en el orden [emoción | contenido | estilo | nivel]."""
        if emo.shape[0] != contenido.shape[0]:
            raise ErrorAlineacion(f"Emoción tiene {emo.shape[0]} cuadros y contenido {contenido.shape[0]}")
        if not 0 <= style_id < self.config.n_styles:
            raise ErrorRango(f"style_id={style_id} fuera de rango [0, {self.config.n_styles})")
        if not 0 <= level_id < self.config.n_levels:
            raise ErrorRango(f"level_id={level_id} fuera de rango [0, {self.config.n_levels})")
        T = emo.shape[0]
        dispositivo = self.estilo.weight.device
        estilo = self.estilo(torch.tensor(style_id, device=dispositivo)).expand(T, -1)
        nivel = self.nivel(torch.tensor(level_id, device=dispositivo)).expand(T, -1)
        return torch.cat([self.proy_emocion(emo), self.proy_contenido(contenido), estilo, nivel], dim=-1)

    def forward(self, fusionado: torch.Tensor, emo_raw: torch.Tensor) -> torch.Tensor:
        T = fusionado.shape[0]
        if emo_raw.shape[0] != T:
            raise ErrorAlineacion(f"emo_raw tiene {emo_raw.shape[0]} cuadros y la fusión {T}")
        if fusionado.shape[1] != self.config.d_fused:
            raise ErrorConfiguracion(f"Se esperaban {self.config.d_fused} canales fusionados, llegaron {fusionado.shape[1]}")
        h = fusionado + periodic_positional_encoding(T, self.config.d_fused, self.config.ppe_period,
                                                     dtype=fusionado.dtype).to(fusionado.device)
        guia = self.proy_guia(emo_raw)
        sesgo = sesgo_causal(T, self.config.n_heads, dtype=fusionado.dtype, device=fusionado.device)
        mascara = mascara_causal(T, dtype=fusionado.dtype, device=fusionado.device)
        for bloque in self.bloques:
            h = bloque(h, guia, sesgo, mascara)
        return self.cabeza(h)


# ======================
# OPERACIONES
# ======================
def _valores(x: Union[FeatureSequence, torch.Tensor]) -> torch.Tensor:
    return x.values if isinstance(x, FeatureSequence) else x


def fuse_features(params: DecodificadorFusion, emo: Union[FeatureSequence, torch.Tensor],
                  content: Union[FeatureSequence, torch.Tensor], style_id: int, level_id: int) -> FeatureSequence:
    fps = emo.fps if isinstance(emo, FeatureSequence) else None
    valores = params.fusionar(_valores(emo), _valores(content), style_id, level_id)
    return FeatureSequence(values=valores) if fps is None else FeatureSequence(values=valores, fps=fps)


def biased_self_attention(params: AtencionMultiCabeza, x: torch.Tensor, n_heads: int) -> torch.Tensor:
    """Auto-atención con sesgo lineal causal; la fila t solo mira cuadros <= t."""
    if params.n_heads != n_heads:
        raise ErrorConfiguracion(f"El módulo tiene {params.n_heads} cabezas, se pidieron {n_heads}")
    sesgo = sesgo_causal(x.shape[0], n_heads, dtype=x.dtype, device=x.device)
    return params(x, sesgo=sesgo)[0]


def emotion_guided_attention(params: DecodificadorFusion, x: torch.Tensor, emo_raw: Union[FeatureSequence, torch.Tensor],
                             bloque: int = 0) -> torch.Tensor:
    """
    Subcapa residual: consultas desde x, llaves y valores desde los rasgos de
    emoción proyectados. Causal como la auto-atención.
    """
    emo_raw = _valores(emo_raw)
    if emo_raw.shape[0] != x.shape[0]:
        raise ErrorAlineacion(f"emo_raw tiene {emo_raw.shape[0]} cuadros y x {x.shape[0]}")
    mascara = mascara_causal(x.shape[0], dtype=x.dtype, device=x.device)
    return params.bloques[bloque].subcapa_emocional(x, params.proy_guia(emo_raw), mascara)


def decode_blendshapes(params: DecodificadorFusion, fused: Union[FeatureSequence, torch.Tensor],
                       emo_raw: Union[FeatureSequence, torch.Tensor]) -> BlendshapeSequence:
    """Coeficientes sin recortar; el recorte a [0, 1] es decisión del exportador."""
    with torch.no_grad():
        salida = params(_valores(fused), _valores(emo_raw))
    return BlendshapeSequence(coeffs=salida.detach().cpu().numpy().astype(np.float64))
