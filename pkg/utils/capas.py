"""
Capas compartidas por los codificadores y el decodificador, e inicialización
determinista de parámetros.
"""
import math
from typing import Optional, Tuple

import torch
from torch import nn

from utils.errores import ErrorConfiguracion


class AtencionMultiCabeza(nn.Module):
    """
    Atención multi-cabeza sobre secuencias sin lote (T×d).

    Devuelve también los pesos de atención (cabezas×T×S) para poder revisarlos.
    """

    def __init__(self, d: int, n_heads: int, d_memoria: Optional[int] = None):
        super().__init__()
        if d % n_heads != 0:
            raise ErrorConfiguracion(f"d={d} debe ser divisible entre n_heads={n_heads}")
        d_memoria = d if d_memoria is None else d_memoria
        self.n_heads = n_heads
        self.d_cabeza = d // n_heads
        self.q = nn.Linear(d, d)
        self.k = nn.Linear(d_memoria, d)
        self.v = nn.Linear(d_memoria, d)
        self.o = nn.Linear(d, d)

    def _separar(self, x: torch.Tensor) -> torch.Tensor:
        return x.reshape(x.shape[0], self.n_heads, self.d_cabeza).transpose(0, 1)

    def forward(self, x: torch.Tensor, memoria: Optional[torch.Tensor] = None,
                sesgo: Optional[torch.Tensor] = None) -> Tuple[torch.Tensor, torch.Tensor]:
        memoria = x if memoria is None else memoria
        q = self._separar(self.q(x))
        k = self._separar(self.k(memoria))
        v = self._separar(self.v(memoria))
        logits = q @ k.transpose(-1, -2) / math.sqrt(self.d_cabeza)
        if sesgo is not None:
            logits = logits + sesgo
        pesos = torch.softmax(logits, dim=-1)
        contexto = (pesos @ v).transpose(0, 1).reshape(x.shape[0], -1)
        return self.o(contexto), pesos


class BloqueTransformer(nn.Module):
    """Bloque pre-norm: x + Atención(LN(x)), luego x + FFN(LN(x))."""

    def __init__(self, d: int, n_heads: int, d_ffn: int):
        super().__init__()
        self.ln_atencion = nn.LayerNorm(d)
        self.atencion = AtencionMultiCabeza(d, n_heads)
        self.ln_ffn = nn.LayerNorm(d)
        self.ffn = nn.Sequential(nn.Linear(d, d_ffn), nn.GELU(), nn.Linear(d_ffn, d))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = x + self.atencion(self.ln_atencion(x))[0]
        return x + self.ffn(self.ln_ffn(x))


# ------------------ Inicialización ------------------
def _uniforme_(parametro: torch.Tensor, cota: float, generador: torch.Generator):
    muestra = torch.rand(parametro.shape, generator=generador, dtype=torch.float64)
    with torch.no_grad():
        parametro.copy_((2.0 * muestra - 1.0) * cota)


def inicializar_parametros(modulo: nn.Module, semilla: int) -> nn.Module:
    """
    Inicialización reproducible.

    Mapas afines: uniforme en ±1/sqrt(fan_in); convoluciones del front-end:
    uniforme en ±sqrt(6/fan_in); tablas de embedding: ±1/sqrt(filas);
    todos los sesgos en cero; normalizaciones en (1, 0).
    """
    generador = torch.Generator().manual_seed(int(semilla))
    for _, sub in modulo.named_modules():
        if isinstance(sub, nn.Linear):
            _uniforme_(sub.weight, 1.0 / math.sqrt(sub.in_features), generador)
            if sub.bias is not None:
                nn.init.zeros_(sub.bias)
        elif isinstance(sub, nn.Conv1d):
            fan_in = sub.in_channels * sub.kernel_size[0]
            _uniforme_(sub.weight, math.sqrt(6.0 / fan_in), generador)
            if sub.bias is not None:
                nn.init.zeros_(sub.bias)
        elif isinstance(sub, nn.Embedding):
            _uniforme_(sub.weight, 1.0 / math.sqrt(sub.num_embeddings), generador)
        elif isinstance(sub, (nn.LayerNorm, nn.GroupNorm)):
            nn.init.ones_(sub.weight)
            nn.init.zeros_(sub.bias)
    return modulo
