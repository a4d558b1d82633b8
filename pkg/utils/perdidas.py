"""
Términos de pérdida y su suma ponderada.

Los términos cuadráticos se normalizan por el número de elementos (media de
cuadrados), así los pesos λ no dependen de la longitud de la secuencia.
"""
import json
import math
from dataclasses import asdict, dataclass
from typing import Dict, Sequence, Union

import numpy as np
import torch

from config.configuracion import LossWeights
from config.opciones import PISO_PROBABILIDAD
from utils.datos import BlendshapeSequence
from utils.errores import ErrorAlineacion, ErrorLongitud, ErrorNumerico, ErrorRango

Secuencia = Union[torch.Tensor, np.ndarray, BlendshapeSequence]

TERMINOS = ("cross", "self_rec", "velocity", "classification")


def _tensor(x: Secuencia) -> torch.Tensor:
    if isinstance(x, BlendshapeSequence):
        return torch.as_tensor(x.coeffs)
    if isinstance(x, np.ndarray):
        return torch.as_tensor(x)
    return x


def _media_cuadrados(pred: Secuencia, gt: Secuencia) -> torch.Tensor:
    pred, gt = _tensor(pred), _tensor(gt)
    if pred.shape != gt.shape:
        raise ErrorAlineacion(f"Formas distintas: predicción {tuple(pred.shape)} vs verdad {tuple(gt.shape)}")
    return ((pred - gt.to(pred.dtype)) ** 2).mean()


# ======================
# TÉRMINOS
# ======================
def cross_reconstruction_loss(pred_c1e1: Secuencia, pred_c2e2: Secuencia,
                              gt_c1e1: Secuencia, gt_c2e2: Secuencia) -> torch.Tensor:
    return _media_cuadrados(pred_c1e1, gt_c1e1) + _media_cuadrados(pred_c2e2, gt_c2e2)


def self_reconstruction_loss(pred_c1e2: Secuencia, gt_c1e2: Secuencia) -> torch.Tensor:
    return _media_cuadrados(pred_c1e2, gt_c1e2)


def velocity_loss(pred: Secuencia, gt: Secuencia) -> torch.Tensor:
    """Media de cuadrados de la diferencia entre velocidades cuadro a cuadro."""
    pred, gt = _tensor(pred), _tensor(gt)
    if pred.shape != gt.shape:
        raise ErrorAlineacion(f"Formas distintas: predicción {tuple(pred.shape)} vs verdad {tuple(gt.shape)}")
    if pred.shape[0] < 2:
        raise ErrorLongitud(f"velocity_loss necesita T >= 2, se recibió T={pred.shape[0]}")
    return _media_cuadrados(pred[1:] - pred[:-1], gt[1:] - gt[:-1])


def classification_loss(probs: Union[torch.Tensor, np.ndarray], labels: Union[torch.Tensor, Sequence[int]]) -> torch.Tensor:
    """Log-verosimilitud negativa media; probabilidades con piso 1e-12 antes del logaritmo."""
    probs = _tensor(probs)
    if probs.dim() == 1:
        probs = probs.unsqueeze(0)
    labels = torch.as_tensor(labels, dtype=torch.long, device=probs.device).reshape(-1)
    if labels.shape[0] != probs.shape[0]:
        raise ErrorAlineacion(f"{probs.shape[0]} distribuciones y {labels.shape[0]} etiquetas")
    m = probs.shape[1]
    if bool(((labels < 0) | (labels >= m)).any()):
        raise ErrorRango(f"Etiquetas fuera de rango [0, {m}): {labels.tolist()}")
    verdaderas = probs.gather(1, labels.unsqueeze(1)).squeeze(1)
    return -torch.log(torch.clamp(verdaderas, min=PISO_PROBABILIDAD)).mean()


# ======================
# REPORTE Y SUMA PONDERADA
# ======================
@dataclass(frozen=True)
class LossReport:
    cross: float
    self_rec: float
    velocity: float
    classification: float
    total: float

    def a_json(self, **extra) -> str:
        return json.dumps({**extra, **asdict(self)}, sort_keys=True)


def _pesos(weights: LossWeights) -> Dict[str, float]:
    return {"cross": weights.cross, "self_rec": weights.self_rec,
            "velocity": weights.velocity, "classification": weights.classification}


def combinar_perdidas(componentes: Dict[str, torch.Tensor], weights: LossWeights) -> torch.Tensor:
    """Suma ponderada diferenciable (la que recibe backward)."""
    pesos = _pesos(weights)
    return sum(pesos[t] * componentes[t] for t in TERMINOS)


def total_loss(componentes: Dict[str, Union[float, torch.Tensor]], weights: LossWeights) -> LossReport:
    weights.validar()
    valores = {}
    for termino in TERMINOS:
        if termino not in componentes:
            raise ErrorNumerico(f"Falta el término de pérdida '{termino}'")
        valor = componentes[termino]
        valor = float(valor.detach()) if isinstance(valor, torch.Tensor) else float(valor)
        if not math.isfinite(valor):
            raise ErrorNumerico(f"Pérdida no finita en el término '{termino}': {valor}")
        valores[termino] = valor
    pesos = _pesos(weights)
    total = math.fsum(pesos[t] * valores[t] for t in TERMINOS)
    return LossReport(total=total, **valores)
