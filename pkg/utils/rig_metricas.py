"""
Rig de blendshapes (neutral + 52 plantillas), conversión coeficientes -> malla
y métricas de error de vértices (LVE, EVE, error medio de labios).

Unidades: metros dentro del rig, milímetros en las métricas.
"""
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Dict, Optional, Union

import numpy as np
from scipy.spatial import ConvexHull

from config import io_utils
from config.opciones import (
    METROS_A_MM,
    N_BLENDSHAPES,
    REGION_VERTICES_POR_REGION_CANALES,
    VERTICES_MINIMOS,
)
from utils.datos import BlendshapeSequence
from utils.errores import ErrorAlineacion, ErrorConfiguracion, ErrorForma, ErrorNumerico
from utils.logger import get_logger

logger = get_logger(__name__)

MODOS_BLEND = ("delta", "literal")

NOMBRE_PLANTILLAS = "plantillas.npz"
NOMBRE_MASCARA_LABIOS = "mascara_labios.txt"
NOMBRE_MASCARA_OJOS = "mascara_ojos_frente.txt"

# Semiejes del elipsoide de la cabeza (m): ancho, alto, profundidad
_SEMIEJES = np.array([0.075, 0.10, 0.09])


@dataclass(frozen=True, eq=False)
class RigTemplateSet:
    neutral: np.ndarray
    plantillas: np.ndarray
    caras: np.ndarray
    mascara_labios: np.ndarray
    mascara_ojos_frente: np.ndarray

    def __post_init__(self):
        V = self.neutral.shape[0]
        if self.neutral.shape != (V, 3):
            raise ErrorForma(f"neutral debe ser V×3, se recibió {self.neutral.shape}")
        if self.plantillas.shape != (N_BLENDSHAPES, V, 3):
            raise ErrorForma(f"plantillas debe ser {N_BLENDSHAPES}×{V}×3, se recibió {self.plantillas.shape}")
        for nombre in ("mascara_labios", "mascara_ojos_frente"):
            mascara = getattr(self, nombre)
            if mascara.size == 0:
                raise ErrorConfiguracion(f"{nombre} está vacía")
            if mascara.min() < 0 or mascara.max() >= V:
                raise ErrorConfiguracion(f"{nombre} tiene índices fuera de [0, {V})")

    @property
    def V(self) -> int:
        return self.neutral.shape[0]

    @cached_property
    def deltas(self) -> np.ndarray:
        return self.plantillas - self.neutral[None]

    def mascaras(self) -> Dict[str, np.ndarray]:
        return {"labios": self.mascara_labios, "ojos_frente": self.mascara_ojos_frente}


# ======================
# RIG SINTÉTICO
# ======================
def _esfera_fibonacci(V: int) -> np.ndarray:
    i = np.arange(V) + 0.5
    y = 1.0 - 2.0 * i / V
    r = np.sqrt(1.0 - y ** 2)
    theta = np.pi * (3.0 - np.sqrt(5.0)) * np.arange(V)
    return np.stack([r * np.cos(theta), y, r * np.sin(theta)], axis=1)


def _regiones_vertices(unitaria: np.ndarray) -> Dict[str, np.ndarray]:
    """Labios: frente inferior; ojos y frente: frente superior; resto: lo demás."""
    x, y, z = unitaria.T
    labios = np.flatnonzero((z > 0.5) & (y > -0.6) & (y < -0.2))
    ojos = np.flatnonzero((z > 0.3) & (y > 0.1) & (y < 0.7))
    resto = np.setdiff1d(np.arange(unitaria.shape[0]), np.concatenate([labios, ojos]))
    return {"labios": labios, "ojos_frente": ojos, "resto": resto}


def _grupo_de_canal(canal: int, regiones_canales: Dict[str, tuple]) -> str:
    for nombre, canales in regiones_canales.items():
        if canal in canales:
            return nombre
    raise ErrorConfiguracion(f"El canal {canal} no pertenece a ninguna región")


def make_synthetic_rig(V: int, seed: int, regiones_canales: Optional[Dict[str, tuple]] = None) -> RigTemplateSet:
    """
    Rig determinista sobre un elipsoide.

    La malla neutral y las máscaras no dependen de la semilla. La plantilla i
    es la neutral más una protuberancia suave (2 a 10 mm) con soporte dentro de
    la región de vértices que corresponde al grupo del canal i.
    """
    if V < VERTICES_MINIMOS:
        raise ErrorConfiguracion(f"El rig necesita al menos {VERTICES_MINIMOS} vértices, se pidieron {V}")
    regiones_canales = regiones_canales or io_utils.cargar_regiones_canales()

    unitaria = _esfera_fibonacci(V)
    neutral = unitaria * _SEMIEJES
    regiones = _regiones_vertices(unitaria)
    for nombre, indices in regiones.items():
        if indices.size == 0:
            raise ErrorConfiguracion(f"La región '{nombre}' quedó vacía con V={V}")

    rng = np.random.default_rng([seed, V])
    plantillas = np.repeat(neutral[None], N_BLENDSHAPES, axis=0)
    for canal in range(N_BLENDSHAPES):
        soporte = regiones[REGION_VERTICES_POR_REGION_CANALES[_grupo_de_canal(canal, regiones_canales)]]
        centro = neutral[soporte[rng.integers(soporte.size)]]
        radio = rng.uniform(0.02, 0.04)
        magnitud = rng.uniform(0.002, 0.010)
        direccion = rng.normal(size=3)
        direccion /= np.linalg.norm(direccion)
        distancia = np.linalg.norm(neutral[soporte] - centro, axis=1)
        peso = np.clip(1.0 - (distancia / radio) ** 2, 0.0, None) ** 2
        plantillas[canal, soporte] += magnitud * peso[:, None] * direccion

    caras = ConvexHull(neutral).simplices.astype(np.int64)
    logger.debug("Rig sintético: V=%d, %d caras, %d labios, %d ojos/frente",
                 V, len(caras), regiones["labios"].size, regiones["ojos_frente"].size)
    return RigTemplateSet(neutral=neutral, plantillas=plantillas, caras=caras,
                          mascara_labios=regiones["labios"], mascara_ojos_frente=regiones["ojos_frente"])


# ======================
# COEFICIENTES -> MALLA
# ======================
def _validar_modo(mode: str):
    if mode not in MODOS_BLEND:
        raise ErrorConfiguracion(f"Modo de blend inválido: {mode}. Opciones: {MODOS_BLEND}")


def blend(rig: RigTemplateSet, coeffs: np.ndarray, mode: str = "delta") -> np.ndarray:
    """
    'literal': V = Σ β_i V_i. 'delta': V = V_neutral + Σ β_i (V_i − V_neutral),
    así β = 0 da la cara neutral.
    """
    _validar_modo(mode)
    coeffs = np.asarray(coeffs, dtype=np.float64)
    if coeffs.shape != (N_BLENDSHAPES,):
        raise ErrorForma(f"Se esperaban {N_BLENDSHAPES} coeficientes, se recibió forma {coeffs.shape}")
    if not np.all(np.isfinite(coeffs)):
        raise ErrorNumerico("Coeficientes no finitos")
    if mode == "literal":
        return np.tensordot(coeffs, rig.plantillas, axes=1)
    return rig.neutral + np.tensordot(coeffs, rig.deltas, axes=1)


def blend_sequence(rig: RigTemplateSet, seq: Union[BlendshapeSequence, np.ndarray], mode: str = "delta") -> np.ndarray:
    """Secuencia T×V×3."""
    _validar_modo(mode)
    coeffs = seq.coeffs if isinstance(seq, BlendshapeSequence) else np.asarray(seq, dtype=np.float64)
    if coeffs.ndim != 2 or coeffs.shape[1] != N_BLENDSHAPES:
        raise ErrorForma(f"Se esperaba una matriz T×{N_BLENDSHAPES}, se recibió {coeffs.shape}")
    if mode == "literal":
        return np.einsum("tk,kvc->tvc", coeffs, rig.plantillas)
    return rig.neutral[None] + np.einsum("tk,kvc->tvc", coeffs, rig.deltas)


# ======================
# MÉTRICAS
# ======================
def _distancias(pred: np.ndarray, gt: np.ndarray, mascara: np.ndarray) -> np.ndarray:
    pred, gt = np.asarray(pred, dtype=np.float64), np.asarray(gt, dtype=np.float64)
    if pred.ndim == 2:
        pred, gt = pred[None], gt[None]
    if pred.shape != gt.shape or pred.ndim != 3 or pred.shape[2] != 3:
        raise ErrorAlineacion(f"Secuencias de vértices incompatibles: {pred.shape} vs {gt.shape}")
    mascara = np.asarray(mascara, dtype=np.int64)
    if mascara.size == 0:
        raise ErrorConfiguracion("La máscara de vértices está vacía")
    return np.linalg.norm(pred[:, mascara] - gt[:, mascara], axis=-1)


def lve(pred: np.ndarray, gt: np.ndarray, lip_mask: np.ndarray) -> float:
    """Máximo error ℓ2 entre vértices de labios por cuadro, promediado sobre cuadros (mm)."""
    return float(_distancias(pred, gt, lip_mask).max(axis=1).mean() * METROS_A_MM)


def eve(pred: np.ndarray, gt: np.ndarray, eye_forehead_mask: np.ndarray) -> float:
    """Como lve, sobre ojos y frente."""
    return float(_distancias(pred, gt, eye_forehead_mask).max(axis=1).mean() * METROS_A_MM)


def lip_avg_error(pred: np.ndarray, gt: np.ndarray, lip_mask: np.ndarray) -> float:
    return float(_distancias(pred, gt, lip_mask).mean() * METROS_A_MM)


# ------------------ Persistencia ------------------
def guardar_rig(rig: RigTemplateSet, directorio: Union[str, Path]) -> Path:
    directorio = io_utils.asegurar_directorio(directorio)
    np.savez(directorio / NOMBRE_PLANTILLAS, neutral=rig.neutral, plantillas=rig.plantillas, caras=rig.caras)
    io_utils.guardar_mascara(directorio / NOMBRE_MASCARA_LABIOS, rig.mascara_labios)
    io_utils.guardar_mascara(directorio / NOMBRE_MASCARA_OJOS, rig.mascara_ojos_frente)
    return directorio


def cargar_rig(directorio: Union[str, Path], mascara_labios: Optional[str] = None,
               mascara_ojos_frente: Optional[str] = None) -> RigTemplateSet:
    """Carga un rig; las máscaras externas, si se dan, reemplazan a las del directorio."""
    directorio = Path(directorio)
    ruta_npz = directorio / NOMBRE_PLANTILLAS
    if not ruta_npz.exists():
        raise ErrorConfiguracion(f"No existe {ruta_npz}")
    with np.load(ruta_npz) as datos:
        neutral, plantillas, caras = datos["neutral"], datos["plantillas"], datos["caras"]
    V = neutral.shape[0]
    labios = io_utils.cargar_mascara(mascara_labios or directorio / NOMBRE_MASCARA_LABIOS, V)
    ojos = io_utils.cargar_mascara(mascara_ojos_frente or directorio / NOMBRE_MASCARA_OJOS, V)
    return RigTemplateSet(neutral=neutral, plantillas=plantillas, caras=caras,
                          mascara_labios=labios, mascara_ojos_frente=ojos)


def rig_desde_spec(spec) -> RigTemplateSet:
    """Rig de un RigSpec: directorio guardado si hay ruta, sintético si no."""
    if spec.ruta:
        return cargar_rig(spec.ruta, spec.mascara_labios, spec.mascara_ojos_frente)
    rig = make_synthetic_rig(spec.vertices, spec.semilla)
    if spec.mascara_labios or spec.mascara_ojos_frente:
        labios = io_utils.cargar_mascara(spec.mascara_labios, rig.V) if spec.mascara_labios else rig.mascara_labios
        ojos = (io_utils.cargar_mascara(spec.mascara_ojos_frente, rig.V)
                if spec.mascara_ojos_frente else rig.mascara_ojos_frente)
        rig = RigTemplateSet(neutral=rig.neutral, plantillas=rig.plantillas, caras=rig.caras,
                             mascara_labios=labios, mascara_ojos_frente=ojos)
    return rig


def exportar_obj_secuencia(rig: RigTemplateSet, vertices: np.ndarray, directorio: Union[str, Path],
                           prefijo: str = "cuadro") -> int:
    """Un OBJ por cuadro: <prefijo>_0000.obj, ..."""
    directorio = io_utils.asegurar_directorio(directorio)
    for t, cuadro in enumerate(vertices):
        io_utils.guardar_obj(directorio / f"{prefijo}_{t:04d}.obj", cuadro, rig.caras)
    return len(vertices)
