"""
Tipos de datos, generador sintético factorizado, suavizado temporal,
alineación audio/cuadros y muestreo de pares cruzados.

El generador sustituye al corpus real: los canales de labios dependen solo
del contenido, los de cejas/ojos solo de la emoción y el nivel, y los
"otros" solo del hablante. Por eso los objetivos de la reconstrucción
cruzada son exactos.
"""
import math
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import torch
from scipy.signal import savgol_filter

from config.opciones import (
    EMOCIONES,
    F0_BASE_HZ,
    FPS,
    MAX_CONTENIDOS,
    N_ARMONICOS,
    N_BLENDSHAPES,
    N_ESTILOS,
    NIVELES,
    PASO_F0_HZ,
    REGIONES_CANALES,
    SAMPLE_RATE,
)
from utils.errores import (
    ErrorAgotamiento,
    ErrorAlineacion,
    ErrorConfiguracion,
    ErrorForma,
    ErrorLongitud,
    ErrorNumerico,
    ErrorRango,
)
from utils.logger import get_logger

logger = get_logger(__name__)

PARTICION_ENTRENAMIENTO = "entrenamiento"
PARTICION_PRUEBA = "prueba"

# Claves para derivar flujos aleatorios independientes de una sola semilla
_FLUJO_CONTENIDO = 1
_FLUJO_EMOCION = 2
_FLUJO_HABLANTE = 3
_FLUJO_RUIDO = 4

_ESCALA_AUDIO = 0.7
_SIGMA_RUIDO = 0.005


# ======================
# TIPOS
# ======================
@dataclass(frozen=True, eq=False)
class AudioClip:
    samples: np.ndarray
    content_id: int
    emotion_id: int
    level: int
    speaker_id: int
    sample_rate: int = SAMPLE_RATE
    toma: int = 0

    def __post_init__(self):
        samples = np.array(self.samples, dtype=np.float64).reshape(-1)
        if self.sample_rate != SAMPLE_RATE:
            raise ErrorConfiguracion(f"sample_rate debe ser {SAMPLE_RATE} Hz, se recibió {self.sample_rate}")
        if samples.size * FPS < self.sample_rate:
            raise ErrorLongitud(
                f"El audio necesita al menos {self.sample_rate / FPS:.1f} muestras (un cuadro), tiene {samples.size}"
            )
        if not np.all(np.isfinite(samples)):
            raise ErrorNumerico("El audio contiene valores no finitos")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    @property
    def duracion_s(self) -> float:
        return self.samples.size / self.sample_rate

    @property
    def etiquetas(self) -> Dict[str, int]:
        return {
            "content_id": self.content_id,
            "emotion_id": self.emotion_id,
            "level": self.level,
            "speaker_id": self.speaker_id,
            "toma": self.toma,
        }


@dataclass(frozen=True, eq=False)
class BlendshapeSequence:
    coeffs: np.ndarray
    fps: int = FPS
    content_id: Optional[int] = None
    emotion_id: Optional[int] = None

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=np.float64)
        if coeffs.ndim != 2 or coeffs.shape[1] != N_BLENDSHAPES:
            raise ErrorForma(f"Se esperaba una matriz T×{N_BLENDSHAPES}, se recibió {coeffs.shape}")
        if coeffs.shape[0] < 1:
            raise ErrorLongitud("La secuencia de blendshapes está vacía")
        if not np.all(np.isfinite(coeffs)):
            raise ErrorNumerico("La secuencia de blendshapes contiene valores no finitos")
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def T(self) -> int:
        return self.coeffs.shape[0]

    def recortada(self) -> "BlendshapeSequence":
        """Copia con coeficientes limitados a [0, 1] (solo al exportar)."""
        return replace(self, coeffs=np.clip(self.coeffs, 0.0, 1.0))


@dataclass(frozen=True, eq=False)
class FeatureSequence:
    values: torch.Tensor
    fps: float = FPS

    def __post_init__(self):
        if self.values.dim() != 2:
            raise ErrorForma(f"Se esperaba una matriz T×D, se recibió {tuple(self.values.shape)}")
        if self.values.shape[0] < 1:
            raise ErrorLongitud("La secuencia de rasgos necesita al menos un cuadro")
        if not bool(torch.isfinite(self.values).all()):
            raise ErrorNumerico("La secuencia de rasgos contiene valores no finitos")

    @property
    def T(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True, eq=False)
class CrossPair:
    """
    audio_a tiene (c1, e2) y audio_b tiene (c2, e1); los cuatro objetivos
    cubren las combinaciones cruzadas y las propias.
    """
    audio_a: AudioClip
    audio_b: AudioClip
    gt_c1e1: BlendshapeSequence
    gt_c2e2: BlendshapeSequence
    gt_c1e2: BlendshapeSequence
    gt_c2e1: BlendshapeSequence

    def __post_init__(self):
        a, b = self.audio_a, self.audio_b
        esperado = {
            "gt_c1e1": (a.content_id, b.emotion_id),
            "gt_c2e2": (b.content_id, a.emotion_id),
            "gt_c1e2": (a.content_id, a.emotion_id),
            "gt_c2e1": (b.content_id, b.emotion_id),
        }
        for nombre, (contenido, emocion) in esperado.items():
            gt = getattr(self, nombre)
            if gt.content_id is not None and gt.content_id != contenido:
                raise ErrorAlineacion(f"{nombre}: contenido {gt.content_id} != {contenido}")
            if gt.emotion_id is not None and gt.emotion_id != emocion:
                raise ErrorAlineacion(f"{nombre}: emoción {gt.emotion_id} != {emocion}")
        if a.speaker_id != b.speaker_id:
            raise ErrorAlineacion(f"Los dos audios deben ser del mismo hablante ({a.speaker_id} != {b.speaker_id})")
        if a.level != b.level:
            raise ErrorAlineacion(f"Los dos audios deben tener el mismo nivel ({a.level} != {b.level})")
        if a.content_id == b.content_id or a.emotion_id == b.emotion_id:
            raise ErrorAlineacion("Un par cruzado necesita c1 != c2 y e1 != e2")

    @property
    def c1(self) -> int:
        return self.audio_a.content_id

    @property
    def c2(self) -> int:
        return self.audio_b.content_id

    @property
    def e1(self) -> int:
        return self.audio_b.emotion_id

    @property
    def e2(self) -> int:
        return self.audio_a.emotion_id


# ======================
# ALINEACIÓN Y SUAVIZADO
# ======================
def frames_for_audio(n_samples: int, sample_rate: int = SAMPLE_RATE, fps: int = FPS) -> int:
    """Cuadros de video para n_samples de audio: redondeo al más cercano, mínimo 1."""
    if n_samples <= 0 or sample_rate <= 0 or fps <= 0:
        raise ErrorLongitud(f"Entradas deben ser positivas: n={n_samples}, sr={sample_rate}, fps={fps}")
    return max(1, int(math.floor(n_samples * fps / sample_rate + 0.5)))


def savgol_smooth(seq: BlendshapeSequence, window: int = 5, order: int = 2,
                  modo_borde: str = "interp") -> BlendshapeSequence:
    """
    Suavizado Savitzky-Golay por canal.

    modo_borde="interp" ajusta un polinomio a la ventana de cada extremo, así
    los polinomios de grado <= order salen intactos también en los bordes.
    "mirror" refleja la señal en los bordes; una cuadrática sin simetría par
    respecto al borde no sobrevive al reflejo, por eso no es el modo por omisión.
    """
    if window % 2 == 0 or window < 1:
        raise ErrorConfiguracion(f"La ventana debe ser impar y positiva, se recibió {window}")
    if not 0 <= order < window:
        raise ErrorConfiguracion(f"El orden debe cumplir 0 <= order < window, se recibió {order}")
    if seq.T < window:
        raise ErrorLongitud(f"La secuencia tiene {seq.T} cuadros, menos que la ventana de {window}")
    suavizado = savgol_filter(seq.coeffs, window_length=window, polyorder=order, axis=0, mode=modo_borde)
    return replace(seq, coeffs=suavizado)


# ======================
# GENERADOR SINTÉTICO
# ======================
def _flujo(seed: int, *claves: int) -> np.random.Generator:
    return np.random.default_rng([seed, *claves])


def _validar_id(nombre: str, valor: int, limite: int):
    if not isinstance(valor, (int, np.integer)) or not 0 <= valor < limite:
        raise ErrorRango(f"{nombre}={valor} fuera de rango [0, {limite})")


def _parametros_contenido(seed: int, content_id: int) -> Dict[str, np.ndarray]:
    rng = _flujo(seed, _FLUJO_CONTENIDO, content_id)
    n_labios = len(REGIONES_CANALES["labios"])
    return {
        "f_boca": rng.uniform(1.5, 4.0),
        "fase_boca": rng.uniform(0.0, 2 * np.pi),
        "f_lenta": rng.uniform(0.3, 1.0),
        "fase_lenta": rng.uniform(0.0, 2 * np.pi),
        "base": rng.uniform(0.0, 0.3, n_labios),
        "peso": rng.uniform(0.05, 0.6, n_labios),
        "invertido": rng.random(n_labios) < 0.3,
        # Portadora armónica: la frecuencia fundamental identifica el contenido
        "f0": F0_BASE_HZ + PASO_F0_HZ * content_id,
        "armonicos": rng.uniform(0.3, 1.0, N_ARMONICOS),
        "fases_armonicos": rng.uniform(0.0, 2 * np.pi, N_ARMONICOS),
    }


def _apertura_boca(p: Dict[str, np.ndarray], tiempos: np.ndarray) -> np.ndarray:
    """Señal de apertura de boca en [0, 1] evaluada en los tiempos dados (s)."""
    return (0.5
            + 0.35 * np.sin(2 * np.pi * p["f_boca"] * tiempos + p["fase_boca"])
            + 0.15 * np.sin(2 * np.pi * p["f_lenta"] * tiempos + p["fase_lenta"]))


def _parametros_emocion(seed: int, emotion_id: int, level: int) -> Dict[str, np.ndarray]:
    rng = _flujo(seed, _FLUJO_EMOCION, emotion_id)
    n_cejas = len(REGIONES_CANALES["cejas_ojos"])
    intensidad = 0.6 + 0.4 * level
    return {
        "base": rng.uniform(0.05, 0.45, n_cejas) * intensidad,
        "fases": rng.uniform(0.0, 2 * np.pi, n_cejas),
        # Envolvente de largo plazo: ganancia y desplazamiento lento propios de la emoción
        "tasa": 2.0 + 0.75 * emotion_id,
        "ganancia": (0.25 + 0.1 * emotion_id) * (1.0 + 0.1 * level),
        "desplazamiento": (0.05 + 0.02 * emotion_id) * (1.0 + 0.5 * level),
        "fase_desplazamiento": rng.uniform(0.0, 2 * np.pi),
    }


def _parametros_hablante(seed: int, speaker_id: int) -> Dict[str, np.ndarray]:
    rng = _flujo(seed, _FLUJO_HABLANTE, speaker_id)
    n_otros = len(REGIONES_CANALES["otros"])
    return {
        "base": rng.uniform(0.05, 0.4, n_otros),
        "frecuencia": rng.uniform(0.2, 0.6),
        "fases": rng.uniform(0.0, 2 * np.pi, n_otros),
    }


def _coeficientes_verdad(seed: int, content_id: int, emotion_id: int, level: int,
                         speaker_id: int, n_cuadros: int) -> np.ndarray:
    t = np.arange(n_cuadros) / FPS
    coeffs = np.zeros((n_cuadros, N_BLENDSHAPES))

    pc = _parametros_contenido(seed, content_id)
    apertura = _apertura_boca(pc, t)[:, None]
    activacion = np.where(pc["invertido"], 1.0 - apertura, apertura)
    coeffs[:, list(REGIONES_CANALES["labios"])] = pc["base"] + pc["peso"] * activacion

    pe = _parametros_emocion(seed, emotion_id, level)
    oscilacion = 0.08 * (1.0 + np.sin(2 * np.pi * pe["tasa"] * t[:, None] + pe["fases"]))
    coeffs[:, list(REGIONES_CANALES["cejas_ojos"])] = pe["base"] + oscilacion

    ph = _parametros_hablante(seed, speaker_id)
    deriva = 0.05 * (1.0 + np.sin(2 * np.pi * ph["frecuencia"] * t[:, None] + ph["fases"]))
    coeffs[:, list(REGIONES_CANALES["otros"])] = ph["base"] + deriva

    return np.clip(coeffs, 0.0, 1.0)


def _audio_sintetico(seed: int, content_id: int, emotion_id: int, level: int, speaker_id: int,
                     toma: int, n_muestras: int) -> np.ndarray:
    tau = np.arange(n_muestras) / SAMPLE_RATE

    pc = _parametros_contenido(seed, content_id)
    armonicos = pc["armonicos"] / pc["armonicos"].sum()
    portadora = sum(
        a * np.sin(2 * np.pi * (h + 1) * pc["f0"] * tau + fase)
        for h, (a, fase) in enumerate(zip(armonicos, pc["fases_armonicos"]))
    )
    portadora = portadora * (0.2 + 0.8 * _apertura_boca(pc, tau))

    pe = _parametros_emocion(seed, emotion_id, level)
    envolvente = pe["desplazamiento"] * np.sin(2 * np.pi * pe["tasa"] * tau + pe["fase_desplazamiento"])

    ruido = _flujo(seed, _FLUJO_RUIDO, content_id, emotion_id, level, speaker_id, toma).normal(
        0.0, _SIGMA_RUIDO, n_muestras
    )
    return _ESCALA_AUDIO * (pe["ganancia"] * portadora + envolvente) + ruido


def synth_clip(content_id: int, emotion_id: int, level: int, speaker_id: int, duration_s: float,
               seed: int, *, n_contenidos: int = 8, n_emociones: int = len(EMOCIONES),
               n_hablantes: int = N_ESTILOS, toma: int = 0) -> Tuple[AudioClip, BlendshapeSequence]:
    """
    Genera un clip de audio y sus coeficientes verdaderos.

    El resultado es función pura de los argumentos: misma llamada, mismos bits.
    """
    if n_contenidos > MAX_CONTENIDOS:
        raise ErrorConfiguracion(f"n_contenidos={n_contenidos} supera el máximo de {MAX_CONTENIDOS} (portadora bajo Nyquist)")
    _validar_id("content_id", content_id, n_contenidos)
    _validar_id("emotion_id", emotion_id, n_emociones)
    _validar_id("level", level, len(NIVELES))
    _validar_id("speaker_id", speaker_id, n_hablantes)
    if seed < 0 or toma < 0:
        raise ErrorRango(f"seed y toma deben ser no negativos (seed={seed}, toma={toma})")
    if not duration_s > 0:
        raise ErrorLongitud(f"duration_s debe ser > 0, se recibió {duration_s}")

    n_muestras = int(round(duration_s * SAMPLE_RATE))
    n_cuadros = int(round(duration_s * FPS))
    if n_cuadros < 1:
        raise ErrorLongitud(f"duration_s={duration_s} no alcanza un cuadro a {FPS} fps")

    samples = _audio_sintetico(seed, content_id, emotion_id, level, speaker_id, toma, n_muestras)
    coeffs = _coeficientes_verdad(seed, content_id, emotion_id, level, speaker_id, n_cuadros)

    clip = AudioClip(samples=samples, content_id=content_id, emotion_id=emotion_id, level=level,
                     speaker_id=speaker_id, toma=toma)
    gt = BlendshapeSequence(coeffs=coeffs, content_id=content_id, emotion_id=emotion_id)
    return clip, gt


# ======================
# CONJUNTO DE DATOS
# ======================
@dataclass(frozen=True, eq=False)
class EntradaConjunto:
    clip: AudioClip
    gt: BlendshapeSequence
    particion: str = PARTICION_ENTRENAMIENTO
    nombre: str = ""


class ConjuntoDatos:
    """Clips con su verdad, indexados por (hablante, nivel, contenido, emoción)."""

    def __init__(self, entradas: Sequence[EntradaConjunto]):
        self._entradas: List[EntradaConjunto] = list(entradas)

    def __len__(self) -> int:
        return len(self._entradas)

    def __iter__(self) -> Iterator[EntradaConjunto]:
        return iter(self._entradas)

    def particion(self, nombre: str) -> "ConjuntoDatos":
        return ConjuntoDatos([e for e in self._entradas if e.particion == nombre])

    @cached_property
    def _celdas(self) -> Dict[Tuple[int, int, int, int], List[EntradaConjunto]]:
        celdas: Dict[Tuple[int, int, int, int], List[EntradaConjunto]] = {}
        for entrada in self._entradas:
            c = entrada.clip
            celdas.setdefault((c.speaker_id, c.level, c.content_id, c.emotion_id), []).append(entrada)
        return celdas

    def celda(self, speaker_id: int, level: int, content_id: int, emotion_id: int) -> List[EntradaConjunto]:
        return self._celdas.get((speaker_id, level, content_id, emotion_id), [])

    @cached_property
    def candidatos_pares(self) -> List[Tuple[int, int, int, int, int, int]]:
        """Tuplas (hablante, nivel, c1, c2, e1, e2) con las cuatro celdas presentes, c1 < c2."""
        grupos: Dict[Tuple[int, int], set] = {}
        for (s, l, c, e) in self._celdas:
            grupos.setdefault((s, l), set()).add((c, e))
        candidatos = []
        for (s, l), presentes in sorted(grupos.items()):
            contenidos = sorted({c for c, _ in presentes})
            emociones = sorted({e for _, e in presentes})
            for i, c1 in enumerate(contenidos):
                for c2 in contenidos[i + 1:]:
                    for e1 in emociones:
                        for e2 in emociones:
                            if e1 == e2:
                                continue
                            if {(c1, e1), (c2, e2), (c1, e2), (c2, e1)} <= presentes:
                                candidatos.append((s, l, c1, c2, e1, e2))
        return candidatos

    def a_dataframe(self) -> pd.DataFrame:
        filas = [{**e.clip.etiquetas, "particion": e.particion, "nombre": e.nombre,
                  "n_muestras": e.clip.samples.size, "n_cuadros": e.gt.T}
                 for e in self._entradas]
        return pd.DataFrame(filas)


def sample_cross_pair(dataset: ConjuntoDatos, rng: np.random.Generator) -> CrossPair:
    """Muestra un par cruzado del mismo hablante y nivel con c1 != c2 y e1 != e2."""
    candidatos = dataset.candidatos_pares
    if not candidatos:
        raise ErrorAgotamiento(
            "No hay pares cruzados válidos: se necesitan al menos 2 contenidos y 2 emociones "
            "de un mismo hablante y nivel"
        )
    s, l, c1, c2, e1, e2 = candidatos[int(rng.integers(len(candidatos)))]
    celda_a = dataset.celda(s, l, c1, e2)
    celda_b = dataset.celda(s, l, c2, e1)
    entrada_a = celda_a[int(rng.integers(len(celda_a)))]
    entrada_b = celda_b[int(rng.integers(len(celda_b)))]
    return CrossPair(
        audio_a=entrada_a.clip,
        audio_b=entrada_b.clip,
        gt_c1e1=dataset.celda(s, l, c1, e1)[0].gt,
        gt_c2e2=dataset.celda(s, l, c2, e2)[0].gt,
        gt_c1e2=entrada_a.gt,
        gt_c2e1=entrada_b.gt,
    )


def nombre_clip(speaker_id: int, level: int, content_id: int, emotion_id: int, toma: int) -> str:
    return f"h{speaker_id:02d}_n{level}_c{content_id:02d}_e{emotion_id:02d}_t{toma:02d}"


def generar_conjunto(spec, seed: int) -> ConjuntoDatos:
    """
    Genera la rejilla completa contenido × emoción × nivel × hablante × toma.

    Las últimas `spec.tomas_prueba` tomas de cada celda forman la partición de prueba.
    """
    spec.validar()
    entradas = []
    primera_prueba = spec.clips_por_celda - spec.tomas_prueba
    for s in range(spec.hablantes):
        for l in range(spec.niveles):
            for c in range(spec.contenidos):
                for e in range(spec.emociones):
                    for toma in range(spec.clips_por_celda):
                        clip, gt = synth_clip(
                            c, e, l, s, spec.duracion_s, seed,
                            n_contenidos=spec.contenidos, n_emociones=spec.emociones,
                            n_hablantes=spec.hablantes, toma=toma,
                        )
                        if spec.suavizar:
                            gt = savgol_smooth(gt)
                            gt = replace(gt, coeffs=np.clip(gt.coeffs, 0.0, 1.0))
                        particion = PARTICION_PRUEBA if toma >= primera_prueba else PARTICION_ENTRENAMIENTO
                        entradas.append(EntradaConjunto(clip=clip, gt=gt, particion=particion,
                                                        nombre=nombre_clip(s, l, c, e, toma)))
    logger.info("Conjunto sintético generado: %d clips (%d de prueba)", len(entradas),
                sum(e.particion == PARTICION_PRUEBA for e in entradas))
    return ConjuntoDatos(entradas)
