"""
Entrenamiento por reconstrucción cruzada, inferencia y evaluación.

Cada paso toma pares cruzados (A con contenido c1 y emoción e2, B con c2 y
e1), recombina contenido de uno con emoción del otro para reconstruir
(c1, e1) y (c2, e2), reconstruye A consigo mismo y clasifica la emoción de
ambos clips.
"""
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import torch

from config import io_utils
from config.configuracion import ConfigModelo, EncoderConfig, FusionConfig, LossWeights, TrainConfig
from config.opciones import BETAS_ADAM, EPS_ADAM, VERTICES_ESCRITORIO
from utils.codificadores import checksum_frontend
from utils.datos import (
    PARTICION_PRUEBA,
    AudioClip,
    BlendshapeSequence,
    ConjuntoDatos,
    CrossPair,
    frames_for_audio,
    sample_cross_pair,
)
from utils.errores import ErrorConfiguracion, ErrorNumerico
from utils.logger import get_logger
from utils.modelo import ModeloAnimacion, crear_modelo
from utils.perdidas import (
    LossReport,
    classification_loss,
    combinar_perdidas,
    cross_reconstruction_loss,
    self_reconstruction_loss,
    total_loss,
    velocity_loss,
)
from utils.rig_metricas import RigTemplateSet, blend_sequence, eve, lip_avg_error, lve, make_synthetic_rig

logger = get_logger(__name__)

# Pares evaluados para el error cruzado de prueba
_MAX_PARES_EVALUACION = 64


# ======================
# ESTADO
# ======================
@dataclass
class TrainState:
    modelo: ModeloAnimacion
    optimizador: torch.optim.Adam
    paso: int = 0
    rng: np.random.Generator = field(default_factory=lambda: np.random.default_rng(0))
    checksum: str = ""


def _crear_optimizador(modelo: ModeloAnimacion, learning_rate: float) -> torch.optim.Adam:
    entrenables = [p for p in modelo.parameters() if p.requires_grad]
    return torch.optim.Adam(entrenables, lr=learning_rate, betas=BETAS_ADAM, eps=EPS_ADAM)


def crear_estado(config: ConfigModelo, entrenamiento: TrainConfig) -> TrainState:
    entrenamiento.validar()
    modelo = crear_modelo(config)
    return TrainState(
        modelo=modelo,
        optimizador=_crear_optimizador(modelo, entrenamiento.learning_rate),
        rng=np.random.default_rng(entrenamiento.seed),
        checksum=checksum_frontend(modelo),
    )


# ======================
# PASO DE ENTRENAMIENTO
# ======================
def _terminos_par(modelo: ModeloAnimacion, par: CrossPair) -> Dict[str, torch.Tensor]:
    a, b = par.audio_a, par.audio_b
    estilo, nivel = a.speaker_id, a.level
    cache: Dict[Tuple[int, int], Tuple[torch.Tensor, torch.Tensor]] = {}

    def rasgos(clip: AudioClip, T: int) -> Tuple[torch.Tensor, torch.Tensor]:
        llave = (id(clip), T)
        if llave not in cache:
            cache[llave] = modelo.rasgos(clip, T)
        return cache[llave]

    def objetivo(gt: BlendshapeSequence) -> torch.Tensor:
        return torch.as_tensor(gt.coeffs, dtype=next(modelo.parameters()).dtype)

    T11, T22, T12 = par.gt_c1e1.T, par.gt_c2e2.T, par.gt_c1e2.T
    contenido_a, _ = rasgos(a, T11)
    _, emo_b_11 = rasgos(b, T11)
    pred_c1e1 = modelo.predecir(contenido_a, emo_b_11, estilo, nivel)

    contenido_b_22, _ = rasgos(b, T22)
    _, emo_a_22 = rasgos(a, T22)
    pred_c2e2 = modelo.predecir(contenido_b_22, emo_a_22, estilo, nivel)

    contenido_a_12, emo_a_12 = rasgos(a, T12)
    pred_c1e2 = modelo.predecir(contenido_a_12, emo_a_12, estilo, nivel)

    gt11, gt22, gt12 = objetivo(par.gt_c1e1), objetivo(par.gt_c2e2), objetivo(par.gt_c1e2)
    velocidad = (velocity_loss(pred_c1e1, gt11) + velocity_loss(pred_c2e2, gt22)
                 + velocity_loss(pred_c1e2, gt12)) / 3.0

    clasificador = modelo.codificador_emocion
    probs = torch.stack([clasificador.probabilidades(emo_a_12), clasificador.probabilidades(emo_b_11)])
    clasificacion = classification_loss(probs, [a.emotion_id, b.emotion_id])

    return {
        "cross": cross_reconstruction_loss(pred_c1e1, pred_c2e2, gt11, gt22),
        "self_rec": self_reconstruction_loss(pred_c1e2, gt12),
        "velocity": velocidad,
        "classification": clasificacion,
    }


def calcular_perdidas(modelo: ModeloAnimacion, pares: Sequence[CrossPair]) -> Dict[str, torch.Tensor]:
    """Términos promediados sobre el lote (sin actualizar parámetros)."""
    por_par = [_terminos_par(modelo, par) for par in pares]
    return {t: sum(p[t] for p in por_par) / len(por_par) for t in por_par[0]}


def train_step(state: TrainState, pair: Union[CrossPair, Sequence[CrossPair]],
               weights: LossWeights) -> Tuple[TrainState, LossReport]:
    """
    Un paso de Adam sobre los parámetros no congelados.

    Una pérdida no finita aborta antes de tocar los parámetros.
    """
    pares = [pair] if isinstance(pair, CrossPair) else list(pair)
    if not pares:
        raise ErrorConfiguracion("train_step necesita al menos un par")
    if state.checksum and checksum_frontend(state.modelo) != state.checksum:
        raise ErrorConfiguracion("El front-end congelado cambió durante el entrenamiento")
    state.modelo.train()
    state.optimizador.zero_grad(set_to_none=True)

    componentes = calcular_perdidas(state.modelo, pares)
    reporte = total_loss(componentes, weights)
    combinar_perdidas(componentes, weights).backward()
    state.optimizador.step()
    state.paso += 1
    return state, reporte


def entrenar(state: TrainState, conjunto: ConjuntoDatos, config: TrainConfig,
             ruta_bitacora: Optional[Union[str, Path]] = None) -> List[LossReport]:
    """
    Bucle de épocas hasta epochs × pasos_por_epoca pasos en total.

    Si el estado viene de un checkpoint, continúa desde state.paso; cada paso
    agrega una línea a la bitácora JSONL.
    """
    config.validar()
    pasos_totales = config.epochs * config.pasos_por_epoca
    reportes = []
    if state.paso >= pasos_totales:
        logger.info("Nada que entrenar: el estado ya tiene %d pasos", state.paso)
        return reportes

    logger.info("Entrenando pasos %d-%d (lote %d, lr %g)", state.paso + 1, pasos_totales,
                config.batch_size, config.learning_rate)
    while state.paso < pasos_totales:
        pares = [sample_cross_pair(conjunto, state.rng) for _ in range(config.batch_size)]
        try:
            state, reporte = train_step(state, pares, config.pesos)
        except ErrorNumerico as e:
            logger.error("Entrenamiento abortado en el paso %d: %s", state.paso + 1, e, exc_info=True)
            raise
        reportes.append(reporte)
        if ruta_bitacora is not None:
            epoca = (state.paso - 1) // config.pasos_por_epoca + 1
            io_utils.agregar_jsonl(ruta_bitacora, reporte.a_json(paso=state.paso, epoca=epoca))
        if state.paso % config.pasos_por_epoca == 0:
            logger.info("Época %d: pérdida total %.6f", state.paso // config.pasos_por_epoca, reporte.total)
    return reportes


# ======================
# CHECKPOINTS
# ======================
def _manifiesto(modelo: ModeloAnimacion) -> List[Dict]:
    return [{"nombre": nombre, "forma": list(p.shape), "congelado": not p.requires_grad}
            for nombre, p in modelo.named_parameters()]


def guardar_estado(state: TrainState, ruta: Union[str, Path]):
    io_utils.guardar_checkpoint(ruta, {
        "config": asdict(state.modelo.config),
        "manifiesto": _manifiesto(state.modelo),
        "modelo": state.modelo.state_dict(),
        "optimizador": state.optimizador.state_dict(),
        "paso": state.paso,
        "rng": state.rng.bit_generator.state,
        "checksum": state.checksum,
    })
    logger.info("Checkpoint guardado en %s (paso %d)", ruta, state.paso)


def _config_desde_dict(datos: Dict) -> ConfigModelo:
    return ConfigModelo(
        codificador=EncoderConfig(**datos["codificador"]),
        fusion=FusionConfig(**datos["fusion"]),
        semilla=datos["semilla"],
        precision=datos["precision"],
    )


def _modelo_desde_checkpoint(contenido: Dict) -> ModeloAnimacion:
    modelo = ModeloAnimacion(_config_desde_dict(contenido["config"]))
    esperado = _manifiesto(modelo)
    if esperado != contenido["manifiesto"]:
        raise ErrorConfiguracion("El manifiesto del checkpoint no coincide con la arquitectura de su configuración")
    modelo.load_state_dict(contenido["modelo"])
    return modelo


def cargar_estado(ruta: Union[str, Path]) -> TrainState:
    """Reconstruye modelo, momentos de Adam, contador de pasos y estado del rng."""
    contenido = io_utils.cargar_checkpoint(ruta)
    modelo = _modelo_desde_checkpoint(contenido)
    optimizador = _crear_optimizador(modelo, 1.0)
    optimizador.load_state_dict(contenido["optimizador"])
    rng = np.random.default_rng()
    rng.bit_generator.state = contenido["rng"]
    estado = TrainState(modelo=modelo, optimizador=optimizador, paso=int(contenido["paso"]), rng=rng,
                        checksum=contenido.get("checksum") or checksum_frontend(modelo))
    if checksum_frontend(modelo) != estado.checksum:
        raise ErrorConfiguracion(f"El front-end congelado de {ruta} no coincide con su checksum")
    logger.info("Checkpoint cargado de %s (paso %d)", ruta, estado.paso)
    return estado


def cargar_modelo(ruta: Union[str, Path]) -> ModeloAnimacion:
    return _modelo_desde_checkpoint(io_utils.cargar_checkpoint(ruta))


# ======================
# INFERENCIA Y EVALUACIÓN
# ======================
def infer(params: ModeloAnimacion, clip: AudioClip, level_id: int, style_id: int,
          recortar: bool = False) -> BlendshapeSequence:
    """Ambos extractores sobre el mismo clip; T = frames_for_audio(clip)."""
    T = frames_for_audio(clip.samples.size, clip.sample_rate)
    params.eval()
    with torch.no_grad():
        contenido, emocion = params.rasgos(clip, T)
        salida = params.predecir(contenido, emocion, style_id, level_id)
    seq = BlendshapeSequence(coeffs=salida.cpu().numpy().astype(np.float64))
    return seq.recortada() if recortar else seq


def probabilidades_emocion(params: ModeloAnimacion, clip: AudioClip) -> np.ndarray:
    T = frames_for_audio(clip.samples.size, clip.sample_rate)
    with torch.no_grad():
        _, emocion = params.rasgos(clip, T)
        return params.codificador_emocion.probabilidades(emocion).cpu().numpy()


def _errores_vertices(rig: RigTemplateSet, pred: BlendshapeSequence, gt: BlendshapeSequence) -> Dict[str, float]:
    T = min(pred.T, gt.T)
    v_pred = blend_sequence(rig, pred.coeffs[:T])
    v_gt = blend_sequence(rig, gt.coeffs[:T])
    return {
        "lve_mm": lve(v_pred, v_gt, rig.mascara_labios),
        "eve_mm": eve(v_pred, v_gt, rig.mascara_ojos_frente),
        "lip_avg_mm": lip_avg_error(v_pred, v_gt, rig.mascara_labios),
        "n_cuadros": T,
    }


def evaluar_predicciones(predicciones: Dict[str, BlendshapeSequence], conjunto: ConjuntoDatos,
                         rig: RigTemplateSet) -> pd.DataFrame:
    """Errores de vértices por clip; `predicciones` va indexado por nombre de clip."""
    filas = []
    for entrada in conjunto:
        fila = {"nombre": entrada.nombre, **entrada.clip.etiquetas}
        fila.update(_errores_vertices(rig, predicciones[entrada.nombre], entrada.gt))
        filas.append(fila)
    return pd.DataFrame(filas)


def _promedio_por_cuadros(df: pd.DataFrame, columna: str) -> float:
    return float((df[columna] * df["n_cuadros"]).sum() / df["n_cuadros"].sum())


def seleccionar_pares_evaluacion(candidatos: Sequence[Tuple[int, ...]], maximo: int = _MAX_PARES_EVALUACION,
                                 semilla: int = 0) -> List[Tuple[int, ...]]:
    """
    Hasta `maximo` pares cruzados repartidos entre grupos (hablante, nivel).

    Cada grupo se baraja con un rng sembrado y se toma uno por grupo en turno,
    así todos los grupos aparecen mientras `maximo` >= número de grupos.
    """
    if len(candidatos) <= maximo:
        return list(candidatos)
    rng = np.random.default_rng(semilla)
    grupos: Dict[Tuple[int, int], List[Tuple[int, ...]]] = {}
    for par in candidatos:
        grupos.setdefault((par[0], par[1]), []).append(par)
    colas = [[grupo[i] for i in rng.permutation(len(grupo))] for _, grupo in sorted(grupos.items())]
    seleccion: List[Tuple[int, ...]] = []
    ronda = 0
    while len(seleccion) < maximo:
        for cola in colas:
            if ronda < len(cola) and len(seleccion) < maximo:
                seleccion.append(cola[ronda])
        ronda += 1
    return seleccion


def _error_cruzado_prueba(params: ModeloAnimacion, prueba: ConjuntoDatos) -> Dict[str, float]:
    """Error de reconstrucción cruzada en prueba y la línea base con emoción barajada."""
    candidatos = prueba.candidatos_pares
    if not candidatos:
        return {"error_cruzado": float("nan"), "error_cruzado_emocion_barajada": float("nan"), "n_pares": 0}
    errores, barajados = [], []
    with torch.no_grad():
        for s, l, c1, c2, e1, e2 in seleccionar_pares_evaluacion(candidatos):
            a = prueba.celda(s, l, c1, e2)[0]
            b = prueba.celda(s, l, c2, e1)[0]
            gt11 = prueba.celda(s, l, c1, e1)[0].gt
            gt22 = prueba.celda(s, l, c2, e2)[0].gt
            contenido_a11, _ = params.rasgos(a.clip, gt11.T)
            _, emo_b11 = params.rasgos(b.clip, gt11.T)
            _, emo_a22 = params.rasgos(a.clip, gt22.T)
            contenido_b22, _ = params.rasgos(b.clip, gt22.T)
            pred11 = params.predecir(contenido_a11, emo_b11, s, l)
            pred22 = params.predecir(contenido_b22, emo_a22, s, l)
            errores.append(float(cross_reconstruction_loss(pred11, pred22, gt11.coeffs, gt22.coeffs)))
            # Mismas predicciones contra la emoción equivocada: (c1, e2) y (c2, e1)
            T11, T22 = min(pred11.shape[0], a.gt.T), min(pred22.shape[0], b.gt.T)
            barajados.append(float(cross_reconstruction_loss(pred11[:T11], pred22[:T22],
                                                             a.gt.coeffs[:T11], b.gt.coeffs[:T22])))
    return {
        "error_cruzado": float(np.mean(errores)),
        "error_cruzado_emocion_barajada": float(np.mean(barajados)),
        "n_pares": len(errores),
    }


def evaluate(params: ModeloAnimacion, dataset: ConjuntoDatos, rig: Optional[RigTemplateSet] = None) -> Dict:
    """
    Métricas sobre la partición de prueba: LVE, EVE, error medio de labios
    (mm, promediados por cuadro), exactitud de emoción y error cruzado contra
    la línea base de emoción barajada.
    """
    prueba = dataset.particion(PARTICION_PRUEBA)
    if len(prueba) == 0:
        raise ErrorConfiguracion("La partición de prueba está vacía; no hay nada que evaluar")
    rig = rig if rig is not None else make_synthetic_rig(VERTICES_ESCRITORIO, 0)

    predicciones, aciertos = {}, []
    for entrada in prueba:
        clip = entrada.clip
        predicciones[entrada.nombre] = infer(params, clip, clip.level, clip.speaker_id)
        aciertos.append(int(np.argmax(probabilidades_emocion(params, clip))) == clip.emotion_id)

    df = evaluar_predicciones(predicciones, prueba, rig)
    reporte = {
        "lve_mm": _promedio_por_cuadros(df, "lve_mm"),
        "eve_mm": _promedio_por_cuadros(df, "eve_mm"),
        "lip_avg_mm": _promedio_por_cuadros(df, "lip_avg_mm"),
        "exactitud_emocion": float(np.mean(aciertos)),
        "n_clips": len(df),
        "n_cuadros": int(df["n_cuadros"].sum()),
        **_error_cruzado_prueba(params, prueba),
    }
    logger.info("Evaluación: LVE %.3f mm, EVE %.3f mm, labios %.3f mm, exactitud %.2f",
                reporte["lve_mm"], reporte["eve_mm"], reporte["lip_avg_mm"], reporte["exactitud_emocion"])
    return reporte
