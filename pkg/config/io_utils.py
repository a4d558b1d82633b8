import hashlib
import json
from dataclasses import replace
from math import gcd
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Sequence, Union

import numpy as np
import pandas as pd
import torch
from scipy.io import wavfile
from scipy.signal import resample_poly

from config.opciones import FORMATO_CHECKPOINT, FPS, N_BLENDSHAPES, NOMBRE_MANIFIESTO, NOMBRES_CANALES, SAMPLE_RATE
from utils.datos import AudioClip, BlendshapeSequence, ConjuntoDatos, EntradaConjunto
from utils.errores import ErrorConfiguracion, ErrorForma, ErrorVersion
from utils.logger import get_logger

logger = get_logger(__name__)

Ruta = Union[str, Path]

RUTA_MASCARAS = Path(__file__).parent / "mascaras"
_PREFIJO_FPS = "# fps="


def asegurar_directorio(ruta: Ruta) -> Path:
    ruta = Path(ruta)
    ruta.mkdir(parents=True, exist_ok=True)
    return ruta


def hash_archivo(ruta: Ruta) -> str:
    return hashlib.sha256(Path(ruta).read_bytes()).hexdigest()


# ------------------ Audio ------------------
def guardar_wav(ruta: Ruta, samples: np.ndarray, sample_rate: int = SAMPLE_RATE):
    """WAV mono PCM16; las muestras fuera de [-1, 1] se recortan."""
    pcm = np.round(np.clip(np.asarray(samples, dtype=np.float64), -1.0, 1.0) * 32767).astype(np.int16)
    wavfile.write(str(ruta), sample_rate, pcm)


def cargar_wav(ruta: Ruta, content_id: int = 0, emotion_id: int = 0, level: int = 0,
               speaker_id: int = 0, toma: int = 0) -> AudioClip:
    """
    Lee un WAV (PCM16/PCM32/flotante, mono o estéreo) como AudioClip a 16 kHz.
    Otras frecuencias se remuestrean con un filtro polifásico.
    """
    try:
        sr, datos = wavfile.read(str(ruta))
    except (OSError, ValueError) as e:
        raise ErrorConfiguracion(f"No se pudo leer el WAV {ruta}: {e}") from e

    if np.issubdtype(datos.dtype, np.integer):
        datos = datos.astype(np.float64) / float(np.iinfo(datos.dtype).max)
    else:
        datos = datos.astype(np.float64)
    if datos.ndim == 2:
        datos = datos.mean(axis=1)
    if sr != SAMPLE_RATE:
        divisor = gcd(SAMPLE_RATE, sr)
        logger.info("Remuestreando %s de %d Hz a %d Hz", ruta, sr, SAMPLE_RATE)
        datos = resample_poly(datos, SAMPLE_RATE // divisor, sr // divisor)
    return AudioClip(samples=datos, content_id=content_id, emotion_id=emotion_id, level=level,
                     speaker_id=speaker_id, toma=toma)


# ------------------ Blendshapes CSV ------------------
def guardar_csv_blendshapes(ruta: Ruta, seq: BlendshapeSequence):
    """Primera línea '# fps=30', encabezado con los 52 nombres y una fila por cuadro."""
    df = pd.DataFrame(seq.coeffs, columns=list(NOMBRES_CANALES))
    with open(ruta, "w", encoding="utf-8", newline="") as f:
        f.write(f"{_PREFIJO_FPS}{seq.fps}\n")
        df.to_csv(f, index=False)


def cargar_csv_blendshapes(ruta: Ruta) -> BlendshapeSequence:
    ruta = Path(ruta)
    if not ruta.exists():
        raise ErrorConfiguracion(f"No existe el CSV de blendshapes: {ruta}")
    with open(ruta, "r", encoding="utf-8") as f:
        primera = f.readline().strip()
    if primera.startswith(_PREFIJO_FPS):
        fps = int(primera[len(_PREFIJO_FPS):])
        df = pd.read_csv(ruta, skiprows=1)
    else:
        fps = FPS
        df = pd.read_csv(ruta)
    if df.shape[1] != N_BLENDSHAPES:
        raise ErrorForma(f"El CSV {ruta.name} tiene {df.shape[1]} columnas, se esperaban {N_BLENDSHAPES}")
    if tuple(df.columns) != NOMBRES_CANALES:
        logger.warning("Encabezado no estándar en %s; se usa el orden de columnas tal cual", ruta.name)
    return BlendshapeSequence(coeffs=df.to_numpy(dtype=np.float64), fps=fps)


# ------------------ Máscaras ------------------
def guardar_mascara(ruta: Ruta, indices: Iterable[int]):
    Path(ruta).write_text("".join(f"{int(i)}\n" for i in indices), encoding="utf-8")


def cargar_mascara(ruta: Ruta, n_max: Optional[int] = None) -> np.ndarray:
    """Un índice entero por línea; líneas vacías y comentarios '#' se ignoran."""
    ruta = Path(ruta)
    if not ruta.exists():
        raise ErrorConfiguracion(f"No existe el archivo de máscara: {ruta}")
    indices = []
    for n, linea in enumerate(ruta.read_text(encoding="utf-8").splitlines(), start=1):
        linea = linea.strip()
        if not linea or linea.startswith("#"):
            continue
        try:
            indices.append(int(linea))
        except ValueError as e:
            raise ErrorConfiguracion(f"Índice inválido en {ruta.name}, línea {n}: {linea!r}") from e
    if not indices:
        raise ErrorConfiguracion(f"La máscara {ruta.name} está vacía")
    indices = np.array(indices, dtype=np.int64)
    if indices.min() < 0 or (n_max is not None and indices.max() >= n_max):
        raise ErrorConfiguracion(f"La máscara {ruta.name} tiene índices fuera de [0, {n_max})")
    return indices


def cargar_regiones_canales(directorio: Ruta = RUTA_MASCARAS) -> Dict[str, tuple]:
    """Regiones de canales desde canales_<region>.txt."""
    regiones = {}
    for ruta in sorted(Path(directorio).glob("canales_*.txt")):
        nombre = ruta.stem[len("canales_"):]
        regiones[nombre] = tuple(int(i) for i in cargar_mascara(ruta, N_BLENDSHAPES))
    if not regiones:
        raise ErrorConfiguracion(f"No hay archivos canales_*.txt en {directorio}")
    return regiones


# ------------------ JSON ------------------
def guardar_json(ruta: Ruta, datos: Dict[str, Any]):
    with open(ruta, "w", encoding="utf-8") as f:
        json.dump(datos, f, indent=2, sort_keys=True, ensure_ascii=False)
        f.write("\n")


def cargar_json(ruta: Ruta) -> Dict[str, Any]:
    ruta = Path(ruta)
    if not ruta.exists():
        raise ErrorConfiguracion(f"No existe el archivo: {ruta}")
    with open(ruta, "r", encoding="utf-8") as f:
        return json.load(f)


def agregar_jsonl(ruta: Ruta, linea: str):
    with open(ruta, "a", encoding="utf-8") as f:
        f.write(linea.rstrip("\n") + "\n")


def leer_jsonl(ruta: Ruta) -> pd.DataFrame:
    ruta = Path(ruta)
    if not ruta.exists():
        raise ErrorConfiguracion(f"No existe la bitácora: {ruta}")
    return pd.read_json(ruta, lines=True)


# ------------------ Mallas ------------------
def guardar_obj(ruta: Ruta, vertices: np.ndarray, caras: Sequence[Sequence[int]]):
    """OBJ con líneas 'v x y z' y caras triangulares (índices base 1)."""
    vertices = np.asarray(vertices)
    if vertices.ndim != 2 or vertices.shape[1] != 3:
        raise ErrorForma(f"Se esperaban vértices V×3, se recibió {vertices.shape}")
    lineas = [f"v {x:.9f} {y:.9f} {z:.9f}" for x, y, z in vertices]
    lineas += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in np.asarray(caras, dtype=np.int64)]
    Path(ruta).write_text("\n".join(lineas) + "\n", encoding="utf-8")


# ------------------ Checkpoints ------------------
def guardar_checkpoint(ruta: Ruta, contenido: Dict[str, Any]):
    torch.save({**contenido, "version": FORMATO_CHECKPOINT}, str(ruta))


def cargar_checkpoint(ruta: Ruta) -> Dict[str, Any]:
    ruta = Path(ruta)
    if not ruta.exists():
        raise ErrorConfiguracion(f"No existe el checkpoint: {ruta}")
    try:
        contenido = torch.load(str(ruta), map_location="cpu", weights_only=True)
    except Exception as e:
        raise ErrorVersion(f"Checkpoint ilegible {ruta.name}: {e}") from e
    if not isinstance(contenido, dict) or "version" not in contenido:
        raise ErrorVersion(f"{ruta.name} no es un checkpoint de este proyecto")
    if contenido["version"] != FORMATO_CHECKPOINT:
        raise ErrorVersion(
            f"Versión de checkpoint {contenido['version']} incompatible; se esperaba {FORMATO_CHECKPOINT}"
        )
    return contenido


# ------------------ Conjunto en disco ------------------
DIR_AUDIO = "audio"
DIR_BLENDSHAPES = "blendshapes"


def guardar_conjunto(conjunto: ConjuntoDatos, directorio: Ruta, spec: Dict[str, Any], semilla: int) -> Path:
    """WAV + CSV por clip y un manifiesto con las etiquetas de cada uno."""
    directorio = asegurar_directorio(directorio)
    asegurar_directorio(directorio / DIR_AUDIO)
    asegurar_directorio(directorio / DIR_BLENDSHAPES)
    clips = []
    for entrada in conjunto:
        wav = f"{DIR_AUDIO}/{entrada.nombre}.wav"
        csv = f"{DIR_BLENDSHAPES}/{entrada.nombre}.csv"
        guardar_wav(directorio / wav, entrada.clip.samples)
        guardar_csv_blendshapes(directorio / csv, entrada.gt)
        clips.append({"nombre": entrada.nombre, "wav": wav, "csv": csv, "particion": entrada.particion,
                      **entrada.clip.etiquetas})
    ruta = directorio / NOMBRE_MANIFIESTO
    guardar_json(ruta, {"semilla": semilla, "conjunto": spec, "clips": clips})
    logger.info("Conjunto guardado en %s (%d clips)", directorio, len(clips))
    return ruta


def cargar_conjunto(directorio: Ruta) -> ConjuntoDatos:
    directorio = Path(directorio)
    manifiesto = cargar_json(directorio / NOMBRE_MANIFIESTO)
    entradas = []
    for clip in manifiesto["clips"]:
        audio = cargar_wav(directorio / clip["wav"], content_id=clip["content_id"], emotion_id=clip["emotion_id"],
                           level=clip["level"], speaker_id=clip["speaker_id"], toma=clip["toma"])
        gt = replace(cargar_csv_blendshapes(directorio / clip["csv"]),
                     content_id=clip["content_id"], emotion_id=clip["emotion_id"])
        entradas.append(EntradaConjunto(clip=audio, gt=gt, particion=clip["particion"], nombre=clip["nombre"]))
    logger.info("Conjunto cargado de %s (%d clips)", directorio, len(entradas))
    return ConjuntoDatos(entradas)
