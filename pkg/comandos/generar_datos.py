import argparse
from dataclasses import asdict
from pathlib import Path
from typing import Any, Dict

import numpy as np

from config import io_utils
from config.configuracion import RunConfig
from config.opciones import REGIONES_CANALES
from utils.datos import generar_conjunto
from utils.logger import get_logger
from utils.rig_metricas import blend_sequence, guardar_rig, rig_desde_spec

logger = get_logger(__name__)

AYUDA = "Genera el conjunto sintético (WAV + CSV por clip y manifiesto)"


def registrar(parser: argparse.ArgumentParser):
    parser.add_argument("--salida", help="Directorio del conjunto (por defecto <salida>/datos)")
    parser.add_argument("--smooth", action="store_true", help="Suaviza la verdad con Savitzky-Golay (5, 2)")
    parser.add_argument("--rig", action="store_true", help="Guarda también el rig y los vértices de cada clip")
    parser.add_argument("--contenidos", type=int)
    parser.add_argument("--emociones", type=int)
    parser.add_argument("--hablantes", type=int)
    parser.add_argument("--niveles", type=int)
    parser.add_argument("--clips", type=int, dest="clips_por_celda", help="Clips (tomas) por celda")
    parser.add_argument("--tomas-prueba", type=int, dest="tomas_prueba")
    parser.add_argument("--duracion", type=float, dest="duracion_s", help="Duración de cada clip (s)")


def overrides(args: argparse.Namespace) -> Dict[str, Any]:
    conjunto = {llave: getattr(args, llave)
                for llave in ("contenidos", "emociones", "hablantes", "niveles", "clips_por_celda",
                              "tomas_prueba", "duracion_s")
                if getattr(args, llave) is not None}
    if args.smooth:
        conjunto["suavizar"] = True
    return {"conjunto": conjunto} if conjunto else {}


def ejecutar(args: argparse.Namespace, config: RunConfig) -> Path:
    directorio = Path(args.salida) if args.salida else Path(config.dir_salida) / "datos"
    conjunto = generar_conjunto(config.conjunto, config.semilla)
    ruta = io_utils.guardar_conjunto(conjunto, directorio, asdict(config.conjunto), config.semilla)

    dir_mascaras = io_utils.asegurar_directorio(directorio / "mascaras")
    for region, canales in REGIONES_CANALES.items():
        io_utils.guardar_mascara(dir_mascaras / f"canales_{region}.txt", canales)

    if args.rig:
        rig = rig_desde_spec(config.rig)
        guardar_rig(rig, directorio / "rig")
        dir_vertices = io_utils.asegurar_directorio(directorio / "vertices")
        for entrada in conjunto:
            np.save(dir_vertices / f"{entrada.nombre}.npy", blend_sequence(rig, entrada.gt))
        logger.info("Rig y vértices guardados (V=%d)", rig.V)

    logger.info("Manifiesto: %s (sha256 %s)", ruta, io_utils.hash_archivo(ruta)[:12])
    return ruta
