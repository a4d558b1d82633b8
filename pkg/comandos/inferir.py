import argparse
from pathlib import Path
from typing import Any, Dict

from config import io_utils
from config.configuracion import RunConfig
from utils.entrenamiento import cargar_modelo, infer
from utils.logger import get_logger
from utils.rig_metricas import blend_sequence, cargar_rig, exportar_obj_secuencia, rig_desde_spec

logger = get_logger(__name__)

AYUDA = "Predice coeficientes de blendshapes para un WAV"

RIG_SINTETICO = "sintetico"


def registrar(parser: argparse.ArgumentParser):
    parser.add_argument("--checkpoint", required=True)
    parser.add_argument("--wav", required=True)
    parser.add_argument("--level", type=int, default=0, help="Nivel de intensidad (0 bajo, 1 alto)")
    parser.add_argument("--style", type=int, default=0, help="Identificador de estilo (hablante)")
    parser.add_argument("--salida", help="CSV de salida (por defecto <salida>/inferencia/<wav>.csv)")
    parser.add_argument("--rig", help=f"Directorio de rig o '{RIG_SINTETICO}'; escribe un OBJ por cuadro")
    parser.add_argument("--clamp", action="store_true", help="Recorta los coeficientes a [0, 1]")


def overrides(args: argparse.Namespace) -> Dict[str, Any]:
    return {}


def ejecutar(args: argparse.Namespace, config: RunConfig) -> Path:
    modelo = cargar_modelo(args.checkpoint)
    clip = io_utils.cargar_wav(args.wav, level=args.level, speaker_id=args.style)
    seq = infer(modelo, clip, args.level, args.style, recortar=args.clamp)

    ruta = Path(args.salida) if args.salida else Path(config.dir_salida) / "inferencia" / f"{Path(args.wav).stem}.csv"
    io_utils.asegurar_directorio(ruta.parent)
    io_utils.guardar_csv_blendshapes(ruta, seq)
    logger.info("Inferencia: %d cuadros -> %s", seq.T, ruta)

    if args.rig:
        rig = rig_desde_spec(config.rig) if args.rig == RIG_SINTETICO else cargar_rig(args.rig)
        n = exportar_obj_secuencia(rig, blend_sequence(rig, seq), ruta.parent / f"{ruta.stem}_obj")
        logger.info("%d mallas OBJ exportadas", n)
    return ruta
