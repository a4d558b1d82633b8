import argparse
from pathlib import Path
from typing import Any, Dict

from config import io_utils
from config.configuracion import RunConfig
from utils.logger import get_logger
from utils.rig_metricas import MODOS_BLEND, blend_sequence, cargar_rig, exportar_obj_secuencia, rig_desde_spec

logger = get_logger(__name__)

AYUDA = "Convierte un CSV de blendshapes en una secuencia de mallas OBJ"


def registrar(parser: argparse.ArgumentParser):
    parser.add_argument("--csv", required=True)
    parser.add_argument("--rig", help="Directorio de rig; sin él se usa el rig sintético de la configuración")
    parser.add_argument("--modo", choices=MODOS_BLEND, default="delta")
    parser.add_argument("--salida", help="Directorio de los OBJ (por defecto junto al CSV)")


def overrides(args: argparse.Namespace) -> Dict[str, Any]:
    return {}


def ejecutar(args: argparse.Namespace, config: RunConfig) -> Path:
    seq = io_utils.cargar_csv_blendshapes(args.csv)
    rig = cargar_rig(args.rig) if args.rig else rig_desde_spec(config.rig)
    csv = Path(args.csv)
    directorio = Path(args.salida) if args.salida else csv.parent / f"{csv.stem}_obj"
    n = exportar_obj_secuencia(rig, blend_sequence(rig, seq, args.modo), directorio)
    logger.info("%d mallas OBJ en %s (modo %s)", n, directorio, args.modo)
    return directorio
