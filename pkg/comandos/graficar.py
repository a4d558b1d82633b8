import argparse
from pathlib import Path
from typing import Any, Dict

from config import io_utils
from config.configuracion import RunConfig
from utils.graficas import grafica_coeficientes, grafica_perdidas
from utils.logger import get_logger

logger = get_logger(__name__)

AYUDA = "Grafica coeficientes de un CSV o las curvas de pérdida de una bitácora (PNG)"


def registrar(parser: argparse.ArgumentParser):
    fuente = parser.add_mutually_exclusive_group(required=True)
    fuente.add_argument("--csv", help="CSV de blendshapes")
    fuente.add_argument("--bitacora", help="Bitácora JSONL de pérdidas")
    parser.add_argument("--salida", help="PNG de salida (por defecto junto a la entrada)")


def overrides(args: argparse.Namespace) -> Dict[str, Any]:
    return {}


def ejecutar(args: argparse.Namespace, config: RunConfig) -> Path:
    entrada = Path(args.csv or args.bitacora)
    ruta = Path(args.salida) if args.salida else entrada.with_suffix(".png")
    if args.csv:
        grafica_coeficientes(io_utils.cargar_csv_blendshapes(entrada), ruta, titulo=entrada.stem)
    else:
        grafica_perdidas(io_utils.leer_jsonl(entrada), ruta)
    return ruta
