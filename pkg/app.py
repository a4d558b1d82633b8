"""
Animación facial emocional 3D a partir de voz.

Uso: python app.py <comando> [opciones]
"""
import argparse
import sys
from typing import List, Optional

import torch

from comandos import convertir, entrenar, evaluar, generar_datos, graficar, inferir
from config.configuracion import cargar_run_config
from utils.errores import ErrorAnimacion
from utils.logger import get_logger

logger = get_logger(__name__)

# ======================
# REGISTRO DE COMANDOS
# ======================
COMANDOS = {
    "gen-data": generar_datos,
    "train":    entrenar,
    "infer":    inferir,
    "eval":     evaluar,
    "convert":  convertir,
    "plot":     graficar,
}


def construir_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="animacion", description="Animación facial emocional 3D a partir de voz")
    subparsers = parser.add_subparsers(dest="comando", required=True)
    for nombre, modulo in COMANDOS.items():
        sub = subparsers.add_parser(nombre, help=modulo.AYUDA, description=modulo.AYUDA)
        sub.add_argument("--config", help="Archivo TOML (por defecto config/animacion.toml)")
        sub.add_argument("--seed", type=int, help="Semilla única para todas las fuentes de aleatoriedad")
        modulo.registrar(sub)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = construir_parser().parse_args(argv)
    torch.use_deterministic_algorithms(True)
    modulo = COMANDOS[args.comando]
    try:
        cambios = modulo.overrides(args)
        if args.seed is not None:
            cambios["semilla"] = args.seed
        config = cargar_run_config(args.config, cambios)
        modulo.ejecutar(args, config)
    except (ErrorAnimacion, OSError) as e:
        logger.error("Error en %s: %s", args.comando, e, exc_info=True)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
