import argparse
from pathlib import Path
from typing import Any, Dict

from comandos.entrenar import cargar_o_generar
from config import io_utils
from config.configuracion import RunConfig
from config.opciones import NOMBRE_REPORTE
from utils.entrenamiento import cargar_modelo, evaluate
from utils.logger import get_logger
from utils.rig_metricas import rig_desde_spec

logger = get_logger(__name__)

AYUDA = "Evalúa un checkpoint (LVE, EVE, error medio de labios, exactitud de emoción)"


def registrar(parser: argparse.ArgumentParser):
    parser.add_argument("--checkpoint", required=True)
    parser.add_argument("--datos", help="Directorio de gen-data; sin él se genera el conjunto en memoria")
    parser.add_argument("--rig", help="Directorio de rig guardado")
    parser.add_argument("--mascara-labios", dest="mascara_labios")
    parser.add_argument("--mascara-ojos", dest="mascara_ojos_frente")
    parser.add_argument("--salida", help="JSON del reporte (por defecto <salida>/reporte_evaluacion.json)")


def overrides(args: argparse.Namespace) -> Dict[str, Any]:
    rig = {"ruta": args.rig, "mascara_labios": args.mascara_labios,
           "mascara_ojos_frente": args.mascara_ojos_frente}
    rig = {llave: valor for llave, valor in rig.items() if valor is not None}
    return {"rig": rig} if rig else {}


def ejecutar(args: argparse.Namespace, config: RunConfig) -> Path:
    modelo = cargar_modelo(args.checkpoint)
    conjunto = cargar_o_generar(args.datos, config)
    reporte = evaluate(modelo, conjunto, rig_desde_spec(config.rig))

    ruta = Path(args.salida) if args.salida else Path(config.dir_salida) / NOMBRE_REPORTE
    io_utils.asegurar_directorio(ruta.parent)
    io_utils.guardar_json(ruta, reporte)
    logger.info("Reporte de evaluación en %s", ruta)
    return ruta
