import argparse
from pathlib import Path
from typing import Any, Dict

from config import io_utils
from config.configuracion import RunConfig
from config.opciones import NOMBRE_BITACORA, NOMBRE_CHECKPOINT, NOMBRE_REPORTE
from utils.datos import PARTICION_ENTRENAMIENTO, ConjuntoDatos, generar_conjunto
from utils.entrenamiento import cargar_estado, crear_estado, entrenar, evaluate, guardar_estado
from utils.logger import get_logger
from utils.modelo import crear_modelo
from utils.rig_metricas import rig_desde_spec

logger = get_logger(__name__)

AYUDA = "Entrena el modelo y evalúa en la partición de prueba"


def registrar(parser: argparse.ArgumentParser):
    parser.add_argument("--datos", help="Directorio de gen-data; sin él se genera el conjunto en memoria")
    parser.add_argument("--salida", help="Directorio de la corrida (por defecto <salida>/entrenamiento)")
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--pasos", type=int, dest="pasos_por_epoca", help="Pasos por época")
    parser.add_argument("--lr", type=float, dest="learning_rate")
    parser.add_argument("--batch", type=int, dest="batch_size")
    parser.add_argument("--resume", help="Checkpoint desde el cual continuar")


def overrides(args: argparse.Namespace) -> Dict[str, Any]:
    entrenamiento = {llave: getattr(args, llave)
                     for llave in ("epochs", "pasos_por_epoca", "learning_rate", "batch_size")
                     if getattr(args, llave) is not None}
    return {"entrenamiento": entrenamiento} if entrenamiento else {}


def cargar_o_generar(ruta_datos, config: RunConfig) -> ConjuntoDatos:
    if ruta_datos:
        return io_utils.cargar_conjunto(ruta_datos)
    return generar_conjunto(config.conjunto, config.semilla)


def ejecutar(args: argparse.Namespace, config: RunConfig) -> Path:
    directorio = io_utils.asegurar_directorio(args.salida or Path(config.dir_salida) / "entrenamiento")
    conjunto = cargar_o_generar(args.datos, config)
    bitacora = directorio / NOMBRE_BITACORA

    if args.resume:
        estado = cargar_estado(args.resume)
        for grupo in estado.optimizador.param_groups:
            grupo["lr"] = config.entrenamiento.learning_rate
    else:
        estado = crear_estado(config.modelo, config.entrenamiento)
        bitacora.unlink(missing_ok=True)

    entrenar(estado, conjunto.particion(PARTICION_ENTRENAMIENTO), config.entrenamiento, bitacora)
    ruta_checkpoint = directorio / NOMBRE_CHECKPOINT
    guardar_estado(estado, ruta_checkpoint)

    rig = rig_desde_spec(config.rig)
    reporte = {
        "pasos": estado.paso,
        "entrenado": evaluate(estado.modelo, conjunto, rig),
        "sin_entrenar": evaluate(crear_modelo(estado.modelo.config), conjunto, rig),
    }
    io_utils.guardar_json(directorio / NOMBRE_REPORTE, reporte)
    logger.info("Corrida terminada en %s", directorio)
    return ruta_checkpoint
