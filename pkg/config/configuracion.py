"""
Configuración tipada del pipeline.

Un archivo TOML legible (config/animacion.toml) más sobrescrituras desde la
línea de comandos; las banderas siempre ganan.
"""
import os
import sys

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, Optional

from config.opciones import (
    EMOCIONES,
    ENV_SALIDA,
    MAX_CONTENIDOS,
    N_ESTILOS,
    NIVELES,
    PRESETS_CODIFICADOR,
    PRESETS_FUSION,
    SALIDA_DEFECTO,
    VERTICES_ESCRITORIO,
    VERTICES_MINIMOS,
)
from utils.errores import ErrorConfiguracion

RUTA_CONFIG_DEFECTO = Path(__file__).parent / "animacion.toml"


# ======================
# CODIFICADORES DE AUDIO
# ======================
@dataclass(frozen=True)
class EncoderConfig:
    d_model: int = 64
    n_blocks: int = 2
    n_heads: int = 4
    d_inner: Optional[int] = None
    conv_frontend_frozen: bool = True
    n_emotions: int = 4
    canales_frontend: int = 32

    @property
    def d_ffn(self) -> int:
        return self.d_inner if self.d_inner is not None else 4 * self.d_model

    def validar(self) -> "EncoderConfig":
        if min(self.d_model, self.n_blocks, self.n_heads, self.n_emotions, self.canales_frontend) < 1:
            raise ErrorConfiguracion(f"Dimensiones del codificador deben ser positivas: {self}")
        if self.d_model % self.n_heads != 0:
            raise ErrorConfiguracion(
                f"d_model={self.d_model} debe ser divisible entre n_heads={self.n_heads}"
            )
        if self.d_ffn < 1:
            raise ErrorConfiguracion(f"d_inner inválido: {self.d_inner}")
        return self


# ======================
# DECODIFICADOR DE FUSIÓN
# ======================
@dataclass(frozen=True)
class FusionConfig:
    d_emotion: int = 32
    d_content: int = 64
    d_style: int = 8
    d_level: int = 8
    n_heads: int = 4
    ppe_period: int = 30
    n_styles: int = N_ESTILOS
    n_levels: int = len(NIVELES)
    n_decoder_blocks: int = 1
    atencion_emocional: bool = True

    @property
    def d_fused(self) -> int:
        return self.d_emotion + self.d_content + self.d_style + self.d_level

    def validar(self) -> "FusionConfig":
        valores = (self.d_emotion, self.d_content, self.d_style, self.d_level, self.n_heads,
                   self.ppe_period, self.n_styles, self.n_levels, self.n_decoder_blocks)
        if min(valores) < 1:
            raise ErrorConfiguracion(f"Dimensiones de fusión deben ser positivas: {self}")
        if self.d_fused % self.n_heads != 0:
            raise ErrorConfiguracion(
                f"d_fused={self.d_fused} debe ser divisible entre n_heads={self.n_heads}"
            )
        if self.d_fused % 2 != 0:
            raise ErrorConfiguracion(f"d_fused={self.d_fused} debe ser par para la codificación posicional")
        return self


@dataclass(frozen=True)
class ConfigModelo:
    codificador: EncoderConfig = field(default_factory=EncoderConfig)
    fusion: FusionConfig = field(default_factory=FusionConfig)
    semilla: int = 0
    precision: str = "float32"

    def validar(self) -> "ConfigModelo":
        self.codificador.validar()
        self.fusion.validar()
        if self.precision not in ("float32", "float64"):
            raise ErrorConfiguracion(f"precision debe ser 'float32' o 'float64', se recibió {self.precision!r}")
        return self


def config_modelo_preset(nombre: str, **cambios) -> ConfigModelo:
    """ConfigModelo con las dimensiones de un preset ('escritorio' o 'completa')."""
    if nombre not in PRESETS_CODIFICADOR:
        raise ErrorConfiguracion(f"Preset desconocido: {nombre}. Opciones: {list(PRESETS_CODIFICADOR)}")
    return ConfigModelo(
        codificador=EncoderConfig(**PRESETS_CODIFICADOR[nombre]),
        fusion=FusionConfig(**PRESETS_FUSION[nombre]),
        **cambios,
    ).validar()


# ======================
# PÉRDIDAS Y ENTRENAMIENTO
# ======================
@dataclass(frozen=True)
class LossWeights:
    cross: float = 1.0
    self_rec: float = 1.0
    velocity: float = 0.5
    classification: float = 0.1

    def validar(self) -> "LossWeights":
        for nombre, valor in asdict(self).items():
            if not (valor >= 0.0 and valor < float("inf")):
                raise ErrorConfiguracion(f"Peso λ '{nombre}' debe ser finito y no negativo, se recibió {valor}")
        return self


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-4
    batch_size: int = 8
    epochs: int = 10
    pasos_por_epoca: int = 20
    seed: int = 0
    pesos: LossWeights = field(default_factory=LossWeights)

    def validar(self) -> "TrainConfig":
        if not self.learning_rate > 0:
            raise ErrorConfiguracion(f"learning_rate debe ser > 0, se recibió {self.learning_rate}")
        if self.batch_size < 1:
            raise ErrorConfiguracion(f"batch_size debe ser >= 1, se recibió {self.batch_size}")
        if self.epochs < 0 or self.pasos_por_epoca < 1:
            raise ErrorConfiguracion("epochs debe ser >= 0 y pasos_por_epoca >= 1")
        self.pesos.validar()
        return self


# ======================
# CONJUNTO Y RIG
# ======================
@dataclass(frozen=True)
class DatasetSpec:
    contenidos: int = 3
    emociones: int = 3
    hablantes: int = 2
    niveles: int = len(NIVELES)
    clips_por_celda: int = 2
    tomas_prueba: int = 1
    duracion_s: float = 1.0
    suavizar: bool = False

    def validar(self) -> "DatasetSpec":
        if min(self.contenidos, self.emociones, self.hablantes, self.niveles, self.clips_por_celda) < 1:
            raise ErrorConfiguracion(f"La rejilla del conjunto debe tener al menos 1 en cada factor: {self}")
        if self.contenidos > MAX_CONTENIDOS:
            raise ErrorConfiguracion(f"Máximo {MAX_CONTENIDOS} contenidos (portadora bajo Nyquist), se pidieron {self.contenidos}")
        if self.emociones > len(EMOCIONES):
            raise ErrorConfiguracion(f"Máximo {len(EMOCIONES)} emociones, se pidieron {self.emociones}")
        if self.niveles > len(NIVELES):
            raise ErrorConfiguracion(f"Máximo {len(NIVELES)} niveles, se pidieron {self.niveles}")
        if self.hablantes > N_ESTILOS:
            raise ErrorConfiguracion(f"Máximo {N_ESTILOS} hablantes (estilos), se pidieron {self.hablantes}")
        if not 0 <= self.tomas_prueba < self.clips_por_celda:
            raise ErrorConfiguracion(
                f"tomas_prueba={self.tomas_prueba} debe ser menor que clips_por_celda={self.clips_por_celda}"
            )
        if not self.duracion_s > 0:
            raise ErrorConfiguracion(f"duracion_s debe ser > 0, se recibió {self.duracion_s}")
        return self


@dataclass(frozen=True)
class RigSpec:
    vertices: int = VERTICES_ESCRITORIO
    semilla: int = 0
    ruta: Optional[str] = None
    mascara_labios: Optional[str] = None
    mascara_ojos_frente: Optional[str] = None

    def validar(self) -> "RigSpec":
        if self.vertices < VERTICES_MINIMOS:
            raise ErrorConfiguracion(f"El rig necesita al menos {VERTICES_MINIMOS} vértices, se pidieron {self.vertices}")
        for ruta in (self.ruta, self.mascara_labios, self.mascara_ojos_frente):
            if ruta is not None and not Path(ruta).exists():
                raise ErrorConfiguracion(f"No existe el archivo o directorio: {ruta}")
        return self


def dir_salida_defecto() -> str:
    return os.environ.get(ENV_SALIDA, SALIDA_DEFECTO)


@dataclass(frozen=True)
class RunConfig:
    modelo: ConfigModelo = field(default_factory=ConfigModelo)
    entrenamiento: TrainConfig = field(default_factory=TrainConfig)
    conjunto: DatasetSpec = field(default_factory=DatasetSpec)
    rig: RigSpec = field(default_factory=RigSpec)
    dir_salida: str = field(default_factory=dir_salida_defecto)
    semilla: int = 0

    def validar(self) -> "RunConfig":
        self.modelo.validar()
        self.entrenamiento.validar()
        self.conjunto.validar()
        self.rig.validar()
        if self.conjunto.emociones > self.modelo.codificador.n_emotions:
            raise ErrorConfiguracion(
                f"El conjunto tiene {self.conjunto.emociones} emociones pero el clasificador solo "
                f"{self.modelo.codificador.n_emotions}"
            )
        if self.conjunto.hablantes > self.modelo.fusion.n_styles:
            raise ErrorConfiguracion("Hay más hablantes que estilos en el decodificador")
        if self.conjunto.niveles > self.modelo.fusion.n_levels:
            raise ErrorConfiguracion("Hay más niveles que filas en la tabla de niveles")
        return self

    def con_semilla(self, semilla: int) -> "RunConfig":
        """Propaga una sola semilla a todas las fuentes de aleatoriedad."""
        return replace(
            self,
            semilla=semilla,
            modelo=replace(self.modelo, semilla=semilla),
            entrenamiento=replace(self.entrenamiento, seed=semilla),
            rig=replace(self.rig, semilla=semilla),
        )


# ------------------ Carga desde TOML ------------------
def _construir(cls, datos: Dict[str, Any]):
    """Instancia un dataclass rechazando llaves desconocidas."""
    nombres = {f.name for f in fields(cls)}
    desconocidas = set(datos) - nombres
    if desconocidas:
        raise ErrorConfiguracion(f"Llaves desconocidas en [{cls.__name__}]: {sorted(desconocidas)}")
    return cls(**datos)


def run_config_desde_dict(datos: Dict[str, Any]) -> RunConfig:
    datos = dict(datos)
    preset = datos.pop("preset", "escritorio")
    if preset not in PRESETS_CODIFICADOR:
        raise ErrorConfiguracion(f"Preset desconocido: {preset}")

    modelo_raw = dict(datos.pop("modelo", {}))
    codificador = _construir(EncoderConfig, {**PRESETS_CODIFICADOR[preset], **modelo_raw.pop("codificador", {})})
    fusion = _construir(FusionConfig, {**PRESETS_FUSION[preset], **modelo_raw.pop("fusion", {})})
    modelo = _construir(ConfigModelo, {**modelo_raw, "codificador": codificador, "fusion": fusion})

    entrenamiento_raw = dict(datos.pop("entrenamiento", {}))
    pesos = _construir(LossWeights, entrenamiento_raw.pop("pesos", {}))
    entrenamiento = _construir(TrainConfig, {**entrenamiento_raw, "pesos": pesos})

    conjunto = _construir(DatasetSpec, datos.pop("conjunto", {}))
    rig = _construir(RigSpec, datos.pop("rig", {}))
    semilla = int(datos.pop("semilla", 0))
    dir_salida = datos.pop("dir_salida", None) or dir_salida_defecto()
    if datos:
        raise ErrorConfiguracion(f"Secciones desconocidas en la configuración: {sorted(datos)}")

    config = RunConfig(modelo=modelo, entrenamiento=entrenamiento, conjunto=conjunto,
                       rig=rig, dir_salida=dir_salida, semilla=semilla)
    return config.con_semilla(semilla)


def _fusionar(base: Dict[str, Any], cambios: Dict[str, Any]) -> Dict[str, Any]:
    resultado = dict(base)
    for llave, valor in cambios.items():
        if isinstance(valor, dict) and isinstance(resultado.get(llave), dict):
            resultado[llave] = _fusionar(resultado[llave], valor)
        else:
            resultado[llave] = valor
    return resultado


def cargar_run_config(ruta: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """
    Lee la configuración TOML y aplica las sobrescrituras de la línea de comandos.

    overrides usa la misma estructura anidada que el TOML, p. ej.
    {"entrenamiento": {"epochs": 3}, "semilla": 7}.
    """
    ruta = Path(ruta) if ruta else RUTA_CONFIG_DEFECTO
    if not ruta.exists():
        raise ErrorConfiguracion(f"No existe el archivo de configuración: {ruta}")
    with open(ruta, "rb") as f:
        try:
            datos = tomllib.load(f)
        except tomllib.TOMLDecodeError as e:
            raise ErrorConfiguracion(f"TOML inválido en {ruta}: {e}") from e
    datos = _fusionar(datos, overrides or {})
    return run_config_desde_dict(datos).validar()
