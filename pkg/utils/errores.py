"""
Excepciones del proyecto.

Todas heredan de ValueError para que el código que ya atrapa ValueError
siga funcionando.
"""


class ErrorAnimacion(ValueError):
    """Base de los errores del pipeline de animación."""


class ErrorRango(ErrorAnimacion):
    """Identificador (contenido, emoción, nivel, hablante, estilo) fuera de rango."""


class ErrorLongitud(ErrorAnimacion):
    """Secuencia o audio demasiado corto para la operación."""


class ErrorAlineacion(ErrorAnimacion):
    """Número de cuadros o forma distinta entre entradas que deben coincidir."""


class ErrorForma(ErrorAnimacion):
    """Arreglo con forma inválida (p. ej. distinto de 52 coeficientes)."""


class ErrorAgotamiento(ErrorAnimacion):
    """No existe ningún par cruzado válido en el conjunto."""


class ErrorNumerico(ErrorAnimacion):
    """Pérdida o valor no finito."""


class ErrorConfiguracion(ErrorAnimacion):
    """Configuración inválida, máscara vacía o archivo faltante."""


class ErrorVersion(ErrorAnimacion):
    """Checkpoint con formato desconocido o versión incompatible."""
