"""
Jerarquía de excepciones del simulador.
Cada comando de la línea de comandos traduce estas excepciones a un código de salida.
"""


class KGSError(Exception):
    """Excepción base de la aplicación."""


class ConfigurationError(KGSError, ValueError):
    """Parámetros inválidos (malla, paso temporal, lista de n, rango de p...)."""


class GridMismatchError(KGSError, ValueError):
    """Campos o muestras definidos sobre mallas distintas o con forma incorrecta."""


class BlowUpError(KGSError, ArithmeticError):
    """
    La integración produjo NaN/Inf o una norma por encima del umbral.

    Attributes:
        t (float): Instante en el que se detectó el fallo.
        records (list): Registros de observables calculados antes del fallo.
    """

    def __init__(self, message, t, records=None):
        super().__init__(message)
        self.t = t
        self.records = list(records or [])


class HorizonTooLargeError(KGSError):
    """
    La iteración de Picard no contrae en el horizonte pedido.

    Attributes:
        increments (list): Historial de incrementos sup-en-tiempo por barrido.
    """

    def __init__(self, message, increments=None):
        super().__init__(message)
        self.increments = list(increments or [])


class SamplingError(KGSError, ValueError):
    """Trayectoria demasiado escasa o no uniforme para diferencias finitas."""


class PropertyViolation(KGSError, AssertionError):
    """Una desigualdad exacta no se cumple dentro de una suite de propiedades."""


class CheckpointError(KGSError, ValueError):
    """Archivo de checkpoint con cabecera inválida o truncado."""
