"""
Módulo de utilidades para el laboratorio de Klein-Gordon-Schrödinger.
Contiene constantes, estilos de gráficos y la configuración del registro de eventos
reutilizables en toda la aplicación.
"""

import logging

TOOL_VERSION = '1.0.0'

# Códigos de salida de la línea de comandos
EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2
EXIT_PROPERTY = 3

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


def configure_logging(verbose=False):
    """
    Configura el registro de eventos de la aplicación.

    Args:
        verbose (bool, optional): Si es True se usa el nivel DEBUG; por defecto INFO.
    """
    logging.basicConfig(level=logging.DEBUG if verbose else logging.INFO, format=LOG_FORMAT, force=True)


# Colores de las series
LINE_COLOR = '#6A5ACD'
SERIES_COLORS = ['#6A5ACD', '#E74C3C', '#2ECC71', '#F39C12', '#3498DB', '#8E44AD', '#16A085']

# Estilo común de ejes
axis_style = {
    'title_font': dict(size=14),
    'tickfont': dict(size=12),
    'gridcolor': '#EEEEEE',
}

# Estilo común del diseño de las figuras
layout_style = {
    'plot_bgcolor': 'white',
    'hovermode': 'x unified',
    'margin': dict(l=40, r=40, t=50, b=40),
}


def title_style(text):
    """Título centrado con el formato común de las figuras."""
    return {'text': text, 'x': 0.5, 'xanchor': 'center'}
