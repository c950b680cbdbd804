"""
Módulo para la creación de visualizaciones y gráficos.
Contiene funciones para crear las figuras de un experimento (deriva de las
cantidades conservadas, normas triples, envolvente de crecimiento y diferencias
de Cauchy) y para guardarlas como HTML.
"""

import logging
import os

import numpy as np
import pandas as pd
import plotly.express as px

from src.utils.utils import LINE_COLOR, SERIES_COLORS, axis_style, layout_style, title_style

logger = logging.getLogger(__name__)


def _style(fig, title, x_title, y_title, log_x=False, log_y=False):
    fig.update_xaxes(title_text=x_title, **axis_style)
    fig.update_yaxes(title_text=y_title, **axis_style)
    if log_x:
        fig.update_xaxes(type='log')
    if log_y:
        fig.update_yaxes(type='log')
    fig.update_layout(title=title_style(title), **layout_style)
    return fig


def create_conservation_chart(frame):
    """
    Crea un gráfico de línea con la deriva relativa de Q, E_n y F_n.

    Args:
        frame (pandas.DataFrame): Registros de observables (columnas del CSV).

    Returns:
        plotly.graph_objects.Figure: Figura de la deriva.
    """
    drift = pd.DataFrame({'t': frame['t']})
    for column in ('Q', 'En', 'Fn'):
        initial = frame[column].iloc[0]
        scale = abs(initial) if initial != 0 else 1.0
        drift[column] = (frame[column] - initial) / scale
    long_form = drift.melt(id_vars='t', var_name='CANTIDAD', value_name='DERIVA')

    fig = px.line(
        long_form,
        x='t',
        y='DERIVA',
        color='CANTIDAD',
        color_discrete_sequence=SERIES_COLORS,
        labels={'t': 'Tiempo', 'DERIVA': 'Deriva relativa', 'CANTIDAD': 'Cantidad'},
    )
    fig.update_traces(line=dict(width=3))
    return _style(fig, 'Deriva de las cantidades conservadas', 'Tiempo', 'Deriva relativa')


def create_norms_chart(frame):
    """
    Crea un gráfico de línea con las normas triples H¹⊕H¹⊕L² y H²⊕H²⊕H¹.

    Args:
        frame (pandas.DataFrame): Registros de observables.

    Returns:
        plotly.graph_objects.Figure: Figura de las normas.
    """
    triples = pd.DataFrame({
        't': frame['t'],
        'H1': frame['h1_u'] ** 2 + frame['h1_v'] ** 2 + frame['l2_vt'] ** 2,
        'H2': frame['h2_u'] ** 2 + frame['h2_v'] ** 2 + frame['h1_vt'] ** 2,
    })
    fig = px.line(
        triples.melt(id_vars='t', var_name='NORMA', value_name='VALOR'),
        x='t',
        y='VALOR',
        color='NORMA',
        color_discrete_sequence=SERIES_COLORS,
        labels={'t': 'Tiempo', 'VALOR': 'Norma al cuadrado', 'NORMA': 'Norma'},
    )
    fig.update_traces(line=dict(width=3))
    return _style(fig, 'Normas triples a lo largo de la trayectoria', 'Tiempo', 'Norma al cuadrado')


def create_envelope_chart(times, h2_values, model):
    """
    Crea un gráfico log-log del crecimiento medido y de la envolvente ajustada.

    Args:
        times (sequence): Instantes.
        h2_values (sequence): Norma triple H²⊕H²⊕H¹.
        model (EnvelopeModel): Modelo ajustado.

    Returns:
        plotly.graph_objects.Figure: Figura de la envolvente.
    """
    times = np.asarray(times, dtype=float)
    growth = np.maximum.accumulate(np.abs(np.asarray(h2_values, dtype=float) - model.C_prime))
    positive = times > 0
    frame = pd.DataFrame({'t': times[positive], 'Medido': growth[positive]})
    if model.exponent > 0:
        frame['Ajuste'] = model.C * times[positive] ** model.exponent

    fig = px.line(
        frame.melt(id_vars='t', var_name='SERIE', value_name='CRECIMIENTO'),
        x='t',
        y='CRECIMIENTO',
        color='SERIE',
        color_discrete_sequence=SERIES_COLORS,
        labels={'t': 'Tiempo', 'CRECIMIENTO': '|h2(t) - h2(0)|', 'SERIE': 'Serie'},
    )
    fig.update_traces(line=dict(width=3))
    title = f'Envolvente de crecimiento (exponente {model.exponent:.3f}, cota {model.bound_exponent:.3f})'
    return _style(fig, title, 'Tiempo', '|h2(t) - h2(0)|', log_x=True, log_y=True)


def create_diff_chart(diff_frame):
    """
    Crea un gráfico log-log de las diferencias de Cauchy frente a n.

    Args:
        diff_frame (pandas.DataFrame): Una fila por par consecutivo (columnas m, h1_diff, l2_diff).

    Returns:
        plotly.graph_objects.Figure: Figura de las diferencias.
    """
    frame = diff_frame.rename(columns={'h1_diff': 'H¹⊕H¹⊕L²', 'l2_diff': 'L²⊕L²⊕H⁻¹'})
    fig = px.line(
        frame.melt(id_vars='m', value_vars=['H¹⊕H¹⊕L²', 'L²⊕L²⊕H⁻¹'], var_name='NORMA', value_name='DIFF'),
        x='m',
        y='DIFF',
        color='NORMA',
        markers=True,
        color_discrete_sequence=[LINE_COLOR, SERIES_COLORS[1]],
        labels={'m': 'n', 'DIFF': 'Diferencia sup-en-tiempo', 'NORMA': 'Norma'},
    )
    fig.update_traces(line=dict(width=3), marker=dict(size=10))
    return _style(fig, 'Diferencias de Cauchy de la familia regularizada', 'n', 'Diferencia',
                  log_x=True, log_y=True)


def save_figure(fig, path):
    """Guarda la figura como HTML con plotly.js desde CDN y un id de contenedor fijo."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    div_id = os.path.splitext(os.path.basename(path))[0]
    fig.write_html(path, include_plotlyjs='cdn', full_html=True, div_id=div_id)
    logger.info("Figura escrita en %s", path)
    return path
