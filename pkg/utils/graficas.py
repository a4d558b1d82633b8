from pathlib import Path
from typing import Optional, Union

import pandas as pd
import plotly.express as px
import plotly.graph_objects as go
from plotly.subplots import make_subplots

from config.opciones import NOMBRES_CANALES, REGIONES_CANALES
from utils.datos import BlendshapeSequence
from utils.perdidas import TERMINOS
from utils.logger import get_logger

logger = get_logger(__name__)

# Paleta
_TEAL = "#14b8a6"
_INDIGO = "#6366f1"
_AMBER = "#f59e0b"
_PALETTE = [_TEAL, _INDIGO, _AMBER, "#2dd4bf", "#818cf8", "#fcd34d"]
_GRID = "rgba(0,0,0,0.08)"

# Fondo claro: las figuras se exportan como PNG estático
_PLOTLY_LAYOUT = dict(
    paper_bgcolor="white",
    plot_bgcolor="white",
    font=dict(color="rgba(0,0,0,0.8)", family="Inter, sans-serif"),
)

_ANCHO = 1100
_ALTO_POR_FILA = 280

TITULOS_REGIONES = {"labios": "Labios y mandíbula", "cejas_ojos": "Cejas y ojos", "otros": "Otros"}


def _exportar(fig: go.Figure, ruta: Union[str, Path], alto: int):
    ruta = Path(ruta)
    ruta.parent.mkdir(parents=True, exist_ok=True)
    fig.write_image(str(ruta), width=_ANCHO, height=alto, scale=1)
    logger.info("Figura guardada en %s", ruta)


def grafica_coeficientes(seq: BlendshapeSequence, ruta: Union[str, Path], titulo: Optional[str] = None) -> go.Figure:
    """Coeficiente contra tiempo, un panel por región de canales."""
    try:
        df = pd.DataFrame(seq.coeffs, columns=list(NOMBRES_CANALES))
        df["tiempo_s"] = df.index / seq.fps
        fig = make_subplots(rows=len(REGIONES_CANALES), cols=1, shared_xaxes=True,
                            subplot_titles=[TITULOS_REGIONES.get(r, r) for r in REGIONES_CANALES])
        for fila, (region, canales) in enumerate(REGIONES_CANALES.items(), start=1):
            for j, canal in enumerate(canales):
                nombre = NOMBRES_CANALES[canal]
                fig.add_trace(
                    go.Scatter(x=df["tiempo_s"], y=df[nombre], name=nombre, mode="lines",
                               line=dict(color=_PALETTE[j % len(_PALETTE)], width=1), showlegend=False),
                    row=fila, col=1,
                )
            fig.update_yaxes(title_text="coeficiente", gridcolor=_GRID, row=fila, col=1)
        fig.update_xaxes(gridcolor=_GRID)
        fig.update_xaxes(title_text="tiempo (s)", row=len(REGIONES_CANALES), col=1)
        fig.update_layout(**_PLOTLY_LAYOUT, title=titulo or "Coeficientes de blendshapes")
        _exportar(fig, ruta, _ALTO_POR_FILA * len(REGIONES_CANALES))
        return fig
    except Exception as e:
        logger.error("Error en grafica_coeficientes: %s", e, exc_info=True)
        raise


def grafica_perdidas(bitacora: pd.DataFrame, ruta: Union[str, Path], log_y: bool = True) -> go.Figure:
    """Curvas de pérdida por paso: un trazo por término más el total."""
    try:
        columnas = [c for c in (*TERMINOS, "total") if c in bitacora.columns]
        largo = bitacora.melt(id_vars="paso", value_vars=columnas, var_name="termino", value_name="perdida")
        fig = px.line(
            largo,
            x="paso",
            y="perdida",
            color="termino",
            log_y=log_y,
            title="Curvas de pérdida",
            labels={"paso": "Paso", "perdida": "Pérdida", "termino": "Término"},
            color_discrete_sequence=_PALETTE,
        )
        fig.update_layout(**_PLOTLY_LAYOUT)
        fig.update_xaxes(gridcolor=_GRID)
        fig.update_yaxes(gridcolor=_GRID)
        _exportar(fig, ruta, 450)
        return fig
    except Exception as e:
        logger.error("Error en grafica_perdidas: %s", e, exc_info=True)
        raise
