from dataclasses import replace

import pytest
import torch

from config.opciones import CAMPO_RECEPTIVO_FRONTEND
from utils.capas import inicializar_parametros
from utils.codificadores import (
    ExtractorAudio,
    checksum_frontend,
    classify_emotion,
    extract_content,
    extract_emotion,
    interp_time,
    parametros_entrenables,
)
from utils.datos import FeatureSequence
from utils.errores import ErrorConfiguracion, ErrorLongitud


def _extractor(config, con_clasificador=True):
    extractor = ExtractorAudio(config.codificador, con_clasificador=con_clasificador)
    return inicializar_parametros(extractor, 0)


# ======================
# INTERPOLACIÓN
# ======================
def test_interp_identidad_cuando_T_coincide():
    x = torch.randn(7, 3)
    assert torch.equal(interp_time(x, 7), x)


def test_interp_a_un_cuadro_toma_el_primero():
    x = torch.randn(5, 4)
    torch.testing.assert_close(interp_time(x, 1), x[:1])


def test_interp_de_un_cuadro_replica():
    x = torch.randn(1, 4)
    assert torch.equal(interp_time(x, 6), x.expand(6, -1))


def test_interp_rampa_es_exacta():
    x = torch.linspace(0.0, 1.0, 11, dtype=torch.float64).unsqueeze(1).repeat(1, 2)
    y = interp_time(x, 31)
    esperado = torch.linspace(0.0, 1.0, 31, dtype=torch.float64).unsqueeze(1).repeat(1, 2)
    torch.testing.assert_close(y, esperado)


def test_interp_conserva_extremos():
    x = torch.randn(13, 5, dtype=torch.float64)
    y = interp_time(x, 40)
    torch.testing.assert_close(y[0], x[0])
    torch.testing.assert_close(y[-1], x[-1])


def test_interp_feature_sequence():
    seq = FeatureSequence(values=torch.randn(50, 3), fps=50)
    salida = interp_time(seq, 30)
    assert isinstance(salida, FeatureSequence)
    assert salida.T == 30


def test_interp_longitud_invalida():
    with pytest.raises(ErrorLongitud):
        interp_time(torch.randn(4, 2), 0)


# ======================
# EXTRACTORES
# ======================
def test_formas_de_rasgos(config_pequena, clip_un_segundo):
    clip, gt = clip_un_segundo
    extractor = _extractor(config_pequena)
    contenido = extract_content(extractor, clip, gt.T)
    emocion = extract_emotion(extractor, clip, 17)
    assert contenido.values.shape == (gt.T, 16)
    assert emocion.values.shape == (17, 16)


def test_audio_mas_corto_que_el_campo_receptivo(config_pequena):
    extractor = _extractor(config_pequena)
    with pytest.raises(ErrorLongitud):
        extractor(torch.zeros(CAMPO_RECEPTIVO_FRONTEND - 1), 3)


def test_front_end_congelado(config_pequena):
    extractor = _extractor(config_pequena)
    nombres = [nombre for nombre, _ in parametros_entrenables(extractor)]
    assert nombres
    assert not any(nombre.startswith("frontend.") for nombre in nombres)
    assert all(not p.requires_grad for p in extractor.frontend.parameters())


def test_checksum_detecta_cambios(config_pequena):
    extractor = _extractor(config_pequena)
    antes = checksum_frontend(extractor)
    assert checksum_frontend(extractor) == antes
    with torch.no_grad():
        extractor.proyeccion.weight.add_(1.0)
    assert checksum_frontend(extractor) == antes
    with torch.no_grad():
        next(extractor.frontend.parameters()).add_(1e-3)
    assert checksum_frontend(extractor) != antes


def test_clasificador_es_distribucion(config_pequena, clip_un_segundo):
    clip, gt = clip_un_segundo
    extractor = _extractor(config_pequena)
    probs = classify_emotion(extractor, extract_emotion(extractor, clip, gt.T))
    assert probs.shape == (3,)
    assert float(probs.sum()) == pytest.approx(1.0, abs=1e-6)
    assert bool((probs >= 0).all())


def test_extractor_sin_clasificador(config_pequena):
    extractor = _extractor(config_pequena, con_clasificador=False)
    with pytest.raises(ErrorConfiguracion):
        extractor.probabilidades(torch.zeros(4, 16))


def test_extraccion_determinista(config_pequena, clip_un_segundo):
    clip, gt = clip_un_segundo
    a = extract_content(_extractor(config_pequena), clip, gt.T).values
    b = extract_content(_extractor(config_pequena), clip, gt.T).values
    assert torch.equal(a, b)


def test_interp_punto_medio():
    x = torch.tensor([[0.0], [1.0]], dtype=torch.float64)
    torch.testing.assert_close(interp_time(x, 3), torch.tensor([[0.0], [0.5], [1.0]], dtype=torch.float64))


def test_clasificador_una_emocion(config_pequena):
    config = replace(config_pequena.codificador, n_emotions=1)
    extractor = inicializar_parametros(ExtractorAudio(config, con_clasificador=True), 0)
    probs = classify_emotion(extractor, torch.randn(5, 16))
    torch.testing.assert_close(probs, torch.tensor([1.0]))


def test_cabeza_en_cero_da_distribucion_uniforme(config_pequena):
    extractor = _extractor(config_pequena)
    with torch.no_grad():
        extractor.clasificador.weight.zero_()
    probs = classify_emotion(extractor, torch.randn(8, 16))
    torch.testing.assert_close(probs, torch.full((3,), 1.0 / 3.0))
