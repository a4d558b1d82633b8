import numpy as np
import pytest
import torch

from config.configuracion import DatasetSpec, LossWeights, TrainConfig, config_modelo_preset
from config.opciones import FPS
from utils import entrenamiento
from utils.codificadores import checksum_frontend
from utils.datos import PARTICION_ENTRENAMIENTO, PARTICION_PRUEBA, generar_conjunto, sample_cross_pair
from utils.entrenamiento import (
    calcular_perdidas,
    cargar_estado,
    crear_estado,
    entrenar,
    evaluar_predicciones,
    evaluate,
    guardar_estado,
    infer,
    seleccionar_pares_evaluacion,
    train_step,
)
from utils.errores import ErrorConfiguracion, ErrorNumerico
from utils.perdidas import combinar_perdidas

PESOS = LossWeights()


def _par_corto(cuadros=4, seed=0):
    spec = DatasetSpec(contenidos=2, emociones=2, hablantes=1, niveles=1, clips_por_celda=1,
                       tomas_prueba=0, duracion_s=cuadros / FPS)
    conjunto = generar_conjunto(spec, seed=seed)
    return sample_cross_pair(conjunto, np.random.default_rng(seed))


def _copia_parametros(modelo):
    return {nombre: p.detach().clone() for nombre, p in modelo.named_parameters()}


# ======================
# GRADIENTES
# ======================
def test_gradientes_contra_diferencias_finitas(config_pequena_f64, train_config_pequena):
    estado = crear_estado(config_pequena_f64, train_config_pequena)
    modelo = estado.modelo
    par = _par_corto()

    def perdida() -> torch.Tensor:
        return combinar_perdidas(calcular_perdidas(modelo, [par]), PESOS)

    modelo.zero_grad(set_to_none=True)
    perdida().backward()
    rng = np.random.default_rng(0)
    h = 1e-5
    for nombre, p in modelo.named_parameters():
        if not p.requires_grad:
            continue
        indices = rng.choice(p.numel(), size=min(3, p.numel()), replace=False)
        plano = p.data.view(-1)
        analiticos, numericos = [], []
        for i in indices:
            original = plano[i].item()
            with torch.no_grad():
                plano[i] = original + h
                arriba = perdida().item()
                plano[i] = original - h
                abajo = perdida().item()
                plano[i] = original
            numericos.append((arriba - abajo) / (2 * h))
            analiticos.append(p.grad.view(-1)[i].item())
        a, n = np.array(analiticos), np.array(numericos)
        error = np.linalg.norm(a - n) / max(np.linalg.norm(a), np.linalg.norm(n), 1e-6)
        assert error < 1e-4, f"{nombre}: error relativo {error:.2e}"


# ======================
# PASO DE ENTRENAMIENTO
# ======================
def test_paso_es_determinista(config_pequena, train_config_pequena):
    par = _par_corto(cuadros=8)
    trayectorias = []
    for _ in range(2):
        estado = crear_estado(config_pequena, train_config_pequena)
        reportes = []
        for _ in range(3):
            estado, reporte = train_step(estado, par, PESOS)
            reportes.append(reporte)
        trayectorias.append(reportes)
    assert trayectorias[0] == trayectorias[1]


def test_pesos_cero_no_mueven_parametros(config_pequena, train_config_pequena):
    estado = crear_estado(config_pequena, train_config_pequena)
    antes = _copia_parametros(estado.modelo)
    estado, reporte = train_step(estado, _par_corto(cuadros=8), LossWeights(0.0, 0.0, 0.0, 0.0))
    assert reporte.total == 0.0
    for nombre, p in estado.modelo.named_parameters():
        assert torch.equal(p, antes[nombre]), nombre


def test_perdida_no_finita_aborta_sin_actualizar(config_pequena, train_config_pequena, monkeypatch):
    estado = crear_estado(config_pequena, train_config_pequena)
    antes = _copia_parametros(estado.modelo)
    original = entrenamiento.calcular_perdidas

    def con_nan(modelo, pares):
        componentes = original(modelo, pares)
        componentes["velocity"] = componentes["velocity"] * float("nan")
        return componentes

    monkeypatch.setattr(entrenamiento, "calcular_perdidas", con_nan)
    with pytest.raises(ErrorNumerico, match="velocity"):
        train_step(estado, _par_corto(cuadros=8), PESOS)
    assert estado.paso == 0
    for nombre, p in estado.modelo.named_parameters():
        assert torch.equal(p, antes[nombre]), nombre


def test_front_end_no_cambia_al_entrenar(config_pequena, train_config_pequena):
    estado = crear_estado(config_pequena, train_config_pequena)
    inicial = checksum_frontend(estado.modelo)
    par = _par_corto(cuadros=8)
    for _ in range(3):
        estado, _ = train_step(estado, par, PESOS)
    assert checksum_frontend(estado.modelo) == inicial == estado.checksum


def test_front_end_modificado_es_violacion(config_pequena, train_config_pequena):
    estado = crear_estado(config_pequena, train_config_pequena)
    with torch.no_grad():
        next(estado.modelo.codificador_contenido.frontend.parameters()).add_(1.0)
    with pytest.raises(ErrorConfiguracion):
        train_step(estado, _par_corto(cuadros=8), PESOS)


def test_sobreajuste_rapido(config_pequena):
    estado = crear_estado(config_pequena, TrainConfig(learning_rate=3e-3, seed=0))
    par = _par_corto(cuadros=10)
    reportes = [train_step(estado, par, PESOS)[1] for _ in range(100)]
    assert reportes[-1].total < 0.5 * reportes[0].total


@pytest.mark.lento
def test_sobreajuste_un_par_500_pasos():
    estado = crear_estado(config_modelo_preset("escritorio"), TrainConfig(learning_rate=1e-4, seed=0))
    par = _par_corto(cuadros=30)
    reportes = [train_step(estado, par, PESOS)[1] for _ in range(500)]
    assert reportes[-1].total <= 0.1 * reportes[0].total


# ======================
# BUCLE Y CHECKPOINTS
# ======================
def test_entrenar_escribe_bitacora(config_pequena, conjunto_pequeno, tmp_path):
    config = TrainConfig(learning_rate=1e-3, batch_size=2, epochs=2, pasos_por_epoca=2, seed=0)
    estado = crear_estado(config_pequena, config)
    bitacora = tmp_path / "bitacora.jsonl"
    reportes = entrenar(estado, conjunto_pequeno, config, bitacora)
    assert len(reportes) == 4 and estado.paso == 4
    lineas = bitacora.read_text(encoding="utf-8").splitlines()
    assert len(lineas) == 4
    assert '"epoca": 2' in lineas[-1] and '"paso": 4' in lineas[-1]


def test_reanudar_reproduce_la_trayectoria(config_pequena, conjunto_pequeno, tmp_path):
    completo = TrainConfig(learning_rate=1e-3, batch_size=2, epochs=2, pasos_por_epoca=2, seed=0)
    mitad = TrainConfig(learning_rate=1e-3, batch_size=2, epochs=1, pasos_por_epoca=2, seed=0)

    continuo = entrenar(crear_estado(config_pequena, completo), conjunto_pequeno, completo)

    estado = crear_estado(config_pequena, mitad)
    primeros = entrenar(estado, conjunto_pequeno, mitad)
    guardar_estado(estado, tmp_path / "checkpoint.pt")
    reanudado = cargar_estado(tmp_path / "checkpoint.pt")
    assert reanudado.paso == 2
    resto = entrenar(reanudado, conjunto_pequeno, completo)

    assert primeros + resto == continuo


def test_checkpoint_con_arquitectura_distinta(config_pequena, train_config_pequena, tmp_path):
    estado = crear_estado(config_pequena, train_config_pequena)
    ruta = tmp_path / "checkpoint.pt"
    guardar_estado(estado, ruta)
    contenido = torch.load(ruta, weights_only=True)
    contenido["manifiesto"] = contenido["manifiesto"][:-1]
    torch.save(contenido, ruta)
    with pytest.raises(ErrorConfiguracion):
        cargar_estado(ruta)


# ======================
# INFERENCIA
# ======================
def test_infer_forma_y_pureza(config_pequena, train_config_pequena, clip_un_segundo):
    clip, _ = clip_un_segundo
    modelo = crear_estado(config_pequena, train_config_pequena).modelo
    a = infer(modelo, clip, level_id=0, style_id=0)
    b = infer(modelo, clip, level_id=0, style_id=0)
    assert a.coeffs.shape == (30, 52)
    np.testing.assert_array_equal(a.coeffs, b.coeffs)


def test_infer_estilo_importa(config_pequena, train_config_pequena, clip_un_segundo):
    clip, _ = clip_un_segundo
    modelo = crear_estado(config_pequena, train_config_pequena).modelo
    a = infer(modelo, clip, level_id=1, style_id=0)
    b = infer(modelo, clip, level_id=1, style_id=7)
    assert np.linalg.norm(a.coeffs - b.coeffs) > 0


def test_infer_recorte_opcional(config_pequena, train_config_pequena, clip_un_segundo):
    clip, _ = clip_un_segundo
    modelo = crear_estado(config_pequena, train_config_pequena).modelo
    with torch.no_grad():
        modelo.decodificador.cabeza.bias.fill_(2.0)
    assert infer(modelo, clip, 0, 0).coeffs.max() > 1.0
    assert infer(modelo, clip, 0, 0, recortar=True).coeffs.max() == 1.0


# ======================
# EVALUACIÓN
# ======================
def _candidatos_sinteticos(hablantes=2, niveles=2, contenidos=6, emociones=5):
    """Todas las tuplas (s, l, c1, c2, e1, e2) con c1 < c2, en el orden del conjunto."""
    return [(s, l, c1, c2, e1, e2)
            for s in range(hablantes) for l in range(niveles)
            for c1 in range(contenidos) for c2 in range(c1 + 1, contenidos)
            for e1 in range(emociones) for e2 in range(emociones)]


def test_seleccion_de_pares_cubre_hablantes_y_niveles():
    candidatos = _candidatos_sinteticos()
    seleccion = seleccionar_pares_evaluacion(candidatos, maximo=64)
    assert len(seleccion) == 64
    assert len(set(seleccion)) == 64
    assert set(seleccion) <= set(candidatos)
    assert {(s, l) for s, l, *_ in seleccion} == {(0, 0), (0, 1), (1, 0), (1, 1)}
    assert {s for s, *_ in seleccion} == {0, 1}
    # Mismo número de pares por grupo cuando el máximo es múltiplo de los grupos
    assert all(sum(1 for p in seleccion if p[:2] == grupo) == 16 for grupo in [(0, 0), (0, 1), (1, 0), (1, 1)])


def test_seleccion_de_pares_determinista():
    candidatos = _candidatos_sinteticos()
    assert seleccionar_pares_evaluacion(candidatos, semilla=3) == seleccionar_pares_evaluacion(candidatos, semilla=3)
    assert seleccionar_pares_evaluacion(candidatos, semilla=3) != seleccionar_pares_evaluacion(candidatos, semilla=4)


def test_seleccion_de_pares_pocos_candidatos():
    candidatos = _candidatos_sinteticos(hablantes=1, niveles=1, contenidos=2, emociones=2)
    assert seleccionar_pares_evaluacion(candidatos, maximo=64) == candidatos


def test_predicciones_perfectas_dan_error_cero(conjunto_pequeno, rig_pequeno):
    prueba = conjunto_pequeno.particion(PARTICION_PRUEBA)
    predicciones = {e.nombre: e.gt for e in prueba}
    df = evaluar_predicciones(predicciones, prueba, rig_pequeno)
    assert len(df) == len(prueba)
    assert (df[["lve_mm", "eve_mm", "lip_avg_mm"]] == 0).all().all()


def test_modelo_sin_entrenar_tiene_error_positivo(config_pequena, train_config_pequena, conjunto_pequeno, rig_pequeno):
    modelo = crear_estado(config_pequena, train_config_pequena).modelo
    reporte = evaluate(modelo, conjunto_pequeno, rig_pequeno)
    assert reporte["lve_mm"] > 0 and reporte["eve_mm"] > 0 and reporte["lip_avg_mm"] > 0
    assert 0.0 <= reporte["exactitud_emocion"] <= 1.0
    assert reporte["n_clips"] == 4 and reporte["n_pares"] == 2
    assert reporte["lip_avg_mm"] <= reporte["lve_mm"]


def test_evaluar_sin_particion_de_prueba(config_pequena, train_config_pequena):
    conjunto = generar_conjunto(DatasetSpec(contenidos=2, emociones=2, hablantes=1, niveles=1,
                                            clips_por_celda=1, tomas_prueba=0, duracion_s=0.3), seed=0)
    modelo = crear_estado(config_pequena, train_config_pequena).modelo
    with pytest.raises(ErrorConfiguracion):
        evaluate(modelo, conjunto)


@pytest.mark.lento
def test_corrida_de_escritorio_desenreda_emocion(rig_pequeno):
    """3 contenidos × 3 emociones × 2 hablantes; entrenamiento corto de escritorio."""
    conjunto = generar_conjunto(DatasetSpec(contenidos=3, emociones=3, hablantes=2, niveles=1,
                                            clips_por_celda=2, tomas_prueba=1, duracion_s=1.0), seed=0)
    config_modelo = config_modelo_preset("escritorio")
    config = TrainConfig(learning_rate=1e-3, batch_size=8, epochs=15, pasos_por_epoca=20, seed=0)
    estado = crear_estado(config_modelo, config)
    sin_entrenar = evaluate(estado.modelo, conjunto, rig_pequeno)
    entrenar(estado, conjunto.particion(PARTICION_ENTRENAMIENTO), config)
    entrenado = evaluate(estado.modelo, conjunto, rig_pequeno)

    assert entrenado["error_cruzado"] < entrenado["error_cruzado_emocion_barajada"]
    assert entrenado["exactitud_emocion"] > 2 / 3
    for metrica in ("lve_mm", "eve_mm", "lip_avg_mm"):
        assert entrenado[metrica] < sin_entrenar[metrica]
