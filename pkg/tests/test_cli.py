import json

import pytest

import app
from config import io_utils
from config.opciones import NOMBRE_BITACORA, NOMBRE_CHECKPOINT, NOMBRE_MANIFIESTO, NOMBRE_REPORTE
from utils import graficas
from utils.datos import synth_clip

CONFIG_DIMINUTA = """
preset = "escritorio"
semilla = 0

[modelo.codificador]
d_model = 16
n_blocks = 1
n_heads = 2
d_inner = 32
n_emotions = 2
canales_frontend = 8

[modelo.fusion]
d_emotion = 4
d_content = 8
d_style = 2
d_level = 2
n_heads = 2

[entrenamiento]
learning_rate = 1e-3
batch_size = 2
epochs = 1
pasos_por_epoca = 3

[conjunto]
contenidos = 2
emociones = 2
hablantes = 1
niveles = 1
clips_por_celda = 2
tomas_prueba = 1
duracion_s = 0.4

[rig]
vertices = 120
"""

ARGS_REJILLA = ["--contenidos", "2", "--emociones", "2", "--hablantes", "1", "--niveles", "1",
                "--clips", "1", "--tomas-prueba", "0", "--duracion", "0.3"]


@pytest.fixture(scope="module")
def config_toml(tmp_path_factory):
    ruta = tmp_path_factory.mktemp("config") / "diminuta.toml"
    ruta.write_text(CONFIG_DIMINUTA, encoding="utf-8")
    return str(ruta)


@pytest.fixture(scope="module")
def corrida(config_toml, tmp_path_factory):
    salida = tmp_path_factory.mktemp("corrida")
    assert app.main(["train", "--config", config_toml, "--salida", str(salida)]) == 0
    return salida


@pytest.fixture
def wav_corto(tmp_path):
    clip, _ = synth_clip(0, 1, 0, 0, 0.4, seed=0)
    ruta = tmp_path / "voz.wav"
    io_utils.guardar_wav(ruta, clip.samples)
    return ruta


# ======================
# GEN-DATA
# ======================
def test_gen_data_escribe_la_rejilla(tmp_path):
    salida = tmp_path / "datos"
    assert app.main(["gen-data", "--salida", str(salida), *ARGS_REJILLA]) == 0
    assert len(list((salida / io_utils.DIR_AUDIO).glob("*.wav"))) == 4
    assert len(list((salida / io_utils.DIR_BLENDSHAPES).glob("*.csv"))) == 4
    manifiesto = io_utils.cargar_json(salida / NOMBRE_MANIFIESTO)
    assert len(manifiesto["clips"]) == 4
    assert {c["particion"] for c in manifiesto["clips"]} == {"entrenamiento"}
    assert sorted(p.name for p in (salida / "mascaras").iterdir()) == [
        "canales_cejas_ojos.txt", "canales_labios.txt", "canales_otros.txt"]


def test_gen_data_es_reproducible(tmp_path):
    hashes = []
    for nombre in ("a", "b"):
        salida = tmp_path / nombre
        assert app.main(["gen-data", "--salida", str(salida), "--seed", "3", *ARGS_REJILLA]) == 0
        archivos = sorted((salida / io_utils.DIR_AUDIO).glob("*.wav")) + [salida / NOMBRE_MANIFIESTO]
        hashes.append([io_utils.hash_archivo(p) for p in archivos])
    assert hashes[0] == hashes[1]


def test_gen_data_suavizado_y_rig(tmp_path):
    crudo, suave = tmp_path / "crudo", tmp_path / "suave"
    assert app.main(["gen-data", "--salida", str(crudo), *ARGS_REJILLA]) == 0
    assert app.main(["gen-data", "--salida", str(suave), "--smooth", "--rig", *ARGS_REJILLA]) == 0
    nombre = sorted((crudo / io_utils.DIR_BLENDSHAPES).glob("*.csv"))[0].name
    a = io_utils.cargar_csv_blendshapes(crudo / io_utils.DIR_BLENDSHAPES / nombre)
    b = io_utils.cargar_csv_blendshapes(suave / io_utils.DIR_BLENDSHAPES / nombre)
    assert a.coeffs.shape == b.coeffs.shape
    assert not (a.coeffs == b.coeffs).all()
    assert (suave / "rig" / "plantillas.npz").exists()
    assert len(list((suave / "vertices").glob("*.npy"))) == 4


# ======================
# TRAIN
# ======================
def test_train_escribe_artefactos(corrida):
    assert (corrida / NOMBRE_CHECKPOINT).exists()
    lineas = (corrida / NOMBRE_BITACORA).read_text(encoding="utf-8").splitlines()
    assert len(lineas) == 3
    reporte = io_utils.cargar_json(corrida / NOMBRE_REPORTE)
    assert reporte["pasos"] == 3
    assert {"lve_mm", "eve_mm", "lip_avg_mm", "exactitud_emocion"} <= set(reporte["entrenado"])
    assert set(reporte["entrenado"]) == set(reporte["sin_entrenar"])


def test_train_es_reproducible(config_toml, corrida, tmp_path):
    assert app.main(["train", "--config", config_toml, "--salida", str(tmp_path)]) == 0
    assert io_utils.hash_archivo(tmp_path / NOMBRE_BITACORA) == io_utils.hash_archivo(corrida / NOMBRE_BITACORA)


def test_train_reanuda_desde_checkpoint(config_toml, corrida, tmp_path):
    argumentos = ["train", "--config", config_toml, "--salida", str(tmp_path),
                  "--resume", str(corrida / NOMBRE_CHECKPOINT), "--epochs", "2"]
    assert app.main(argumentos) == 0
    pasos = [json.loads(linea)["paso"] for linea in (tmp_path / NOMBRE_BITACORA).read_text(encoding="utf-8").splitlines()]
    assert pasos == [4, 5, 6]


# ======================
# INFER / EVAL / CONVERT
# ======================
def test_infer_con_rig_sintetico(config_toml, corrida, wav_corto, tmp_path):
    csv = tmp_path / "pred.csv"
    argumentos = ["infer", "--config", config_toml, "--checkpoint", str(corrida / NOMBRE_CHECKPOINT),
                  "--wav", str(wav_corto), "--style", "0", "--level", "0", "--salida", str(csv),
                  "--rig", "sintetico", "--clamp"]
    assert app.main(argumentos) == 0
    seq = io_utils.cargar_csv_blendshapes(csv)
    assert seq.coeffs.shape == (12, 52)
    assert seq.coeffs.min() >= 0.0 and seq.coeffs.max() <= 1.0
    assert len(list((tmp_path / "pred_obj").glob("*.obj"))) == 12


def test_infer_estilo_fuera_de_rango(config_toml, corrida, wav_corto, tmp_path):
    argumentos = ["infer", "--config", config_toml, "--checkpoint", str(corrida / NOMBRE_CHECKPOINT),
                  "--wav", str(wav_corto), "--style", "99", "--salida", str(tmp_path / "x.csv")]
    assert app.main(argumentos) == 1


def test_checkpoint_inexistente(config_toml, wav_corto, tmp_path):
    argumentos = ["infer", "--config", config_toml, "--checkpoint", str(tmp_path / "no.pt"),
                  "--wav", str(wav_corto)]
    assert app.main(argumentos) == 1


def test_eval_escribe_reporte(config_toml, corrida, tmp_path):
    ruta = tmp_path / "reporte.json"
    argumentos = ["eval", "--config", config_toml, "--checkpoint", str(corrida / NOMBRE_CHECKPOINT),
                  "--salida", str(ruta)]
    assert app.main(argumentos) == 0
    reporte = io_utils.cargar_json(ruta)
    assert reporte["n_clips"] == 4
    assert reporte["lve_mm"] >= reporte["lip_avg_mm"] > 0


def test_eval_con_rig_y_mascara_externa(config_toml, corrida, tmp_path):
    datos = tmp_path / "datos"
    assert app.main(["gen-data", "--config", config_toml, "--salida", str(datos), "--rig"]) == 0
    mascara = tmp_path / "labios.txt"
    mascara.write_text("0\n1\n2\n", encoding="utf-8")
    ruta = tmp_path / "reporte.json"
    argumentos = ["eval", "--config", config_toml, "--checkpoint", str(corrida / NOMBRE_CHECKPOINT),
                  "--datos", str(datos), "--rig", str(datos / "rig"), "--mascara-labios", str(mascara),
                  "--salida", str(ruta)]
    assert app.main(argumentos) == 0
    assert io_utils.cargar_json(ruta)["n_clips"] == 4


def test_convert_a_obj(config_toml, tmp_path):
    _, gt = synth_clip(1, 0, 0, 0, 0.2, seed=0)
    csv = tmp_path / "gt.csv"
    io_utils.guardar_csv_blendshapes(csv, gt)
    salida = tmp_path / "mallas"
    argumentos = ["convert", "--config", config_toml, "--csv", str(csv), "--modo", "literal",
                  "--salida", str(salida)]
    assert app.main(argumentos) == 0
    assert len(list(salida.glob("cuadro_*.obj"))) == gt.T


# ======================
# PLOT
# ======================
def test_plot_de_coeficientes_y_bitacora(corrida, tmp_path, monkeypatch):
    exportadas = []
    monkeypatch.setattr(graficas, "_exportar", lambda fig, ruta, alto: exportadas.append((fig, ruta)))
    _, gt = synth_clip(0, 0, 0, 0, 0.5, seed=0)
    csv = tmp_path / "gt.csv"
    io_utils.guardar_csv_blendshapes(csv, gt)

    assert app.main(["plot", "--csv", str(csv)]) == 0
    assert app.main(["plot", "--bitacora", str(corrida / NOMBRE_BITACORA), "--salida", str(tmp_path / "p.png")]) == 0

    (fig_coef, ruta_coef), (fig_perd, ruta_perd) = exportadas
    assert ruta_coef == csv.with_suffix(".png")
    assert len(fig_coef.data) == 52
    assert str(ruta_perd) == str(tmp_path / "p.png")
    assert {traza.name for traza in fig_perd.data} == {"cross", "self_rec", "velocity", "classification", "total"}


def test_plot_escribe_png(corrida, tmp_path):
    pytest.importorskip("kaleido")
    ruta = tmp_path / "perdidas.png"
    assert app.main(["plot", "--bitacora", str(corrida / NOMBRE_BITACORA), "--salida", str(ruta)]) == 0
    assert ruta.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_plot_requiere_una_fuente():
    with pytest.raises(SystemExit):
        app.main(["plot"])
