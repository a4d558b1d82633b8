import numpy as np
import pytest
import torch
from scipy.io import wavfile

from config import io_utils
from config.opciones import SAMPLE_RATE
from utils.datos import BlendshapeSequence, synth_clip
from utils.errores import ErrorConfiguracion, ErrorForma, ErrorVersion


# ------------------ Audio ------------------
def test_wav_ida_y_vuelta(tmp_path, clip_un_segundo):
    clip, _ = clip_un_segundo
    ruta = tmp_path / "clip.wav"
    io_utils.guardar_wav(ruta, clip.samples)
    leido = io_utils.cargar_wav(ruta, content_id=1, emotion_id=2)
    assert leido.samples.size == clip.samples.size
    np.testing.assert_allclose(leido.samples, clip.samples, atol=1.0 / 32767)
    assert (leido.content_id, leido.emotion_id) == (1, 2)


def test_wav_estereo_y_otra_frecuencia(tmp_path):
    t = np.arange(48000) / 48000
    mono = 0.3 * np.sin(2 * np.pi * 220 * t)
    estereo = np.stack([mono, mono], axis=1).astype(np.float32)
    ruta = tmp_path / "estereo.wav"
    wavfile.write(str(ruta), 48000, estereo)
    clip = io_utils.cargar_wav(ruta)
    assert clip.sample_rate == SAMPLE_RATE
    assert clip.samples.size == 16000


def test_wav_ilegible(tmp_path):
    ruta = tmp_path / "roto.wav"
    ruta.write_bytes(b"no es un wav")
    with pytest.raises(ErrorConfiguracion):
        io_utils.cargar_wav(ruta)


# ------------------ Blendshapes ------------------
def test_csv_ida_y_vuelta(tmp_path):
    _, gt = synth_clip(0, 1, 0, 0, 0.5, seed=2)
    ruta = tmp_path / "gt.csv"
    io_utils.guardar_csv_blendshapes(ruta, gt)
    assert ruta.read_text(encoding="utf-8").startswith("# fps=30")
    leido = io_utils.cargar_csv_blendshapes(ruta)
    np.testing.assert_allclose(leido.coeffs, gt.coeffs, atol=1e-12)
    assert leido.fps == 30


def test_csv_con_columnas_de_mas(tmp_path):
    ruta = tmp_path / "malo.csv"
    encabezado = ",".join(f"c{i}" for i in range(53))
    ruta.write_text(encabezado + "\n" + ",".join(["0"] * 53) + "\n", encoding="utf-8")
    with pytest.raises(ErrorForma):
        io_utils.cargar_csv_blendshapes(ruta)


def test_csv_encabezado_no_estandar_se_acepta(tmp_path):
    ruta = tmp_path / "otro.csv"
    encabezado = ",".join(f"c{i}" for i in range(52))
    ruta.write_text(encabezado + "\n" + ",".join(["0.5"] * 52) + "\n", encoding="utf-8")
    seq = io_utils.cargar_csv_blendshapes(ruta)
    assert seq.coeffs.shape == (1, 52)


# ------------------ Máscaras ------------------
def test_mascara_con_comentarios(tmp_path):
    ruta = tmp_path / "m.txt"
    ruta.write_text("# labios\n\n4\n9\n", encoding="utf-8")
    np.testing.assert_array_equal(io_utils.cargar_mascara(ruta, n_max=10), [4, 9])


@pytest.mark.parametrize("contenido", ["# nada\n", "3\nx\n", "12\n"])
def test_mascara_invalida(tmp_path, contenido):
    ruta = tmp_path / "m.txt"
    ruta.write_text(contenido, encoding="utf-8")
    with pytest.raises(ErrorConfiguracion):
        io_utils.cargar_mascara(ruta, n_max=10)


# ------------------ Bitácora ------------------
def test_jsonl_a_dataframe(tmp_path):
    ruta = tmp_path / "bitacora.jsonl"
    io_utils.agregar_jsonl(ruta, '{"paso": 1, "total": 2.0}')
    io_utils.agregar_jsonl(ruta, '{"paso": 2, "total": 1.5}')
    df = io_utils.leer_jsonl(ruta)
    assert list(df["paso"]) == [1, 2]
    assert df["total"].iloc[-1] == pytest.approx(1.5)


# ------------------ Checkpoints ------------------
def test_checkpoint_version_incompatible(tmp_path):
    ruta = tmp_path / "c.pt"
    io_utils.guardar_checkpoint(ruta, {"paso": 3})
    assert io_utils.cargar_checkpoint(ruta)["paso"] == 3
    torch.save({"paso": 3, "version": 99}, str(ruta))
    with pytest.raises(ErrorVersion):
        io_utils.cargar_checkpoint(ruta)


def test_checkpoint_ilegible(tmp_path):
    ruta = tmp_path / "c.pt"
    ruta.write_bytes(b"basura")
    with pytest.raises(ErrorVersion):
        io_utils.cargar_checkpoint(ruta)


# ------------------ Conjunto ------------------
def test_conjunto_ida_y_vuelta(tmp_path, conjunto_pequeno):
    ruta = io_utils.guardar_conjunto(conjunto_pequeno, tmp_path / "datos", {"contenidos": 2}, semilla=0)
    assert ruta.name == "manifiesto.json"
    cargado = io_utils.cargar_conjunto(tmp_path / "datos")
    assert len(cargado) == len(conjunto_pequeno)
    for original, leido in zip(conjunto_pequeno, cargado):
        assert leido.nombre == original.nombre and leido.particion == original.particion
        assert leido.clip.etiquetas == original.clip.etiquetas
        np.testing.assert_allclose(leido.gt.coeffs, original.gt.coeffs, atol=1e-12)
    assert cargado.candidatos_pares == conjunto_pequeno.candidatos_pares


def test_obj_con_vertices_mal_formados(tmp_path):
    with pytest.raises(ErrorForma):
        io_utils.guardar_obj(tmp_path / "x.obj", np.zeros((4, 2)), [])


def test_secuencia_recortada_se_guarda(tmp_path):
    seq = BlendshapeSequence(coeffs=np.full((2, 52), 1.4)).recortada()
    ruta = tmp_path / "r.csv"
    io_utils.guardar_csv_blendshapes(ruta, seq)
    assert io_utils.cargar_csv_blendshapes(ruta).coeffs.max() == 1.0
