# config/opciones.py

# ------------------ Audio y video ------------------
SAMPLE_RATE = 16000
FPS = 30
N_BLENDSHAPES = 52

# Campo receptivo del front-end convolucional (muestras); audio más corto no produce cuadros
CAMPO_RECEPTIVO_FRONTEND = 400

# (kernel, stride) de cada capa del front-end; producto de strides = 320 (16 kHz -> 50 Hz)
CAPAS_FRONTEND = (
    (10, 5),
    (3, 2),
    (3, 2),
    (3, 2),
    (3, 2),
    (2, 2),
    (2, 2),
)

# ------------------ Canales de blendshapes ------------------
# Convención propia: 0-27 labios, 28-43 cejas/ojos, 44-51 otros
NOMBRES_CANALES = (
    # Labios y mandíbula
    "jawForward",
    "jawLeft",
    "jawRight",
    "jawOpen",
    "mouthClose",
    "mouthFunnel",
    "mouthPucker",
    "mouthLeft",
    "mouthRight",
    "mouthSmileLeft",
    "mouthSmileRight",
    "mouthFrownLeft",
    "mouthFrownRight",
    "mouthDimpleLeft",
    "mouthDimpleRight",
    "mouthStretchLeft",
    "mouthStretchRight",
    "mouthRollLower",
    "mouthRollUpper",
    "mouthShrugLower",
    "mouthShrugUpper",
    "mouthPressLeft",
    "mouthPressRight",
    "mouthLowerDownLeft",
    "mouthLowerDownRight",
    "mouthUpperUpLeft",
    "mouthUpperUpRight",
    "tongueOut",
    # Cejas y ojos
    "browDownLeft",
    "browDownRight",
    "browInnerUp",
    "browOuterUpLeft",
    "browOuterUpRight",
    "eyeBlinkLeft",
    "eyeBlinkRight",
    "eyeSquintLeft",
    "eyeSquintRight",
    "eyeWideLeft",
    "eyeWideRight",
    "eyeLookUpLeft",
    "eyeLookUpRight",
    "eyeLookDownLeft",
    "eyeLookDownRight",
    "cheekPuff",
    # Otros
    "eyeLookInLeft",
    "eyeLookInRight",
    "eyeLookOutLeft",
    "eyeLookOutRight",
    "cheekSquintLeft",
    "cheekSquintRight",
    "noseSneerLeft",
    "noseSneerRight",
)

REGIONES_CANALES = {
    "labios":      tuple(range(0, 28)),
    "cejas_ojos":  tuple(range(28, 44)),
    "otros":       tuple(range(44, 52)),
}

# Región de vértices del rig donde vive cada región de canales
REGION_VERTICES_POR_REGION_CANALES = {
    "labios":     "labios",
    "cejas_ojos": "ojos_frente",
    "otros":      "resto",
}

NOMBRES_REGIONES_VERTICES = ("labios", "ojos_frente")

# ------------------ Conjunto sintético ------------------
EMOCIONES = ("neutral", "feliz", "triste", "enojado", "sorpresa", "miedo", "disgusto", "calma")
NIVELES = ("bajo", "alto")
N_ESTILOS = 24

# Portadora del audio: f0 = F0_BASE_HZ + PASO_F0_HZ · contenido, N_ARMONICOS armónicos.
# El último armónico del último contenido queda bajo Nyquist (8 kHz).
F0_BASE_HZ = 150.0
PASO_F0_HZ = 150.0
N_ARMONICOS = 4
MAX_CONTENIDOS = int((SAMPLE_RATE / 2 / N_ARMONICOS - F0_BASE_HZ) // PASO_F0_HZ) + 1

# ------------------ Rig ------------------
VERTICES_ESCALA_COMPLETA = 5023
VERTICES_ESCRITORIO = 600
VERTICES_MINIMOS = 60
METROS_A_MM = 1000.0

# ------------------ Entrenamiento ------------------
BETAS_ADAM = (0.9, 0.999)
EPS_ADAM = 1e-8
PISO_PROBABILIDAD = 1e-12

# ------------------ Presets de dimensiones ------------------
PRESETS_CODIFICADOR = {
    "escritorio": {"d_model": 64, "n_blocks": 2, "n_heads": 4, "d_inner": 256, "canales_frontend": 32},
    "completa":   {"d_model": 1024, "n_blocks": 24, "n_heads": 16, "d_inner": 4096, "canales_frontend": 512},
}

PRESETS_FUSION = {
    "escritorio": {"d_emotion": 32, "d_content": 64, "d_style": 8, "d_level": 8},
    "completa":   {"d_emotion": 256, "d_content": 512, "d_style": 32, "d_level": 32},
}

# ------------------ Archivos ------------------
FORMATO_CHECKPOINT = 1
NOMBRE_MANIFIESTO = "manifiesto.json"
NOMBRE_BITACORA = "bitacora_perdidas.jsonl"
NOMBRE_REPORTE = "reporte_evaluacion.json"
NOMBRE_CHECKPOINT = "checkpoint.pt"
ENV_SALIDA = "ANIMACION_SALIDA"
SALIDA_DEFECTO = "salidas"
