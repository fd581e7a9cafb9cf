from coveo_settings import FloatSetting, IntSetting

FESC_THREADS = IntSetting("fesc.threads", fallback=1)
FESC_SOLVER_TOLERANCE = FloatSetting("fesc.solver.tolerance", fallback=1e-10)
FESC_STOKES_SAMPLES = IntSetting("fesc.stokes.samples", fallback=3)
