"""Worker-count control for internal parallelism (FFT workers, sweep pools).

The environment variable PEKARLAB_THREADS caps parallelism; 0 or unset
means automatic.
"""
import os


def workers() -> int:
    """Worker count passed to scipy.fft; -1 means all available cores."""
    raw = os.environ.get("PEKARLAB_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n <= 0:
        return -1
    return n


def pool_size() -> int:
    cap = workers()
    cpus = os.cpu_count() or 1
    return cpus if cap < 0 else max(1, min(cap, cpus))
