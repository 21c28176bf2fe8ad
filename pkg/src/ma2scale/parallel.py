"""Worker-count policy for node-parallel loops."""
import os


def worker_count():
    """Workers allowed by ``MA2SCALE_THREADS`` (default 1)."""
    try:
        n = int(os.environ.get("MA2SCALE_THREADS", "1"))
    except ValueError:
        return 1
    return max(1, n)
