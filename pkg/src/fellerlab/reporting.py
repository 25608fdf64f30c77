"""Deterministic report emission (JSON and CSV, atomic writes).

Reports must be byte-identical across repeated runs with the same seed,
so writers sort keys, use repr-based float formatting and never embed
timestamps.  Files are written to a temporary name and renamed into
place.
"""

import hashlib
import json
import os
import tempfile

__all__ = ["write_atomic", "dump_json", "dump_csv", "manifest", "MANIFEST_SCHEMA"]

MANIFEST_SCHEMA = "fsl-manifest/1"


def write_atomic(path, data):
    """Write text (or bytes) to path via a temp file + rename."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(directory, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump_json(path, obj):
    write_atomic(path, json.dumps(obj, sort_keys=True, indent=2) + "\n")


def dump_csv(path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_cell(v) for v in row))
    write_atomic(path, "\n".join(lines) + "\n")


def _cell(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def model_hash(description):
    """Stable hash of a model description dict."""
    blob = json.dumps(description, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def manifest(command, model_desc, sim_config, seed, backend, outputs):
    return {
        "schema": MANIFEST_SCHEMA,
        "command": command,
        "model": model_desc,
        "model_hash": model_hash(model_desc),
        "sim": sim_config,
        "seed": seed,
        "backend": backend,
        "outputs": sorted(outputs),
    }
