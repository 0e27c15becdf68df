"""CSV/JSON output with provenance and atomic replacement."""

import csv
import io
import json
import os
import tempfile

import numpy as np

from . import __version__

__all__ = ["provenance_line", "write_csv", "read_csv", "write_json", "atomic_write_text"]


def provenance_line(config_hash: str | None = None, seeds=None, **extra) -> str:
    parts = [f"fdmimo {__version__}"]
    if config_hash is not None:
        parts.append(f"config={config_hash}")
    if seeds is not None:
        parts.append("seed=" + ",".join(str(s) for s in seeds))
    parts += [f"{k}={v}" for k, v in sorted(extra.items())]
    return "# " + " ".join(parts)


def atomic_write_text(path, text: str) -> None:
    """Write through a temporary file in the same directory, then rename."""
    path = os.fspath(path)
    folder = os.path.dirname(os.path.abspath(path))
    os.makedirs(folder, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def write_csv(path, header, rows, provenance: str) -> None:
    """Provenance comment, header row, then ``rows`` (sequences or dicts keyed by header)."""
    buf = io.StringIO()
    buf.write(provenance.rstrip("\n") + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        if isinstance(r, dict):
            r = [r.get(h, "") for h in header]
        w.writerow([_fmt(v) for v in r])
    atomic_write_text(path, buf.getvalue())


def read_csv(path):
    """Return ``(provenance, header, rows)``; rows are lists of strings."""
    with open(path, newline="") as fh:
        lines = fh.read().splitlines()
    prov = [ln for ln in lines if ln.startswith("#")]
    body = [ln for ln in lines if not ln.startswith("#")]
    rows = list(csv.reader(body))
    if not rows:
        raise ValueError(f"{path}: no header row")
    return (prov[0] if prov else ""), rows[0], rows[1:]


def write_json(path, obj) -> None:
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")
