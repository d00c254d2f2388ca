"""
Flat-file layer: documents in and out, CSV reports, and a JSON cache of
oracle results keyed by instance and field.
"""

import csv
import hashlib
import json
import logging
import os
import sys
from pathlib import Path

from instance import serialize
from errors import UsageError

logger = logging.getLogger(__name__)

# Where to cache oracle results
DATA_DIR = Path(os.environ.get("CDE_DATA_DIR", "."))
CACHE_DIR = DATA_DIR / "cache"
CACHE_FILE = CACHE_DIR / "oracle_cache.json"


# ─── DOCUMENTS ───────────────────────────────────────────────────────

def read_text(path):
    try:
        with open(path, "r", encoding="utf-8") as f:
            return f.read()
    except OSError as e:
        raise UsageError(f"Cannot read {path}: {e.strerror}")


def write_text(path, text):
    """Write text to path, or to stdout when path is None."""
    if path is None:
        sys.stdout.write(text)
        return
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            f.write(text)
    except OSError as e:
        raise UsageError(f"Cannot write {path}: {e.strerror}")


def dump_json(doc):
    return json.dumps(doc, ensure_ascii=False, indent=2) + "\n"


def write_json(path, doc):
    write_text(path, dump_json(doc))


def write_csv(path, header, rows):
    """Write rows (lists of already formatted cells) under header."""
    if path is None:
        out = sys.stdout
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
        return
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    logger.info(f"Wrote {len(rows)} rows to {path}")


def write_metadata(csv_path, metadata):
    """Sidecar JSON next to a CSV report: <csv>.meta.json."""
    meta_path = Path(f"{csv_path}.meta.json")
    write_json(meta_path, metadata)
    return meta_path


# ─── ORACLE CACHE ────────────────────────────────────────────────────

def cache_key(inst, q):
    digest = hashlib.sha256(serialize(inst).encode("utf-8")).hexdigest()
    return f"{digest}:q={q}"


def save_cache(entries):
    """Save cached oracle results; failures are logged, never raised."""
    try:
        CACHE_DIR.mkdir(parents=True, exist_ok=True)
        with open(CACHE_FILE, "w", encoding="utf-8") as f:
            json.dump(entries, f, ensure_ascii=False, indent=2)
        logger.debug(f"Saved oracle cache to {CACHE_FILE}")
    except Exception as e:
        logger.warning(f"Failed to save oracle cache: {e}")


def load_cache():
    if not CACHE_FILE.exists():
        return {}
    try:
        with open(CACHE_FILE, "r", encoding="utf-8") as f:
            data = json.load(f)
        logger.debug(f"Loaded oracle cache: {len(data)} entries")
        return data
    except Exception as e:
        logger.warning(f"Failed to load oracle cache: {e}")
        return {}


def lookup_oracle(inst, q):
    return load_cache().get(cache_key(inst, q))


def store_oracle(inst, q, doc):
    entries = load_cache()
    entries[cache_key(inst, q)] = doc
    save_cache(entries)
