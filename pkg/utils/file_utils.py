"""
Report and Transcript File Utilities

Provides file helpers for:
- Canonical JSON encoding (sorted keys, no timestamps) for byte-identical output
- JSON-lines report writing
- Atomic whole-file writes for transcripts

Author: DIOT Lab Development Team
"""

import json
import os
import tempfile


def canonical_json(document):
    """Serialize a document deterministically."""
    return json.dumps(document, sort_keys=True, separators=(',', ':'), ensure_ascii=False)


def ensure_parent_dir(path):
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)


def write_atomic(path, text):
    """
    Write ``text`` to ``path`` through a temporary file and rename.

    Args:
        path: Destination file
        text: Full file contents
    """
    ensure_parent_dir(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp_path = tempfile.mkstemp(dir=directory, prefix='.tmp-', suffix='.json')
    try:
        with os.fdopen(fd, 'w', encoding='utf-8') as handle:
            handle.write(text)
        os.replace(tmp_path, path)
    except Exception:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise


def write_json_lines(path, records):
    """
    Write one canonical JSON object per line.

    Args:
        path: Destination file
        records: Iterable of JSON-serializable dicts, written in order
    """
    lines = [canonical_json(record) for record in records]
    write_atomic(path, '\n'.join(lines) + '\n')


def read_json_lines(path):
    with open(path, 'r', encoding='utf-8') as handle:
        return [json.loads(line) for line in handle if line.strip()]


def read_json(path):
    with open(path, 'r', encoding='utf-8') as handle:
        return json.load(handle)
