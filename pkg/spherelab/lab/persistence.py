"""
Result files: JSON for manifests and summaries, JSON lines for samples and
CSV for tables.  Floats are written with 17 significant digits so that a
read reproduces every value bit for bit.
"""
import csv
import json
import logging
import math
import pathlib

import numpy as np

from .models import ResultFile

logger = logging.getLogger(__name__)

FORMATS = {
    ResultFile.JSON: '.json',
    ResultFile.JSONL: '.jsonl',
    ResultFile.CSV: '.csv',
}


class PersistenceError(Exception):
    def __init__(self, path, cause):
        super().__init__('{}: {}'.format(path, cause))
        self.path = path
        self.cause = cause


def format_number(value):
    value = float(value)
    if not math.isfinite(value):
        return 'null'
    return format(value, '.17g')


def dumps(obj):
    """
    JSON text for `obj` with floats at 17 significant digits; non-finite
    floats become null.
    """
    if obj is None or isinstance(obj, (bool, np.bool_)):
        return json.dumps(bool(obj) if obj is not None else None)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format_number(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, pathlib.PurePath):
        return json.dumps(str(obj))
    if isinstance(obj, dict):
        return '{' + ', '.join('{}: {}'.format(json.dumps(str(k)), dumps(v))
                               for k, v in obj.items()) + '}'
    if isinstance(obj, (list, tuple, np.ndarray)):
        return '[' + ', '.join(dumps(v) for v in obj) + ']'
    raise TypeError('cannot serialize {}'.format(type(obj).__name__))


def _cell(value):
    if isinstance(value, (float, np.floating)):
        return format_number(value)
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return '' if value is None else str(value)


def write_json(path, obj):
    path = pathlib.Path(path)
    try:
        path.write_text(dumps(obj) + '\n')
    except OSError as e:
        raise PersistenceError(path, e)
    return path


def write_jsonl(path, rows):
    path = pathlib.Path(path)
    try:
        with path.open('w') as f:
            for row in rows:
                f.write(dumps(row) + '\n')
    except OSError as e:
        raise PersistenceError(path, e)
    return path


def write_csv(path, header, rows):
    path = pathlib.Path(path)
    try:
        with path.open('w', newline='') as f:
            writer = csv.writer(f, lineterminator='\n')
            writer.writerow(header)
            for row in rows:
                writer.writerow([_cell(v) for v in row])
    except OSError as e:
        raise PersistenceError(path, e)
    return path


def read_json(path):
    try:
        with pathlib.Path(path).open() as f:
            return json.load(f)
    except (OSError, ValueError) as e:
        raise PersistenceError(path, e)


def read_jsonl(path):
    try:
        with pathlib.Path(path).open() as f:
            return [json.loads(line) for line in f if line.strip()]
    except (OSError, ValueError) as e:
        raise PersistenceError(path, e)


def read_csv(path):
    """
    Rows as dicts of strings keyed by the header.
    """
    try:
        with pathlib.Path(path).open(newline='') as f:
            return list(csv.DictReader(f))
    except OSError as e:
        raise PersistenceError(path, e)


def persist_results(run, name, payload, fmt, header=None):
    """
    Write `payload` into the run's output directory and register it as a
    `ResultFile`; the content digest is filled in on save.

    `payload` is an object for JSON, an iterable of objects for JSON lines
    and an iterable of rows (with `header`) for CSV.
    """
    if fmt not in FORMATS:
        raise ValueError('unknown format {}'.format(fmt))
    directory = pathlib.Path(run.output_dir)
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise PersistenceError(directory, e)
    path = directory / (name + FORMATS[fmt])
    if fmt == ResultFile.JSON:
        write_json(path, payload)
    elif fmt == ResultFile.JSONL:
        write_jsonl(path, payload)
    else:
        write_csv(path, header or [], payload)
    logger.debug('wrote %s', path)
    result, _ = ResultFile.objects.update_or_create(
        run=run,
        name=name,
        defaults={
            'path': str(path),
            'fmt': fmt
        },
    )
    return result
