# -*- coding: utf-8 -*-

__all__ = [
    'append_csv',
    'read_checkpoint',
    'read_csv',
    'read_json',
    'read_jsonl',
    'read_txt_lines',
    'write_checkpoint',
    'write_csv',
    'write_json',
    'write_jsonl',
    'write_txt_lines'
]


###########
# IMPORTS #
###########

# Standard

# noinspection PyPep8Naming
from csv import (
    QUOTE_MINIMAL as csv_quote_minimal,
    reader as csv_reader,
    writer as csv_writer
)

from json import (
    dumps as json_dumps,
    load as json_load,
    loads as json_loads,
    JSONDecodeError
)

from pathlib import (
    Path
)

from struct import (
    pack,
    unpack
)

# Libraries

import numpy as np

# Internal

from .custom_types import (
    tany,
    tconfig_dict,
    tcsv_rows,
    tlist_any,
    tlist_str,
    tpath,
    tstate_dict
)

from .exceptions import (
    CheckpointError,
    TraceFormatError
)

from .utilities import (
    atomic_write
)


#############
# CONSTANTS #
#############

_checkpoint_magic = b'DDLM1\n'
_checkpoint_version = 1
_checkpoint_dtypes = ('<f4', '<f8', '<i8', '|b1')


#############
# FUNCTIONS #
#############

def _format_cell(value: tany) -> str:

    if value is None:
        return ''

    if isinstance(value, (bool, np.bool_)):
        return 'true' if value else 'false'

    if isinstance(value, (float, np.floating)):
        return repr(float(value))

    return str(value)


def append_csv(file_path: tpath, header: tlist_str, rows: tcsv_rows):

    """
    Appends rows to a CSV file, writing the header first when the file does not exist yet.
    """

    file_path = Path(file_path)
    new_file = not file_path.is_file() or file_path.stat().st_size == 0

    file_path.parent.mkdir(parents=True, exist_ok=True)

    with open(file_path, mode='a', encoding='utf-8', newline='') as file:

        writer = csv_writer(file, delimiter=',', quoting=csv_quote_minimal, quotechar='"', lineterminator='\n')

        if new_file:
            writer.writerow(header)

        for row in rows:
            writer.writerow([_format_cell(row.get(column)) for column in header])


def read_checkpoint(file_path: tpath) -> tuple:

    """
    Reads a checkpoint archive and returns its header and its tensors.
    """

    with open(file_path, mode='rb') as file:

        magic = file.read(len(_checkpoint_magic))

        if magic != _checkpoint_magic:
            raise CheckpointError(f'The file "{file_path}" is not a checkpoint archive.')

        size_bytes = file.read(8)

        if len(size_bytes) != 8:
            raise CheckpointError(f'The checkpoint "{file_path}" is truncated.')

        size = unpack('<Q', size_bytes)[0]

        try:
            manifest = json_loads(file.read(size).decode('utf-8'))
        except (UnicodeDecodeError, JSONDecodeError) as e:
            raise CheckpointError(f'The checkpoint "{file_path}" has a corrupted manifest.') from e

        if manifest.get('version') != _checkpoint_version:
            raise CheckpointError(f'The checkpoint "{file_path}" has an unsupported version.')

        payload = file.read()

    tensors = {}

    for entry in manifest['tensors']:

        offset = entry['offset']
        nbytes = entry['nbytes']

        if entry['dtype'] not in _checkpoint_dtypes or offset + nbytes > len(payload):
            raise CheckpointError(f'The checkpoint "{file_path}" contains an invalid tensor entry: {entry["name"]}.')

        array = np.frombuffer(payload[offset:offset + nbytes], dtype=np.dtype(entry['dtype']))
        tensors[entry['name']] = array.reshape(entry['shape']).copy()

    return manifest['header'], tensors


def read_csv(file_path: tpath) -> tuple:

    with open(file_path, mode='r', encoding='utf-8', newline='') as file:

        rows = list(csv_reader(file))

    if len(rows) == 0:
        raise ValueError('The file header is invalid.')

    header = rows[0]
    content = [dict(zip(header, row)) for row in rows[1:] if len(row) > 0]

    return header, content


def read_json(file_path: tpath) -> tany:

    with open(file_path, mode='r', encoding='utf-8') as file:
        data = json_load(file)

    return data


def read_jsonl(file_path: tpath) -> tlist_any:

    """
    Reads a JSON Lines file, reporting the number of the first malformed line.
    """

    records = []

    with open(file_path, mode='r', encoding='utf-8') as file:

        for line_number, line in enumerate(file, start=1):

            if len(line.strip()) == 0:
                continue

            try:
                record = json_loads(line)
            except JSONDecodeError:
                raise TraceFormatError('malformed JSON record', line_number) from None

            if not isinstance(record, dict):
                raise TraceFormatError('the record is not a JSON object', line_number)

            records.append(record)

    return records


def read_txt_lines(file_path: tpath) -> tlist_str:

    with open(file_path, mode='r', encoding='utf-8', newline='') as file:
        lines = [line[:-1] if line.endswith('\n') else line for line in file]

    return lines


def write_checkpoint(file_path: tpath, header: tconfig_dict, tensors: tstate_dict):

    """
    Writes a checkpoint archive made of a magic line, a JSON manifest and the raw little-endian tensor bytes.
    """

    entries = []
    buffers = []
    offset = 0

    for name, tensor in tensors.items():

        array = np.asarray(tensor)

        if not array.flags.c_contiguous:
            array = array.copy(order='C')

        if array.dtype == np.float32:
            array = array.astype('<f4', copy=False)
        elif array.dtype == np.float64:
            array = array.astype('<f8', copy=False)
        elif np.issubdtype(array.dtype, np.integer):
            array = array.astype('<i8', copy=False)
        elif array.dtype == np.bool_:
            array = array.astype('|b1', copy=False)
        else:  # pragma: no cover
            raise CheckpointError(f'The tensor "{name}" has an unsupported data type.')

        data = array.tobytes()

        entries.append({'name': name, 'shape': list(array.shape), 'dtype': array.dtype.str, 'offset': offset, 'nbytes': len(data)})
        buffers.append(data)
        offset += len(data)

    manifest = {'version': _checkpoint_version, 'header': header, 'tensors': entries}
    manifest_bytes = json_dumps(manifest, sort_keys=True).encode('utf-8')

    with atomic_write(file_path, binary=True) as file:

        file.write(_checkpoint_magic)
        file.write(pack('<Q', len(manifest_bytes)))
        file.write(manifest_bytes)

        for data in buffers:
            file.write(data)


def write_csv(file_path: tpath, header: tlist_str, rows: tcsv_rows):

    with atomic_write(file_path) as file:

        writer = csv_writer(file, delimiter=',', quoting=csv_quote_minimal, quotechar='"', lineterminator='\n')
        writer.writerow(header)

        for row in rows:
            writer.writerow([_format_cell(row.get(column)) for column in header])


def write_json(file_path: tpath, data: tany):

    with atomic_write(file_path) as file:
        file.write(json_dumps(data, indent=2, sort_keys=True, allow_nan=False))
        file.write('\n')


def write_jsonl(file_path: tpath, records: tlist_any):

    with atomic_write(file_path) as file:
        for record in records:
            file.write(json_dumps(record, allow_nan=False))
            file.write('\n')


def write_txt_lines(file_path: tpath, lines: tlist_str):

    with atomic_write(file_path) as file:
        for line in lines:
            file.write(line)
            file.write('\n')
