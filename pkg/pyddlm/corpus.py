# -*- coding: utf-8 -*-

__all__ = [
    'PAD_ID',
    'PAD_TOKEN',
    'CorpusBatch',
    'Vocabulary',
    'batch_at',
    'batches',
    'batches_per_epoch',
    'build_vocabulary',
    'decode',
    'encode',
    'encode_corpus',
    'load_toy_corpus',
    'read_corpus',
    'read_vocabulary',
    'tokenize',
    'write_vocabulary'
]


###########
# IMPORTS #
###########

# Standard

from collections import (
    Counter
)

from hashlib import (
    sha1
)

from inspect import (
    trace
)

from math import (
    ceil
)

from pathlib import (
    Path
)

from typing import (
    Iterator,
    NamedTuple
)

# Libraries

import numpy as np

# Internal

from .custom_types import (
    tarray,
    tlist_str,
    tpath
)

from .files_io import (
    read_txt_lines,
    write_txt_lines
)

from .utilities import (
    create_rng,
    derive_seed,
    generate_validation_error
)

from .validation import (
    validate_enumerator,
    validate_file_path,
    validate_integer,
    validate_matrix,
    validate_text,
    validate_token_ids
)


#############
# CONSTANTS #
#############

PAD_ID = 0
PAD_TOKEN = '<pad>'

_modes = ['char', 'word']
_toy_corpus = Path(__file__).parent / 'data' / 'toy_corpus.txt'


###########
# CLASSES #
###########

class CorpusBatch(NamedTuple):

    sequences: tarray
    indices: tarray

    @property
    def batch_size(self) -> int:

        return int(self.sequences.shape[0])


class Vocabulary:

    """
    Defines an immutable token vocabulary whose identifiers are dense and whose index 0 is the padding token.

    :param tokens: the ordered list of distinct tokens, starting with the padding token.
    :param mode: the tokenization mode (**char** or **word**).
    :raises ValidationError: if any input argument is not compliant.
    """

    def __init__(self, tokens: tlist_str, mode: str = 'char'):

        try:

            tokens = _validate_tokens(tokens)
            mode = validate_enumerator(mode, _modes)

        except Exception as e:  # pragma: no cover
            raise generate_validation_error(e, trace()) from None

        self._tokens = tuple(tokens)
        self._id_of = {token: index for index, token in enumerate(self._tokens)}
        self._mode = mode

    def __eq__(self, other) -> bool:

        if isinstance(other, Vocabulary):
            return self._tokens == other._tokens and self._mode == other._mode

        return False

    def __hash__(self) -> int:

        return hash((self._tokens, self._mode))

    def __len__(self) -> int:

        return len(self._tokens)

    def __repr__(self) -> str:

        return f'Vocabulary(size={self.size:d}, mode={self._mode})'

    @property
    def fingerprint(self) -> str:

        """
        A short digest identifying the vocabulary content.
        """

        content = '\n'.join((self._mode,) + self._tokens).encode('utf-8')

        return sha1(content).hexdigest()[:16]

    @property
    def id_of(self) -> dict:

        return dict(self._id_of)

    @property
    def mode(self) -> str:

        return self._mode

    @property
    def size(self) -> int:

        return len(self._tokens)

    @property
    def tokens(self) -> tlist_str:

        return list(self._tokens)

    def index(self, token: str) -> int:

        return self._id_of.get(token, PAD_ID)

    def lookup(self, index: int) -> str:

        return self._tokens[index]


#############
# FUNCTIONS #
#############

def _epoch_order(size: int, seed: int, epoch: int) -> tarray:

    rng = create_rng(derive_seed(seed, epoch))

    return rng.permutation(size)


def _lines(text: str) -> tlist_str:

    return [line for line in text.splitlines() if len(line.strip()) > 0]


def _validate_tokens(value) -> tlist_str:

    if not isinstance(value, (list, tuple)) or len(value) == 0 or not all(isinstance(token, str) and len(token) > 0 for token in value):
        raise TypeError('The "@arg@" parameter must be a non-empty list of non-empty strings.')

    if value[PAD_ID] != PAD_TOKEN:
        raise ValueError(f'The "@arg@" parameter must contain the padding token at index {PAD_ID:d}.')

    if len(set(value)) < len(value):
        raise ValueError('The "@arg@" parameter must contain only distinct tokens.')

    return list(value)


def batch_at(corpus: tarray, batch_size: int, seed: int, step: int) -> CorpusBatch:

    """
    The function returns the batch consumed at the given training step of an endless shuffled stream.
    """

    size = corpus.shape[0]
    per_epoch = batches_per_epoch(size, batch_size)

    epoch, index = divmod(step, per_epoch)
    order = _epoch_order(size, seed, epoch)
    selection = order[index * batch_size:(index + 1) * batch_size]

    return CorpusBatch(corpus[selection], selection)


def batches(corpus: tarray, batch_size: int, seed: int, epochs: int = 1) -> Iterator[CorpusBatch]:

    """
    The function streams shuffled batches of an encoded corpus; every sequence appears once per epoch.

    :param corpus: the encoded corpus, one sequence per row.
    :param batch_size: the number of sequences per batch.
    :param seed: the seed driving the shuffle.
    :param epochs: the number of epochs to stream.
    :raises ValidationError: if any input argument is not compliant.
    """

    try:

        corpus = validate_matrix(corpus).astype(np.int64)
        batch_size = validate_integer(batch_size, lower_limit=(1, False))
        seed = validate_integer(seed, lower_limit=(0, False))
        epochs = validate_integer(epochs, lower_limit=(1, False))

    except Exception as e:  # pragma: no cover
        raise generate_validation_error(e, trace()) from None

    size = corpus.shape[0]
    per_epoch = batches_per_epoch(size, batch_size)

    for step in range(epochs * per_epoch):
        yield batch_at(corpus, batch_size, seed, step)


def batches_per_epoch(size: int, batch_size: int) -> int:

    return int(ceil(size / batch_size))


def build_vocabulary(text: str, mode: str = 'char', max_size: int = 512) -> Vocabulary:

    """
    The function builds a vocabulary from the non-empty lines of a text, keeping the most frequent tokens.

    | **Notes:**

    * Tokens are ordered by descending frequency, ties being broken lexicographically.
    * The padding token occupies index 0 and counts toward **max_size**.

    :param text: the raw text.
    :param mode: the tokenization mode (**char** or **word**).
    :param max_size: the maximum vocabulary size, padding token included.
    :raises ValidationError: if any input argument is not compliant.
    """

    try:

        text = validate_text(text)
        mode = validate_enumerator(mode, _modes)
        max_size = validate_integer(max_size, lower_limit=(2, False))

        counts = Counter()

        for line in _lines(text):
            counts.update(token for token in tokenize(line, mode) if token != PAD_TOKEN)

        if len(counts) == 0:
            raise ValueError('empty corpus')

    except Exception as e:  # pragma: no cover
        raise generate_validation_error(e, trace()) from None

    ranked = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
    tokens = [PAD_TOKEN] + [token for token, _ in ranked[:max_size - 1]]

    return Vocabulary(tokens, mode)


def decode(ids: tarray, vocab: Vocabulary) -> str:

    """
    The function converts token identifiers back into text, dropping padding tokens.
    """

    try:

        ids = validate_token_ids(ids, vocab.size)

    except Exception as e:  # pragma: no cover
        raise generate_validation_error(e, trace()) from None

    tokens = [vocab.lookup(int(i)) for i in ids if i != PAD_ID]
    separator = '' if vocab.mode == 'char' else ' '

    return separator.join(tokens)


def encode(text: str, vocab: Vocabulary, seq_len: int) -> tarray:

    """
    The function encodes a text into exactly **seq_len** token identifiers, padding or truncating on the right.

    | **Notes:**

    * Unknown tokens are mapped to the padding token.

    :param text: the raw text.
    :param vocab: the vocabulary, built with the same tokenization mode.
    :param seq_len: the output length.
    :raises ValidationError: if any input argument is not compliant.
    """

    try:

        text = validate_text(text)
        seq_len = validate_integer(seq_len, lower_limit=(1, False))

    except Exception as e:  # pragma: no cover
        raise generate_validation_error(e, trace()) from None

    ids = [vocab.index(token) for token in tokenize(text, vocab.mode)][:seq_len]
    ids.extend([PAD_ID] * (seq_len - len(ids)))

    return np.array(ids, dtype=np.int64)


def encode_corpus(text: str, vocab: Vocabulary, seq_len: int) -> tarray:

    """
    The function encodes every non-empty line of a text into one sequence.

    :raises ValidationError: if any input argument is not compliant.
    """

    try:

        text = validate_text(text)
        seq_len = validate_integer(seq_len, lower_limit=(1, False))
        lines = _lines(text)

        if len(lines) == 0:
            raise ValueError('empty corpus')

    except Exception as e:  # pragma: no cover
        raise generate_validation_error(e, trace()) from None

    return np.vstack([encode(line, vocab, seq_len) for line in lines])


def load_toy_corpus() -> str:

    return _toy_corpus.read_text(encoding='utf-8')


def read_corpus(file_path: tpath) -> str:

    try:

        file_path = validate_file_path(file_path, False)

    except Exception as e:  # pragma: no cover
        raise generate_validation_error(e, trace()) from None

    return Path(file_path).read_text(encoding='utf-8')


def read_vocabulary(file_path: tpath, mode: str = 'char') -> Vocabulary:

    """
    The function reads a vocabulary stored one token per line, the line number being the identifier.

    :raises ValidationError: if any input argument is not compliant.
    """

    try:

        file_path = validate_file_path(file_path, False)
        mode = validate_enumerator(mode, _modes)

    except Exception as e:  # pragma: no cover
        raise generate_validation_error(e, trace()) from None

    return Vocabulary(read_txt_lines(file_path), mode)


def tokenize(text: str, mode: str) -> tlist_str:

    if mode == 'char':
        return [c for c in text if c not in '\r\n']

    return text.split()


def write_vocabulary(vocab: Vocabulary, file_path: tpath):

    try:

        file_path = validate_file_path(file_path, True)

    except Exception as e:  # pragma: no cover
        raise generate_validation_error(e, trace()) from None

    write_txt_lines(file_path, vocab.tokens)
