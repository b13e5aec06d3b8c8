import numpy as np
import pytest

from newsvol.corpus import Corpus, Document, Vocabulary


def build_corpus(entries, query_term=""):
    """Corpus from (doc_id, date, token strings) triples, ids assigned in
    first-occurrence order."""
    vocab = Vocabulary()
    documents = []
    for doc_id, day, tokens in entries:
        ids = np.array([vocab.add(t) for t in tokens], dtype=np.int32)
        documents.append(Document(doc_id, day, ids))
    return Corpus(documents, vocab, query_term=query_term)


@pytest.fixture
def make_corpus():
    return build_corpus
