import numpy as np
import pytest

from sgcn.encoder import EmbeddingTable
from sgcn.model import ModelDims, SgcnModel
from sgcn.rng import SplitMix64


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def tiny_model(seed=0, hidden=4, gcn_size=5, mlp_hidden=3, num_classes=4, d_e=5, vocab=8, finetune=True):
    r = SplitMix64(seed)
    tokens = [f"w{k}" for k in range(vocab)]
    table = EmbeddingTable.from_vectors(tokens, r.uniform(-1, 1, (vocab, d_e)), r)
    dims = ModelDims(
        d_e=d_e,
        hidden=hidden,
        gcn_size=gcn_size,
        mlp_hidden=mlp_hidden,
        num_classes=num_classes,
        finetune_embeddings=finetune,
    )
    model = SgcnModel.init(dims, table, [f"c{k}" for k in range(num_classes)], seed)
    # perturb biases so no gradient group is identically zero
    for name, arr in model.params.items():
        if ".b" in name:
            arr += r.uniform(-0.3, 0.3, arr.shape)
    return model, tokens


@pytest.fixture
def small_model():
    return tiny_model()


ACCEPTANCE_LINES = []


def acceptance_report(number, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
