"""The full SGCN: encoder -> interaction graph -> GCN -> concat pool -> MLP."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from sgcn.autodiff import Tape, Tensor, softmax, softmax_cross_entropy
from sgcn.autodiff.fused import LSTM_PARAM_NAMES
from sgcn.classifier import MlpParams, classify, concat_pool, predict
from sgcn.encoder import EmbeddingTable, LstmParams, bilstm_encode, embed_sequence, glorot
from sgcn.graph import InteractionGraph, build_graph, gcn_forward, stack_nodes
from sgcn.rng import SplitMix64


@dataclass
class ModelDims:
    d_e: int = 300
    hidden: int = 128
    gcn_size: int = 100
    mlp_hidden: int = 64
    num_classes: int = 4
    forget_bias: float = 1.0
    degree_floor: float = 1.0
    finetune_embeddings: bool = False
    lowercase: bool = True

    @property
    def d_h(self) -> int:
        return 2 * self.hidden

    def to_dict(self) -> dict:
        return asdict(self)


def param_shapes(dims: ModelDims, vocab_rows: int) -> Dict[str, Tuple[int, int]]:
    H, d_e = dims.hidden, dims.d_e
    shapes = {"embedding": (vocab_rows, d_e)}
    for direction in ("lstm_fwd", "lstm_bwd"):
        for name in LSTM_PARAM_NAMES:
            shapes[f"{direction}.{name}"] = (H, H) if name[0] == "W" else (H, d_e) if name[0] == "U" else (1, H)
    shapes["gcn.W_g"] = (dims.d_h, dims.gcn_size)
    shapes["mlp.W1"] = (2 * dims.gcn_size, dims.mlp_hidden)
    shapes["mlp.b1"] = (1, dims.mlp_hidden)
    shapes["mlp.W2"] = (dims.mlp_hidden, dims.num_classes)
    shapes["mlp.b2"] = (1, dims.num_classes)
    return shapes


@dataclass
class Forward:
    logits: Tensor
    h1: Tensor
    h2: Tensor
    graph: InteractionGraph
    x_g: Tensor
    loss: Optional[Tensor] = None

    @property
    def degree_floor_hits(self) -> int:
        return self.graph.degree_floor_hits


@dataclass
class SgcnModel:
    dims: ModelDims
    params: Dict[str, np.ndarray]
    vocab: Dict[str, int]
    classes: List[str]
    meta: dict = field(default_factory=dict)

    @classmethod
    def init(cls, dims: ModelDims, table: EmbeddingTable, classes: Sequence[str], seed: int) -> "SgcnModel":
        if table.dim != dims.d_e:
            raise ValueError(f"embedding width {table.dim} != configured d_e {dims.d_e}")
        if len(classes) != dims.num_classes:
            raise ValueError(f"{len(classes)} class names for {dims.num_classes} outputs")
        rng = SplitMix64(seed)
        params = {"embedding": table.matrix.copy()}
        for direction in ("lstm_fwd", "lstm_bwd"):
            lstm = LstmParams.init(dims.hidden, dims.d_e, rng.fork(), dims.forget_bias)
            for name, arr in lstm.arrays.items():
                params[f"{direction}.{name}"] = arr
        params["gcn.W_g"] = glorot(rng, dims.d_h, dims.gcn_size)
        params["mlp.W1"] = glorot(rng, 2 * dims.gcn_size, dims.mlp_hidden)
        params["mlp.b1"] = np.zeros((1, dims.mlp_hidden))
        params["mlp.W2"] = glorot(rng, dims.mlp_hidden, dims.num_classes)
        params["mlp.b2"] = np.zeros((1, dims.num_classes))
        return cls(dims, params, dict(table.vocab), list(classes))

    @property
    def table(self) -> EmbeddingTable:
        return EmbeddingTable(self.vocab, self.params["embedding"], self.dims.lowercase)

    def trainable(self) -> List[str]:
        names = list(self.params)
        if not self.dims.finetune_embeddings:
            names.remove("embedding")
        return names

    def lstm(self, direction: str) -> LstmParams:
        return LstmParams({n: self.params[f"{direction}.{n}"] for n in LSTM_PARAM_NAMES})

    def forward(
        self,
        arg1: Sequence[str],
        arg2: Sequence[str],
        label: Optional[int] = None,
        tape: Optional[Tape] = None,
    ) -> Tuple[Forward, Dict[str, Tensor]]:
        """Run one argument pair. With a tape, trainable params are watched
        and returned by name so their gradients can be read afterwards."""
        leaves: Dict[str, Tensor] = {}

        def get(name: str) -> Tensor:
            if tape is not None and (name != "embedding" or self.dims.finetune_embeddings):
                leaves[name] = tape.watch(self.params[name])
                return leaves[name]
            return Tensor(self.params[name])

        table = self.table
        emb = get("embedding")
        fwd = [get(f"lstm_fwd.{n}") for n in LSTM_PARAM_NAMES]
        bwd = [get(f"lstm_bwd.{n}") for n in LSTM_PARAM_NAMES]
        h1 = bilstm_encode(fwd, bwd, embed_sequence(table, arg1, emb))
        h2 = bilstm_encode(fwd, bwd, embed_sequence(table, arg2, emb))
        graph = build_graph(h1, h2, self.dims.degree_floor)
        x_g = gcn_forward(graph, stack_nodes(h1, h2), get("gcn.W_g"))
        mlp = [get(n) for n in ("mlp.W1", "mlp.b1", "mlp.W2", "mlp.b2")]
        logits = classify(concat_pool(x_g), mlp)
        out = Forward(logits, h1, h2, graph, x_g)
        if label is not None:
            out.loss = softmax_cross_entropy(logits, label)
        return out, leaves

    def loss_and_grads(self, arg1, arg2, label: int) -> Tuple[float, Dict[str, np.ndarray], int]:
        tape = Tape()
        out, leaves = self.forward(arg1, arg2, label, tape)
        tape.backward(out.loss)
        grads = {name: tape.grad(t) for name, t in leaves.items()}
        return out.loss.item(), grads, out.degree_floor_hits

    def logits(self, arg1, arg2) -> np.ndarray:
        return self.forward(arg1, arg2)[0].logits.value[0]

    def predict(self, arg1, arg2) -> int:
        return predict(self.logits(arg1, arg2))

    def probabilities(self, arg1, arg2) -> np.ndarray:
        return softmax(self.logits(arg1, arg2))

    def mlp(self) -> MlpParams:
        return MlpParams(*(self.params[n] for n in ("mlp.W1", "mlp.b1", "mlp.W2", "mlp.b2")))
