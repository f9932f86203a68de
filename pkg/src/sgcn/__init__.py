"""Semantic graph convolutional network for implicit discourse relation classification."""

from sgcn.model import ModelDims, SgcnModel

__version__ = "0.1.0"

__all__ = ["ModelDims", "SgcnModel", "__version__"]
