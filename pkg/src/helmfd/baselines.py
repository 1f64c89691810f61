"""Reference detectors the hierarchical model is compared against.

Two baselines share the one-class ELM head:
  * a single-layer one-class ELM straight on the (normalized) inputs, and
  * PCA feature extraction followed by the same head.
Both receive the same fairness treatment as the hierarchical model: their
head inputs are rescaled so the random layer's pre-activations land in the
sigmoid's responsive range, with the rescale folded into stored parameters
so the run-time math stays a plain forward pass.
"""
from __future__ import annotations

import numpy as np

from .data import (NormalizationStats, RngStream, apply_normalization,
                   as_matrix, fit_normalization)
from .elm import ElmLayer, hidden, random_layer, ridge_solve

from dataclasses import dataclass

# Target standard deviation of the head's pre-activations. A random +-1
# uniform weight vector against D unit-variance inputs has pre-activation
# std sqrt(D/3); dividing inputs by sqrt(D/3)/2.6 pins that spread at 2.6
# regardless of D, keeping the sigmoids off their flat tails.
HEAD_PREACT_SPREAD = 2.6


def input_scale(dim: int) -> float:
    return HEAD_PREACT_SPREAD / np.sqrt(dim / 3.0)


# --- PCA --------------------------------------------------------------------

@dataclass
class PcaModel:
    mean: np.ndarray                 # feature means of the training data
    components: np.ndarray           # D x L, orthonormal columns
    explained_variance: np.ndarray   # descending, one per kept component
    l_pca: int

    def transform(self, X) -> np.ndarray:
        X = as_matrix(X, "X")
        if X.shape[1] != self.mean.shape[0]:
            raise ValueError("dimension mismatch in pca transform")
        return (X - self.mean) @ self.components


def pca_fit(X, l_pca: int, variance_cap: float = 0.99) -> PcaModel:
    """Principal components of X, at most l_pca of them, further capped so the
    kept components explain no more than `variance_cap` of total variance
    (at least one component is always kept)."""
    X = as_matrix(X, "X")
    if l_pca < 1:
        raise ValueError("l_pca must be >= 1")
    if X.shape[0] < 2:
        raise ValueError("pca_fit needs at least two rows")
    mean = X.mean(axis=0)
    Xc = X - mean
    cov = (Xc.T @ Xc) / (X.shape[0] - 1)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals = np.clip(evals[order], 0.0, None)
    evecs = evecs[:, order]

    total = evals.sum()
    if total <= 0:
        keep = 1
    else:
        ratio = np.cumsum(evals) / total
        keep = int(np.searchsorted(ratio, variance_cap) + 1)
        keep = max(1, min(keep, evals.shape[0]))
    L = max(1, min(l_pca, keep))
    return PcaModel(mean=mean, components=evecs[:, :L],
                    explained_variance=evals[:L], l_pca=L)


def pca_transform(model: PcaModel, X) -> np.ndarray:
    return model.transform(X)


# --- one-class ELM ----------------------------------------------------------

@dataclass
class OneClassElm:
    layer: ElmLayer
    norm: NormalizationStats         # input scale folded into std


def one_class_train(X_train, width: int, C: float, rng,
                    scale: float | None = None) -> OneClassElm:
    """Single random layer plus ridge head against the constant target 1.
    `scale` defaults to the spread-pinning input scale for the data's width;
    it is folded into the stored normalization."""
    X = as_matrix(X_train, "X_train")
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    norm = fit_normalization(X)
    if scale is None:
        scale = input_scale(X.shape[1])
    norm = NormalizationStats(mean=norm.mean, std=norm.std / scale)
    x = apply_normalization(X, norm)
    layer = random_layer(x.shape[1], width, "sigmoid", gen)
    H = hidden(layer, x)
    layer.beta = ridge_solve(H, np.ones((x.shape[0], 1)), C)
    return OneClassElm(layer=layer, norm=norm)


def one_class_run(model: OneClassElm, X) -> np.ndarray:
    X = as_matrix(X, "X")
    x = apply_normalization(X, model.norm)
    H = hidden(model.layer, x)
    return (H @ model.layer.beta).ravel()


# --- PCA + one-class ELM ----------------------------------------------------

@dataclass
class PcaElm:
    norm: NormalizationStats         # plain z-scoring of the raw inputs
    pca: PcaModel
    code_scale: np.ndarray           # per-component std of training codes
    layer: ElmLayer


def pca_elm_train(X_train, l_pca: int, width: int, C: float, rng) -> PcaElm:
    """PCA on z-scored inputs, codes rescaled to unit train std, then the
    one-class head. The code rescale lives in `code_scale`, not inside the
    component matrix, so the components stay orthonormal."""
    X = as_matrix(X_train, "X_train")
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    norm = fit_normalization(X)
    x = apply_normalization(X, norm)
    pca = pca_fit(x, l_pca)
    codes = pca.transform(x)
    code_scale = codes.std(axis=0)
    code_scale = np.where(code_scale < 1e-12, 1.0, code_scale)
    z = codes / code_scale
    layer = random_layer(z.shape[1], width, "sigmoid", gen)
    H = hidden(layer, z)
    layer.beta = ridge_solve(H, np.ones((z.shape[0], 1)), C)
    return PcaElm(norm=norm, pca=pca, code_scale=code_scale, layer=layer)


def pca_elm_run(model: PcaElm, X) -> np.ndarray:
    X = as_matrix(X, "X")
    x = apply_normalization(X, model.norm)
    z = model.pca.transform(x) / model.code_scale
    H = hidden(model.layer, z)
    return (H @ model.layer.beta).ravel()
