"""Pipeline configuration schema (JSON).

Unknown keys are rejected at every level, including parameters that do not
apply to the selected algorithm or synthetic family.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import ConfigError


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


SYNTH_KEYS = {
    "blobs": {"family", "k", "per_cluster", "d", "separation"},
    "sequences": {"family", "k", "per_cluster", "base_len", "noise", "warp"},
    "multistage": {"family", "k", "per_cluster", "stages", "walk_len", "chain"},
}


class SynthSpec(_Strict):
    family: Literal["blobs", "sequences", "multistage"]
    k: int = Field(3, ge=1)
    per_cluster: int = Field(50, ge=1)
    d: int = Field(2, ge=1)
    separation: float = Field(10.0, ge=0)
    base_len: int = Field(40, ge=2)
    noise: float = Field(0.1, ge=0)
    warp: float = Field(0.2, ge=0, le=0.9)
    stages: int = Field(5, ge=2)
    walk_len: int = Field(50, ge=2)
    chain: Literal["dirichlet", "deterministic", "shared"] = "dirichlet"

    @model_validator(mode="after")
    def _family_keys(self):
        extra = self.model_fields_set - SYNTH_KEYS[self.family]
        if extra:
            raise ValueError(f"keys {sorted(extra)} do not apply to synth family '{self.family}'")
        return self


class KMeansParams(_Strict):
    k: int = Field(3, ge=1)
    restarts: int = Field(8, ge=1)
    max_iter: int = Field(300, ge=1)


class GmmParams(_Strict):
    k: int = Field(3, ge=1)
    max_iter: int = Field(300, ge=1)
    tol: float = Field(1e-6, gt=0)


class DbscanConfig(_Strict):
    eps: Union[float, Literal["auto"]] = "auto"
    min_pts: int = Field(5, ge=1)
    metric: Literal["euclidean", "dtw"] = "euclidean"
    band: Optional[int] = Field(None, ge=0)
    normalize: bool = False

    @model_validator(mode="after")
    def _eps_positive(self):
        if self.eps != "auto" and not self.eps > 0:
            raise ValueError("eps must be > 0 or 'auto'")
        return self


PARAM_MODELS = {"kmeans": KMeansParams, "gmm": GmmParams, "dbscan": DbscanConfig}


class TuningSpec(_Strict):
    k_min: int = Field(2, ge=1)
    k_max: int = Field(8, ge=2)
    binding: Literal["silhouette", "elbow", "kdist", "none"] = "silhouette"


class StabilitySpec(_Strict):
    runs: int = Field(20, ge=2)
    noise_scale: float = Field(0.05, ge=0)
    threshold: float = Field(0.5, ge=0, le=1)


class AlternativesSpec(_Strict):
    count: int = Field(5, ge=1)


class SurrogateSpec(_Strict):
    max_depth: int = Field(4, ge=0)
    min_leaf: Optional[int] = Field(None, ge=1)


class ShapSpec(_Strict):
    method: Literal["tree", "kernel"] = "tree"
    model: Literal["surrogate", "gmm"] = "surrogate"
    nsamples: Optional[int] = Field(None, ge=1)
    background: int = Field(100, ge=1)
    max_rows: Optional[int] = Field(None, ge=1)


class EmbeddingSpec(_Strict):
    method: Literal["tsne", "pca"] = "tsne"
    perplexity: float = Field(30.0, ge=1)
    iters: int = Field(1000, ge=1)


class PipelineConfig(_Strict):
    input: Optional[str] = None
    label_column: Optional[str] = None
    synth: Optional[SynthSpec] = None
    standardize: bool = True
    algorithm: Literal["kmeans", "dbscan", "gmm"] = "kmeans"
    params: dict = Field(default_factory=dict)
    tuning: Optional[TuningSpec] = None
    stability: Optional[StabilitySpec] = None
    alternatives: Optional[AlternativesSpec] = None
    surrogate: Optional[SurrogateSpec] = None
    shap: Optional[ShapSpec] = None
    embedding: Optional[EmbeddingSpec] = None
    seed: int = 42
    out_dir: Optional[str] = None
    format: Literal["json", "markdown", "both"] = "both"

    @model_validator(mode="after")
    def _cross_checks(self):
        if (self.input is None) == (self.synth is None):
            raise ValueError("exactly one of 'input' and 'synth' must be given")
        try:
            params = PARAM_MODELS[self.algorithm](**self.params)
        except ValidationError as err:
            raise ValueError(f"invalid params for '{self.algorithm}': {_describe(err)}") from None
        object.__setattr__(self, "params", params.model_dump())
        if self.tuning is not None:
            if self.tuning.binding == "kdist" and self.algorithm != "dbscan":
                raise ValueError("tuning binding 'kdist' applies only to dbscan")
            if self.tuning.binding in ("silhouette", "elbow") and self.algorithm == "dbscan":
                raise ValueError("tuning binding for dbscan must be 'kdist' or 'none'")
            if self.tuning.k_min >= self.tuning.k_max:
                raise ValueError("tuning k_min must be < k_max")
        if self.shap is not None and self.shap.model == "gmm":
            if self.algorithm != "gmm" or self.shap.method != "kernel":
                raise ValueError("shap model 'gmm' needs algorithm 'gmm' and method 'kernel'")
        if self.shap is not None and self.surrogate is None and self.shap.model == "surrogate":
            raise ValueError("shap on the surrogate needs a 'surrogate' section")
        metric = self.params.get("metric", "euclidean")
        if metric == "dtw" and self.synth is not None and self.synth.family != "sequences":
            raise ValueError("metric 'dtw' needs sequence data (synth family 'sequences')")
        if metric == "dtw" and self.input is not None:
            raise ValueError("metric 'dtw' needs raw sequences, which CSV input cannot carry")
        return self

    def hashable(self) -> dict:
        """Canonical dict used for the provenance hash (output location excluded)."""
        data = self.model_dump(mode="json")
        data.pop("out_dir", None)
        data.pop("format", None)
        return data


def _describe(err: ValidationError) -> str:
    lines = []
    for e in err.errors():
        loc = ".".join(str(p) for p in e["loc"]) or "config"
        msg = e["msg"]
        if e["type"] == "extra_forbidden":
            msg = "unknown key"
        inp = e.get("input")
        shown = f" (got {inp!r})" if e["type"] not in ("extra_forbidden", "missing") and not isinstance(inp, dict) else ""
        lines.append(f"{loc}: {msg}{shown}")
    return "; ".join(lines)


def parse_config(data: dict, overrides: dict | None = None) -> PipelineConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    merged = {**data, **{k: v for k, v in (overrides or {}).items() if v is not None}}
    try:
        return PipelineConfig(**merged)
    except ValidationError as err:
        raise ConfigError(_describe(err)) from None
    except TypeError as err:
        raise ConfigError(str(err)) from None


def load_config(path, overrides: dict | None = None) -> PipelineConfig:
    try:
        text = Path(path).read_text()
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"config {path} is not valid JSON: {err}") from None
    return parse_config(data, overrides)

