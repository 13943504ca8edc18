"""Self-describing JSON serialization for fitted models.

Floats are emitted through Python's shortest round-trip repr, so a
saved-then-loaded model reproduces every parameter bit for bit at double
precision. The envelope carries an ``algorithm`` tag that selects the
model class on load; training metadata travels alongside but does not
affect the restored model.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .baselines import LinRegModel, SvrModel, SvrParams
from .mlp import MinMaxScale, MlpModel

FORMAT_NAME = "gaitbac-model"
FORMAT_VERSION = 1


def _scale_to_dict(scale: MinMaxScale) -> dict:
    return {"lo": scale.lo.tolist(), "hi": scale.hi.tolist()}


def _scale_from_dict(doc: dict) -> MinMaxScale:
    return MinMaxScale(lo=np.array(doc["lo"]), hi=np.array(doc["hi"]))


def model_to_dict(model, algorithm: str, training_meta: dict | None = None) -> dict:
    doc: dict = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "algorithm": algorithm,
    }
    if isinstance(model, MlpModel):
        doc["architecture"] = {"n_in": model.n_in, "n_hidden": model.n_hidden,
                               "n_params": model.n_params}
        doc["parameters"] = {
            "hidden_weights": model.hidden_weights.tolist(),
            "hidden_bias": model.hidden_bias.tolist(),
            "output_weights": model.output_weights.tolist(),
            "output_bias": model.output_bias,
        }
        doc["input_scale"] = _scale_to_dict(model.input_scale)
        doc["output_scale"] = _scale_to_dict(model.output_scale)
    elif isinstance(model, LinRegModel):
        doc["parameters"] = {
            "coefficients": model.coefficients.tolist(),
            "intercept": model.intercept,
            "ridge": model.ridge,
        }
    elif isinstance(model, SvrModel):
        doc["parameters"] = {
            "kernel": model.params.kernel,
            "gamma": model.gamma,
            "C": model.params.C,
            "epsilon": model.params.epsilon,
            "coefficients": model.coefficients.tolist(),
            "support_inputs": model.support_inputs.tolist(),
            "bias": model.bias,
        }
        doc["input_scale"] = _scale_to_dict(model.input_scale)
        doc["output_scale"] = _scale_to_dict(model.output_scale)
    else:
        raise TypeError(f"cannot serialize model of type {type(model).__name__}")
    if training_meta:
        doc["training"] = training_meta
    return doc


def model_from_dict(doc: dict):
    if doc.get("format") != FORMAT_NAME:
        raise ValueError(f"not a {FORMAT_NAME} document")
    algorithm = doc["algorithm"]
    params = doc["parameters"]
    if algorithm in ("cg", "lm", "br", "mlp"):
        return MlpModel(
            hidden_weights=np.array(params["hidden_weights"]),
            hidden_bias=np.array(params["hidden_bias"]),
            output_weights=np.array(params["output_weights"]),
            output_bias=float(params["output_bias"]),
            input_scale=_scale_from_dict(doc["input_scale"]),
            output_scale=_scale_from_dict(doc["output_scale"]),
        )
    if algorithm == "linreg":
        return LinRegModel(
            coefficients=np.array(params["coefficients"]),
            intercept=float(params["intercept"]),
            ridge=float(params["ridge"]),
        )
    if algorithm == "svr":
        return SvrModel(
            params=SvrParams(kernel=params["kernel"], gamma=params["gamma"],
                             C=params["C"], epsilon=params["epsilon"]),
            gamma=float(params["gamma"]),
            coefficients=np.array(params["coefficients"]).reshape(-1),
            support_inputs=np.array(params["support_inputs"]).reshape(
                -1, len(doc["input_scale"]["lo"])),
            bias=float(params["bias"]),
            input_scale=_scale_from_dict(doc["input_scale"]),
            output_scale=_scale_from_dict(doc["output_scale"]),
        )
    raise ValueError(f"unknown algorithm tag {algorithm!r}")


def save_model(model, path: str | Path, algorithm: str,
               training_meta: dict | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = model_to_dict(model, algorithm, training_meta)
    path.write_text(json.dumps(doc, indent=2) + "\n")
    return path


def load_model(path: str | Path):
    return model_from_dict(json.loads(Path(path).read_text()))
