import json
import logging

import numpy as np
import pandas as pd
from pydantic import ValidationError

from ..errors import SpecValidationError, UsageError
from ..schemas.synth import AntiSpec, LinearSpec, SurrogateSpec, SynthSummary
from ..services.synth_service import synth_service
from ..services.tabular_service import tabular_service
from ..storage.artifacts import dump_model, read_text
from ..storage.dataset_codec import dataset_codec
from .common import emit, open_store, run_config

logger = logging.getLogger(__name__)

SPEC_KINDS = {"surrogate": SurrogateSpec, "linear": LinearSpec, "anti": AntiSpec}


def register(subparsers, parent):
    parser = subparsers.add_parser(
        "synth", parents=[parent], help="generate a synthetic dataset from a generator spec",
    )
    parser.add_argument("--spec", help="generator spec (JSON); the default surrogate when omitted")
    parser.add_argument("--name", default="cohort", help="file stem of the generated files")
    parser.set_defaults(handler=run)


def load_spec(path, seed=None):
    """Parse a generator spec file; ``"kind"`` picks surrogate (default), linear or anti."""
    raw = {}
    if path is not None:
        try:
            raw = json.loads(read_text(path, "generator spec"))
        except json.JSONDecodeError as e:
            raise SpecValidationError(f"generator spec {path} is not valid JSON: {e}")
        if not isinstance(raw, dict):
            raise SpecValidationError("a generator spec is a JSON object")
    kind = raw.pop("kind", "surrogate")
    if kind not in SPEC_KINDS:
        raise SpecValidationError(f"unknown generator kind '{kind}', expected one of {', '.join(SPEC_KINDS)}")
    if seed is not None:
        raw["seed"] = seed
    if "seed" not in raw:
        raise UsageError("the generator needs a seed: pass --seed or put one in the generator spec")
    try:
        return kind, SPEC_KINDS[kind].model_validate(raw)
    except ValidationError as e:
        raise SpecValidationError(f"invalid {kind} spec: {e}")


def run(args) -> int:
    kind, spec = load_spec(args.spec, args.seed)
    store = open_store(run_config(args))

    if kind == "surrogate":
        ds = synth_service.gen_clinical_surrogate(spec)
        store.write_text(f"{args.name}.csv", tabular_service.serialize_dataset(ds))
        store.write_text(f"{args.name}.schema.json", dataset_codec.dump_schema(ds.attributes))
        rows, columns, missing = tabular_service.summary(ds)
    else:
        generate = synth_service.gen_linear if kind == "linear" else synth_service.gen_antilearnable
        X, y = generate(spec)
        frame = pd.DataFrame(X, columns=[f"x{j + 1}" for j in range(X.shape[1])])
        frame["label"] = y.astype(np.int64)
        store.write_csv(f"{args.name}.csv", frame)
        rows, columns, missing = X.shape[0], X.shape[1], 0.0
    store.write_text(f"{args.name}.spec.json", json.dumps({"kind": kind, **json.loads(dump_model(spec))}, indent=2) + "\n")

    summary = SynthSummary(kind=kind, rows=rows, columns=columns, missing_fraction=missing, seed=spec.seed)
    text = f"{kind}: {rows} rows, {columns} attributes, {100 * missing:.1f}% missing (seed {spec.seed})\n"
    emit(pd.DataFrame([summary.model_dump()]), args.format, summary, text)
    return 0
