"""Command-line client for the pudefect service.

Every command talks to the HTTP API: by default against an in-process
instance of the app, or against a running server via --server URL. One
master --seed reproduces everything; stage sub-seeds are derived by
hashing (seed, stage-name), so chaining fit-forest/score/mine/train/
evaluate with one seed equals a single /pipeline/run call bit for bit.

Exit codes: 0 success, 1 config/usage error, 2 data/file error,
3 runtime error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from .data import (
    FeatureMatrix,
    LabeledDataset,
    PUDataset,
    load_feature_file,
    load_rows,
    save_feature_file,
)
from .errors import ConfigError, DataError
from .seeding import derive_seed
from .service.schemas import (
    ClassifierConfigModel,
    DataRefModel,
    ExperimentConfigModel,
    RunConfigModel,
    SynthSpecModel,
)


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise ConfigError(message)


def _make_client(server: str | None):
    if server:
        import httpx

        return httpx.Client(base_url=server, timeout=600.0)
    from fastapi.testclient import TestClient

    from .service import app

    return TestClient(app, raise_server_exceptions=False)


def _call(client, path: str, payload: dict) -> dict:
    resp = client.post(path, json=payload)
    if resp.status_code == 200:
        return resp.json()
    try:
        body = resp.json()
    except ValueError:
        body = {}
    detail = body.get("detail", f"HTTP {resp.status_code}")
    kind = body.get("kind", "config" if resp.status_code == 422 else "runtime")
    if kind == "config":
        raise ConfigError(str(detail))
    if kind == "data":
        raise DataError(str(detail))
    raise RuntimeError(str(detail))


def _rows(matrix: FeatureMatrix) -> list[list[float]]:
    return [[float(v) for v in row] for row in matrix.data]


def _matrix_from_rows(rows: list[list[float]]) -> FeatureMatrix:
    return FeatureMatrix(np.asarray(rows, dtype=np.float32))


def _load_pu(path: str, fmt: str) -> PUDataset:
    dataset = load_feature_file(path, fmt, pu=True)
    assert isinstance(dataset, PUDataset)
    return dataset


def _stage_rows(path: str, fmt: str) -> tuple[FeatureMatrix, list[int] | None]:
    """Rows a scoring stage operates on: the -1-coded pool of a PU file,
    or every row of a labeled/plain file (labels returned when {0,1})."""
    matrix, labels = load_rows(path, fmt)
    if labels is None:
        return matrix, None
    if (labels == -1).any():
        return matrix.rows(np.nonzero(labels == -1)[0]), None
    return matrix, labels.tolist()


def _read_ranked_csv(path: Path) -> tuple[list[int], list[float]]:
    lines = [ln.strip() for ln in path.read_text().splitlines() if ln.strip()]
    if not lines or lines[0] != "rank,unlabeled_index,score":
        raise DataError(f"{path}: not a ranked-pool CSV")
    order, scores = [], []
    for ln in lines[1:]:
        _, idx, score = ln.split(",")
        order.append(int(idx))
        scores.append(float(score))
    return order, scores


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _save_dataset(dataset, out: str, fmt: str) -> None:
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    save_feature_file(dataset, out, fmt)


def _dump_json(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


# ---------------------------------------------------------------------------
# commands


def cmd_synth(args, client) -> int:
    if args.kind == "blobs":
        body = _call(
            client,
            "/synth/blobs",
            {
                "n_per_class": args.n_per_class,
                "d": args.d,
                "separation": args.separation,
                "seed": args.seed,
            },
        )
        dataset = LabeledDataset(
            _matrix_from_rows(body["data"]), np.asarray(body["labels"], dtype=np.int8)
        )
    else:
        body = _call(
            client,
            "/synth/anomalies",
            {
                "n_inliers": args.n_inliers,
                "n_outliers": args.n_outliers,
                "d": args.d,
                "seed": args.seed,
            },
        )
        dataset = LabeledDataset(
            _matrix_from_rows(body["data"]), np.asarray(body["flags"], dtype=np.int8)
        )
    _save_dataset(dataset, args.out, args.format)
    print(f"wrote {dataset.n} samples (d={dataset.features.d}) to {args.out}")
    return 0


def cmd_split(args, client) -> int:
    dataset = load_feature_file(args.data, args.format)
    if not isinstance(dataset, LabeledDataset):
        raise DataError(f"{args.data}: split needs a fully labeled file")
    body = _call(
        client,
        "/split",
        {
            "data": _rows(dataset.features),
            "labels": dataset.labels.tolist(),
            "positive_class": args.positive_class,
            "positive_fraction": args.fraction,
            "seed": args.seed,
        },
    )
    pu = PUDataset(
        positives=_matrix_from_rows(body["positives"]),
        unlabeled=_matrix_from_rows(body["unlabeled"]),
    )
    _save_dataset(pu, args.out, args.format)
    print(f"wrote PU split |P|={pu.positives.n} |U|={pu.unlabeled.n} to {args.out}")
    return 0


def cmd_fit_forest(args, client) -> int:
    matrix, labels = load_rows(args.data, args.format)
    if labels is None:
        fit_rows = matrix
    elif (labels == -1).any():
        fit_rows = matrix.rows(np.nonzero(labels == 1)[0])
    else:
        fit_rows = matrix.rows(np.nonzero(labels == args.positive_class)[0])
    config = {
        "n_estimators": args.estimators,
        "subsample_size": args.subsample,
        "contamination": args.contamination,
        "max_depth": args.max_depth,
        "seed": derive_seed(args.seed, "forest"),
    }
    body = _call(
        client, "/forest/fit", {"config": config, "data": _rows(fit_rows), "threads": args.threads}
    )
    _write(Path(args.out), _dump_json(body))
    print(f"fit {config['n_estimators']} trees on {fit_rows.n} positives -> {args.out}")
    return 0


def cmd_score(args, client) -> int:
    if not Path(args.forest).exists():
        raise FileNotFoundError(f"forest file not found: {args.forest}")
    forest = json.loads(Path(args.forest).read_text())
    rows, _ = _stage_rows(args.data, args.format)
    body = _call(client, "/rank", {"forest": forest, "data": _rows(rows)})
    lines = ["rank,unlabeled_index,score"]
    for rank, (idx, score) in enumerate(zip(body["order"], body["scores"])):
        lines.append(f"{rank},{idx},{score!r}")
    _write(Path(args.out), "\n".join(lines) + "\n")
    print(f"ranked {rows.n} unlabeled samples -> {args.out}")
    return 0


def cmd_mine(args, client) -> int:
    order, scores = _read_ranked_csv(Path(args.ranked))
    body = _call(client, "/mine", {"order": order, "scores": scores, "k": args.k})
    lines = ["unlabeled_index"] + [str(i) for i in body["indices"]]
    _write(Path(args.out), "\n".join(lines) + "\n")
    print(f"mined {len(body['indices'])} counter-examples -> {args.out}")
    return 0


def cmd_train(args, client) -> int:
    pu = _load_pu(args.data, args.format)
    lines = [ln.strip() for ln in Path(args.mined).read_text().splitlines() if ln.strip()]
    if not lines or lines[0] != "unlabeled_index":
        raise DataError(f"{args.mined}: not a mined-index CSV")
    indices = [int(ln) for ln in lines[1:]]
    assembled = _call(
        client,
        "/pipeline/assemble",
        {
            "positives": _rows(pu.positives),
            "unlabeled": _rows(pu.unlabeled),
            "indices": indices,
            "seed": derive_seed(args.seed, "assemble"),
        },
    )
    config = ClassifierConfigModel(
        hidden_sizes=tuple(args.hidden),
        dropout_rate=args.dropout,
        learning_rate=args.learning_rate,
        batch_size=args.batch_size,
        epochs=args.epochs,
        mixup_alpha=args.mixup_alpha,
        seed=derive_seed(args.seed, "classifier"),
    )
    body = _call(
        client,
        "/classifier/train",
        {
            "data": assembled["data"],
            "labels": assembled["labels"],
            "config": config.model_dump(),
        },
    )
    _write(Path(args.out), _dump_json(body))
    print(f"trained classifier on {len(assembled['labels'])} samples -> {args.out}")
    return 0


def cmd_evaluate(args, client) -> int:
    rows, labels = _stage_rows(args.data, args.format)
    if not Path(args.model).exists():
        raise FileNotFoundError(f"model file not found: {args.model}")
    model = json.loads(Path(args.model).read_text())
    body = _call(
        client, "/evaluate", {"model": model, "data": _rows(rows), "labels": labels}
    )
    lines = ["index,probability,label"]
    for i, (p, lab) in enumerate(zip(body["probabilities"], body["labels"])):
        lines.append(f"{i},{p!r},{lab}")
    _write(Path(args.out), "\n".join(lines) + "\n")
    if body.get("metrics") is not None and args.metrics_out:
        _write(Path(args.metrics_out), _dump_json(body["metrics"]))
    print(f"evaluated {rows.n} samples -> {args.out}")
    return 0


def _experiment_config(args) -> ExperimentConfigModel:
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise FileNotFoundError(f"config file not found: {path}")
        try:
            raw = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
        try:
            cfg = ExperimentConfigModel(**raw)
        except ValidationError as exc:
            raise ConfigError(f"{path}: {exc.errors()[0]['msg']} at {exc.errors()[0]['loc']}") from exc
    else:
        cfg = ExperimentConfigModel()
    updates: dict = {}
    if args.seed is not None:
        updates["master_seed"] = args.seed
    if args.folds is not None:
        updates["folds"] = args.folds
    if args.positive_class is not None:
        updates["positive_class"] = args.positive_class
    cfg = cfg.model_copy(update=updates)
    if args.synth:
        cfg = cfg.model_copy(update={"synth": SynthSpecModel(kind=args.synth), "data": None})
    if args.data:
        cfg = cfg.model_copy(
            update={"data": DataRefModel(path=args.data, format=args.format), "synth": None}
        )
    return cfg


def cmd_experiment(args, client) -> int:
    cfg = _experiment_config(args)
    fractions = args.fractions if args.fractions else cfg.fractions
    payload: dict = {
        "config": RunConfigModel(
            **cfg.model_dump(exclude={"data", "synth", "fractions"})
        ).model_dump(),
        "threads": args.threads,
    }
    if fractions:
        payload["fractions"] = fractions
    if cfg.data is not None:
        dataset = load_feature_file(cfg.data.path, cfg.data.format)
        if not isinstance(dataset, LabeledDataset):
            raise DataError(f"{cfg.data.path}: experiment needs a fully labeled file")
        payload["data"] = {"data": _rows(dataset.features), "labels": dataset.labels.tolist()}
    elif cfg.synth is not None:
        payload["synth"] = cfg.synth.model_dump()
    else:
        raise ConfigError("experiment needs --data, --synth, or a config data source")
    body = _call(client, "/experiment", payload)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(_dump_json(body["report"]))
    (out / "table.txt").write_text(body["table"])
    (out / "folds.csv").write_text(body["folds_csv"])
    print(body["table"], end="")
    print(f"reports written to {out}")
    return 0


def cmd_serve(args, client) -> int:
    import uvicorn

    from .service import app

    uvicorn.run(app, host=args.host, port=args.port)
    return 0


# ---------------------------------------------------------------------------
# parser


def _common(seed_default=0, class_default=1) -> _Parser:
    # fresh parser per subcommand: argparse parents share action objects,
    # so per-subcommand defaults must not go through set_defaults
    parent = _Parser(add_help=False)
    parent.add_argument("--server", default=None, help="service URL; default runs in-process")
    parent.add_argument("--format", default="auto", choices=["auto", "csv", "pufv"])
    parent.add_argument("--seed", type=int, default=seed_default, help="master seed")
    parent.add_argument("--positive-class", type=int, default=class_default, choices=[0, 1])
    parent.add_argument("--threads", type=int, default=1)
    return parent


def build_parser() -> _Parser:
    parser = _Parser(prog="pudefect", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[_common()], help="generate a synthetic feature file")
    p.add_argument("--kind", choices=["blobs", "anomalies"], default="blobs")
    p.add_argument("--n-per-class", type=int, default=500)
    p.add_argument("--n-inliers", type=int, default=1000)
    p.add_argument("--n-outliers", type=int, default=50)
    p.add_argument("--d", type=int, default=20)
    p.add_argument("--separation", type=float, default=8.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("split", parents=[_common()], help="make a PU split from a labeled file")
    p.add_argument("--data", required=True)
    p.add_argument("--fraction", type=float, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("fit-forest", parents=[_common()], help="fit the anomaly forest on positives")
    p.add_argument("--data", required=True, help="PU file (P used) or labeled file")
    p.add_argument("--estimators", type=int, default=100)
    p.add_argument("--subsample", type=int, default=256)
    p.add_argument("--contamination", type=float, default=0.1)
    p.add_argument("--max-depth", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit_forest)

    p = sub.add_parser("score", parents=[_common()], help="rank unlabeled samples by anomaly score")
    p.add_argument("--forest", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("mine", parents=[_common()], help="take the top-k ranked counter-examples")
    p.add_argument("--ranked", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_mine)

    p = sub.add_parser("train", parents=[_common()], help="train the classifier on P + mined rows")
    p.add_argument("--data", required=True, help="PU file")
    p.add_argument("--mined", required=True)
    p.add_argument("--hidden", type=int, nargs=2, default=[256, 128])
    p.add_argument("--dropout", type=float, default=0.2)
    p.add_argument("--learning-rate", type=float, default=1e-3)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--mixup-alpha", type=float, default=0.2)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", parents=[_common()], help="predict a file; metrics when labeled")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--metrics-out", default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("experiment", parents=[_common(seed_default=None, class_default=None)], help="fraction sweep + supervised baseline")
    p.add_argument("--config", default=None)
    p.add_argument("--data", default=None)
    p.add_argument("--synth", choices=["blobs"], default=None)
    p.add_argument("--fractions", type=_fraction_list, default=None)
    p.add_argument("--folds", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("serve", parents=[_common()], help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    return parser


def _fraction_list(text: str) -> list[float]:
    try:
        values = [float(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc
    if not values or any(not (0.0 < v <= 1.0) for v in values):
        raise argparse.ArgumentTypeError("fractions must lie in (0, 1]")
    return values


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        client = None if args.func is cmd_serve else _make_client(args.server)
        try:
            return args.func(args, client)
        finally:
            if client is not None:
                client.close()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (DataError, FileNotFoundError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
