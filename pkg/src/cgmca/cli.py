"""Experiment orchestration and command-line interface.

``run_experiment`` drives the full per-digit loop: split the digit's
indices, corrupt the whole corpus, build the rank-t prescribed covariance
from unmodified training columns, train covariance-generalized and
identity-covariance (MCA) map pairs on the same statistics, recover each
capped test image by least squares under both techniques, filter, score
against the true image, and aggregate per-digit means into a report
emitted as CSV (byte-stable under fixed seeds), JSON (full config echo),
and a four-row montage of example tiles.  Digit failures are recorded in
their report row; the run continues with the remaining digits.

Subcommands: ``run`` (full experiment), ``train`` (maps only, to JSON),
``invert`` (single-image recovery for debugging), ``demo-data`` (synthetic
IDX corpus for environments without the real one).  CGMCA_THREADS caps the
per-digit inversion worker pool (default: available cores).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import __version__
from .datagen import make_demo_corpus
from .errors import FeasibilityError
from .imaging import (
    ImageSet,
    corrupt,
    filter_pipeline,
    montage_grid,
    rank_t_covariance_from_stats,
    read_idx,
    split_digit,
    ssim,
    vec_to_image,
    write_pgm,
)
from .invert import recover_preimage
from .serialize import load_maps, save_maps
from .train import (
    DataSet,
    PrescribedCovariance,
    sample_stats,
    train_cgmca_from_stats,
)

logger = logging.getLogger(__name__)

VERSION = __version__

# Default prescribed-covariance rank per digit.
DEFAULT_T = {0: 500, 1: 500, 2: 500, 3: 550, 4: 550, 5: 550, 6: 500, 7: 500, 8: 500, 9: 500}

REPORT_CSV_HEADER = (
    "digit,t,n_train,n_test,ssim_mca,ssim_cgmca,objective_mca,objective_cgmca,error"
)


def worker_count() -> int:
    raw = os.environ.get("CGMCA_THREADS", "").strip()
    if raw:
        count = int(raw)
        if count < 1:
            raise ValueError(f"CGMCA_THREADS must be >= 1, got {count}")
        return count
    return os.cpu_count() or 1


@dataclass(frozen=True)
class ExperimentConfig:
    """Inputs of one experiment run; serializable and echoed into every report."""

    images: str
    labels: str
    digits: tuple[int, ...] = tuple(range(10))
    t: int | dict[int, int] | None = None  # None: per-digit defaults
    sigma: float = 0.1
    split_ratio: float = 0.8
    seed_split: int = 0
    seed_noise: int = 0
    rtol: float = 1e-6
    atol: float = 1e-8
    max_iter: int | None = None
    rank_tol: float = 1e-12
    max_test: int | None = 100
    out_dir: str = "cgmca-out"

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")
        if not 0.0 < self.split_ratio < 1.0:
            raise ValueError(f"split_ratio must lie in (0, 1), got {self.split_ratio}")
        if self.max_test is not None and self.max_test < 1:
            raise ValueError(f"max_test must be >= 1 or None, got {self.max_test}")
        digits = tuple(sorted({int(d) for d in self.digits}))
        if any(d < 0 or d > 9 for d in digits):
            raise ValueError(f"digits must lie in 0..9, got {digits}")
        object.__setattr__(self, "digits", digits)
        t = self.t
        if isinstance(t, dict):
            t = {int(k): int(v) for k, v in t.items()}
            object.__setattr__(self, "t", t)
        for digit in digits:
            if self.t_for(digit) < 1:
                raise ValueError(f"t for digit {digit} must be >= 1")

    def t_for(self, digit: int) -> int:
        if self.t is None:
            return DEFAULT_T[digit]
        if isinstance(self.t, dict):
            return int(self.t.get(digit, DEFAULT_T[digit]))
        return int(self.t)

    def to_dict(self) -> dict:
        t = self.t
        if isinstance(t, dict):
            t = {str(k): v for k, v in sorted(t.items())}
        return {
            "images": self.images,
            "labels": self.labels,
            "digits": list(self.digits),
            "t": t,
            "sigma": self.sigma,
            "split_ratio": self.split_ratio,
            "seed_split": self.seed_split,
            "seed_noise": self.seed_noise,
            "rtol": self.rtol,
            "atol": self.atol,
            "max_iter": self.max_iter,
            "rank_tol": self.rank_tol,
            "max_test": self.max_test,
            "out_dir": self.out_dir,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(obj) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        kwargs = dict(obj)
        if "digits" in kwargs and kwargs["digits"] is not None:
            kwargs["digits"] = tuple(int(d) for d in kwargs["digits"])
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class DigitResult:
    digit: int
    t: int
    n_train: int
    n_test: int
    ssim_mca: float | None
    ssim_cgmca: float | None
    objective_mca: float | None
    objective_cgmca: float | None
    ssim_mca_per_image: tuple[float, ...]
    ssim_cgmca_per_image: tuple[float, ...]
    wall_clock_s: float
    error: str | None


@dataclass(frozen=True)
class ExperimentReport:
    rows: tuple[DigitResult, ...]
    config: dict
    ssim_window: str
    version: str
    total_wall_clock_s: float
    montage_path: str | None = None


@dataclass
class _DigitArtifacts:
    """Example tiles for the montage: unmodified, corrupted, filtered MCA, filtered CGMCA."""

    tiles: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]


def _recover_and_score(maps, observed, truth_img, config) -> tuple[float, np.ndarray]:
    map_src, map_other = maps
    result = recover_preimage(
        map_src,
        map_other,
        observed,
        max_iter=config.max_iter,
        rtol=config.rtol,
        atol=config.atol,
    )
    filtered = filter_pipeline(result.x_hat)
    score = ssim(vec_to_image(filtered), truth_img).value
    return score, filtered


def _run_digit(
    clean: ImageSet, corrupted: ImageSet, digit: int, config: ExperimentConfig
) -> tuple[DigitResult, _DigitArtifacts | None]:
    start = time.perf_counter()
    t = config.t_for(digit)
    split = split_digit(clean, digit, config.split_ratio, config.seed_split)
    n_train, n_test_all = split.train_idx.size, split.test_idx.size

    def failed(message: str) -> tuple[DigitResult, None]:
        logger.warning("digit %d failed: %s", digit, message)
        return (
            DigitResult(
                digit=digit,
                t=t,
                n_train=n_train,
                n_test=0,
                ssim_mca=None,
                ssim_cgmca=None,
                objective_mca=None,
                objective_cgmca=None,
                ssim_mca_per_image=(),
                ssim_cgmca_per_image=(),
                wall_clock_s=time.perf_counter() - start,
                error=message,
            ),
            None,
        )

    if n_train < 2 or n_test_all < 1:
        return failed(
            f"digit {digit}: split produced {n_train} train / {n_test_all} test samples"
        )
    # digit failures stay isolated: the run continues with the other digits
    try:
        stats_u = sample_stats(DataSet(clean.pixels[:, split.train_idx]), config.rank_tol)
        stats_c = sample_stats(DataSet(corrupted.pixels[:, split.train_idx]), config.rank_tol)
        cov_cg = rank_t_covariance_from_stats(stats_u, t)
        cov_id = PrescribedCovariance.identity(t, config.rank_tol)
        map_u_cg, map_c_cg, _, obj_cg = train_cgmca_from_stats(
            stats_u, stats_c, cov_cg, cov_cg, config.rank_tol
        )
        map_u_id, map_c_id, _, obj_id = train_cgmca_from_stats(
            stats_u, stats_c, cov_id, cov_id, config.rank_tol
        )

        test_sel = (
            split.test_idx if config.max_test is None else split.test_idx[: config.max_test]
        )

        def recover_one(j: int) -> tuple[float, float, np.ndarray, np.ndarray]:
            observed = corrupted.pixels[:, j]
            truth_img = vec_to_image(clean.pixels[:, j])
            score_id, filt_id = _recover_and_score(
                (map_u_id, map_c_id), observed, truth_img, config
            )
            score_cg, filt_cg = _recover_and_score(
                (map_u_cg, map_c_cg), observed, truth_img, config
            )
            return score_id, score_cg, filt_id, filt_cg

        with ThreadPoolExecutor(max_workers=worker_count()) as pool:
            results = list(pool.map(recover_one, test_sel))
    except FeasibilityError as exc:
        return failed(str(exc))
    except Exception as exc:  # noqa: BLE001
        logger.exception("digit %d: unexpected failure", digit)
        return failed(f"{type(exc).__name__}: {exc}")

    ssim_id = tuple(r[0] for r in results)
    ssim_cg = tuple(r[1] for r in results)
    first = int(test_sel[0])
    artifacts = _DigitArtifacts(
        tiles=(
            vec_to_image(clean.pixels[:, first]),
            vec_to_image(corrupted.pixels[:, first]),
            vec_to_image(results[0][2]),
            vec_to_image(results[0][3]),
        )
    )
    row = DigitResult(
        digit=digit,
        t=t,
        n_train=n_train,
        n_test=len(test_sel),
        ssim_mca=float(np.mean(ssim_id)),
        ssim_cgmca=float(np.mean(ssim_cg)),
        objective_mca=obj_id,
        objective_cgmca=obj_cg,
        ssim_mca_per_image=ssim_id,
        ssim_cgmca_per_image=ssim_cg,
        wall_clock_s=time.perf_counter() - start,
        error=None,
    )
    return row, artifacts


def run_experiment(config: ExperimentConfig) -> ExperimentReport:
    """Run the corruption/recovery comparison over the configured digits.

    Writes ``report.csv``, ``report.json``, per-digit example tiles, and a
    four-row montage (unmodified / corrupted / filtered MCA / filtered CGMCA)
    into the output directory, and returns the in-memory report.
    """
    start = time.perf_counter()
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    clean = read_idx(config.images, config.labels)
    corrupted = corrupt(clean, config.sigma, config.seed_noise)

    rows: list[DigitResult] = []
    stage_tiles: list[dict[int, np.ndarray]] = [{}, {}, {}, {}]
    stage_names = ("unmodified", "corrupted", "mca_filtered", "cgmca_filtered")
    for digit in config.digits:
        row, artifacts = _run_digit(clean, corrupted, digit, config)
        rows.append(row)
        if artifacts is not None:
            for stage, tile in enumerate(artifacts.tiles):
                stage_tiles[stage][digit] = tile
                write_pgm(out_dir / f"digit{digit}_{stage_names[stage]}.pgm", tile)

    montage_path = None
    if stage_tiles[0]:
        montage_path = str(out_dir / "montage.pgm")
        write_pgm(montage_path, montage_grid(stage_tiles, sorted(stage_tiles[0])))

    report = ExperimentReport(
        rows=tuple(rows),
        config=config.to_dict(),
        ssim_window=ssim(np.zeros((28, 28)), np.zeros((28, 28))).params.window,
        version=VERSION,
        total_wall_clock_s=time.perf_counter() - start,
        montage_path=montage_path,
    )
    emit_report(report, "csv", out_dir)
    emit_report(report, "json", out_dir)
    return report


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit_report(report: ExperimentReport, fmt: str, out_dir) -> Path:
    """Write the report as ``report.csv`` or ``report.json``; byte-stable given equal reports.

    The CSV mirrors the summary table (one row per digit, error marker column
    for failed digits) and carries no timing fields, so identically seeded
    runs produce identical bytes; the JSON includes the full config echo,
    per-image scores, and wall-clock times.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if fmt == "csv":
        lines = [REPORT_CSV_HEADER]
        for row in report.rows:
            error = "" if row.error is None else row.error.replace(",", ";").replace("\n", " ")
            lines.append(
                ",".join(
                    _csv_cell(v)
                    for v in (
                        row.digit,
                        row.t,
                        row.n_train,
                        row.n_test,
                        row.ssim_mca,
                        row.ssim_cgmca,
                        row.objective_mca,
                        row.objective_cgmca,
                        error,
                    )
                )
            )
        path = out_dir / "report.csv"
        path.write_bytes(("\n".join(lines) + "\n").encode("ascii"))
        return path
    if fmt == "json":
        doc = {
            "format_version": 1,
            "kind": "experiment_report",
            "version": report.version,
            "config": report.config,
            "ssim_window": report.ssim_window,
            "total_wall_clock_s": report.total_wall_clock_s,
            "montage_path": report.montage_path,
            "rows": [
                {
                    "digit": r.digit,
                    "t": r.t,
                    "n_train": r.n_train,
                    "n_test": r.n_test,
                    "ssim_mca": r.ssim_mca,
                    "ssim_cgmca": r.ssim_cgmca,
                    "objective_mca": r.objective_mca,
                    "objective_cgmca": r.objective_cgmca,
                    "ssim_mca_per_image": list(r.ssim_mca_per_image),
                    "ssim_cgmca_per_image": list(r.ssim_cgmca_per_image),
                    "wall_clock_s": r.wall_clock_s,
                    "error": r.error,
                }
                for r in report.rows
            ],
        }
        path = out_dir / "report.json"
        path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        return path
    raise ValueError(f"unknown report format {fmt!r}")


def _parse_digits(raw: str) -> tuple[int, ...]:
    if raw.strip().lower() == "all":
        return tuple(range(10))
    return tuple(int(part) for part in raw.split(",") if part.strip() != "")


def _config_from_args(args) -> ExperimentConfig:
    if args.config:
        config = ExperimentConfig.from_file(args.config)
    else:
        if not (args.images and args.labels):
            raise SystemExit("either --config or both --images and --labels are required")
        config = ExperimentConfig(images=args.images, labels=args.labels)
    overrides = {}
    if args.images:
        overrides["images"] = args.images
    if args.labels:
        overrides["labels"] = args.labels
    if args.digits is not None:
        overrides["digits"] = _parse_digits(args.digits)
    if args.t is not None:
        overrides["t"] = args.t
    if args.sigma is not None:
        overrides["sigma"] = args.sigma
    if args.seed is not None:
        overrides["seed_split"] = args.seed
        overrides["seed_noise"] = args.seed
    if args.seed_split is not None:
        overrides["seed_split"] = args.seed_split
    if args.seed_noise is not None:
        overrides["seed_noise"] = args.seed_noise
    if args.max_test is not None:
        overrides["max_test"] = None if args.max_test <= 0 else args.max_test
    if args.out is not None:
        overrides["out_dir"] = args.out
    if args.rtol is not None:
        overrides["rtol"] = args.rtol
    if args.max_iter is not None:
        overrides["max_iter"] = args.max_iter
    if args.rank_tol is not None:
        overrides["rank_tol"] = args.rank_tol
    return replace(config, **overrides) if overrides else config


def cmd_run(args) -> int:
    config = _config_from_args(args)
    report = run_experiment(config)
    for row in report.rows:
        if row.error is not None:
            print(f"digit {row.digit}: ERROR {row.error}")
        else:
            print(
                f"digit {row.digit}: t={row.t} n_train={row.n_train} "
                f"n_test={row.n_test} ssim_mca={row.ssim_mca:.4f} "
                f"ssim_cgmca={row.ssim_cgmca:.4f}"
            )
    print(f"report: {Path(config.out_dir) / 'report.csv'}")
    if report.montage_path:
        print(f"montage: {report.montage_path}")
    return 0


def cmd_train(args) -> int:
    images = read_idx(args.images, args.labels)
    corrupted = corrupt(images, args.sigma, args.seed_noise)
    split = split_digit(images, args.digit, args.split_ratio, args.seed_split)
    stats_u = sample_stats(DataSet(images.pixels[:, split.train_idx]), args.rank_tol)
    stats_c = sample_stats(DataSet(corrupted.pixels[:, split.train_idx]), args.rank_tol)
    cov_cg = rank_t_covariance_from_stats(stats_u, args.t)
    cov_id = PrescribedCovariance.identity(args.t, args.rank_tol)
    map_u_cg, map_c_cg, _, obj_cg = train_cgmca_from_stats(
        stats_u, stats_c, cov_cg, cov_cg, args.rank_tol
    )
    map_u_id, map_c_id, _, obj_id = train_cgmca_from_stats(
        stats_u, stats_c, cov_id, cov_id, args.rank_tol
    )
    save_maps(
        args.out,
        {
            "unmodified_cgmca": map_u_cg,
            "corrupted_cgmca": map_c_cg,
            "unmodified_mca": map_u_id,
            "corrupted_mca": map_c_id,
        },
        metadata={
            "digit": args.digit,
            "t": args.t,
            "sigma": args.sigma,
            "seed_split": args.seed_split,
            "seed_noise": args.seed_noise,
            "split_ratio": args.split_ratio,
            "n_train": int(split.train_idx.size),
            "objective_mca": obj_id,
            "objective_cgmca": obj_cg,
            "images": str(args.images),
            "labels": str(args.labels),
        },
    )
    print(f"maps written to {args.out} (objectives: mca={obj_id:.6g}, cgmca={obj_cg:.6g})")
    return 0


def cmd_invert(args) -> int:
    maps, metadata = load_maps(args.maps)
    images = read_idx(args.images, args.labels)
    sigma = metadata.get("sigma", 0.1) if args.sigma is None else args.sigma
    seed_noise = metadata.get("seed_noise", 0) if args.seed_noise is None else args.seed_noise
    corrupted = corrupt(images, sigma, seed_noise)
    j = args.image
    if not 0 <= j < images.n:
        raise SystemExit(f"image index {j} outside corpus of {images.n} images")
    observed = corrupted.pixels[:, j]
    truth = vec_to_image(images.pixels[:, j])
    print(f"image {j}: label {int(images.labels[j])}, sigma {sigma}")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_pgm(out_dir / f"image{j}_unmodified.pgm", truth)
    write_pgm(out_dir / f"image{j}_corrupted.pgm", vec_to_image(observed))
    for technique in ("mca", "cgmca"):
        src, other = maps.get(f"unmodified_{technique}"), maps.get(f"corrupted_{technique}")
        if src is None or other is None:
            continue
        result = recover_preimage(
            src, other, observed, max_iter=args.max_iter, rtol=args.rtol
        )
        filtered = filter_pipeline(result.x_hat)
        score = ssim(vec_to_image(filtered), truth).value
        write_pgm(out_dir / f"image{j}_{technique}_recovered.pgm", vec_to_image(result.x_hat))
        write_pgm(out_dir / f"image{j}_{technique}_filtered.pgm", vec_to_image(filtered))
        print(
            f"{technique}: residual={result.residual_norm:.3e} "
            f"iterations={result.iterations} converged={result.converged} "
            f"ssim={score:.4f}"
        )
    print(f"renders written to {out_dir}")
    return 0


def cmd_demo_data(args) -> int:
    images_path, labels_path = make_demo_corpus(
        args.out, n_per_digit=args.n_per_digit, seed=args.seed, digits=_parse_digits(args.digits)
    )
    print(f"images: {images_path}")
    print(f"labels: {labels_path}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cgmca",
        description="Covariance-generalized matching component analysis experiments",
    )
    sub = parser.add_subparsers(required=True)

    run = sub.add_parser("run", help="run the corruption/recovery experiment")
    run.add_argument("--config", help="JSON config file; flags override its fields")
    run.add_argument("--images", help="IDX image file (raw or .gz)")
    run.add_argument("--labels", help="IDX label file (raw or .gz)")
    run.add_argument("--digits", help="comma-separated digits or 'all'")
    run.add_argument("--t", type=int, help="prescribed covariance rank for all digits")
    run.add_argument("--sigma", type=float, help="corruption noise standard deviation")
    run.add_argument("--seed", type=int, help="sets both split and noise seeds")
    run.add_argument("--seed-split", type=int, dest="seed_split")
    run.add_argument("--seed-noise", type=int, dest="seed_noise")
    run.add_argument("--max-test", type=int, dest="max_test",
                     help="cap on test inversions per digit; <= 0 means no cap")
    run.add_argument("--out", help="output directory")
    run.add_argument("--rtol", type=float, help="least-squares residual tolerance")
    run.add_argument("--max-iter", type=int, dest="max_iter", help="least-squares iteration cap")
    run.add_argument("--rank-tol", type=float, dest="rank_tol", help="numeric rank tolerance")
    run.set_defaults(func=cmd_run)

    train = sub.add_parser("train", help="train maps for one digit and write them as JSON")
    train.add_argument("--images", required=True)
    train.add_argument("--labels", required=True)
    train.add_argument("--digit", type=int, required=True)
    train.add_argument("--t", type=int, required=True)
    train.add_argument("--sigma", type=float, default=0.1)
    train.add_argument("--split-ratio", type=float, default=0.8, dest="split_ratio")
    train.add_argument("--seed-split", type=int, default=0, dest="seed_split")
    train.add_argument("--seed-noise", type=int, default=0, dest="seed_noise")
    train.add_argument("--rank-tol", type=float, default=1e-12, dest="rank_tol")
    train.add_argument("--out", default="maps.json")
    train.set_defaults(func=cmd_train)

    invert = sub.add_parser("invert", help="recover one image through saved maps")
    invert.add_argument("--maps", required=True)
    invert.add_argument("--images", required=True)
    invert.add_argument("--labels", required=True)
    invert.add_argument("--image", type=int, required=True, help="corpus image index")
    invert.add_argument("--sigma", type=float, help="override corruption sigma")
    invert.add_argument("--seed-noise", type=int, dest="seed_noise")
    invert.add_argument("--rtol", type=float, default=1e-6)
    invert.add_argument("--max-iter", type=int, dest="max_iter")
    invert.add_argument("--out", default="cgmca-invert")
    invert.set_defaults(func=cmd_invert)

    demo = sub.add_parser("demo-data", help="generate a synthetic IDX digit corpus")
    demo.add_argument("--out", default="cgmca-demo-data")
    demo.add_argument("--n-per-digit", type=int, default=600, dest="n_per_digit")
    demo.add_argument("--seed", type=int, default=0)
    demo.add_argument("--digits", default="all")
    demo.set_defaults(func=cmd_demo_data)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = _build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
