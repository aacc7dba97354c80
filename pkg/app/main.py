# ===================================================================================
#   main.py: 명령줄 진입점 (`python -m app.main <command>`)
# ===================================================================================
#
#   **서브커맨드:**
#   - `run`:      이벤트 + 포즈 + 캘리브레이션 → detections.csv, tracks.csv, map.csv
#                 (`--gt` 지정 시 eval.txt, `--plot` 지정 시 xt_space.svg, map.svg)
#   - `simulate`: 씬 파일(또는 번들 데모 씬) → events.{csv,bin}, poses.csv, gt_map.csv, calib.txt
#   - `bench`:    반복 NMS와 전체 NMS를 lockstep으로 실행하여 동등성 확인 + 처리 시간 보고
#   - `eval`:     map.csv와 GT 맵을 비교하여 TP/FN/FP, RMSE, 주행/횡방향 오차 출력
#
#   **종료 코드:**
#   - 0: 성공
#   - 1: 파이프라인 오류 (`PoleMapError`). 이번 실행에서 쓴 파일은 모두 지웁니다.
#   - 2: 인자 오류 (argparse)
#
#
import argparse
import asyncio
import sys
from pathlib import Path
from typing import List, Optional

from loguru import logger

from app.assets import load_sensor_preset
from app.config import PipelineConfig, load_pipeline_config, settings
from app.errors import ConfigError, PoleMapError
from app.events.io import (intrinsics_from_mapping, load_calibration, load_events, load_poses,
                           write_calibration, write_events, write_poses)
from app.log_config import configure_logging
from app.mapping.evaluation import match_and_rmse
from app.mapping.landmark_map import (load_ground_truth, load_map, write_eval_report, write_ground_truth,
                                     write_map)
from app.pipeline.bench import run_bench
from app.pipeline.outputs import write_detections, write_tracks
from app.pipeline.plots import plot_map, plot_xt_space
from app.pipeline.runner import run_pipeline, run_pipeline_async
from app.sim.scene_io import demo_scene, load_scene
from app.sim.simulator import simulate

DEFAULT_OUT = Path("out")


class OutputSet:
    """이번 실행에서 쓴 파일 목록. 실패 시 `discard()`로 모두 지웁니다."""

    def __init__(self, root: Path):
        self.root = Path(root)
        self.existed = self.root.exists()
        self.paths: List[Path] = []

    def path(self, name: str) -> Path:
        p = self.root / name
        self.paths.append(p)
        return p

    def discard(self):
        for p in self.paths:
            p.unlink(missing_ok=True)
        if not self.existed and self.root.is_dir() and not any(self.root.iterdir()):
            self.root.rmdir()


def _require(value, flag: str):
    if value is None:
        raise ConfigError(f"missing required input {flag}")
    return value


def _print_lines(lines):
    for line in lines:
        print(line)


# --------------------------------------------------------------------------
# 서브커맨드
# --------------------------------------------------------------------------
def cmd_run(args, cfg: PipelineConfig, outputs: OutputSet) -> int:
    intr = load_calibration(_require(cfg.io.calib, "--calib"))
    events = load_events(_require(cfg.io.events, "--events"), cfg.io.format, intr.width, intr.height)
    poses = load_poses(_require(cfg.io.poses, "--poses"))

    if args.pipelined:
        result = asyncio.run(run_pipeline_async(events, poses, intr, cfg, args.subsample, args.seed or 0))
    else:
        result = run_pipeline(events, poses, intr, cfg, args.subsample, args.seed or 0)

    write_detections(result.detections, outputs.path("detections.csv"))
    write_tracks(result.tracks, outputs.path("tracks.csv"))
    write_map(result.landmark_map, outputs.path("map.csv"))

    gt = load_ground_truth(cfg.io.gt) if cfg.io.gt is not None else []
    if cfg.io.gt is not None:
        if len(result.landmark_map):
            report = match_and_rmse(result.landmark_map, gt, cfg.triangulation.reject_radius, poses)
            write_eval_report(report, outputs.path("eval.txt"))
            _print_lines(report.as_lines())
        else:
            logger.warning("Landmark map is empty; skipping evaluation.")

    if args.plot:
        plot_xt_space(result.detections, result.polarity_tracks, cfg.hough, outputs.path("xt_space.svg"))
        plot_map(result.landmark_map, outputs.path("map.svg"), poses, gt, cfg.triangulation.reject_radius)

    print(f"landmarks={len(result.landmark_map)} tracks={len(result.tracks)} detections={len(result.detections)}")
    return 0


def cmd_simulate(args, cfg: PipelineConfig, outputs: OutputSet) -> int:
    setup = load_scene(args.scene) if args.scene else demo_scene()
    sensor = setup.sensor
    if args.seed is not None:
        sensor = sensor.model_copy(update={"seed": args.seed})
    events, poses, gt = simulate(setup.scene, setup.profile, sensor)

    suffix = "bin" if cfg.io.format == "binary" else "csv"
    write_events(events, outputs.path(f"events.{suffix}"), cfg.io.format)
    write_poses(poses, outputs.path("poses.csv"))
    write_ground_truth(gt, outputs.path("gt_map.csv"))
    write_calibration(sensor.intrinsics, outputs.path("calib.txt"))
    print(f"events={len(events)} poses={len(poses)} poles={len(gt)}")
    return 0


def cmd_bench(args, cfg: PipelineConfig, outputs: OutputSet) -> int:
    if cfg.io.calib is not None:
        intr = load_calibration(cfg.io.calib)
    else:
        intr = intrinsics_from_mapping(load_sensor_preset(settings.DEFAULT_SENSOR), settings.DEFAULT_SENSOR)
    events = load_events(_require(cfg.io.events, "--events"), cfg.io.format, intr.width, intr.height)
    report = run_bench(events, cfg.hough, intr.width, intr.height)
    _print_lines(report.summary_lines())
    if args.out is not None or cfg.io.out is not None:
        report.write(outputs.path("bench.json"))
    return 0


def cmd_eval(args, cfg: PipelineConfig, outputs: OutputSet) -> int:
    lmap = load_map(_require(args.map, "--map"))
    gt = load_ground_truth(_require(cfg.io.gt, "--gt"))
    poses = load_poses(cfg.io.poses) if cfg.io.poses is not None else None
    report = match_and_rmse(lmap, gt, cfg.triangulation.reject_radius, poses)
    _print_lines(report.as_lines())
    if args.out is not None or cfg.io.out is not None:
        write_eval_report(report, outputs.path("eval.txt"))
    return 0


# --------------------------------------------------------------------------
# 인자 파서
# --------------------------------------------------------------------------
def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="key=value 설정 파일")
    common.add_argument("--out", type=Path, help="출력 디렉토리 (기본: ./out)")
    common.add_argument("-v", "--verbose", action="store_true", help="DEBUG 로그 출력")

    inputs = argparse.ArgumentParser(add_help=False)
    inputs.add_argument("--events", type=Path)
    inputs.add_argument("--calib", type=Path)
    inputs.add_argument("--format", choices=["csv", "binary"])

    parser = argparse.ArgumentParser(prog="polemap", description="Event-camera pole mapping pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", parents=[common, inputs], help="전체 파이프라인 실행")
    run.add_argument("--poses", type=Path)
    run.add_argument("--gt", type=Path)
    run.add_argument("--plot", action="store_true", help="x–t 공간과 맵 SVG 출력")
    run.add_argument("--subsample", type=float, default=0.0, help="이벤트를 버릴 확률 p")
    run.add_argument("--seed", type=int, help="서브샘플링 시드")
    run.add_argument("--pipelined", action="store_true", help="단계별 태스크로 실행")
    run.set_defaults(handler=cmd_run)

    sim = sub.add_parser("simulate", parents=[common], help="합성 씬 시뮬레이션")
    sim.add_argument("--scene", type=Path, help="씬 파일 (생략 시 번들 데모 씬)")
    sim.add_argument("--seed", type=int, help="노이즈 시드 (씬 파일 값을 덮어씀)")
    sim.add_argument("--format", choices=["csv", "binary"])
    sim.set_defaults(handler=cmd_simulate)

    bench = sub.add_parser("bench", parents=[common, inputs], help="반복/전체 NMS 벤치마크")
    bench.set_defaults(handler=cmd_bench)

    ev = sub.add_parser("eval", parents=[common], help="맵 평가")
    ev.add_argument("--map", type=Path)
    ev.add_argument("--gt", type=Path)
    ev.add_argument("--poses", type=Path)
    ev.set_defaults(handler=cmd_eval)
    return parser


def _config_from_args(args) -> PipelineConfig:
    cfg = load_pipeline_config(args.config)
    return cfg.with_io(
        events=getattr(args, "events", None),
        poses=getattr(args, "poses", None),
        calib=getattr(args, "calib", None),
        gt=getattr(args, "gt", None),
        out=args.out,
        format=getattr(args, "format", None),
    )


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging("DEBUG" if args.verbose else None)

    outputs: Optional[OutputSet] = None
    try:
        cfg = _config_from_args(args)
        outputs = OutputSet(cfg.io.out or DEFAULT_OUT)
        return args.handler(args, cfg, outputs)
    except PoleMapError as e:
        logger.error(f"{args.command} failed: {e}")
        logger.opt(exception=e).debug("Traceback")
        if outputs is not None:
            outputs.discard()
        return 1
    except Exception:
        # 예상하지 못한 실패(OSError 등)도 부분 산출물은 남기지 않음
        logger.exception(f"{args.command} crashed")
        if outputs is not None:
            outputs.discard()
        raise


if __name__ == "__main__":
    sys.exit(main())
