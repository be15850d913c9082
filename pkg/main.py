#!/usr/bin/env python
"""
Infilling-Sphere Pipeline - CLI Entry Point

Turns OFF meshes into sets of infilling spheres and trains a lightweight
permutation-invariant classifier on them.

Usage:
    # Geometry on a single mesh
    python main.py voxelize chair.off --resolution 64
    python main.py sdf chair.off --resolution 64
    python main.py spheres chair.off --resolution 64 --spheres 128 --side exterior

    # Dataset and model
    python main.py ingest data/ModelNet40 --config configs/desk.env
    python main.py train data/cache/ModelNet40/manifest.jsonl --net t2-256 --seed 0
    python main.py eval data/cache/ModelNet40 --checkpoint outputs/t2-256_seed0.inet
    python main.py sweep data/cache/ModelNet40 --checkpoint outputs/t2-256_seed0.inet --counts 64,32,16

    # Inspection
    python main.py critical data/cache/ModelNet40 --checkpoint outputs/t2-256_seed0.inet --limit 4
    python main.py export data/cache/ModelNet40/chair/test/chair_0890.isph --format ply
    python main.py stats --n 1024
    python main.py verify chair.off --resolution 32
    python main.py history

Exit codes: 0 success, 1 user error, 2 data error, 3 internal error.
"""

import argparse
import sys
from pathlib import Path
from typing import Dict, List, Optional

from dotenv import load_dotenv
from rich.console import Console
from rich.panel import Panel
from rich.progress import BarColumn, MofNCompleteColumn, Progress, TextColumn, TimeElapsedColumn
from rich.table import Table

from config.net_config import FULL_SCALE_EPOCHS, TRAINABLE_PRESETS, TrainingConfig, get_net_config
from config.observability_config import ObservabilityConfig
from config.pipeline_config import PipelineConfig, build_config, load_config, save_config
from src.errors import ConfigMismatch, ExitCode, InSphereError, UserError

load_dotenv()
console = Console()


# ============================================================================
# Argument parsing
# ============================================================================

def _pipeline_flags() -> argparse.ArgumentParser:
    """Flags shared by every subcommand."""
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument('--config', type=Path, help='KEY=VALUE pipeline config file')
    parent.add_argument('--resolution', type=int, help='Voxel grid resolution R')
    parent.add_argument('--spheres', type=int, dest='n_spheres', help='Spheres per object')
    parent.add_argument('--side', choices=['interior', 'exterior', 'mixed'], help='Sphere side')
    parent.add_argument('--d-schedule', dest='d_schedule', help='Separation thresholds at 512³, e.g. 10,5,0')
    parent.add_argument('--net', choices=list(TRAINABLE_PRESETS), help='Network preset')
    parent.add_argument('--seed', type=int, help='Seed for init, shuffling, augmentation, dropout')
    parent.add_argument('--workers', type=int, help='Parallel ingestion processes')
    parent.add_argument('--out', type=Path, help='Output file or directory')
    parent.add_argument('--log-level', help='Log level (default: INSPHERE_LOG_LEVEL or INFO)')
    parent.add_argument('--debug', action='store_true', help='Verbose logging and tracebacks')
    parent.add_argument('--quiet', action='store_true', help='Only print output paths')
    return parent


def parse_arguments(argv: Optional[List[str]] = None) -> argparse.Namespace:
    """
    Parse command-line arguments.

    Returns:
        Parsed argument namespace
    """
    parser = argparse.ArgumentParser(
        description="Infilling-Sphere Pipeline - mesh to sphere sets to classification",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="Run 'python main.py <command> --help' for command options.",
    )
    parent = _pipeline_flags()
    commands = parser.add_subparsers(dest='command', required=True)

    for name, help_text in (
        ('voxelize', 'Voxelize one OFF mesh (writes an IVOX dump)'),
        ('sdf', 'Voxelize and compute the SDF of one mesh (writes an ISDF dump)'),
        ('spheres', 'Build infilling spheres for one mesh (writes an ISPH cache)'),
        ('verify', 'Cross-check fast kernels against brute-force references on one mesh'),
    ):
        sub = commands.add_parser(name, parents=[parent], help=help_text)
        sub.add_argument('mesh', type=Path, help='OFF file')
        if name == 'spheres':
            sub.add_argument('--export', choices=['ply', 'obj'], help='Also export the spheres as a mesh')

    ingest = commands.add_parser('ingest', parents=[parent], help='Convert a ModelNet-style tree into sphere caches')
    ingest.add_argument('root', type=Path, help='Dataset root with <class>/{train,test}/*.off')
    ingest.add_argument('--force', action='store_true', help='Rebuild caches made under another config')

    train = commands.add_parser('train', parents=[parent], help='Train a classifier on an ingested dataset')
    train.add_argument('manifest', type=Path, help='Manifest file or dataset cache directory')
    train.add_argument('--epochs', type=int, help=f'Training epochs (full scale: {FULL_SCALE_EPOCHS})')
    train.add_argument('--full-scale', action='store_true', help=f'Train for {FULL_SCALE_EPOCHS} epochs')
    train.add_argument('--batch-size', dest='batch_size', type=int, help='Batch size (default 32)')
    train.add_argument('--lr', dest='learning_rate', type=float, help='Adam learning rate (default 1e-3)')
    train.add_argument('--no-augment', action='store_true', help='Disable rotation and jitter')
    train.add_argument('--count', type=int, help='Spheres per object used for training (prefix)')

    for name, help_text in (
        ('eval', 'Evaluate a checkpoint on one split'),
        ('sweep', 'Accuracy versus number of spheres (prefix truncation)'),
        ('critical', 'Critical spheres per object'),
    ):
        sub = commands.add_parser(name, parents=[parent], help=help_text)
        sub.add_argument('manifest', type=Path, help='Manifest file or dataset cache directory')
        sub.add_argument('--checkpoint', type=Path, required=True, help='INET checkpoint')
        sub.add_argument('--split', choices=['train', 'test'], default='test')
        if name == 'eval':
            sub.add_argument('--count', type=int, help='Spheres per object (prefix)')
        if name == 'sweep':
            sub.add_argument('--counts', required=True, help='Comma-separated sphere counts, e.g. 64,32,16')
        if name == 'critical':
            sub.add_argument('--limit', type=int, default=4, help='Objects to analyze (default 4)')
            sub.add_argument('--export', choices=['ply', 'obj'], help='Also export highlighted sphere meshes')

    export = commands.add_parser('export', parents=[parent], help='Export a sphere cache as PLY or OBJ')
    export.add_argument('cache', type=Path, help='ISPH sphere cache')
    export.add_argument('--format', dest='fmt', default='ply', help='ply or obj')
    export.add_argument('--checkpoint', type=Path, help='Highlight the critical spheres under this model')

    stats = commands.add_parser('stats', parents=[parent], help='Parameter and FLOP counts of every preset')
    stats.add_argument('--n', type=int, default=1024, help='Spheres per object (default 1024)')
    stats.add_argument('--k', type=int, default=40, help='Number of classes (default 40)')

    history = commands.add_parser('history', parents=[parent], help='Recent train/eval/sweep runs')
    history.add_argument('--limit', type=int, default=10)
    history.add_argument('--filter', dest='command_filter', help='Only this command')

    return parser.parse_args(argv)


def resolve_config(args: argparse.Namespace) -> PipelineConfig:
    """Config file (if any) with command-line overrides applied."""
    overrides: Dict[str, object] = {
        'resolution': args.resolution,
        'n_spheres': args.n_spheres,
        'side': args.side,
        'd_schedule': args.d_schedule,
        'net': args.net,
        'seed': args.seed,
        'workers': args.workers,
    }
    for name in ('epochs', 'batch_size', 'learning_rate'):
        overrides[name] = getattr(args, name, None)
    if getattr(args, 'full_scale', False) and overrides['epochs'] is None:
        overrides['epochs'] = FULL_SCALE_EPOCHS

    if args.config is not None:
        return load_config(args.config, overrides)
    return build_config({}, overrides)


def _output_path(args, config: PipelineConfig, default_name: str) -> Path:
    """--out as a file when it has a suffix, else as a directory for default_name."""
    if args.out is not None and args.out.suffix:
        return args.out
    directory = args.out if args.out is not None else config.effective_output_dir()
    return Path(directory) / default_name


# ============================================================================
# Display helpers
# ============================================================================

def display_welcome(command: str):
    """Display welcome banner."""
    console.print()
    console.print(Panel.fit(
        f"[bold cyan]Infilling-Sphere Pipeline[/bold cyan]  [dim]{command}[/dim]",
        border_style="cyan"
    ))


def display_configuration(config: PipelineConfig):
    """Display the geometry and network settings in effect."""
    config_table = Table(title="Configuration", show_header=False, box=None)
    config_table.add_column("Parameter", style="cyan", width=24)
    config_table.add_column("Value", style="white")

    config_table.add_row("Resolution", f"{config.resolution}³")
    config_table.add_row("Spheres", f"{config.n_spheres} ({config.side.value})")
    config_table.add_row("d schedule", ", ".join(f"{d:g}" for d in config.d_schedule))
    config_table.add_row("Network", config.net)
    config_table.add_row("Seed", str(config.seed))
    config_table.add_row("Config hash", config.config_hash())

    console.print(config_table)
    console.print()


def display_timing(timing: Dict[str, float]):
    from src.pipeline import ordered_timing

    perf_table = Table(title="Stage Timing", show_header=True, header_style="bold cyan")
    perf_table.add_column("Stage", style="cyan")
    perf_table.add_column("Seconds", justify="right")
    for stage, seconds in ordered_timing(timing).items():
        perf_table.add_row(stage, f"{seconds:.3f}")
    perf_table.add_row("[bold]total[/bold]", f"[bold]{sum(timing.values()):.3f}[/bold]")
    console.print(perf_table)


def _report(args, path: Path, message: str):
    if args.quiet:
        console.print(str(path))
    else:
        console.print(f"[green]✓ {message}:[/green] {path}")


# ============================================================================
# Geometry commands
# ============================================================================

def cmd_voxelize(args, config: PipelineConfig) -> int:
    from src.geometry.grid_io import save_voxels
    from src.geometry.voxel import fill_fraction
    from src.pipeline import load_grid

    timing: Dict[str, float] = {}
    _, grid = load_grid(args.mesh, config, timing=timing)
    path = save_voxels(grid, _output_path(args, config, f"{args.mesh.stem}.ivox"), config.hash_tag())

    if not args.quiet:
        console.print(f"Occupied voxels: [bold]{grid.occupied_count:,}[/bold] "
                      f"({fill_fraction(grid):.2%} of {config.resolution}³)")
        display_timing(timing)
    _report(args, path, "Voxel grid written")
    return ExitCode.SUCCESS


def cmd_sdf(args, config: PipelineConfig) -> int:
    import numpy as np

    from src.geometry.grid_io import save_sdf
    from src.pipeline import load_sdf_grid

    timing: Dict[str, float] = {}
    _, sdf = load_sdf_grid(args.mesh, config, timing=timing)
    path = save_sdf(sdf, _output_path(args, config, f"{args.mesh.stem}.isdf"), config.hash_tag())

    if not args.quiet:
        values = sdf.values[sdf.valid]
        console.print(f"Surface voxels: [bold]{len(sdf.surface):,}[/bold], "
                      f"SDF range [{np.min(values):.2f}, {np.max(values):.2f}] voxels")
        display_timing(timing)
    _report(args, path, "SDF written")
    return ExitCode.SUCCESS


def cmd_spheres(args, config: PipelineConfig) -> int:
    from src.geometry.grid_io import save_spheres
    from src.pipeline import process_mesh
    from src.utils.output_generator import export_spheres

    result = process_mesh(args.mesh, config)
    spheres = result.spheres
    path = save_spheres(spheres, _output_path(args, config, f"{args.mesh.stem}.isph"), config.hash_tag())

    if not args.quiet:
        display_configuration(config)
        table = Table(title=f"{args.mesh.name}: {len(spheres)} spheres", header_style="bold magenta")
        table.add_column("#", justify="right")
        table.add_column("Center (i, j, k)")
        table.add_column("Radius", justify="right")
        table.add_column("Contacts", justify="right")
        table.add_column("Side")
        for index, sphere in enumerate(spheres.spheres[:10]):
            table.add_row(str(index), str(sphere.center), f"{sphere.radius:.3f}",
                          str(sphere.contact_count), sphere.side.value)
        console.print(table)
        if spheres.is_short:
            console.print(f"[yellow]⚠ Only {len(spheres)} of {spheres.n_requested} spheres fit[/yellow]")
        display_timing(result.timing_breakdown)

    _report(args, path, "Sphere cache written")
    if args.export:
        mesh_path = export_spheres(spheres, path.with_suffix(f".{args.export}"), args.export)
        _report(args, mesh_path, "Sphere mesh exported")
    return ExitCode.SUCCESS


def cmd_verify(args, config: PipelineConfig) -> int:
    from src.pipeline import require_verified, verify_mesh

    report = verify_mesh(args.mesh, config)
    table = Table(title=f"Oracle checks: {args.mesh.name} at {config.resolution}³", show_header=True,
                  header_style="bold cyan")
    table.add_column("Check", style="cyan")
    table.add_column("Result")
    for name, value in report.items():
        if isinstance(value, bool):
            table.add_row(name, "[green]✓ match[/green]" if value else "[red]✗ mismatch[/red]")
        else:
            table.add_row(name, str(value))
    console.print(table)
    require_verified(report)
    return ExitCode.SUCCESS


# ============================================================================
# Dataset and model commands
# ============================================================================

def cmd_ingest(args, config: PipelineConfig) -> int:
    from src.dataset.ingest import discover, ingest_with_stats

    if not args.quiet:
        display_configuration(config)

    _, items = discover(args.root)
    with Progress(
        TextColumn("[cyan]{task.description}"),
        BarColumn(),
        MofNCompleteColumn(),
        TimeElapsedColumn(),
        console=console,
        disable=args.quiet,
    ) as progress:
        task = progress.add_task("Building spheres", total=len(items))
        manifest, stats = ingest_with_stats(
            args.root, config, force=args.force,
            progress=lambda item, status: progress.advance(task),
        )

    if not args.quiet:
        table = Table(title="Dataset", header_style="bold magenta")
        table.add_column("Class", style="cyan")
        table.add_column("Label", justify="right")
        table.add_column("Train", justify="right")
        table.add_column("Test", justify="right")
        for label, (name, counts) in enumerate(manifest.counts().items()):
            table.add_row(name, str(label), str(counts["train"]), str(counts["test"]))
        console.print(table)
        console.print(f"Converted {stats.converted}, cached {stats.cached}, failed {stats.failed}, "
                      f"short {stats.short}")
        for source, message in stats.failures[:10]:
            console.print(f"[yellow]  ⚠ {source}: {message}[/yellow]")

    _report(args, manifest.default_path(), "Manifest written")
    return ExitCode.SUCCESS


def _load_manifest(path: Path):
    from src.dataset.manifest import DatasetManifest
    return DatasetManifest.load(path)


def _load_model_for(manifest, checkpoint: Path):
    """Checkpoint whose config hash matches the manifest."""
    from src.learning.network import load_checkpoint

    model, tag = load_checkpoint(checkpoint)
    if tag != int(manifest.config_hash, 16):
        raise ConfigMismatch(
            f"Checkpoint {checkpoint} was trained under config {tag:016x}, "
            f"dataset is {manifest.config_hash}"
        )
    return model


def _track(command: str, manifest, net: str, seed: int, n: int, accuracy: float, detail: str = ""):
    if not ObservabilityConfig.RUN_TRACKING_ENABLED:
        return
    from src.utils.run_tracker import get_run_tracker
    get_run_tracker().record_run(command, manifest.config_hash, net, seed, n, accuracy, detail)


def cmd_train(args, config: PipelineConfig) -> int:
    from src.learning.network import build_model
    from src.learning.trainer import train
    from src.utils.output_generator import write_training_log

    if config.net not in TRAINABLE_PRESETS:
        raise UserError(f"Network '{config.net}' is for statistics only; train one of {', '.join(TRAINABLE_PRESETS)}")

    manifest = _load_manifest(args.manifest)
    net_config = get_net_config(config.net, k=manifest.k)
    training = TrainingConfig(
        learning_rate=config.learning_rate,
        batch_size=config.batch_size,
        epochs=config.epochs,
        augment=not args.no_augment,
    )
    stem = f"{config.net}_seed{config.seed}"
    checkpoint_path = _output_path(args, config, f"{stem}.inet")
    if checkpoint_path.suffix != ".inet":
        checkpoint_path = checkpoint_path.with_suffix(".inet")

    if not args.quiet:
        console.print(f"Training [bold]{net_config.name}[/bold] on {len(manifest.entries)} objects, "
                      f"{manifest.k} classes, {training.epochs} epochs")

    model = build_model(net_config, seed=config.seed)
    with Progress(
        TextColumn("[cyan]{task.description}"),
        BarColumn(),
        MofNCompleteColumn(),
        TextColumn("{task.fields[status]}"),
        console=console,
        disable=args.quiet,
    ) as progress:
        task = progress.add_task("Epochs", total=training.epochs, status="")

        def on_epoch(record):
            progress.update(task, advance=1,
                            status=f"loss {record.train_loss:.3f} test {record.test_acc:.3f}")

        log = train(model, manifest, training, seed=config.seed, n=args.count,
                    checkpoint_path=checkpoint_path, config_tag=int(manifest.config_hash, 16),
                    on_epoch=on_epoch)

    log_path = write_training_log(log.records, checkpoint_path.with_name(f"train_{stem}.csv"), manifest.config_hash)
    save_config(config, checkpoint_path.with_name(f"{stem}.env"))
    _track("train", manifest, config.net, config.seed, args.count or manifest.header.n_spheres,
           log.final_test_accuracy, str(checkpoint_path))

    if not args.quiet:
        console.print(f"Final test accuracy: [bold]{log.final_test_accuracy:.2%}[/bold] "
                      f"(best {log.best_test_accuracy:.2%})")
    _report(args, checkpoint_path, "Checkpoint written")
    _report(args, log_path, "Training log written")
    return ExitCode.SUCCESS


def cmd_eval(args, config: PipelineConfig) -> int:
    from src.learning.trainer import configure_determinism, evaluate
    from src.state import Split
    from src.utils.output_generator import write_evaluation

    configure_determinism()
    manifest = _load_manifest(args.manifest)
    model = _load_model_for(manifest, args.checkpoint)
    split = Split(args.split)
    result = evaluate(model, manifest, split, n=args.count)
    n = args.count or manifest.header.n_spheres
    path = write_evaluation(result, _output_path(args, config, f"eval_{args.checkpoint.stem}_n{n}.csv"),
                            manifest.config_hash, split.value)
    _track("eval", manifest, model.config.name, config.seed, n, result.overall, str(args.checkpoint))

    if not args.quiet:
        table = Table(title=f"{split.value} accuracy (n={n})", header_style="bold magenta")
        table.add_column("Class", style="cyan")
        table.add_column("Accuracy", justify="right")
        for class_name, accuracy in result.per_class.items():
            table.add_row(class_name, f"{accuracy:.2%}")
        table.add_row("[bold]overall[/bold]", f"[bold]{result.overall:.2%}[/bold]")
        console.print(table)
    _report(args, path, "Evaluation written")
    return ExitCode.SUCCESS


def cmd_sweep(args, config: PipelineConfig) -> int:
    from src.learning.trainer import configure_determinism, evaluate
    from src.state import Split
    from src.utils.output_generator import sweep_trend, write_sweep

    try:
        counts = [int(item) for item in args.counts.split(",") if item.strip()]
    except ValueError:
        raise UserError(f"--counts must be comma-separated integers, got '{args.counts}'")
    manifest = _load_manifest(args.manifest)
    if not counts or min(counts) < 1 or max(counts) > manifest.header.n_spheres:
        raise UserError(f"Counts must lie in [1, {manifest.header.n_spheres}], got {counts}")

    configure_determinism()
    model = _load_model_for(manifest, args.checkpoint)
    split = Split(args.split)
    results = [(n, evaluate(model, manifest, split, n=n).overall) for n in counts]
    path = write_sweep(results, _output_path(args, config, f"sweep_{args.checkpoint.stem}.csv"),
                       manifest.config_hash)
    for n, accuracy in results:
        _track("sweep", manifest, model.config.name, config.seed, n, accuracy, str(args.checkpoint))

    if not args.quiet:
        table = Table(title="Accuracy vs. number of spheres", header_style="bold magenta")
        table.add_column("n", justify="right")
        table.add_column("Accuracy", justify="right")
        table.add_column("Δ vs first", justify="right")
        for n, accuracy in results:
            table.add_row(str(n), f"{accuracy:.2%}", f"{(accuracy - results[0][1]) * 100:+.1f} pt")
        console.print(table)
        console.print(f"Trend: {sweep_trend(results)}")
    _report(args, path, "Sweep written")
    return ExitCode.SUCCESS


def cmd_critical(args, config: PipelineConfig) -> int:
    from src.dataset.loader import load_sphere_set, to_sample
    from src.learning.analysis import critical_spheres
    from src.learning.trainer import configure_determinism
    from src.state import Split
    from src.utils.output_generator import export_spheres, write_critical

    configure_determinism()
    manifest = _load_manifest(args.manifest)
    model = _load_model_for(manifest, args.checkpoint)
    entries = manifest.split_entries(Split(args.split))[:args.limit]

    critical = {}
    out_dir = _output_path(args, config, "critical").parent
    for entry in entries:
        sphere_set = load_sphere_set(manifest, entry)
        indices = critical_spheres(model, to_sample(sphere_set, entry.label))
        name = Path(entry.cache_path).stem
        critical[name] = indices
        if args.export:
            export_spheres(sphere_set, out_dir / f"critical_{name}.{args.export}", args.export, critical=indices)

    path = write_critical(critical, _output_path(args, config, f"critical_{args.checkpoint.stem}.csv"),
                          manifest.config_hash)
    if not args.quiet:
        table = Table(title="Critical spheres", header_style="bold magenta")
        table.add_column("Object", style="cyan")
        table.add_column("Critical", justify="right")
        table.add_column("Of", justify="right")
        for entry, (name, indices) in zip(entries, critical.items()):
            table.add_row(name, str(len(indices)), str(entry.n))
        console.print(table)
    _report(args, path, "Critical spheres written")
    return ExitCode.SUCCESS


def cmd_export(args, config: PipelineConfig) -> int:
    from src.dataset.loader import to_sample
    from src.geometry.grid_io import load_spheres
    from src.learning.analysis import critical_spheres
    from src.learning.network import load_checkpoint
    from src.utils.output_generator import export_spheres

    sphere_set = load_spheres(args.cache)
    critical = None
    if args.checkpoint is not None:
        model, _ = load_checkpoint(args.checkpoint)
        critical = critical_spheres(model, to_sample(sphere_set, 0))

    default_name = f"{args.cache.stem}.{args.fmt.lower()}"
    path = export_spheres(sphere_set, _output_path(args, config, default_name), args.fmt, critical=critical)
    if not args.quiet and critical is not None:
        console.print(f"Highlighted {len(critical)} critical spheres")
    _report(args, path, f"{len(sphere_set)} spheres exported")
    return ExitCode.SUCCESS


def cmd_stats(args, config: PipelineConfig) -> int:
    from src.learning.analysis import compare_presets, published_estimate_note
    from src.utils.output_generator import generate_stats_report

    comparison = compare_presets(n=args.n, k=args.k)
    notes = [
        note for note in (
            published_estimate_note(get_net_config(name, args.k), n=args.n)
            for name in comparison
        ) if note
    ]

    if not args.quiet:
        table = Table(title=f"Model statistics (n={args.n}, k={args.k})", header_style="bold magenta")
        table.add_column("Network", style="cyan")
        table.add_column("Parameters", justify="right")
        table.add_column("FLOPs", justify="right")
        table.add_column("Params vs ref", justify="right")
        table.add_column("FLOPs vs ref", justify="right")
        for name, item in comparison.items():
            table.add_row(name, f"{item.stats.params:,}", f"{item.stats.flops:,}",
                          f"{item.param_ratio:.1%}", f"{item.flop_ratio:.1%}")
        console.print(table)
        for note in notes:
            console.print(f"[dim]Note: {note}[/dim]")

    path = generate_stats_report(comparison, notes, _output_path(args, config, f"model_stats_n{args.n}.md"))
    _report(args, Path(path), "Report written")
    return ExitCode.SUCCESS


def cmd_history(args, config: PipelineConfig) -> int:
    from src.utils.run_tracker import get_run_tracker

    records = get_run_tracker().get_recent_runs(limit=args.limit, command=args.command_filter)
    table = Table(title="Recent runs", header_style="bold magenta")
    for column in ("When", "Command", "Net", "Seed", "n", "Accuracy", "Config"):
        table.add_column(column)
    for record in records:
        table.add_row(
            record.timestamp.strftime("%Y-%m-%d %H:%M"),
            record.command,
            record.net,
            str(record.seed),
            str(record.n_spheres),
            f"{record.accuracy:.2%}",
            record.config_hash,
        )
    console.print(table)
    return ExitCode.SUCCESS


COMMANDS = {
    'voxelize': cmd_voxelize,
    'sdf': cmd_sdf,
    'spheres': cmd_spheres,
    'verify': cmd_verify,
    'ingest': cmd_ingest,
    'train': cmd_train,
    'eval': cmd_eval,
    'sweep': cmd_sweep,
    'critical': cmd_critical,
    'export': cmd_export,
    'stats': cmd_stats,
    'history': cmd_history,
}


def run(argv: Optional[List[str]] = None) -> int:
    """
    Parse arguments, run one command and map failures to exit codes.

    Returns:
        Process exit code
    """
    try:
        args = parse_arguments(argv)
    except SystemExit as e:
        return 0 if e.code in (0, None) else int(ExitCode.USER_ERROR)
    level = "DEBUG" if args.debug else (args.log_level or ("WARNING" if args.quiet else None))
    ObservabilityConfig.setup_logging(level)

    try:
        config = resolve_config(args)
        if not args.quiet and args.command not in ('history', 'stats'):
            display_welcome(args.command)
        return int(COMMANDS[args.command](args, config))

    except InSphereError as e:
        console.print(f"\n[bold red]✗ {type(e).__name__}:[/bold red] {e}")
        if args.debug:
            console.print_exception()
        return int(e.exit_code)

    except KeyboardInterrupt:
        console.print("\n[yellow]⚠️ Interrupted by user[/yellow]")
        return 130

    except Exception as e:
        console.print(f"\n[bold red]✗ Internal error:[/bold red] {e}")
        if args.debug:
            console.print_exception()
        return int(ExitCode.INTERNAL_ERROR)


def main():
    """Main CLI entry point."""
    sys.exit(run())


if __name__ == "__main__":
    main()
