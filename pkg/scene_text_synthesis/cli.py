import functools
import logging
import sys
from datetime import datetime
from pathlib import Path
from typing import Any, Callable, Optional, Union

import click

from scene_text_synthesis.appearance import build_database
from scene_text_synthesis.config import Config, format_logger
from scene_text_synthesis.containers import RunManifest
from scene_text_synthesis.exceptions import (
    ConfigError,
    DimensionMismatch,
    EmptyCorpus,
    EmptyDatabase,
    EmptyFontList,
    EncodingError,
    InvalidChannelCount,
    ShortRun,
    StaleDatabase,
    UnknownClassId,
)
from scene_text_synthesis.pipeline import crop_words, preview_entry, run_synth

logger = logging.getLogger()
logger.addHandler(logging.StreamHandler(stream=sys.stdout))
format_logger(logger)

EXIT_SHORT_RUN = 2
EXIT_CONFIG_ERROR = 3

# Configuration and input-data errors; exit 3.
_INPUT_ERRORS = (
    ConfigError,
    StaleDatabase,
    EmptyFontList,
    EmptyCorpus,
    EncodingError,
    UnknownClassId,
    DimensionMismatch,
    InvalidChannelCount,
)

# Parameters whose path decides where a command's log file goes, by priority.
_LOG_ANCHORS = ("config", "out", "manifest", "dataset")


def arg_logger(f: Callable):
    """Decorator that logs function arguments and execution status.

    Args:
        f (Callable): Function to be decorated

    Returns:
        (Callable): Wrapped function that logs its arguments and execution status
    """

    @functools.wraps(f)
    def func(*args: Any, **kwargs: Any):
        logger.info("Start: %s -> args: %s, kwargs: %s" % (f.__name__, args, kwargs))
        res = f(*args, **kwargs)
        logger.info("Finish: %s" % f.__name__)
        return res

    return func


def configure_logger(fw: Optional[Callable] = None):
    """Decorator that configures logging for CLI commands.

    Adds a timestamped log file next to the command's config, output or
    manifest path, in addition to console logging.

    Args:
        fw (Optional[Callable]): Optional wrapped function (used for preserving docstrings)

    Returns:
        (Callable): Decorator function that configures logging
    """

    def decorator(f: Callable):
        @functools.wraps(fw if fw else f)
        def func(*args: Any, **kwargs: Any):
            logger = logging.getLogger()
            context = click.get_current_context()
            subcommand = context.info_name
            anchor = next(
                (context.params[k] for k in _LOG_ANCHORS if context.params.get(k)),
                None,
            )
            if anchor is not None:
                path = Path(anchor)
                directory = path if path.is_dir() else path.parent
                directory.mkdir(parents=True, exist_ok=True)
                file_handler = logging.FileHandler(
                    "{path}/{:%Y%m%d-%H%M%S}__{cmd}__{file}.log".format(
                        datetime.now(),
                        cmd=subcommand,
                        path=directory,
                        file=path.stem,
                    ),
                    mode="w",
                )
                # Get default stream handler from root logger.
                stream_handler = [
                    h
                    for h in logging.getLogger().handlers
                    if isinstance(h, logging.StreamHandler)
                ]
                if len(stream_handler) > 0:
                    stream_handler = stream_handler[0]
                    file_handler.setFormatter(stream_handler.formatter)
                logger.addHandler(file_handler)
                format_logger(logger)
            return f(*args, **kwargs)

        return func

    return decorator


@click.group()
def main():
    """Semantically coherent scene text image synthesis."""
    pass


@arg_logger
def generate_template_ini(
    output_dir: Optional[Union[Path, str]] = None,
) -> None:
    """Generate a template configuration INI file."""
    if not output_dir:
        output_dir = Path()
    else:
        output_dir = Path(output_dir)
    output_dir.mkdir(exist_ok=True)

    template_ini_fh = output_dir / "template.ini"

    logger.info(f"Creating template ini at {template_ini_fh}...")

    config = Config()
    config.to_ini(template_ini_fh)


@main.command("generate-template-ini")
@click.option(
    "--output_dir", type=click.Path(), help="Output location for template INI file."
)
@configure_logger(fw=generate_template_ini)
def _generate_template_ini(*args: Any, **kwargs: Any) -> None:
    """ """
    generate_template_ini(*args, **kwargs)


@arg_logger
def synth(
    config: Union[Path, str],
    seed: Optional[int] = None,
    count: Optional[int] = None,
    jobs: Optional[int] = None,
    debug_masks: bool = False,
) -> RunManifest:
    """Synthesize scene text images as configured.

    Command line values override the config file.
    """
    cfg = Config.from_file(config)
    if seed is not None:
        cfg.general.random_seed = seed
    if count is not None:
        cfg.synthesis.count = count
    if jobs is not None:
        cfg.general.n_jobs = jobs
    if debug_masks:
        cfg.synthesis.debug_masks = True
    return run_synth(cfg)


@main.command("synth")
@click.option(
    "--config",
    type=click.Path(exists=True),
    required=True,
    help="Run configuration, JSON or INI.",
)
@click.option("--seed", type=int, help="Run seed.")
@click.option("--count", type=int, help="Number of samples to produce.")
@click.option("--jobs", type=int, help="Worker processes.")
@click.option(
    "--debug-masks",
    "debug_masks",
    is_flag=True,
    help="Also write saliency maps and eligibility overlays.",
)
@configure_logger(fw=synth)
def _synth(*args: Any, **kwargs: Any) -> None:
    """ """
    try:
        synth(*args, **kwargs)
    except ShortRun as e:
        logger.error(str(e))
        sys.exit(EXIT_SHORT_RUN)
    except _INPUT_ERRORS as e:
        logger.error(f"{type(e).__name__}: {e}")
        sys.exit(EXIT_CONFIG_ERROR)


@arg_logger
def build_stats(
    dataset: Union[Path, str],
    out: Union[Path, str],
    gt_format: str = "icdar-word",
    jobs: int = 1,
) -> None:
    """Build the appearance database of an annotated dataset."""
    config = Config()
    config.general.n_jobs = jobs
    config.general.tqdm_enabled = True
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    build_database(dataset, gt_format, config, out=out)


@main.command("build-stats")
@click.option(
    "--dataset",
    type=click.Path(exists=True, file_okay=False),
    required=True,
    help="Dataset directory with images and ground-truth files.",
)
@click.option(
    "--format",
    "gt_format",
    type=click.Choice(["icdar-word", "quad"]),
    default="icdar-word",
    show_default=True,
    help="Ground-truth line format.",
)
@click.option(
    "--out", type=click.Path(), required=True, help="Appearance database (.h5)."
)
@click.option("--jobs", type=int, default=1, show_default=True, help="Workers.")
@configure_logger(fw=build_stats)
def _build_stats(*args: Any, **kwargs: Any) -> None:
    """ """
    try:
        build_stats(*args, **kwargs)
    except EmptyDatabase as e:
        logger.error(f"{type(e).__name__}: {e}")
        sys.exit(EXIT_CONFIG_ERROR)


@arg_logger
def preview(
    manifest: Union[Path, str],
    sample: int,
    out: Optional[Union[Path, str]] = None,
) -> Path:
    """Draw the annotations of one written sample over its image."""
    run = RunManifest.from_json(manifest)
    if not out:
        out = Path(manifest).parent / f"preview_{sample:06d}.png"
    preview_entry(run, sample, out)
    logger.info(f"Preview written to {out}.")
    return Path(out)


@main.command("preview")
@click.option(
    "--manifest", type=click.Path(exists=True), required=True, help="Run manifest."
)
@click.option("--sample", type=int, required=True, help="Sample id.")
@click.option("--out", type=click.Path(), help="Output PNG.")
@configure_logger(fw=preview)
def _preview(*args: Any, **kwargs: Any) -> None:
    """ """
    preview(*args, **kwargs)


@arg_logger
def crop_words_cmd(
    manifest: Union[Path, str],
    output_dir: Optional[Union[Path, str]] = None,
) -> Path:
    """Cut every instance of a run into an upright word image for recognizers."""
    return crop_words(RunManifest.from_json(manifest), output_dir)


@main.command("crop-words")
@click.option(
    "--manifest", type=click.Path(exists=True), required=True, help="Run manifest."
)
@click.option("--output_dir", type=click.Path(), help="Word image directory.")
@configure_logger(fw=crop_words_cmd)
def _crop_words(*args: Any, **kwargs: Any) -> None:
    """ """
    crop_words_cmd(*args, **kwargs)
