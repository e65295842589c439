"""Command line entry point.

Exit codes: 0 success, 1 usage or parse error, 2 model validation failure,
3 database error (ingest, store loading, or remote query).

Settings come from flags, falling back to an optional INI file given with
``--config``::

    [cpsvuln]
    db = /var/lib/cpsvuln
    format = markdown
    remote = http://localhost:5000
    timeout = 10

The ``remote`` value is only used when ``db query`` is run with ``--remote``.
"""

from __future__ import annotations

import configparser
import json
import logging
import shutil
import sys
from dataclasses import dataclass
from pathlib import Path

import click

from . import __version__
from .graph import emit_graphml, to_graph
from .modelfmt import ModelSyntaxError, ModelValidationError, load_model
from .remote import DEFAULT_TIMEOUT, RemoteError, fetch_remote
from .report import assess, render_report
from .vulndb import IngestError, load_store, normalize_text, read_feed

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_DB = 0, 1, 2, 3


class DatabaseError(Exception):
    pass


@dataclass
class Settings:
    db: str | None = None
    format: str = "json"
    remote: str | None = None
    timeout: float = DEFAULT_TIMEOUT

    @classmethod
    def load(cls, path: str | None) -> "Settings":
        if path is None:
            return cls()
        parser = configparser.ConfigParser()
        try:
            with open(path, encoding="utf-8") as fh:
                parser.read_file(fh)
        except (OSError, configparser.Error) as exc:
            raise click.UsageError(f"cannot read config file {path}: {exc}") from None
        section = parser["cpsvuln"] if parser.has_section("cpsvuln") else {}
        try:
            timeout = float(section.get("timeout", DEFAULT_TIMEOUT))
        except ValueError:
            raise click.UsageError(f"{path}: timeout must be a number") from None
        fmt = section.get("format", "json")
        if fmt not in ("json", "markdown"):
            raise click.UsageError(f"{path}: format must be json or markdown")
        return cls(section.get("db"), fmt, section.get("remote"), timeout)


def _open_store(db: str | None, settings: Settings):
    db = db or settings.db
    if not db:
        raise click.UsageError("no database directory; pass --db or set db in the config file")
    try:
        return load_store(db)
    except IngestError as exc:
        raise DatabaseError(str(exc)) from None


def _load(model_file: str):
    try:
        return load_model(model_file)
    except OSError as exc:
        raise click.UsageError(f"cannot read {model_file}: {exc}") from None


@click.group()
@click.version_option(__version__, prog_name="cpsvuln")
@click.option("--config", "config_path", type=click.Path(dir_okay=False), help="INI config file.")
@click.option("-v", "--verbose", is_flag=True, help="Log skipped feed entries and other details.")
@click.pass_context
def cli(ctx: click.Context, config_path: str | None, verbose: bool) -> None:
    """Match system model components against historic vulnerability records."""
    logging.basicConfig(level=logging.INFO if verbose else logging.ERROR, format="%(levelname)s: %(message)s")
    ctx.obj = Settings.load(config_path)


@cli.command()
@click.argument("model_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--db", type=click.Path(file_okay=False), help="Directory of NVD JSON feeds.")
@click.option("--format", "fmt", type=click.Choice(["json", "markdown"]), default=None)
@click.option("--surface-only", is_flag=True, help="Only match attack-surface components.")
@click.option("-o", "--output", type=click.Path(dir_okay=False), help="Write the report here.")
@click.option("--figures", type=click.Path(file_okay=False), help="Write figures and evidence.csv here.")
@click.pass_obj
def scan(settings: Settings, model_file, db, fmt, surface_only, output, figures) -> None:
    """Assess MODEL_FILE against the vulnerability database."""
    model = _load(model_file)
    store = _open_store(db, settings)
    graph = to_graph(model)
    report = assess(model, store, surface_only=surface_only, graph=graph)
    text = render_report(report, fmt or settings.format)
    if output:
        Path(output).write_text(text, encoding="utf-8")
    else:
        click.echo(text, nl=False)
    if figures:
        from .figures import write_figures

        for path in write_figures(report, graph, figures):
            click.echo(f"wrote {path}", err=True)


@cli.command("export-graphml")
@click.argument("model_file", type=click.Path(exists=True, dir_okay=False))
@click.option("-o", "--output", required=True, type=click.Path(dir_okay=False))
def export_graphml(model_file, output) -> None:
    """Write the system graph of MODEL_FILE as GraphML."""
    model = _load(model_file)
    Path(output).write_text(emit_graphml(to_graph(model)), encoding="utf-8")


@cli.command()
@click.argument("model_file", type=click.Path(exists=True, dir_okay=False))
def validate(model_file) -> None:
    """Check MODEL_FILE for syntax and schema violations."""
    model = _load(model_file)
    click.echo(f"{model.name}: valid ({len(model.components)} components, "
               f"{len(model.connections)} connections)")


@cli.group()
def db() -> None:
    """Manage and query the local vulnerability database."""


@db.command("ingest")
@click.argument("feed", type=click.Path(exists=True, dir_okay=False))
@click.option("--db", "db_dir", type=click.Path(file_okay=False))
@click.pass_obj
def db_ingest(settings: Settings, feed, db_dir) -> None:
    """Validate FEED and add it to the database directory."""
    target = db_dir or settings.db
    if not target:
        raise click.UsageError("no database directory; pass --db or set db in the config file")
    try:
        vectors = read_feed(Path(feed))
        Path(target).mkdir(parents=True, exist_ok=True)
        shutil.copyfile(feed, Path(target) / Path(feed).name)
        store = load_store(target)
    except (IngestError, OSError) as exc:
        raise DatabaseError(str(exc)) from None
    click.echo(f"ingested {len(vectors)} records from {feed}; "
               f"store has {len(store)} records (hash {store.version_hash()})")


@db.command("query")
@click.argument("term")
@click.option("--db", "db_dir", type=click.Path(file_okay=False))
@click.option("--remote", is_flag=False, flag_value="", default=None,
              help="Also query a cve-search API; URL defaults to the config value.")
@click.option("--json", "as_json", is_flag=True, help="Print records as JSON.")
@click.pass_obj
def db_query(settings: Settings, term, db_dir, remote, as_json) -> None:
    """Look up records whose summary or product text contains TERM."""
    if remote is None and not (db_dir or settings.db):
        raise click.UsageError("nothing to query; pass --db, set db in the config file, or use --remote")
    results = []
    if db_dir or settings.db:
        store = _open_store(db_dir, settings)
        results += [("local", v) for v in store.search(normalize_text(term))]
    if remote is not None:
        url = remote or settings.remote
        if not url:
            raise click.UsageError("--remote needs a URL here or in the config file")
        try:
            results += [("remote", v) for v in fetch_remote(url, term, timeout=settings.timeout)]
        except RemoteError as exc:
            raise DatabaseError(str(exc)) from None
    if as_json:
        click.echo(json.dumps([dict(v.to_dict(), source=src) for src, v in results], indent=2, sort_keys=True))
        return
    for src, v in results:
        click.echo(f"{v.id}\t{src}\t{v.effect.value}\t{v.summary[:100]}")
    if not results:
        click.echo("no matching records", err=True)


def main(argv: list[str] | None = None) -> int:
    try:
        cli.main(args=argv, prog_name="cpsvuln", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except (click.UsageError, click.Abort) as exc:
        if isinstance(exc, click.UsageError):
            exc.show()
        return EXIT_USAGE
    except ModelSyntaxError as exc:
        click.echo(f"parse error: {exc}", err=True)
        return EXIT_USAGE
    except ModelValidationError as exc:
        for violation in exc.violations:
            click.echo(f"invalid: {violation}", err=True)
        return EXIT_INVALID
    except DatabaseError as exc:
        click.echo(f"database error: {exc}", err=True)
        return EXIT_DB
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
