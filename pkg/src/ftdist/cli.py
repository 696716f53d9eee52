"""Command-line interface.

Exit codes: 0 success, 1 failed check or corrupt labels, 2 usage or parse error.
"""

from __future__ import annotations

import logging
import random
import statistics
import sys
import time
from dataclasses import replace
from pathlib import Path

import click

from .decoder import UNREACHABLE
from .errors import ConstructionError, CorruptLabelError, FtdistError, ResourceError
from .graph import format_graph, parse_graph
from .harness import DEFAULT_PROFILE, Profile, generate_graph, graph_report, report_json, validate_suite
from .hierarchy import hierarchy_dump
from .labels import LabelParams, build_labels
from .serialize import dumps, label_sizes
from .tz import CompiledOracle, SensitivityOracle, tz_build

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2


def _failures(text: str | None) -> list[int]:
    if not text:
        return []
    try:
        return sorted({int(x) for x in text.replace(",", " ").split()})
    except ValueError:
        raise click.BadParameter(f"expected comma-separated edge ids, got {text!r}") from None


def _load_oracle(path: Path) -> SensitivityOracle:
    return SensitivityOracle.from_bytes(path.read_bytes())


def _check_vertex(oracle: SensitivityOracle, *vertices: int) -> None:
    for x in vertices:
        if not 0 <= x < len(oracle.vlabels):
            raise click.BadParameter(f"vertex {x} out of range [0, {len(oracle.vlabels)})")


def _check_edges(oracle: SensitivityOracle, failures: list[int]) -> None:
    for e in failures:
        if not 0 <= e < len(oracle.endpoints):
            raise click.BadParameter(f"edge id {e} out of range [0, {len(oracle.endpoints)})")


def _format_distance(x: float) -> str:
    return "UNREACHABLE" if x == UNREACHABLE else str(x)


def _compiled_path(oracle_path: Path) -> Path:
    return oracle_path.with_name(oracle_path.name + ".compiled")


def _profile_options(f):
    f = click.option("--f", "f_max", type=int, default=DEFAULT_PROFILE.f, show_default=True, help="Max failures.")(f)
    f = click.option("--s-nc", type=int, default=DEFAULT_PROFILE.s_nc, show_default=True)(f)
    f = click.option("--s-ed", type=int, default=DEFAULT_PROFILE.s_ed, show_default=True)(f)
    f = click.option("--d", "depth", type=int, default=DEFAULT_PROFILE.d, show_default=True, help="Hierarchy depth.")(f)
    f = click.option("--c-tau", type=int, default=DEFAULT_PROFILE.c_tau, show_default=True)(f)
    return f


@click.group()
@click.option("-v", "--verbose", count=True, help="Repeat for more logging.")
def cli(verbose: int) -> None:
    """Fault-tolerant approximate distance labels and sensitivity oracles."""
    level = logging.WARNING - 10 * min(verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


@cli.command()
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--n-max", type=int, default=DEFAULT_PROFILE.n_max, show_default=True)
@click.option("--m-max", type=int, default=DEFAULT_PROFILE.m_max, show_default=True)
@click.option("--max-length", type=int, default=DEFAULT_PROFILE.max_length, show_default=True)
@click.option("-o", "--output", type=click.Path(dir_okay=False, path_type=Path), help="Defaults to stdout.")
def gen(seed: int, n_max: int, m_max: int, max_length: int, output: Path | None) -> None:
    """Generate a seeded random graph."""
    text = format_graph(generate_graph(seed, n_max, m_max, max_length))
    if output is None:
        click.echo(text, nl=False)
    else:
        output.write_text(text)


@cli.command()
@click.argument("graph", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("-o", "--output", type=click.Path(dir_okay=False, path_type=Path), required=True)
@click.option("--k", type=click.IntRange(min=1), default=2, show_default=True, help="TZ trade-off parameter.")
@click.option(
    "--seed", type=int, default=0, show_default=True, help="Accepted for uniformity; builds are deterministic."
)
@_profile_options
def build(
    graph: Path, output: Path, k: int, seed: int, f_max: int, s_nc: int, s_ed: int, depth: int, c_tau: int
) -> None:
    """Build labels and TZ structures for GRAPH and write an oracle file."""
    g = parse_graph(graph.read_text())
    labels = build_labels(g, LabelParams(f=f_max, s_nc=s_nc, s_ed=s_ed, d=depth, c_tau=c_tau))
    oracle = SensitivityOracle.store(g, labels, tz_build(g, k))
    output.write_bytes(oracle.to_bytes())
    sizes = label_sizes(labels)
    click.echo(
        f"n={g.n} m={g.m} scales={labels.i_max + 1} nontrivial_edge_labels={sizes['nontrivial_edges']} "
        f"bytes={output.stat().st_size}"
    )


@cli.command()
@click.argument("oracle_file", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.argument("p", type=int)
@click.argument("q", type=int)
@click.option("--failures", "-F", default="", help="Comma-separated failed edge ids.")
def query(oracle_file: Path, p: int, q: int, failures: str) -> None:
    """Label-only distance estimate between P and Q avoiding the failed edges."""
    oracle = _load_oracle(oracle_file)
    fs = _failures(failures)
    _check_vertex(oracle, p, q)
    _check_edges(oracle, fs)
    est = oracle.query(p, q, fs)
    click.echo(f"{_format_distance(est)} stretch<={oracle.labels.params.stretch}")


@cli.command(name="compile")
@click.argument("oracle_file", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--failures", "-F", default="", help="Comma-separated failed edge ids.")
@click.option(
    "-o", "--output", type=click.Path(dir_okay=False, path_type=Path), help="Defaults to ORACLE_FILE.compiled."
)
def compile_cmd(oracle_file: Path, failures: str, output: Path | None) -> None:
    """Compile a failure set into a fast-query blob."""
    oracle = _load_oracle(oracle_file)
    fs = _failures(failures)
    _check_edges(oracle, fs)
    compiled = oracle.set_failures(fs)
    out = output or _compiled_path(oracle_file)
    out.write_bytes(compiled.to_bytes())
    click.echo(f"failures={sorted(compiled.failed)} endpoints={len(compiled.endpoints)} -> {out}")


@cli.command()
@click.argument("oracle_file", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.argument("p", type=int)
@click.argument("q", type=int)
@click.option(
    "--compiled", type=click.Path(exists=True, dir_okay=False, path_type=Path), help="Defaults to ORACLE_FILE.compiled."
)
def fastquery(oracle_file: Path, p: int, q: int, compiled: Path | None) -> None:
    """Fast estimate between P and Q against the latest compiled failure set."""
    oracle = _load_oracle(oracle_file)
    _check_vertex(oracle, p, q)
    blob = compiled or _compiled_path(oracle_file)
    if not blob.exists():
        raise click.UsageError(f"no compiled failure set at {blob}; run `compile` first")
    oracle.compiled = CompiledOracle.from_bytes(blob.read_bytes())
    _check_edges(oracle, sorted(oracle.compiled.failed))
    bound = 2 * oracle.labels.params.stretch * oracle.k + 2 * oracle.k - 1
    click.echo(f"{_format_distance(oracle.distance(p, q))} stretch<={bound}")


@cli.command()
@click.option("--seed", type=int, default=0, show_default=True, help="First instance seed.")
@click.option("--graphs", type=click.IntRange(min=0), default=DEFAULT_PROFILE.graphs, show_default=True)
@click.option("--n-max", type=int, default=DEFAULT_PROFILE.n_max, show_default=True)
@click.option("--m-max", type=int, default=DEFAULT_PROFILE.m_max, show_default=True)
@click.option(
    "--graph",
    "graph_file",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    help="Validate one graph file instead of generated instances; includes hierarchy dumps.",
)
@click.option("--k", type=click.IntRange(min=1), default=2, show_default=True, help="TZ parameter with --graph.")
@click.option("--corrupt", is_flag=True, help="Inject a label corruption; the suite must fail.")
@click.option("--workers", type=click.IntRange(min=1), default=1, show_default=True)
@click.option("-o", "--output", type=click.Path(dir_okay=False, path_type=Path), help="Write the JSON report here.")
@_profile_options
def validate(
    seed: int,
    graphs: int,
    n_max: int,
    m_max: int,
    graph_file: Path | None,
    k: int,
    corrupt: bool,
    workers: int,
    output: Path | None,
    f_max: int,
    s_nc: int,
    s_ed: int,
    depth: int,
    c_tau: int,
) -> None:
    """Run every check and the exhaustive sweep; JSON report, exit 1 on any failure."""
    profile = Profile(
        graphs=graphs, n_max=n_max, m_max=m_max, f=f_max, s_nc=s_nc, s_ed=s_ed, d=depth, c_tau=c_tau, seed=seed
    )
    if graph_file is not None:
        report = _validate_graph(parse_graph(graph_file.read_text()), replace(profile, graphs=1), k, corrupt)
    else:
        report = validate_suite(profile, corrupt=corrupt, workers=workers)
    text = report_json(report)
    if output is None:
        click.echo(text)
    else:
        output.write_text(text + "\n")
        click.echo(f"{'PASS' if report['passed'] else 'FAIL'} -> {output}")
    if not report["passed"]:
        sys.exit(EXIT_FAILED)


def _validate_graph(g, profile: Profile, k: int, corrupt: bool) -> dict:
    try:
        report, stats = graph_report(g, profile.seed, profile, k, corrupt=corrupt)
    except (CorruptLabelError, AssertionError) as exc:
        return {"passed": False, "errors": [f"{type(exc).__name__}: {exc}"]}
    labels = build_labels(g, profile.label_params())
    checks = {
        "reachability": stats.unreachable_mismatch == 0,
        "lower_bound": stats.lower_violations == 0,
        "upper_bound": stats.upper_violations == 0,
        "sandwich_literal": stats.literal_violations == 0,
        "fast_query": stats.fast_violations == 0,
        "hierarchy": report["hierarchy_passed"],
        "hitting_sets": report["hitting_passed"],
        "light_components": report["light_components_passed"],
        "nontrivial_bound": report["nontrivial_edge_labels"] <= report["nontrivial_bound"],
    }
    return {
        "instance": report,
        "hierarchies": [hierarchy_dump(sc.hierarchy) for sc in labels.scales],
        "queries": stats.queries,
        "max_ratio": stats.max_ratio,
        "checks": checks,
        "sample_failures": stats.failures[:20],
        "errors": [],
        "passed": all(checks.values()),
    }


@cli.command()
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--graphs", type=click.IntRange(min=1), default=5, show_default=True)
@click.option("--queries", type=click.IntRange(min=1), default=50, show_default=True)
@click.option("--k", type=click.IntRange(min=1), default=2, show_default=True)
@click.option("--n-max", type=int, default=DEFAULT_PROFILE.n_max, show_default=True)
@click.option("--m-max", type=int, default=DEFAULT_PROFILE.m_max, show_default=True)
@_profile_options
def bench(
    seed: int,
    graphs: int,
    queries: int,
    k: int,
    n_max: int,
    m_max: int,
    f_max: int,
    s_nc: int,
    s_ed: int,
    depth: int,
    c_tau: int,
) -> None:
    """Label sizes and query times as a table; nothing is asserted."""
    params = LabelParams(f=f_max, s_nc=s_nc, s_ed=s_ed, d=depth, c_tau=c_tau)
    rng = random.Random(seed)
    header = (
        f"{'seed':>6} {'n':>3} {'m':>3} {'build_s':>8} {'store_B':>9} {'vlab_max':>9} {'elab_max':>9} "
        f"{'nontriv':>7} {'query_ms':>9} {'compile_ms':>10} {'fast_us':>8}"
    )
    click.echo(header)
    for idx in range(graphs):
        gseed = seed + idx
        g = generate_graph(gseed, n_max, m_max)
        t0 = time.perf_counter()
        labels = build_labels(g, params)
        build_s = time.perf_counter() - t0
        sizes = label_sizes(labels)
        oracle = SensitivityOracle.store(g, labels, tz_build(g, k))
        q_times, c_times, f_times = [], [], []
        for _ in range(queries):
            fs = sorted(rng.sample(range(g.m), min(g.m, rng.randint(0, f_max))))
            p, q = rng.randrange(g.n), rng.randrange(g.n)
            t0 = time.perf_counter()
            oracle.query(p, q, fs)
            q_times.append(time.perf_counter() - t0)
            t0 = time.perf_counter()
            oracle.set_failures(fs)
            c_times.append(time.perf_counter() - t0)
            t0 = time.perf_counter()
            oracle.distance(p, q)
            f_times.append(time.perf_counter() - t0)
        click.echo(
            f"{gseed:>6} {g.n:>3} {g.m:>3} {build_s:>8.2f} {len(dumps(labels)):>9} {sizes['vertex_max']:>9} "
            f"{sizes['edge_max']:>9} {sizes['nontrivial_edges']:>7} {1e3 * statistics.median(q_times):>9.2f} "
            f"{1e3 * statistics.median(c_times):>10.2f} {1e6 * statistics.median(f_times):>8.1f}"
        )


def main(argv: list[str] | None = None) -> int:
    try:
        cli.main(args=argv, prog_name="ftdist", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.ClickException as exc:
        exc.show()
        return EXIT_USAGE
    except click.Abort:
        click.echo("aborted", err=True)
        return EXIT_USAGE
    except SystemExit as exc:
        return int(exc.code or 0)
    except (CorruptLabelError, ConstructionError, ResourceError, AssertionError) as exc:
        click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
        return EXIT_FAILED
    except FtdistError as exc:
        click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
        return EXIT_USAGE
    except OSError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
