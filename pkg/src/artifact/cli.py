"""Command-line entry point: ``artifact <command>``."""

from __future__ import annotations

import json
import logging
import sys

import click

from . import report
from .classifier import (
    GRAPHICAL_RULES,
    ClassificationError,
    ContradictionError,
    algebraicness_bounds,
    build_ledger,
    enumerate_universe,
    fingerprint,
    partial_order_report,
    proven_equivalences,
    support_pass,
    to_dot,
)
from .dominance_rules import RuleTier, structurally_dominates
from .graph_core import GraphError, MDag, is_directed_edge_free, load_mdag
from .support_engine import (
    SupportCache,
    candidate_supports,
    ci_rules_out,
    compare_support_profiles,
    format_support,
    parse_support,
    SupportOracle,
)
from .separation import all_dsep_relations

EXIT_VALIDATION = 2
EXIT_CONTRADICTION = 3


def _cards(text: str, n: int | None = None) -> tuple[int, ...]:
    try:
        cards = tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise click.BadParameter(f"bad cardinality list {text!r}") from None
    if not cards or any(c < 1 for c in cards):
        raise click.BadParameter("cardinalities must be positive integers")
    if n is not None and len(cards) != n:
        raise click.BadParameter(f"expected {n} cardinalities, got {len(cards)}")
    return cards


def _cache(path: str | None) -> SupportCache | None:
    return SupportCache(path) if path else report.default_cache()


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")
    else:
        click.echo(text)


class _Group(click.Group):
    """Map library errors onto the documented exit codes."""

    def invoke(self, ctx: click.Context):
        try:
            return super().invoke(ctx)
        except ContradictionError as exc:
            click.echo(f"contradiction: {exc}", err=True)
            for rule, g, h in exc.pairs[:20]:
                click.echo(f"  {rule}: {g} vs {h}", err=True)
            ctx.exit(EXIT_CONTRADICTION)
        except ClassificationError as exc:
            click.echo(f"inconsistent ledger: {exc}", err=True)
            ctx.exit(EXIT_CONTRADICTION)
        except (GraphError, OSError, ValueError) as exc:
            click.echo(f"error: {exc}", err=True)
            ctx.exit(EXIT_VALIDATION)


@click.group(cls=_Group)
@click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
def main(verbose: bool) -> None:
    """Classify latent-variable causal structures (mDAGs) by observational equivalence."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(message)s")


@main.command(name="enumerate")
@click.option("-n", "nodes", type=int, required=True, help="Number of visible nodes.")
@click.option("--out", type=click.Path(dir_okay=False), help="Write one JSON mDAG per line.")
def enumerate_cmd(nodes: int, out: str | None) -> None:
    """Count the mDAGs consistent with the nodal ordering."""
    universe = enumerate_universe(nodes)
    click.echo(len(universe))
    if out:
        with open(out, "w") as fh:
            for g in universe.mdags:
                fh.write(json.dumps(g.to_json()) + "\n")


@main.command()
@click.option("-n", "nodes", type=int, required=True)
@click.option("--rules", default="sd,hlp,weakfm,moderatefm,strongfm", show_default=True)
@click.option("--nondominance", default=",".join(GRAPHICAL_RULES), show_default=True)
@click.option("--cards", default=None, help="Visible cardinalities, default all binary.")
@click.option("--supports-max-events", type=int, default=0, show_default=True)
@click.option("--cache-dir", envvar=report.CACHE_ENV, default=None)
@click.option("--format", "fmt", type=click.Choice(["text", "json", "dot"]), default="text")
@click.option("--out", type=click.Path(dir_okay=False))
@click.option("--threads", type=int, default=1, show_default=True, help="Worker processes for fingerprints.")
def classify(
    nodes: int,
    rules: str,
    nondominance: str,
    cards: str | None,
    supports_max_events: int,
    cache_dir: str | None,
    fmt: str,
    out: str | None,
    threads: int,
) -> None:
    """Run the dominance and nondominance pipeline and report block counts."""
    tier = RuleTier.parse(rules)
    nd = [r.strip() for r in nondominance.split(",") if r.strip()]
    bad = set(nd) - set(GRAPHICAL_RULES)
    if bad:
        raise GraphError(f"unknown nondominance rules {sorted(bad)}")
    card_vec = _cards(cards, nodes) if cards else (2,) * nodes
    partition = proven_equivalences(enumerate_universe(nodes), tier)
    ledger = build_ledger(partition, nd, workers=threads)
    if supports_max_events >= 2:
        support_pass(ledger, card_vec, supports_max_events, cache=_cache(cache_dir))
    if fmt == "json":
        _emit(json.dumps(ledger.to_json(include_nondominance=nodes <= 3), indent=1, sort_keys=True), out)
        return
    if fmt == "dot":
        _emit(to_dot(ledger), out)
        return
    lines = [f"mDAGs: {len(partition.universe)}", f"proven-equivalence blocks ({tier}): {partition.n_blocks}"]
    used: list[str] = []
    for r in nd:
        used.append(r)
        comps, ident = ledger.tier_counts(used)
        lines.append(f"+{r}: {comps} inequivalence blocks, {ident} identified")
    for k, (comps, ident) in sorted(ledger.support_tiers.items()):
        lines.append(f"+supports<={k}: {comps} inequivalence blocks, {ident} identified")
    alg = algebraicness_bounds(ledger)
    lines.append(
        f"nonalgebraic classes >= {alg.nonalgebraic_lower}; algebraic classes <= {alg.algebraic_upper}; "
        f"nonalgebraic fraction >= {alg.nonalgebraic_fraction_lower:.1%}"
    )
    _emit("\n".join(lines), out)


def _verdict(g: MDag, h: MDag, tier: RuleTier, cards: tuple[int, ...], max_events: int) -> tuple[str, list[str]]:
    if g.n != h.n:
        raise GraphError("the two mDAGs have different node counts")
    part = proven_equivalences(enumerate_universe(g.n), tier)
    bg, bh = part.block_of(g), part.block_of(h)
    if bg == bh:
        return "equivalent", ["proven equivalent by dominance rules"]
    g_dom = bool(part.dominance[bg, bh])
    h_dom = bool(part.dominance[bh, bg])
    not_gh: list[str] = []
    not_hg: list[str] = []
    for rule in ("skel", "dsep", "esep", "dc"):
        fg, fh = fingerprint(g, rule), fingerprint(h, rule)
        # separation relations of the dominated side must include the dominating side's
        forward = fg - fh if rule in ("dsep", "esep") else fh - fg
        backward = fh - fg if rule in ("dsep", "esep") else fg - fh
        if forward:
            not_gh.append(rule)
        if backward:
            not_hg.append(rule)
    dg = next((m for m in part.members(bg) if is_directed_edge_free(m)), None)
    dh = next((m for m in part.members(bh) if is_directed_edge_free(m)), None)
    if dg is not None and dh is not None:
        if not structurally_dominates(dg, dh):
            not_gh.append("def")
        if not structurally_dominates(dh, dg):
            not_hg.append("def")
    if max_events >= 2:
        ev = compare_support_profiles(g, h, cards, max_events)
        if ev.not_g_over_h is not None:
            not_gh.append("supports:" + " ".join("".join(map(str, e)) for e in ev.not_g_over_h))
        if ev.not_h_over_g is not None:
            not_hg.append("supports:" + " ".join("".join(map(str, e)) for e in ev.not_h_over_g))
    if (g_dom and not_gh) or (h_dom and not_hg):
        raise ContradictionError("dominance and nondominance both proven", [("compare", g, h)])
    why = [f"A does not dominate B: {', '.join(not_gh)}"] if not_gh else []
    why += [f"B does not dominate A: {', '.join(not_hg)}"] if not_hg else []
    if g_dom:
        why.insert(0, "A dominates B by structural dominance")
        return ("A>B" if not_hg else "unresolved"), why
    if h_dom:
        why.insert(0, "B dominates A by structural dominance")
        return ("B>A" if not_gh else "unresolved"), why
    if not_gh and not_hg:
        return "incomparable", why
    return "unresolved", why


@main.command()
@click.argument("file_a", type=click.Path(exists=True, dir_okay=False))
@click.argument("file_b", type=click.Path(exists=True, dir_okay=False))
@click.option("--rules", default="sd,hlp,weakfm,moderatefm,strongfm", show_default=True)
@click.option("--cards", default=None)
@click.option("--max-events", type=int, default=4, show_default=True)
def compare(file_a: str, file_b: str, rules: str, cards: str | None, max_events: int) -> None:
    """Pairwise verdict between two mDAG files."""
    g, h = load_mdag(file_a), load_mdag(file_b)
    card_vec = _cards(cards, g.n) if cards else (2,) * g.n
    verdict, why = _verdict(g, h, RuleTier.parse(rules), card_vec, max_events)
    click.echo(verdict)
    for line in why:
        click.echo(f"  {line}")


@main.command()
@click.option("--mdag", "mdag_file", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--cards", required=True)
@click.option("--max-events", type=int, default=None)
@click.option("--support", "support_file", type=click.Path(exists=True, dir_okay=False), default=None)
def supports(mdag_file: str, cards: str, max_events: int | None, support_file: str | None) -> None:
    """List realizable and unrealizable supports, or decide one support."""
    g = load_mdag(mdag_file)
    card_vec = _cards(cards, g.n)
    with SupportOracle(g, card_vec) as oracle:
        if support_file:
            with open(support_file) as fh:
                s = parse_support(fh.read())
            w = oracle.witness(s)
            if w is None:
                click.echo("unrealizable")
                return
            click.echo("realizable")
            click.echo(_format_witness(w))
            return
        if max_events is None:
            raise GraphError("give --max-events or --support")
        rels = all_dsep_relations(g)
        for size in range(1, max_events + 1):
            for s in candidate_supports(card_vec, size):
                ok = not (size > 1 and ci_rules_out(rels, s)) and oracle.realizable(s)
                tag = "realizable" if ok else "unrealizable"
                click.echo(f"{tag} " + " ".join(format_support(s).split("\n")))


def _format_witness(w) -> str:
    lines = [f"latent cardinalities: {list(w.latent_cards)}"]
    for v, table in enumerate(w.tables):
        lines.append(f"node {v}: visible parents {list(w.vis_parents[v])}, latent parents {list(w.lat_parents[v])}")
        for ctx in sorted(table):
            lines.append(f"  {ctx} -> {table[ctx]}")
    return "\n".join(lines)


@main.command()
@click.argument("ledger_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--format", "fmt", type=click.Choice(["dot", "json"]), default="dot")
def export(ledger_file: str, fmt: str) -> None:
    """Emit the Hasse diagram of a ledger written by ``classify --format json``."""
    with open(ledger_file) as fh:
        data = json.load(fh)
    blocks = data.get("blocks") or []
    if not blocks:
        raise GraphError("ledger holds no blocks")
    edges = data.get("dominance", [])
    if fmt == "json":
        click.echo(json.dumps({"nodes": [b["id"] for b in blocks], "edges": edges}, indent=1))
        return
    lines = ["digraph dominance {", "  rankdir=TB;"]
    for b in blocks:
        g = MDag.build(data["n"], [tuple(e) for e in b["members"][0]["edges"]], b["members"][0]["facets"])
        lines.append(f'  b{b["id"]} [label="{g}"];')
    lines += [f"  b{i} -> b{j};" for i, j in edges]
    lines.append("}")
    click.echo("\n".join(lines))


@main.command(name="report")
@click.argument("name", type=click.Choice(["table1", "table2", "table3", "table4", "table5"]))
@click.option("--max-events", type=int, default=4, show_default=True)
@click.option("--cache-dir", envvar=report.CACHE_ENV, default=None)
def report_cmd(name: str, max_events: int, cache_dir: str | None) -> None:
    """Reproduce one of the block-count tables with a pass/fail column."""
    rows = report.table(name, max_events=max_events, cache=_cache(cache_dir))
    click.echo(report.format_rows(rows))
    if any(r.status == "FAIL" for r in rows):
        sys.exit(1)


@main.command(name="order")
@click.option("-n", "nodes", type=int, required=True)
@click.option("--supports-max-events", type=int, default=4, show_default=True)
def order_cmd(nodes: int, supports_max_events: int) -> None:
    """Print the Hasse diagram with nondominance provenance as JSON."""
    ledger = build_ledger(proven_equivalences(enumerate_universe(nodes)))
    if supports_max_events >= 2:
        support_pass(ledger, (2,) * nodes, supports_max_events)
    click.echo(json.dumps(partial_order_report(ledger), indent=1))


if __name__ == "__main__":
    main()
