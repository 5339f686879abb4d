"""Operator command line: corpus mining, tokenizer/model training,
perplexity, static evaluation, scoring, correlation, a terminal chat
REPL, and the HTTP service."""

from __future__ import annotations

import json
import sys
from typing import List, Optional

import click

from . import dataset, harness, metrics
from .decoding import DecodingConfig
from .lm import EOS, NGramLm, Vocab, train_ngram, uniform_lm
from .repetition import RepetitionConfig


def _fail(code: str, message: str) -> None:
    click.echo(f"error: {code}: {message}", err=True)
    sys.exit(1)


def _read_lines(path: str) -> List[str]:
    with open(path, "r", encoding="utf-8") as f:
        return f.readlines()


def _load_bot(model: Optional[str], seed: int, temperature: float, top_k: Optional[int],
              n: int, max_tokens: int, rep_mode: str, rep_min_tokens: int,
              rep_min_fraction: float) -> harness.BotInterface:
    if model is None:
        return harness.GenericBot()
    lm = NGramLm.load(model)
    return harness.LmBot(
        lm,
        decoding=DecodingConfig(
            temperature=temperature,
            top_k=top_k,
            num_samples=n,
            max_response_tokens=max_tokens,
            rng_seed=seed,
        ),
        repetition=RepetitionConfig(
            mode=rep_mode, min_tokens=rep_min_tokens, min_fraction=rep_min_fraction
        ),
    )


def _bot_options(f):
    for opt in reversed(
        [
            click.option("--model", type=click.Path(exists=True), default=None,
                         help="n-gram model file; omit for the generic bot"),
            click.option("--seed", type=int, default=0, show_default=True),
            click.option("--temperature", type=float, default=1.0, show_default=True),
            click.option("--top-k", type=int, default=None),
            click.option("--n", type=int, default=20, show_default=True,
                         help="samples per reply"),
            click.option("--max-tokens", type=int, default=32, show_default=True),
            click.option("--rep-mode", type=click.Choice(["contiguous", "subsequence"]),
                         default="contiguous", show_default=True),
            click.option("--rep-min-tokens", type=int, default=3, show_default=True),
            click.option("--rep-min-fraction", type=float, default=0.5, show_default=True),
        ]
    ):
        f = opt(f)
    return f


@click.group()
def main():
    """Conversational decoding and evaluation toolkit."""


@main.command()
@click.option("--input", "input_path", required=True, type=click.Path(exists=True),
              help="message forest, one tab-separated message per line")
@click.option("--pairs-out", required=True, type=click.Path())
@click.option("--report-out", required=True, type=click.Path())
@click.option("--bpe-model", type=click.Path(exists=True), default=None,
              help="BPE model for subword counting; default splits on whitespace")
def mine(input_path, pairs_out, report_out, bpe_model):
    """Extract filtered (context, response) pairs from message trees."""
    try:
        trees = dataset.read_forest(_read_lines(input_path))
    except ValueError as exc:
        _fail("malformed_input", str(exc))
    if bpe_model:
        bpe = dataset.BpeModel.load(bpe_model)
        tokenizer = lambda text: dataset.bpe_encode(bpe, text)
    else:
        tokenizer = str.split
    pairs, removals = dataset.mine_forest(trees, dataset.FilterConfig(), tokenizer)
    with open(pairs_out, "w", encoding="utf-8") as f:
        for pair in pairs:
            f.write(dataset.format_pair_line(pair) + "\n")
    with open(report_out, "w", encoding="utf-8") as f:
        for mid, rule in removals:
            f.write(f"{dataset.escape_field(mid)}\t{rule}\n")
    click.echo(f"pairs={len(pairs)} removed={len(removals)} trees={len(trees)}")


@main.command("bpe-train")
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--vocab-size", required=True, type=int)
@click.option("--out", required=True, type=click.Path())
def bpe_train_cmd(input_path, vocab_size, out):
    """Learn a byte-pair-encoding tokenizer from a text file."""
    corpus = [ln.rstrip("\n") for ln in _read_lines(input_path) if ln.strip()]
    try:
        model = dataset.bpe_train(corpus, vocab_size)
    except ValueError as exc:
        _fail("bpe_train_failed", str(exc))
    model.save(out)
    click.echo(f"chars={len(model.chars)} merges={len(model.merges)}")


@main.command("train-lm")
@click.option("--input", "input_path", required=True, type=click.Path(exists=True),
              help="one whitespace-tokenized sequence per line (mine output works)")
@click.option("--order", type=int, default=2, show_default=True)
@click.option("--delta", type=float, default=0.1, show_default=True)
@click.option("--out", required=True, type=click.Path())
@click.option("--append-eos/--no-append-eos", default=True, show_default=True)
def train_lm(input_path, order, delta, out, append_eos):
    """Train a word-level smoothed n-gram model."""
    corpus = [ln.split() for ln in _read_lines(input_path) if ln.strip()]
    if append_eos:
        corpus = [seq + [EOS] for seq in corpus]
    try:
        model = train_ngram(corpus, order, delta)
    except ValueError as exc:
        _fail("train_failed", str(exc))
    model.save(out)
    click.echo(f"vocab={len(model.vocab)} order={model.order}")


@main.command()
@click.option("--model", "model_path", type=click.Path(exists=True), default=None,
              help="n-gram model file; omit with --uniform-vocab for a uniform model")
@click.option("--uniform-vocab", type=int, default=None,
              help="evaluate a uniform model over this many total tokens")
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
def ppl(model_path, uniform_vocab, input_path):
    """Perplexity of a model on a whitespace-tokenized test file."""
    if (model_path is None) == (uniform_vocab is None):
        raise click.UsageError("pass exactly one of --model / --uniform-vocab")
    if model_path:
        model = NGramLm.load(model_path)
    else:
        extra = max(0, uniform_vocab - 4)  # 4 reserved tokens
        model = uniform_lm(Vocab(f"w{i}" for i in range(extra)))
    seqs = [
        model.vocab.encode(ln.split()) for ln in _read_lines(input_path) if ln.strip()
    ]
    try:
        value = metrics.perplexity(model, seqs)
    except ValueError as exc:
        _fail("ppl_failed", str(exc))
    click.echo(repr(value))


@main.command("eval-static")
@click.option("--contexts", "contexts_path", required=True, type=click.Path(exists=True),
              help="one JSON array of 1-3 turns per line")
@click.option("--out", required=True, type=click.Path())
@_bot_options
def eval_static(contexts_path, out, model, seed, temperature, top_k, n, max_tokens,
                rep_mode, rep_min_tokens, rep_min_fraction):
    """Run a bot over fixed contexts and write its responses."""
    try:
        contexts = harness.load_mtb(_read_lines(contexts_path))
    except (ValueError, json.JSONDecodeError) as exc:
        _fail("malformed_contexts", str(exc))
    bot = _load_bot(model, seed, temperature, top_k, n, max_tokens,
                    rep_mode, rep_min_tokens, rep_min_fraction)
    try:
        results = harness.run_static_eval(bot, contexts)
    except RuntimeError as exc:
        _fail("bot_failed", str(exc))
    with open(out, "w", encoding="utf-8") as f:
        for ctx, response in results:
            f.write(json.dumps({"context": list(ctx.turns), "response": response}) + "\n")
    counts = harness.mtb_turn_counts(contexts)
    click.echo(f"contexts 1-turn={counts[1]} 2-turn={counts[2]} 3-turn={counts[3]}")


@main.command()
@click.option("--labels", "labels_path", required=True, type=click.Path(exists=True))
def score(labels_path):
    """Aggregate a label file into sensibleness/specificity/SSA."""
    try:
        records = metrics.read_label_records(_read_lines(labels_path))
        result = metrics.aggregate(metrics.labels_to_turns(records))
    except ValueError as exc:
        _fail("score_failed", str(exc))
    click.echo(f"turns {result.n_turns}")
    click.echo(f"sensibleness {result.sensibleness * 100:.1f}%")
    click.echo(f"specificity {result.specificity * 100:.1f}%")
    click.echo(f"ssa {result.ssa * 100:.1f}%")


@main.command()
@click.option("--input", "input_path", required=True, type=click.Path(exists=True),
              help="lines: config id \\t perplexity \\t labels file path")
def correlate(input_path):
    """Fit SSA against perplexity across model configurations."""
    xs, ys = [], []
    for ln in _read_lines(input_path):
        if not ln.strip():
            continue
        parts = ln.rstrip("\n").split("\t")
        if len(parts) != 3:
            _fail("malformed_input", "expected config \\t perplexity \\t labels file")
        _, ppl_str, labels_path = parts
        try:
            records = metrics.read_label_records(_read_lines(labels_path))
            result = metrics.aggregate(metrics.labels_to_turns(records))
        except (OSError, ValueError) as exc:
            _fail("score_failed", str(exc))
        xs.append(float(ppl_str))
        ys.append(result.ssa)
    try:
        fit = metrics.fit_line(xs, ys)
    except ValueError as exc:
        _fail("fit_failed", str(exc))
    click.echo(f"slope {fit.slope!r}")
    click.echo(f"intercept {fit.intercept!r}")
    click.echo(f"r_squared {fit.r_squared!r}")


@main.command()
@_bot_options
def chat(model, seed, temperature, top_k, n, max_tokens,
         rep_mode, rep_min_tokens, rep_min_fraction):
    """Terminal chat against a bot, honoring the session protocol.

    Type /finish to end the session (legal between 14 and 28 turns).
    """
    bot = _load_bot(model, seed, temperature, top_k, n, max_tokens,
                    rep_mode, rep_min_tokens, rep_min_fraction)
    record = harness.new_session("cli", {"model": model or "generic"})
    click.echo(f"bot: {record.turns[0][1]}")
    while record.status == "active":
        try:
            line = click.prompt("you", prompt_suffix="> ")
        except (EOFError, click.Abort):
            break
        if line.strip() == "/finish":
            # the CLI labels are not collected; mark bot turns as labeled
            for i, (sp, _) in enumerate(record.turns):
                if sp == "bot":
                    record.labels.setdefault(i, {})["cli"] = (True, True)
            try:
                harness.session_step(record, {"type": "finish"})
                click.echo("session complete")
            except harness.ProtocolError as exc:
                click.echo(f"cannot finish: {exc.code} ({exc.detail})")
            continue
        try:
            harness.session_step(record, {"type": "user_turn", "text": line})
        except harness.ProtocolError as exc:
            click.echo(f"rejected: {exc.code} ({exc.detail})")
            continue
        if len(record.turns) >= harness.MAX_TURNS:
            click.echo("turn limit reached; type /finish")
            continue
        reply = bot.reply([tx for _, tx in record.turns])
        harness.session_step(record, {"type": "bot_turn", "text": reply})
        click.echo(f"bot: {reply}")


@main.command()
@click.option("--store", required=True, type=click.Path(),
              help="append-only event log file")
@click.option("--lm", "lm_specs", multiple=True, metavar="NAME=PATH",
              help="register an n-gram model under NAME")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
def serve(store, lm_specs, host, port):
    """Start the HTTP evaluation service."""
    import uvicorn

    from .service import create_app

    models = {}
    for spec in lm_specs:
        if "=" not in spec:
            raise click.UsageError(f"--lm expects NAME=PATH, got {spec!r}")
        name, path = spec.split("=", 1)
        models[name] = NGramLm.load(path)
    uvicorn.run(create_app(store, models), host=host, port=port)


if __name__ == "__main__":
    main()
