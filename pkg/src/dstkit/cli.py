"""Command-line entry point: preprocess, decode, evaluate, stats, compare.

Every command is deterministic given its flags; rerunning preprocess on the
same inputs produces a byte-identical examples file (the printed content hash
makes that checkable). Exit codes: 0 success, 1 evaluation mismatch, 2 input
error, 3 backend error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import corpus as corpus_mod
from . import decoders as dec
from . import evalkit
from . import prompting
from . import schema as schema_mod
from . import state as state_mod
from .corpus import CorpusError
from .schema import DescriptionConfig, SchemaError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_EVAL = 1
EXIT_INPUT = 2
EXIT_BACKEND = 3


@dataclass
class RunConfig:
    dataset: str = "custom"
    schema_path: str | None = None
    dialogues_path: str | None = None
    mode: prompting.Mode = prompting.Mode.INDEPENDENT
    use_domain_desc: bool = False
    use_slot_desc: bool = False
    use_value_list: bool = False
    seed: int = 0
    backend: str = "oracle"
    endpoint: str | None = None
    match_mode: evalkit.MatchMode = evalkit.MatchMode.EXACT
    excluded_domains: list[str] = field(default_factory=list)
    desc_table: str | None = None
    m2m_domain: str | None = None

    @property
    def desc_config(self) -> DescriptionConfig:
        return DescriptionConfig(
            use_domain_desc=self.use_domain_desc,
            use_slot_desc=self.use_slot_desc,
            use_value_list=self.use_value_list,
            sampling_seed=self.seed,
        )


def _add_common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dataset", choices=schema_mod.PROVENANCE_TAGS, default="custom")
    p.add_argument("--schema", dest="schema_path", help="SGD-format schema file")
    p.add_argument("--dialogues", dest="dialogues_path", help="dialogue JSON file or directory")
    p.add_argument("--mode", choices=[m.value for m in prompting.Mode], default="independent")
    p.add_argument(
        "--desc",
        default="",
        help="comma list out of {domain,slot,values}; empty for names-only prompts",
    )
    p.add_argument("--seed", type=int, default=0, help="description sampling seed")
    p.add_argument("--backend", choices=["oracle", "extractive", "remote"], default="oracle")
    p.add_argument("--endpoint", default=None, help="remote backend address (or DSTKIT_ENDPOINT)")
    p.add_argument("--match-mode", choices=[m.value for m in evalkit.MatchMode], default="exact")
    p.add_argument(
        "--exclude",
        default="police,hospital",
        help="comma list of domains to drop from the schema (default: police,hospital)",
    )
    p.add_argument("--desc-table", default=None, help="TSV with candidate descriptions (domain, slot, description)")
    p.add_argument("--m2m-domain", default=None, help="domain name for M2M native-format imports")


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    desc_parts = {p.strip() for p in args.desc.split(",") if p.strip()}
    unknown = desc_parts - {"domain", "slot", "values"}
    if unknown:
        raise SchemaError(f"--desc: unknown parts {sorted(unknown)} (expected domain,slot,values)")
    return RunConfig(
        dataset=args.dataset,
        schema_path=args.schema_path,
        dialogues_path=args.dialogues_path,
        mode=prompting.Mode(args.mode),
        use_domain_desc="domain" in desc_parts,
        use_slot_desc="slot" in desc_parts,
        use_value_list="values" in desc_parts,
        seed=args.seed,
        backend=args.backend,
        endpoint=args.endpoint or os.environ.get("DSTKIT_ENDPOINT"),
        match_mode=evalkit.MatchMode(args.match_mode),
        excluded_domains=[d.strip() for d in args.exclude.split(",") if d.strip()],
        desc_table=args.desc_table,
        m2m_domain=args.m2m_domain,
    )


def _load_schema(cfg: RunConfig) -> schema_mod.Schema:
    if not cfg.schema_path:
        raise SchemaError("--schema is required")
    schema = schema_mod.parse_schema(cfg.schema_path, cfg.dataset)
    schema = schema_mod.filter_domains(schema, cfg.excluded_domains)
    if cfg.desc_table:
        overrides = schema_mod.load_description_table(cfg.desc_table)
        # Rows for domains the user excluded are expected; drop them quietly.
        overrides = {
            k: v for k, v in overrides.items() if k[0] not in set(cfg.excluded_domains)
        }
        schema = schema_mod.resolve_descriptions(schema, overrides, cfg.desc_config)
    return schema


def _load_dialogues(cfg: RunConfig, schema: schema_mod.Schema) -> list[corpus_mod.Dialogue]:
    if not cfg.dialogues_path:
        raise CorpusError("--dialogues is required")
    if cfg.dataset == "m2m":
        return corpus_mod.parse_m2m_dialogues(cfg.dialogues_path, schema, cfg.m2m_domain)
    return corpus_mod.parse_dialogues(cfg.dialogues_path, schema)


def _file_sha256(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


# -- commands --------------------------------------------------------------


def cmd_preprocess(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    schema = _load_schema(cfg)
    dialogues = _load_dialogues(cfg, schema)
    tokens = prompting.SegmentTokens()

    collisions = prompting.find_token_collisions(dialogues, tokens)
    if collisions:
        shown = ", ".join(f"{d}[{i}] contains {t!r}" for d, i, t in collisions[:5])
        raise CorpusError(f"segment tokens occur inside {len(collisions)} utterances: {shown}")

    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    stream = prompting.expand_examples(dialogues, schema, cfg.mode, tokens, cfg.desc_config)
    with open(out_path, "w", encoding="utf-8") as fh:
        count = prompting.write_examples(stream, fh)
    print(f"examples: {count}")
    print(f"sha256: {_file_sha256(out_path)}")
    return EXIT_OK


def _build_backend(cfg: RunConfig, examples, args: argparse.Namespace) -> dec.Backend:
    if cfg.backend == "oracle":
        return dec.OracleBackend({ex.key: ex.target_text for ex in examples})
    if cfg.backend == "extractive":
        schema = _load_schema(cfg)
        gazetteer = None
        if args.gazetteer_from:
            train = corpus_mod.parse_dialogues(args.gazetteer_from, schema)
            gazetteer = dec.build_gazetteer(train, schema)
        return dec.ExtractiveBackend(schema, gazetteer=gazetteer)
    if not cfg.endpoint:
        raise dec.BackendError("remote backend needs --endpoint or DSTKIT_ENDPOINT")
    return dec.RemoteBackend(cfg.endpoint, max_in_flight=args.max_in_flight)


def cmd_decode(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    examples = prompting.read_examples(args.examples)
    if not examples:
        raise CorpusError(f"{args.examples}: no examples")
    backend = _build_backend(cfg, examples, args)

    journal_path = Path(args.journal or (args.out + ".journal"))
    done: dict[str, str] = {}
    if journal_path.exists():
        with open(journal_path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    rec = json.loads(line)
                    done[rec["id"]] = rec["output"]
        logger.info("journal %s: resuming with %d completed requests", journal_path, len(done))

    pending = [ex for ex in examples if ex.key not in done]
    journal_path.parent.mkdir(parents=True, exist_ok=True)
    with open(journal_path, "a", encoding="utf-8") as jf:
        for start in range(0, len(pending), args.batch_size):
            batch = pending[start : start + args.batch_size]
            requests_ = [
                dec.DecodeRequest(ex.key, ex.input_text, args.max_output_tokens) for ex in batch
            ]
            responses = dec.decode_batch(backend, requests_)
            for resp in responses:
                jf.write(json.dumps({"id": resp.request_id, "output": resp.output_text}, ensure_ascii=False) + "\n")
                done[resp.request_id] = resp.output_text
            jf.flush()

    mode = examples[0].mode
    paired = [(ex, done[ex.key]) for ex in examples]
    schema = _load_schema(cfg)
    if mode is prompting.Mode.INDEPENDENT:
        predictions = state_mod.assemble_independent(paired, schema)
    else:
        predictions = state_mod.assemble_sequential(paired, schema)

    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", encoding="utf-8") as fh:
        rows = state_mod.write_predictions(predictions, fh)
    malformed = sum(p.malformed_segments for p in predictions)
    print(f"turns: {len(predictions)}")
    print(f"rows: {rows}")
    if mode is prompting.Mode.SEQUENTIAL:
        print(f"malformed segments: {malformed}")
    print(f"sha256: {_file_sha256(out_path)}")
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    schema = _load_schema(cfg)
    dialogues = _load_dialogues(cfg, schema)
    predictions = state_mod.read_predictions(args.predictions)
    options = evalkit.EvalOptions(match_mode=cfg.match_mode)
    run = evalkit.evaluate_run(
        predictions,
        dialogues,
        schema,
        options,
        metadata={
            "schema_hash": schema_mod.schema_hash(schema),
            "predictions_hash": _file_sha256(args.predictions),
            "match_mode": cfg.match_mode.value,
            "fuzzy": "difflib ratio >= 0.95 (non-categorical only)",
            "dataset": cfg.dataset,
        },
    )
    if args.out:
        evalkit.write_run(run, args.out)
    print(evalkit.summary_table(run.report))
    print(f"JGA: {100 * run.report.jga:.2f}%")
    return EXIT_OK


def cmd_stats(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    unfiltered = schema_mod.parse_schema(cfg.schema_path, cfg.dataset) if cfg.schema_path else None
    schema = _load_schema(cfg)
    dialogues = _load_dialogues(cfg, schema)
    stats = corpus_mod.corpus_stats(dialogues)
    print(f"dialogues: {stats.num_dialogues}")
    print(f"total turns: {stats.num_turns}")
    print(f"user turns: {stats.num_user_turns}")
    print(f"avg turns per dialogue: {stats.avg_turns_per_dialogue:.2f}")
    print(f"avg tokens per turn ({stats.tokenizer}): {stats.avg_tokens_per_turn:.2f}")
    print(f"domains: {len(schema.domains)}")
    print(f"categorical slots: {schema.num_categorical}")
    print(f"non-categorical slots: {schema.num_noncategorical}")
    if unfiltered is not None and len(unfiltered.domains) != len(schema.domains):
        print(f"domains (unfiltered): {len(unfiltered.domains)}")
        print(f"categorical slots (unfiltered): {unfiltered.num_categorical}")
        print(f"non-categorical slots (unfiltered): {unfiltered.num_noncategorical}")
    return EXIT_OK


def cmd_compare(args: argparse.Namespace) -> int:
    run_a = evalkit.read_run(args.run_a)
    run_b = evalkit.read_run(args.run_b)
    diff = evalkit.compare_runs(run_a, run_b)
    text = evalkit.render_diff(diff, label_a=Path(args.run_a).stem, label_b=Path(args.run_b).stem)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    print(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dstkit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="serialize a corpus into a prompt examples file")
    _add_common_flags(p)
    p.add_argument("--out", required=True, help="examples file to write (one JSON record per line)")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("decode", help="run an examples file through a decoder backend")
    _add_common_flags(p)
    p.add_argument("--examples", required=True)
    p.add_argument("--out", required=True, help="predictions file to write")
    p.add_argument("--journal", default=None, help="completed-request journal (default: <out>.journal)")
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--max-in-flight", type=int, default=8)
    p.add_argument("--max-output-tokens", type=int, default=64)
    p.add_argument("--gazetteer-from", default=None, help="training dialogues for the extractive gazetteer")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("evaluate", help="score a predictions file against gold states")
    _add_common_flags(p)
    p.add_argument("--predictions", required=True)
    p.add_argument("--out", default=None, help="structured report JSON to write")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("stats", help="corpus and schema statistics")
    _add_common_flags(p)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("compare", help="diff two evaluation runs turn by turn")
    p.add_argument("--run-a", required=True)
    p.add_argument("--run-b", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_compare)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=os.environ.get("DSTKIT_LOGLEVEL", "WARNING"))
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except evalkit.EvalMismatchError as exc:
        print(f"evaluation error: {exc}", file=sys.stderr)
        return EXIT_EVAL
    except dec.BackendError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except (SchemaError, CorpusError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
