"""
TCMN 命令行入口

    python tcmn.py generate-synth --spec config/synth_overfit.json --out data/synth
    python tcmn.py train --manifest data/synth/manifest.json --stream rgb,flow --out runs/rgb_flow
    python tcmn.py score --manifest data/synth/manifest.json --checkpoint runs/rgb_flow/checkpoint.tcmn \
        --split val --out runs/rgb_flow/val.bin
    python tcmn.py fuse --scores a.bin b.bin c.bin d.bin --val-manifest data/synth/manifest.json --out weights.json
    python tcmn.py eval --scores fused.bin --manifest data/synth/manifest.json --per-category
    python tcmn.py grad-check --seed 7

退出码：0 成功，1 用法错误，2 数据/配置错误，3 数值错误。
"""

import argparse
import json
import logging
import logging.config
import os
import sys
from typing import Dict, List, Optional, Sequence

import numpy as np

from modules.app_config import load_app_config
from modules.data import SyntheticSpec, generate_synthetic, load_dataset
from modules.ensemble import (
    EnsembleWeights,
    grid_search_weights,
    late_fusion,
    parse_streams,
    read_score_file,
    read_weights,
    write_score_file,
    write_weights,
)
from modules.errors import ConfigError, DataError, NumericError, TCMNError
from modules.evaluation import (
    Prediction,
    evaluate,
    frequency_prior,
    get_evaluation_config,
    rank_main_segments,
    render_table,
)
from modules.language.tree_attention import COMPONENTS
from modules.matching import top_pairs
from modules.training import (
    STREAM_PAIRS,
    LossConfig,
    ModelConfig,
    StreamConfig,
    TCMNModel,
    get_model_config,
    run_grad_check,
    score_examples,
    stream_key,
    train_stream,
)
from modules.training.trainer import SegmentFeatureCache
from modules.treebank import parse_bracketed, serialize
from modules.video import enumerate_segments

logger = logging.getLogger("tcmn")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


def setup_logging(level: str = "INFO", log_dir: Optional[str] = None) -> None:
    """控制台 + 按天轮转的文件日志；时间戳只出现在日志里"""
    log_dir = os.getenv("TCMN_LOG_DIR", log_dir or "logs")
    os.makedirs(log_dir, exist_ok=True)
    level = level.upper()
    logging.config.dictConfig({
        'version': 1,
        'disable_existing_loggers': False,
        'formatters': {
            'standard': {
                'format': '%(asctime)s - %(levelname)s - %(name)s - %(message)s',
            },
        },
        'handlers': {
            'console': {
                'class': 'logging.StreamHandler',
                'level': level,
                'formatter': 'standard',
            },
            'file': {
                'class': 'logging.handlers.TimedRotatingFileHandler',
                'level': level,
                'formatter': 'standard',
                'filename': os.path.join(log_dir, 'tcmn.log'),
                'when': 'midnight',
                'interval': 1,
                'backupCount': 3,
                'encoding': 'utf-8',
            },
        },
        'root': {
            'level': level,
            'handlers': ['console', 'file'],
        },
    })


class UsageError(Exception):
    """命令行用法错误（退出码 1）"""


class TCMNArgumentParser(argparse.ArgumentParser):
    """argparse 默认以 2 退出，与数据错误冲突，这里改为抛出 UsageError"""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


# ============================================================================
# 子命令
# ============================================================================


def cmd_generate_synth(args, app_config: dict) -> int:
    spec = SyntheticSpec.from_file(args.spec)
    if args.seed is not None:
        spec.seed = args.seed
    manifest = generate_synthetic(spec, args.out)
    print(manifest)
    return EXIT_OK


def _stream_config(args, app_config: dict) -> StreamConfig:
    stream = StreamConfig.from_app_config(app_config, args.stream)
    for name in ("hidden_size", "epochs", "seed", "lr", "weight_decay"):
        value = getattr(args, name)
        if value is not None:
            setattr(stream, name, value)
    stream.validate()
    return stream


def _model_config(args, app_config: dict) -> ModelConfig:
    config = get_model_config(app_config)
    if args.label_dim is not None:
        config.label_dim = args.label_dim
    if args.no_segment_attention:
        config.segment_attention = False
    if args.no_relationship:
        config.relationship_module = False
    config.validate()
    return config


def _loss_config(args, app_config: dict) -> LossConfig:
    config = LossConfig.from_app_config(app_config)
    if args.margin_main is not None:
        config.margin_main = args.margin_main
    if args.margin_context is not None:
        config.margin_context = args.margin_context
    if args.loss_weight is not None:
        config.weight = args.loss_weight
    config.validate()
    return config


def cmd_train(args, app_config: dict) -> int:
    stream = _stream_config(args, app_config)
    model_config = _model_config(args, app_config)
    loss_config = _loss_config(args, app_config)
    bundle = load_dataset(args.manifest, split="train")
    result = train_stream(bundle.examples, bundle.features, bundle.embeddings, stream, model_config, loss_config)
    checkpoint = result.model.save(args.out)
    result.run.save(args.out)
    final = result.run.final_loss
    loss_text = f"{final:.6f}" if final is not None else "n/a"
    print(f"{stream.key}: final loss {loss_text}, checkpoint {checkpoint}")
    return EXIT_OK


def cmd_score(args, app_config: dict) -> int:
    model = TCMNModel.load(args.checkpoint)
    bundle = load_dataset(args.manifest, split=args.split)
    matrices = score_examples(model, bundle.examples, bundle.features)
    write_score_file(args.out, matrices)
    logger.info(f"Wrote {len(matrices)} {model.stream.key} score matrices to {args.out}")
    return EXIT_OK


def cmd_fuse(args, app_config: dict) -> int:
    step = args.step if args.step is not None else get_evaluation_config(app_config).grid_step
    streams = parse_streams(args.streams) if args.streams else list(STREAM_PAIRS[:len(args.scores)])
    if len(streams) != len(args.scores):
        raise UsageError(f"{len(args.scores)} score files for {len(streams)} streams")
    if len(set(streams)) != len(streams):
        raise ConfigError("each stream may appear only once")

    stream_scores = {stream: read_score_file(path) for stream, path in zip(streams, args.scores)}
    bundle = load_dataset(args.val_manifest, split="val")
    weights = grid_search_weights(stream_scores, bundle.ground_truths(), step=step)
    write_weights(args.out, weights)
    print(json.dumps(weights.to_dict()))

    if args.test_scores:
        if not args.fused_out:
            raise UsageError("--test-scores needs --fused-out")
        if len(args.test_scores) != len(streams):
            raise UsageError(f"{len(args.test_scores)} test score files for {len(streams)} streams")
        _write_fused(dict(zip(streams, args.test_scores)), weights, args.fused_out)
    return EXIT_OK


def _write_fused(paths, weights: EnsembleWeights, out_path: str) -> None:
    tables = {stream: read_score_file(path) for stream, path in paths.items()}
    query_ids = list(next(iter(tables.values())))
    fused = {}
    for query_id in query_ids:
        matrices = {}
        for stream, table in tables.items():
            if query_id not in table:
                raise DataError(f"query {query_id}: no {stream_key(*stream)} scores")
            matrices[stream] = table[query_id]
        fused[query_id] = late_fusion(matrices, weights)
    write_score_file(out_path, fused)
    logger.info(f"Wrote {len(fused)} fused score matrices to {out_path}")


def cmd_apply_weights(args, app_config: dict) -> int:
    weights = read_weights(args.weights)
    streams = parse_streams(args.streams) if args.streams else list(STREAM_PAIRS[:len(args.scores)])
    if len(streams) != len(args.scores):
        raise UsageError(f"{len(args.scores)} score files for {len(streams)} streams")
    _write_fused(dict(zip(streams, args.scores)), weights, args.out)
    return EXIT_OK


def _score_predictions(scores: Dict[str, np.ndarray], examples, bundle) -> List[Prediction]:
    predictions = []
    for example in examples:
        if example.query_id not in scores:
            raise DataError(f"query {example.query_id}: no scores")
        segments = enumerate_segments(bundle.num_clips(example.video))
        ranked = [segments[i] for i in rank_main_segments(scores[example.query_id])]
        predictions.append(Prediction(example.query_id, example.category, ranked, segments[example.p]))
    return predictions


def _prior_predictions(bundle, examples) -> List[Prediction]:
    train_truths = [bundle.segment_of(e) for e in bundle.split("train")]
    if not train_truths:
        raise DataError("frequency prior needs a train split in the manifest")
    predictions = []
    for example in examples:
        segments = enumerate_segments(bundle.num_clips(example.video))
        ranking = frequency_prior([s for s in train_truths if s[1] < segments.num_clips], segments)
        predictions.append(Prediction(example.query_id, example.category,
                                      [segments[i] for i in ranking], segments[example.p]))
    return predictions


def cmd_eval(args, app_config: dict) -> int:
    if not args.scores and not args.frequency_prior:
        raise UsageError("eval needs --scores and/or --frequency-prior")
    bundle = load_dataset(args.manifest)
    examples = bundle.split(args.split)
    if not examples:
        raise DataError(f"no examples in split {args.split!r}", path=args.manifest)

    results = []
    if args.frequency_prior:
        results.append(("Prior", evaluate(_prior_predictions(bundle, examples))))
    if args.scores:
        scores = read_score_file(args.scores)
        results.append((args.label, evaluate(_score_predictions(scores, examples, bundle))))

    print(render_table(results, per_category=args.per_category))
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump({label: report.to_dict() for label, report in results}, fh, indent=2)
            fh.write("\n")
    return EXIT_OK


def _find_video(bundle, video: str):
    if video not in bundle.features:
        raise DataError(f"unknown video {video!r}", path=bundle.manifest_path)
    return video


def _forward(model: TCMNModel, tree, video: str, bundle):
    cache = SegmentFeatureCache(bundle.features)
    main, context = model.stream.pair
    segments = cache.segments(video)
    output = model.forward(tree, cache.table(video, main), cache.table(video, context), segments)
    return output, segments


def _pair_records(output, segments, k: int) -> List[dict]:
    s = output.matrix()
    s_loc = np.asarray(output.localization.s_loc.value, dtype=np.float64)
    s_rel = np.asarray(output.s_rel.value, dtype=np.float64) if output.s_rel is not None else None
    records = []
    for i, j in top_pairs(s, k):
        records.append({
            "i": i,
            "j": j,
            "main": list(segments[i]),
            "context": list(segments[j]),
            "s_loc": float(s_loc[i, j]),
            "s_rel": float(s_rel[i, j]) if s_rel is not None else None,
            "s": float(s[i, j]),
        })
    return records


def cmd_predict(args, app_config: dict) -> int:
    evaluation = get_evaluation_config(app_config)
    model = TCMNModel.load(args.checkpoint)
    bundle = load_dataset(args.manifest)
    tree = parse_bracketed(args.query_tree)
    output, segments = _forward(model, tree, _find_video(bundle, args.video), bundle)
    for rank, record in enumerate(_pair_records(output, segments, args.top or evaluation.top_pairs), start=1):
        print(f"{rank}\t({record['i']},{record['j']})\tmain={record['main']}\t"
              f"context={record['context']}\ts={record['s']:.6f}")
    return EXIT_OK


def cmd_inspect_attention(args, app_config: dict) -> int:
    evaluation = get_evaluation_config(app_config)
    threshold = args.threshold if args.threshold is not None else evaluation.attention_threshold
    model = TCMNModel.load(args.checkpoint)
    bundle = load_dataset(args.manifest)
    matches = [e for e in bundle.examples if e.query_id == args.query_id]
    if not matches:
        raise DataError(f"unknown query id {args.query_id!r}", path=args.manifest)
    example = matches[0]
    output, segments = _forward(model, example.tree, example.video, bundle)

    attention = {n: output.phrases.node_attention(n) for n in COMPONENTS}
    nodes = [
        {
            "id": node.node_id,
            "label": node.label,
            "token": node.token,
            "attention": {n: float(attention[n][node.node_id]) for n in COMPONENTS},
        }
        for node in example.tree.nodes
    ]
    alpha_m = output.localization.alpha_m.value[:, 0]
    alpha_c = output.localization.alpha_c.value[:, 0]
    payload = {
        "query_id": example.query_id,
        "video": example.video,
        "category": example.category.value,
        "stream": model.stream.key,
        "tree": serialize(example.tree),
        "nodes": nodes,
        "highlighted": {
            n: [node["id"] for node in nodes if node["attention"][n] >= threshold] for n in COMPONENTS
        },
        "threshold": threshold,
        "segments": [
            {"segment": list(segment), "alpha_m": float(alpha_m[i]), "alpha_c": float(alpha_c[i])}
            for i, segment in enumerate(segments.segments)
        ],
        "top_pairs": _pair_records(output, segments, evaluation.top_pairs),
    }
    directory = os.path.dirname(args.out)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    logger.info(f"Wrote attention for query {example.query_id} to {args.out}")
    return EXIT_OK


def cmd_grad_check(args, app_config: dict) -> int:
    report = run_grad_check(seed=args.seed, trials=args.trials)
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
    print(f"max relative error: {report.max_error:.3e}")
    if not report.passed:
        worst = max(report.errors, key=lambda k: report.errors[k] if np.isfinite(report.errors[k]) else np.inf)
        logger.error(f"Gradient check failed, worst case {worst}: {report.errors[worst]:.3e}")
        return EXIT_NUMERIC
    return EXIT_OK


# ============================================================================
# 参数解析
# ============================================================================


def build_parser() -> argparse.ArgumentParser:
    parser = TCMNArgumentParser(prog="tcmn", description="Tree-structured cross-modal moment localization")
    parser.add_argument('--config', help='配置文件路径 (默认 TCMN_CONFIG 或 config/config.json)', default=None)
    parser.add_argument('--log-level', help='日志级别 (DEBUG, INFO, WARNING)', default=None)
    commands = parser.add_subparsers(dest="command", parser_class=TCMNArgumentParser)
    commands.required = True

    p = commands.add_parser("generate-synth", help="生成合成数据集")
    p.add_argument('--spec', required=True, help='合成数据规格 JSON')
    p.add_argument('--out', required=True, help='输出目录')
    p.add_argument('--seed', type=int, default=None, help='覆盖规格中的种子')
    p.set_defaults(handler=cmd_generate_synth)

    p = commands.add_parser("train", help="训练一路流")
    p.add_argument('--manifest', required=True, help='数据集 manifest.json')
    p.add_argument('--stream', required=True, help='主事件模态,上下文模态，如 rgb,flow')
    p.add_argument('--out', required=True, help='模型输出目录')
    p.add_argument('--epochs', type=int, default=None)
    p.add_argument('--lr', type=float, default=None)
    p.add_argument('--weight-decay', type=float, default=None)
    p.add_argument('--hidden-size', type=int, default=None)
    p.add_argument('--seed', type=int, default=None)
    p.add_argument('--label-dim', type=int, default=None)
    p.add_argument('--margin-main', type=float, default=None)
    p.add_argument('--margin-context', type=float, default=None)
    p.add_argument('--lambda', dest='loss_weight', type=float, default=None, help='上下文损失权重')
    p.add_argument('--no-segment-attention', action='store_true', help='f^loc 使用未加权的片段特征')
    p.add_argument('--no-relationship', action='store_true', help='不使用时序关系模块')
    p.set_defaults(handler=cmd_train)

    p = commands.add_parser("score", help="为一个划分的全部查询打分")
    p.add_argument('--manifest', required=True)
    p.add_argument('--checkpoint', required=True)
    p.add_argument('--split', default='test', choices=['train', 'val', 'test'])
    p.add_argument('--out', required=True, help='分数文件')
    p.set_defaults(handler=cmd_score)

    p = commands.add_parser("fuse", help="在验证集上搜索集成权重")
    p.add_argument('--scores', nargs='+', required=True, help='各路流的验证集分数文件，默认按 V 顺序')
    p.add_argument('--streams', default=None, help='分数文件对应的流，如 "rgb,rgb;rgb,flow"')
    p.add_argument('--val-manifest', required=True)
    p.add_argument('--step', type=float, default=None, help='单纯形网格步长')
    p.add_argument('--out', required=True, help='权重 JSON')
    p.add_argument('--test-scores', nargs='+', default=None, help='用选出的权重融合这些分数文件')
    p.add_argument('--fused-out', default=None, help='融合后的分数文件')
    p.set_defaults(handler=cmd_fuse)

    p = commands.add_parser("apply-weights", help="用已有权重融合分数文件")
    p.add_argument('--scores', nargs='+', required=True)
    p.add_argument('--streams', default=None)
    p.add_argument('--weights', required=True)
    p.add_argument('--out', required=True)
    p.set_defaults(handler=cmd_apply_weights)

    p = commands.add_parser("eval", help="计算 R@1 / R@5 / mIoU")
    p.add_argument('--scores', default=None, help='分数文件')
    p.add_argument('--manifest', required=True)
    p.add_argument('--split', default='test', choices=['train', 'val', 'test'])
    p.add_argument('--per-category', action='store_true', help='输出各类别列')
    p.add_argument('--frequency-prior', action='store_true', help='同时评测训练集频率先验基线')
    p.add_argument('--label', default='TCMN', help='表中的方法名')
    p.add_argument('--json', default=None, help='同时写出 JSON 报表')
    p.set_defaults(handler=cmd_eval)

    p = commands.add_parser("predict", help="对一条查询输出得分最高的 (i, j)")
    p.add_argument('--query-tree', required=True, help='括号形式的句法树')
    p.add_argument('--video', required=True)
    p.add_argument('--checkpoint', required=True)
    p.add_argument('--manifest', required=True)
    p.add_argument('--top', type=int, default=None)
    p.set_defaults(handler=cmd_predict)

    p = commands.add_parser("inspect-attention", help="导出一条查询的节点与片段注意力")
    p.add_argument('--query-id', required=True)
    p.add_argument('--checkpoint', required=True)
    p.add_argument('--manifest', required=True)
    p.add_argument('--threshold', type=float, default=None)
    p.add_argument('--out', required=True)
    p.set_defaults(handler=cmd_inspect_attention)

    p = commands.add_parser("grad-check", help="有限差分梯度检查")
    p.add_argument('--seed', type=int, default=7)
    p.add_argument('--trials', type=int, default=100, help='每个原语的随机试验次数')
    p.add_argument('--json', default=None)
    p.set_defaults(handler=cmd_grad_check)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(f"tcmn: error: {e}", file=sys.stderr)
        return EXIT_USAGE

    try:
        app_config = load_app_config(args.config)
    except ConfigError as e:
        print(f"tcmn: {e}", file=sys.stderr)
        return EXIT_DATA
    logging_config = app_config.get("logging", {})
    level = str(args.log_level or logging_config.get("level", "INFO")).upper()
    if not isinstance(logging.getLevelName(level), int):
        print(f"tcmn: error: unknown log level {level!r}", file=sys.stderr)
        return EXIT_USAGE
    setup_logging(level, logging_config.get("log_dir"))

    try:
        return args.handler(args, app_config)
    except UsageError as e:
        print(f"tcmn: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except NumericError as e:
        logger.error(f"Numeric failure: {e}")
        return EXIT_NUMERIC
    except (DataError, ConfigError) as e:
        logger.error(f"{e}")
        return EXIT_DATA
    except TCMNError as e:
        logger.error(f"{e}")
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
