import argparse
import datetime
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np
import pandas as pd

from chart import BarChart
from codec import CodecConfig, decode_container, encode_container, inspect_stream
from core import CodecError, ConfigError, compression_ratio, raw_bits
from datasets import build_dataset, build_mix_pair, generate_corpus
from engine import evaluate
from logger import create_logger
from metrics import BenchReport
from solver import ModelKind, ModelSpec
from wavio import read_wav, write_wav
import utils

logger = logging.getLogger('mixcodec')

MODEL_CHOICES = [k.cli_name for k in ModelKind]


def get_args_parser():
    parser = argparse.ArgumentParser('MixCodec lossless multichannel coding script', add_help=False)
    # Model parameters
    parser.add_argument('--model', default='sep', choices=MODEL_CHOICES,
                        help='Prediction model of the coded mix (default: sep)')
    parser.add_argument('--svd', action='store_true', default=False,
                        help='Allow the per-frame SVD projection of the residuals')
    parser.add_argument('--order', default=8, type=int, metavar='P',
                        help='Prediction order (default: 8)')
    parser.add_argument('--delta', default=1e-4, type=float, metavar='DELTA',
                        help='Tikhonov regularization weight, ignored by sep (default: 1e-4)')
    parser.add_argument('--frame', default=4096, type=int, metavar='F', dest='frame_size',
                        help='Frame size in samples (default: 4096)')
    parser.add_argument('--force-mode', default=None, choices=['direct', 'svd'],
                        help='Code every frame in one mode instead of the cheaper one')

    parser.add_argument('--output-dir', default='',
                        help='path where to save logs, empty for no saving')
    parser.add_argument('--seed', default=0, type=int)
    parser.add_argument('--verbose', action='store_true', help='Log per-frame details')
    return parser


def build_parser():
    parser = argparse.ArgumentParser('MixCodec lossless multichannel coding script')
    sub = parser.add_subparsers(dest='command', required=True)
    common = get_args_parser()

    p = sub.add_parser('encode', parents=[common], help='Encode a WAV file')
    p.add_argument('input', help='5.0/5.1, 2.0 or mono WAV')
    p.add_argument('output', help='stream path')
    p.add_argument('--hierarchical', default=None, choices=['itu', 'file'],
                   help='Also store a 2.0 downmix and code the 5.0 upmix on top of it')
    p.add_argument('--downmix', default=None, help='2.0 WAV for --hierarchical file')
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser('decode', parents=[common], help='Decode a stream to WAV')
    p.add_argument('stream')
    p.add_argument('outputs', nargs='+',
                   help='one WAV per mix, lowest first; a single path gets _mix<i> suffixes')
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser('verify', parents=[common], help='Decode and compare against WAVs')
    p.add_argument('originals', nargs='+',
                   help='original WAV(s), compared against the highest mixes of the stream')
    p.add_argument('stream')
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser('bench', parents=[common], help='Average ratios over a 5.0 corpus')
    p.add_argument('corpus', help='directory of 5.0/5.1 WAVs')
    p.add_argument('--jobs', default=1, type=int, help='worker processes (default: 1)')
    p.add_argument('--plot', default='', help='save a bar chart of the report to this path')
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser('gen-corpus', aliases=['gen_corpus'], parents=[common],
                       help='Write a seeded synthetic 5.0 corpus')
    p.add_argument('corpus', help='output directory')
    p.add_argument('--count', default=20, type=int, help='number of files (default: 20)')
    p.add_argument('--duration', default=10.0, type=float,
                   help='seconds per file (default: 10)')
    p.add_argument('--sample-rate', default=44100, type=int, help='(default: 44100)')
    p.set_defaults(func=cmd_gen_corpus)

    p = sub.add_parser('inspect', parents=[common], help='Per-frame bit accounting of a stream')
    p.add_argument('stream')
    p.add_argument('--frames', action='store_true', help='list every chunk')
    p.set_defaults(func=cmd_inspect)
    return parser


def codec_config(args):
    return CodecConfig(frame_size=args.frame_size, svd=args.svd, force_mode=args.force_mode)


def cmd_encode(args):
    kind = ModelKind[args.model.upper().replace('-', '_')]
    if kind.uses_downmix and not args.hierarchical:
        raise ConfigError(f"--model {args.model} predicts from a downmix; pass --hierarchical")
    if args.downmix and args.hierarchical != 'file':
        raise ConfigError("--downmix only applies with --hierarchical file")
    _, block = read_wav(args.input)
    if args.hierarchical:
        pair = build_mix_pair(block, args.hierarchical, args.downmix)
        mixes = pair.mixes
        models = [ModelSpec(ModelKind.SEP, args.order),
                  ModelSpec.from_name(args.model, args.order, pair.downmix.channels, args.delta)]
    else:
        mixes = [block]
        models = [ModelSpec.from_name(args.model, args.order, 0, args.delta)]

    start_time = time.time()
    stream = encode_container(mixes, models, codec_config(args))
    data = stream.to_bytes()
    with open(args.output, 'wb') as f:
        f.write(data)
    logger.info("wrote %s (%s) in %s", args.output, utils.human_bytes(len(data)),
                str(datetime.timedelta(seconds=int(time.time() - start_time))))
    if block.length:
        for m, mix in enumerate(mixes):
            logger.info("mix %d (%d ch): ratio %.4f", m, mix.channels,
                        compression_ratio(stream.mix_bits(m), mix))
        all_raw = sum(raw_bits(mix.channels, mix.length) for mix in mixes)
        logger.info("total ratio %.4f", stream.total_bits / all_raw)
    return 0


def _read_stream(path):
    with open(path, 'rb') as f:
        return f.read()


def _output_paths(outputs, count):
    if len(outputs) == count:
        return outputs
    if len(outputs) == 1:
        if count == 1:
            return outputs
        root, ext = os.path.splitext(outputs[0])
        return [f'{root}_mix{m}{ext or ".wav"}' for m in range(count)]
    raise ConfigError(f"stream holds {count} mixes but {len(outputs)} output paths were given")


def cmd_decode(args):
    mixes = decode_container(_read_stream(args.stream))
    for path, mix in zip(_output_paths(args.outputs, len(mixes)), mixes):
        write_wav(path, mix)
        logger.info("wrote %s (%d ch, %d samples)", path, mix.channels, mix.length)
    return 0


def first_mismatch(original, decoded):
    """None if identical, else a description of the first differing sample."""
    if original.channels != decoded.channels:
        return f"channel count {original.channels} != {decoded.channels}"
    if original.length != decoded.length:
        return f"length {original.length} != {decoded.length}"
    if original.sample_rate != decoded.sample_rate:
        return f"sample rate {original.sample_rate} != {decoded.sample_rate}"
    diff = np.argwhere(original.data != decoded.data)
    if diff.size == 0:
        return None
    channel, sample = diff[np.lexsort((diff[:, 0], diff[:, 1]))[0]]
    return (f"channel {channel}, sample {sample}: "
            f"{original.data[channel, sample]} != {decoded.data[channel, sample]}")


def cmd_verify(args):
    mixes = decode_container(_read_stream(args.stream))
    if len(args.originals) > len(mixes):
        logger.error("%d originals given, stream holds %d mixes", len(args.originals), len(mixes))
        return 1
    status = 0
    for path, mix in zip(args.originals, mixes[len(mixes) - len(args.originals):]):
        _, original = read_wav(path)
        mismatch = first_mismatch(original, mix)
        if mismatch is None:
            logger.info("%s: identical", path)
        else:
            logger.error("%s: mismatch at %s", path, mismatch)
            status = 1
    return status


def cmd_bench(args):
    dataset = build_dataset(args)
    start_time = time.time()
    _, results = evaluate(dataset, order=args.order, delta=args.delta,
                          frame_size=args.frame_size, jobs=args.jobs)
    report = BenchReport.from_results(results)
    print(report.render_table())
    for line in report.tsv_lines():
        print(line)
    if args.output_dir:
        report.save(args.output_dir)
    if args.plot:
        BarChart(report, name=args.plot)
    total_time = time.time() - start_time
    logger.info('Bench time {}'.format(str(datetime.timedelta(seconds=int(total_time)))))
    return 0


def cmd_gen_corpus(args):
    generate_corpus(args.corpus, seed=args.seed, count=args.count, duration=args.duration,
                    sample_rate=args.sample_rate)
    return 0


def cmd_inspect(args):
    records = inspect_stream(_read_stream(args.stream))
    if not records:
        print('header-only stream')
        return 0
    frame = pd.DataFrame(records)
    if args.frames:
        print(frame.drop(columns=['rice_params']).to_string(index=False))
    columns = ['bits', 'side_info_bits', 'flags_bits', 'warmup_bits', 'coefficients_bits',
               'projection_bits', 'rice_params_bits', 'payload_bits', 'padding_bits']
    summary = frame.groupby('mix')[columns].sum()
    summary['svd_frames'] = frame.assign(svd=frame['mode'] == 'svd').groupby('mix')['svd'].sum()
    print(summary.to_string())
    return 0


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.output_dir:
        Path(args.output_dir).mkdir(parents=True, exist_ok=True)
    create_logger(output_dir=args.output_dir or None, name='',
                  level=logging.DEBUG if args.verbose else logging.INFO)
    utils.fix_seed(args.seed)
    try:
        return args.func(args)
    except ConfigError as e:
        logger.error("usage error: %s", e)
        return 2
    except (CodecError, OSError) as e:
        logger.error("%s", e)
        return 1


if __name__ == '__main__':
    sys.exit(main())
