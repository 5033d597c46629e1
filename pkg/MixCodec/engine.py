"""
Corpus loops used in main.py: per-file measurement, optionally in a process pool.
"""
import functools
import logging
import multiprocessing

from codec import CONFIGURATIONS, FRAME_SIZE_DEFAULT, measure
from datasets import build_mix_pair
from solver import DELTA_DEFAULT, ORDER_DEFAULT, config_name
from wavio import read_wav
import utils

logger = logging.getLogger(__name__)


def measure_file(path, order=ORDER_DEFAULT, delta=DELTA_DEFAULT, frame_size=FRAME_SIZE_DEFAULT,
                 configurations=CONFIGURATIONS):
    """Ratios of one 5.0/5.1 file against its ITU downmix, as a plain dict."""
    _, upmix = read_wav(path)
    pair = build_mix_pair(upmix)
    result = measure(pair.upmix, pair.downmix, configurations, order, delta, frame_size)
    return {
        'path': path,
        'samples': result.samples,
        'downmix': result.downmix_ratio,
        'rows': [(row.name, row.upmix, row.total) for row in result.rows],
    }


class _Sized(object):
    def __init__(self, iterable, length):
        self.iterable = iterable
        self.length = length

    def __len__(self):
        return self.length

    def __iter__(self):
        return iter(self.iterable)


def evaluate(dataset, order=ORDER_DEFAULT, delta=DELTA_DEFAULT, frame_size=FRAME_SIZE_DEFAULT,
             jobs=1, print_freq=1, configurations=CONFIGURATIONS):
    """Measure every file of ``dataset``; returns (averaged stats, per-file results).

    The averages are unweighted means over files.
    """
    metric_logger = utils.MetricLogger(delimiter="  ")
    header = 'Bench:'
    worker = functools.partial(measure_file, order=order, delta=delta, frame_size=frame_size,
                               configurations=configurations)
    paths = list(dataset.samples)
    results = []

    def consume(iterable):
        for result in metric_logger.log_every(_Sized(iterable, len(paths)), print_freq, header):
            metric_logger.update(downmix=result['downmix'],
                                 **{name: upmix for name, upmix, _ in result['rows']})
            results.append(result)

    names = [config_name(kind, svd) for kind, svd in configurations]
    for name in names + ['downmix']:
        metric_logger.add_meter(name, utils.SmoothedValue(window_size=1, fmt='{global_avg:.4f}'))
    if jobs > 1:
        with multiprocessing.Pool(processes=jobs) as pool:
            consume(pool.imap(worker, paths))
    else:
        consume(worker(path) for path in paths)

    logger.info("Averaged stats: %s", metric_logger)
    return {k: meter.global_avg for k, meter in metric_logger.meters.items()}, results
