"""
Progress meters for corpus loops, seeding, byte formatting.
"""
import datetime
import logging
import random
import time
from collections import defaultdict, deque

import numpy as np

logger = logging.getLogger(__name__)


class SmoothedValue(object):
    """A running series of per-file values.

    The window feeds the progress lines; ``global_avg`` is the plain mean over
    every value seen, which is what the bench reports per configuration.
    """

    def __init__(self, window_size=20, fmt="{median:.4f} ({global_avg:.4f})"):
        self.window = deque(maxlen=window_size)
        self.total = 0.0
        self.count = 0
        self.fmt = fmt

    def update(self, value, n=1):
        self.window.append(value)
        self.total += value * n
        self.count += n

    @property
    def median(self):
        return float(np.median(self.window))

    @property
    def avg(self):
        return float(np.mean(self.window))

    @property
    def global_avg(self):
        return self.total / self.count if self.count else float('nan')

    @property
    def max(self):
        return max(self.window)

    @property
    def value(self):
        return self.window[-1]

    def __str__(self):
        if not self.window:
            return 'n/a'
        return self.fmt.format(median=self.median, avg=self.avg, global_avg=self.global_avg,
                               max=self.max, value=self.value)


class MetricLogger(object):
    """Named meters plus ``log_every``, a pass-through generator that reports
    progress every ``print_freq`` items and once more at the end."""

    def __init__(self, delimiter="\t", print_fn=None):
        self.meters = defaultdict(SmoothedValue)
        self.delimiter = delimiter
        self.print_fn = print_fn or logger.info

    def update(self, **kwargs):
        for name, v in kwargs.items():
            if isinstance(v, np.generic):
                v = v.item()
            assert isinstance(v, (float, int)), name
            self.meters[name].update(v)

    def __getattr__(self, attr):
        meters = self.__dict__.get('meters', {})
        if attr in meters:
            return meters[attr]
        raise AttributeError(f"'{type(self).__name__}' object has no attribute '{attr}'")

    def __str__(self):
        return self.delimiter.join(f"{name}: {meter}" for name, meter in self.meters.items())

    def add_meter(self, name, meter):
        self.meters[name] = meter

    def log_every(self, iterable, print_freq, header=None):
        header = header or ''
        total = len(iterable)
        if total == 0:
            return
        width = len(str(total))
        step = SmoothedValue(fmt='{avg:.4f}')
        start = last = time.time()
        for i, obj in enumerate(iterable):
            yield obj
            now = time.time()
            step.update(now - last)
            last = now
            if i % print_freq == 0 or i == total - 1:
                eta = datetime.timedelta(seconds=int(step.global_avg * (total - i - 1)))
                self.print_fn(self.delimiter.join(
                    [header, f'[{i:{width}d}/{total}]', f'eta: {eta}', str(self), f'time: {step}']))
        elapsed = time.time() - start
        self.print_fn(f'{header} Total time: {datetime.timedelta(seconds=int(elapsed))} '
                      f'({elapsed / total:.4f} s / it)')


def fix_seed(seed):
    """Seed the global generators; returns a fresh numpy Generator."""
    random.seed(seed)
    np.random.seed(seed)
    return np.random.default_rng(seed)


def human_bytes(n):
    for unit in ('B', 'KiB', 'MiB', 'GiB'):
        if n < 1024 or unit == 'GiB':
            return f'{n} B' if unit == 'B' else f'{n:.1f} {unit}'
        n /= 1024.0
