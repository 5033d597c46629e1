import logging
import os
import sys

_installed = {}


def create_logger(output_dir=None, dist_rank=0, name='', level=logging.INFO):
    """Console logger, plus ``<output_dir>/log_rank<rank>.txt`` when a directory is given.

    Calling it again for the same name replaces the handlers it installed
    before, so repeated in-process runs do not duplicate output.
    """
    logger = logging.getLogger(name)
    logger.setLevel(level)
    for handler in _installed.pop(name, []):
        logger.removeHandler(handler)
        handler.close()

    fmt = '[%(asctime)s %(name)s] (%(filename)s %(lineno)d): %(levelname)s %(message)s'
    datefmt = '%Y-%m-%d %H:%M:%S'
    handlers = []
    if dist_rank == 0:
        console = logging.StreamHandler(sys.stdout)
        console.setFormatter(logging.Formatter('%(message)s' if level > logging.DEBUG else fmt,
                                               datefmt=datefmt))
        handlers.append(console)
    if output_dir:
        os.makedirs(output_dir, exist_ok=True)
        file_handler = logging.FileHandler(os.path.join(output_dir, f'log_rank{dist_rank}.txt'),
                                           mode='a')
        file_handler.setLevel(logging.DEBUG)
        file_handler.setFormatter(logging.Formatter(fmt, datefmt=datefmt))
        handlers.append(file_handler)
    for handler in handlers:
        logger.addHandler(handler)
    _installed[name] = handlers
    return logger
