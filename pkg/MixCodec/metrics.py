import json
import os
from dataclasses import dataclass, field
from typing import List

import pandas as pd

from core import CodecError


@dataclass
class BenchReport:
    """Averaged ratios per configuration, in measurement order.

    Args:
        rows: DataFrame with columns name, upmix, total (one row per configuration)
        files: number of corpus files averaged
        total_samples: sum of per-file lengths in samples
        downmix: mean ratio of the 2.0 downmix coded with SEP
    """
    rows: pd.DataFrame
    files: int
    total_samples: int
    downmix: float
    per_file: List[dict] = field(default_factory=list, repr=False)

    @classmethod
    def from_results(cls, results):
        """Unweighted mean over files of each configuration's ratios."""
        if not results:
            raise CodecError("cannot build a report from an empty corpus")
        records = [{'path': r['path'], 'name': name, 'upmix': up, 'total': total}
                   for r in results for name, up, total in r['rows']]
        frame = pd.DataFrame(records)
        rows = (frame.groupby('name', sort=False)[['upmix', 'total']].mean()
                .reset_index())
        return cls(rows=rows,
                   files=len(results),
                   total_samples=int(sum(r['samples'] for r in results)),
                   downmix=float(sum(r['downmix'] for r in results) / len(results)),
                   per_file=records)

    def ratio(self, name, column='upmix'):
        match = self.rows.loc[self.rows['name'] == name, column]
        if match.empty:
            raise KeyError(name)
        return float(match.iloc[0])

    def render_table(self):
        table = self.rows.rename(columns={'name': 'Model', 'upmix': 'Upmix', 'total': 'Total'})
        lines = [table.to_string(index=False, float_format=lambda v: f'{v:.4f}'),
                 f'files: {self.files}  samples: {self.total_samples}  '
                 f'downmix (SEP): {self.downmix:.4f}']
        return '\n'.join(lines)

    def tsv_lines(self):
        return [f'{row.name}\t{row.upmix:.6f}\t{row.total:.6f}'
                for row in self.rows.itertuples(index=False)]

    def to_dict(self):
        return {
            'files': self.files,
            'total_samples': self.total_samples,
            'downmix': self.downmix,
            **{f'{row.name}_upmix': row.upmix for row in self.rows.itertuples(index=False)},
            **{f'{row.name}_total': row.total for row in self.rows.itertuples(index=False)},
        }

    def save(self, output_dir):
        """Append the summary to log.txt (one JSON object per line), write report.tsv."""
        os.makedirs(output_dir, exist_ok=True)
        with open(os.path.join(output_dir, 'log.txt'), 'a') as f:
            f.write(json.dumps(self.to_dict()) + '\n')
        with open(os.path.join(output_dir, 'report.tsv'), 'w') as f:
            f.write('\n'.join(self.tsv_lines()) + '\n')
