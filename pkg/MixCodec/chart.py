import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt
import numpy as np


def BarChart(report, name="ratios.png", Title="Average compression ratios", X_label='Model',
             Y_label='Ratio', colors=('skyblue', 'salmon')):
    """
    Draw upmix and total ratios of a BenchReport as grouped bars and save the figure.

    Parameters:
    - report (BenchReport): averaged ratios, one row per configuration
    - name (str): output image path
    - Title (str): title of the chart
    - X_label (str): label for the x-axis
    - Y_label (str): label for the y-axis
    - colors (tuple): bar colors of the upmix and total series
    """
    names = list(report.rows['name'])
    x = np.arange(len(names))
    width = 0.35

    fig, ax = plt.subplots(figsize=(10, 5))
    upmix = ax.bar(x - width / 2, report.rows['upmix'], width, label='Upmix', color=colors[0])
    total = ax.bar(x + width / 2, report.rows['total'], width, label='Total', color=colors[1])
    ax.set_title(Title)
    ax.set_xlabel(X_label)
    ax.set_ylabel(Y_label)
    ax.set_xticks(x)
    ax.set_xticklabels(names, rotation=20)
    ax.legend()

    for rects in (upmix, total):
        for rect in rects:
            height = rect.get_height()
            ax.annotate(f'{height:.3f}',
                        xy=(rect.get_x() + rect.get_width() / 2, height),
                        xytext=(0, 3),
                        textcoords="offset points",
                        ha='center', va='bottom', fontsize=8)

    fig.tight_layout()
    fig.savefig(name, dpi=150, bbox_inches='tight')
    plt.close(fig)
    return name
