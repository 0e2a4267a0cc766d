"""
Relation tools: similarity and dependence between two series.

Lagged pairings always align x[t] with y[t + lag].
"""
import numpy as np
from scipy import stats

from toolkit.exceptions import ToolError
from toolkit.registry import ToolResult
from toolkit.serializers import (
    CorrRelationSerializer,
    CrossCorrelationSerializer,
    GrangerCausalitySerializer,
    PairSerializer,
    ShapeSimilaritySerializer,
)
from toolkit.tools.base import setting, span_of, tool, univariate


def _pair(name1, name2):
    first, x = univariate(name1)
    second, y = univariate(name2)
    return first, x, second, y


def _spans(first, second):
    return [span_of(first), span_of(second)]


def lagged_pairs(x, y, lag):
    start = max(0, -lag)
    stop = min(x.size, y.size - lag)
    if stop <= start:
        return x[:0], y[:0]
    return x[start:stop], y[start + lag:stop + lag]


def correlation(x, y, lag=0, method='pearson'):
    a, b = lagged_pairs(x, y, lag)
    if a.size < 3:
        raise ToolError(f'only {a.size} overlapping points at lag {lag}; at least 3 are needed')
    if np.std(a) == 0 or np.std(b) == 0:
        raise ToolError('correlation is undefined for a constant input')
    if method == 'spearman':
        return float(stats.spearmanr(a, b).statistic)
    return float(np.corrcoef(a, b)[0, 1])


@tool('corr_relation', 'rel', 'real', CorrRelationSerializer,
      'Pearson or Spearman correlation, optionally lagged (pairs name1[t] with name2[t + lag]).')
def corr_relation(context, name1, name2, lag=0, method='pearson'):
    first, x, second, y = _pair(name1, name2)
    value = correlation(x, y, lag, method)
    return ToolResult(
        kind='real',
        value=value,
        diagnostics={'lag': lag, 'method': method, 'spans': _spans(first, second)},
    )


@tool('cross_correlation', 'rel', 'record', CrossCorrelationSerializer,
      'Cross-correlation function over lags -max_lag..max_lag and the best lag (largest absolute value).')
def cross_correlation(context, name1, name2, max_lag=10):
    first, x, second, y = _pair(name1, name2)
    if max_lag >= min(x.size, y.size):
        raise ToolError(f'max_lag {max_lag} must be smaller than the series length {min(x.size, y.size)}')

    ccf = []
    for lag in range(-max_lag, max_lag + 1):
        try:
            ccf.append([lag, correlation(x, y, lag)])
        except ToolError:
            ccf.append([lag, None])
    scored = [(lag, value) for lag, value in ccf if value is not None]
    if not scored:
        raise ToolError('no lag has enough non-constant overlap to correlate')
    # Ties go to the smaller |lag|, then to the positive lag.
    best_lag, best_value = max(scored, key=lambda item: (abs(item[1]), -abs(item[0]), item[0]))
    return ToolResult(
        kind='record',
        value={'best_lag': best_lag, 'best_ccf': best_value, 'ccf': ccf},
        diagnostics={'max_lag': max_lag, 'spans': _spans(first, second)},
    )


def dtw(x, y):
    """Accumulated squared-difference cost of the optimal full-window warping path."""
    n, m = x.size, y.size
    cost = (x[:, None] - y[None, :]) ** 2
    acc = np.full((n + 1, m + 1), np.inf)
    acc[0, 0] = 0.0
    for i in range(1, n + 1):
        row = acc[i]
        above = acc[i - 1]
        for j in range(1, m + 1):
            row[j] = cost[i - 1, j - 1] + min(above[j], row[j - 1], above[j - 1])
    return float(acc[n, m])


@tool('dtw_distance', 'rel', 'real', PairSerializer,
      'Dynamic time warping distance; lower is more similar.')
def dtw_distance(context, name1, name2):
    first, x, second, y = _pair(name1, name2)
    if x.size == 0 or y.size == 0:
        raise ToolError('dtw_distance needs two non-empty series')
    return ToolResult(kind='real', value=dtw(x, y), diagnostics={'spans': _spans(first, second)})


@tool('shape_similarity', 'rel', 'real', ShapeSimilaritySerializer,
      'Scale-invariant shape comparison score in [-1, 1] (correlation of z-normalized series).')
def shape_similarity(context, name1, name2, norm='zscore'):
    first, x, second, y = _pair(name1, name2)
    if x.size != y.size:
        raise ToolError(f'shape_similarity needs equal lengths, got {x.size} and {y.size}')
    if x.size < 2 or np.std(x) == 0 or np.std(y) == 0:
        raise ToolError('shape_similarity is undefined for a constant input')
    zx = (x - x.mean()) / x.std(ddof=1)
    zy = (y - y.mean()) / y.std(ddof=1)
    score = float(np.dot(zx, zy) / (x.size - 1))
    return ToolResult(
        kind='real',
        value=float(np.clip(score, -1.0, 1.0)),
        diagnostics={'norm': norm, 'spans': _spans(first, second)},
    )


def _lag_matrix(series, maxlag):
    size = series.size
    return np.column_stack([series[maxlag - k:size - k] for k in range(1, maxlag + 1)])


def granger_test(cause, effect, maxlag):
    """
    F-test of whether lags of `cause` improve an OLS autoregression of `effect`.

    Returns (F statistic, p-value, (numerator df, denominator df)).
    """
    target = effect[maxlag:]
    ones = np.ones((target.size, 1))
    restricted = np.hstack([ones, _lag_matrix(effect, maxlag)])
    unrestricted = np.hstack([restricted, _lag_matrix(cause, maxlag)])
    if np.linalg.matrix_rank(unrestricted) < unrestricted.shape[1]:
        raise ToolError('rank-deficient regression; are the inputs constant or collinear?')

    def rss(design):
        coefficients, *_ = np.linalg.lstsq(design, target, rcond=None)
        residual = target - design @ coefficients
        return float(residual @ residual)

    rss_restricted = rss(restricted)
    rss_unrestricted = rss(unrestricted)
    df_num = maxlag
    df_den = target.size - unrestricted.shape[1]
    if df_den <= 0:
        raise ToolError(f'not enough observations for maxlag {maxlag}')
    if rss_unrestricted <= 0:
        return float('inf'), 0.0, (df_num, df_den)
    f_stat = ((rss_restricted - rss_unrestricted) / df_num) / (rss_unrestricted / df_den)
    p_value = float(stats.f.sf(f_stat, df_num, df_den))
    return float(f_stat), p_value, (df_num, df_den)


@tool('granger_causality', 'rel', 'record', GrangerCausalitySerializer,
      'Does name1 Granger-cause name2? Returns p-value and decision (yes/no).')
def granger_causality(context, name1, name2, maxlag=1):
    first, x, second, y = _pair(name1, name2)
    if x.size != y.size:
        raise ToolError(f'granger_causality needs equal lengths, got {x.size} and {y.size}')
    if x.size < 10 * maxlag:
        raise ToolError(f'granger_causality needs at least {10 * maxlag} points for maxlag {maxlag}')
    f_stat, p_value, df = granger_test(x, y, maxlag)
    alpha = setting('GRANGER_ALPHA')
    return ToolResult(
        kind='record',
        value={'p_value': p_value, 'decision': 'yes' if p_value < alpha else 'no'},
        diagnostics={
            'f_stat': f_stat,
            'df': list(df),
            'maxlag': maxlag,
            'direction': [first.name, second.name],
            'spans': _spans(first, second),
        },
    )
