"""
Detection and classification tools: map a series to a label or a set of positions.
"""
import logging
import math
import warnings

import numpy as np
import pandas as pd
from scipy import stats
from statsmodels.tools.sm_exceptions import InterpolationWarning
from statsmodels.tsa.stattools import acf, adfuller, kpss

from toolkit.exceptions import ToolError
from toolkit.registry import ToolResult
from toolkit.serializers import (
    AnomalyClassifierSerializer,
    ChangePointDetectorSerializer,
    NoiseProfileSerializer,
    SeasonalityDetectorSerializer,
    SpikeDetectorSerializer,
    StationarityTestSerializer,
    TrendClassifierSerializer,
)
from toolkit.tools.base import resolve_window, root_length, setting, span_of, tool, univariate

logger = logging.getLogger(__name__)

MAD_TO_SIGMA = 1.4826
STATIONARITY_TESTS = ('adf', 'kpss')
# Splits that lower the segment cost by less than this are numerical noise.
GAIN_TOLERANCE = 1e-6


def robust_residuals(x, window):
    """
    Residuals from a centred rolling-median baseline and their robust scale.

    The scale is 1.4826 * MAD of the residuals, falling back to their standard
    deviation when the MAD collapses, and never below a tenth of the series'
    own standard deviation.
    """
    baseline = pd.Series(x).rolling(window, center=True, min_periods=1).median().to_numpy()
    residual = x - baseline
    floor = 0.1 * float(np.std(x, ddof=1)) if x.size > 1 else 0.0
    scale = MAD_TO_SIGMA * float(np.median(np.abs(residual - np.median(residual))))
    if scale < floor:
        spread = float(np.std(residual, ddof=1)) if x.size > 1 else 0.0
        scale = max(spread, floor)
    if scale > 0:
        z = residual / scale
    else:
        z = np.zeros_like(residual)
    return residual, scale, z


def _flag_spans(z, threshold):
    flagged = np.flatnonzero(np.abs(z) > threshold)
    spans = []
    for position in flagged:
        if spans and position == spans[-1][1] + 1:
            spans[-1][1] = position
        else:
            spans.append([position, position])
    return spans


def _refine_onset(x, onset, half):
    """Least-squares single step location within `half` points of a rough onset."""
    a, b = max(0, onset - half), min(x.size, onset + half)
    region = x[a:b]
    s1 = np.concatenate([[0.0], np.cumsum(region)])
    s2 = np.concatenate([[0.0], np.cumsum(region * region)])
    best, best_sse = onset, math.inf
    for t in range(1, region.size):
        left = s2[t] - s1[t] ** 2 / t
        right = (s2[-1] - s2[t]) - (s1[-1] - s1[t]) ** 2 / (region.size - t)
        if left + right < best_sse:
            best, best_sse = a + t, left + right
    return min(max(best, half), x.size - half)


def _level_shift(x, residual_scale, threshold):
    """
    Onset of the sharpest persistent mean shift, or None.

    The two-sided moving mean difference must stand out from its own typical
    size, and the medians on either side of the onset must differ by more than
    `threshold` residual scales.
    """
    size = x.size
    half = max(10, size // 20)
    if size < 2 * half + 1 or residual_scale <= 0:
        return None
    cumsum = np.concatenate([[0.0], np.cumsum(x)])
    onsets = np.arange(half, size - half + 1)
    after = (cumsum[onsets + half] - cumsum[onsets]) / half
    before = (cumsum[onsets] - cumsum[onsets - half]) / half
    diff = after - before
    magnitude = np.abs(diff)
    noise = MAD_TO_SIGMA * float(np.median(np.abs(np.diff(x)))) / math.sqrt(2)
    standard_error = max(noise, residual_scale) * math.sqrt(2.0 / half)
    spread = MAD_TO_SIGMA * float(np.median(np.abs(diff - np.median(diff))))
    best = int(np.argmax(magnitude))
    sharpness = (magnitude[best] - float(np.median(magnitude))) / max(spread, standard_error)
    if sharpness <= threshold:
        return None
    onset = _refine_onset(x, int(onsets[best]), half)
    shift = float(np.median(x[onset:onset + half]) - np.median(x[onset - half:onset]))
    if abs(shift) <= threshold * residual_scale:
        return None
    return {'onset': onset, 'end': min(size, onset + half) - 1, 'shift': shift, 'z': float(sharpness)}


@tool('trend_classifier', 'det', 'category', TrendClassifierSerializer,
      'Classify the global or windowed trend as up, down or flat from an OLS slope test.')
def trend_classifier(context, name, window=None, alpha=None):
    series, x = univariate(name)
    start, end = resolve_window(series, window)
    y = x[start:end]
    if y.size < 3:
        raise ToolError(f'trend_classifier needs at least 3 points, got {y.size}')
    alpha = setting('TREND_ALPHA') if alpha is None else alpha
    fit = stats.linregress(np.arange(y.size, dtype=float), y)
    p_value = float(fit.pvalue) if np.isfinite(fit.pvalue) else 1.0
    if p_value < alpha and fit.slope > 0:
        label = 'up'
    elif p_value < alpha and fit.slope < 0:
        label = 'down'
    else:
        label = 'flat'
    return ToolResult(
        kind='category',
        value=label,
        diagnostics={
            'slope': float(fit.slope),
            'p_value': p_value,
            'alpha': alpha,
            'span': span_of(series, start, end),
        },
    )


@tool('anomaly_classifier', 'det', 'index-set', AnomalyClassifierSerializer,
      'Flag anomalies as spike, dip or level shift; returns anomalous positions plus typed spans.')
def anomaly_classifier(context, name, threshold=None, window=None):
    series, x = univariate(name)
    threshold = setting('ANOMALY_THRESHOLD') if threshold is None else threshold
    if window is None:
        window = min(setting('ANOMALY_WINDOW'), x.size)
    elif window > x.size:
        raise ToolError(f'window {window} is longer than the series ({x.size} points)')

    residual, scale, z = robust_residuals(x, window)
    anomalies = []
    for start, end in _flag_spans(z, threshold):
        segment = z[start:end + 1]
        peak = start + int(np.argmax(np.abs(segment)))
        anomalies.append({
            'start': int(start),
            'end': int(end),
            'length': int(end - start + 1),
            'type': 'spike' if residual[peak] > 0 else 'dip',
            'peak': peak,
            'z': float(z[peak]),
        })

    positions = set(int(p) for p in np.flatnonzero(np.abs(z) > threshold))
    shift = _level_shift(x, scale, threshold)
    if shift is not None:
        anomalies.append({
            'start': shift['onset'],
            'end': shift['end'],
            'length': shift['end'] - shift['onset'] + 1,
            'type': 'level shift',
            'peak': shift['onset'],
            'z': shift['z'] if shift['shift'] > 0 else -shift['z'],
        })
        positions.add(shift['onset'])
    anomalies.sort(key=lambda item: item['start'])

    most_severe = max(anomalies, key=lambda item: abs(item['z']))['peak'] if anomalies else None
    return ToolResult(
        kind='index-set',
        value=sorted(positions),
        diagnostics={
            'anomalies': anomalies,
            'most_severe': most_severe,
            'length': int(x.size),
            'root_length': root_length(context, series),
            'threshold': threshold,
            'window': window,
            'scale': scale,
            'span': span_of(series),
        },
    )


@tool('seasonality_detector', 'det', 'category', SeasonalityDetectorSerializer,
      'Detect periodicity; returns period estimate and a strength label (none, weak, strong).')
def seasonality_detector(context, name, max_period=None):
    series, x = univariate(name)
    max_period = x.size // 2 if max_period is None else max_period
    if max_period < 2 or x.size < 2 * max_period:
        raise ToolError(
            f'max_period {max_period} is too large for {x.size} points; use at most {x.size // 2}'
        )
    t = np.arange(x.size, dtype=float)
    slope, intercept = np.polyfit(t, x, 1)
    detrended = x - (slope * t + intercept)
    weak, strong = setting('SEASONALITY_BUCKETS')

    period = None
    strength = 0.0
    if np.std(detrended) > 0:
        coefficients = acf(detrended, nlags=max_period, fft=True)
        peaks = [
            lag for lag in range(2, max_period + 1)
            if coefficients[lag] > coefficients[lag - 1]
            and (lag == max_period or coefficients[lag] >= coefficients[lag + 1])
        ]
        if peaks:
            period = max(peaks, key=lambda lag: coefficients[lag])
            strength = float(coefficients[period])

    if period is None or strength < weak:
        label = 'none'
    elif strength < strong:
        label = 'weak'
    else:
        label = 'strong'
    return ToolResult(
        kind='category',
        value=label,
        diagnostics={'period': period, 'strength': strength, 'span': span_of(series)},
    )


def _segment_cost(s1, s2, a, b, floor):
    n = b - a
    mean = (s1[b] - s1[a]) / n
    var = max((s2[b] - s2[a]) / n - mean * mean, floor)
    return n * math.log(var)


def _best_split(s1, s2, a, b, min_size, floor):
    if b - a < 2 * min_size:
        return None, 0.0
    whole = _segment_cost(s1, s2, a, b, floor)
    best_t, best_gain = None, -math.inf
    for t in range(a + min_size, b - min_size + 1):
        gain = whole - _segment_cost(s1, s2, a, t, floor) - _segment_cost(s1, s2, t, b, floor)
        if gain > best_gain:
            best_t, best_gain = t, gain
    return best_t, best_gain


@tool('change_point_detector', 'det', 'index-set', ChangePointDetectorSerializer,
      'Identify structural breaks in mean/variance by binary segmentation; give a penalty or a number of breaks.')
def change_point_detector(context, name, penalty=None, n_cp=None):
    series, x = univariate(name)
    size = x.size
    if size < 10:
        raise ToolError(f'change_point_detector needs at least 10 points, got {size}')
    if penalty is not None and n_cp is not None:
        raise ToolError('give either penalty or n_cp, not both')
    min_size = 5
    if n_cp is None and penalty is None:
        penalty = 5.0 * math.log(size)
    centred = x - x.mean()
    s1 = np.concatenate([[0.0], np.cumsum(centred)])
    s2 = np.concatenate([[0.0], np.cumsum(centred * centred)])
    floor = max(1e-8 * float(np.var(centred)), 1e-12)

    segments = [(0, size)]
    change_points = []
    gains = []
    while n_cp is None or len(change_points) < n_cp:
        candidates = []
        for a, b in segments:
            t, gain = _best_split(s1, s2, a, b, min_size, floor)
            if t is not None:
                candidates.append((gain, t, a, b))
        if not candidates:
            break
        gain, t, a, b = max(candidates)
        if gain <= GAIN_TOLERANCE or (penalty is not None and gain < penalty):
            break
        segments.remove((a, b))
        segments.extend([(a, t), (t, b)])
        change_points.append(t)
        gains.append(float(gain))

    order = np.argsort(change_points)
    return ToolResult(
        kind='index-set',
        value=sorted(change_points),
        diagnostics={
            'gains': [gains[i] for i in order],
            'penalty': penalty,
            'n_cp': n_cp,
            'length': size,
            'span': span_of(series),
        },
    )


@tool('noise_profile', 'det', 'category', NoiseProfileSerializer,
      'Qualitative noise label (white or red) from a lag-1 autocorrelation test.')
def noise_profile(context, name, window=None):
    series, x = univariate(name)
    start, end = resolve_window(series, window)
    y = x[start:end]
    if y.size < 30:
        raise ToolError(f'noise_profile needs at least 30 points, got {y.size}')
    centred = y - y.mean()
    denominator = float(np.dot(centred, centred))
    if denominator == 0:
        raise ToolError(f'{series.name} is constant; it has no noise to profile')
    r1 = float(np.dot(centred[:-1], centred[1:]) / denominator)
    alpha = setting('NOISE_ALPHA')
    critical = float(stats.norm.ppf(1 - alpha) / math.sqrt(y.size))
    return ToolResult(
        kind='category',
        value='red' if r1 > critical else 'white',
        diagnostics={'r1': r1, 'critical': critical, 'span': span_of(series, start, end)},
    )


@tool('stationarity_test', 'det', 'category', StationarityTestSerializer,
      'Return stationary or nonstationary from an ADF or KPSS test, plus the test statistic.')
def stationarity_test(context, name, test='adf'):
    series, x = univariate(name)
    test = test.strip().lower()
    if test not in STATIONARITY_TESTS:
        raise ToolError(f"unsupported test '{test}'; use one of {list(STATIONARITY_TESTS)}")
    if x.size < 20:
        raise ToolError(f'stationarity_test needs at least 20 points, got {x.size}')
    if np.std(x) == 0:
        raise ToolError(f'{series.name} is constant; stationarity tests need variation')

    if test == 'adf':
        lags = int((x.size - 1) ** (1 / 3))
        statistic, _, used_lag, _, critical_values = adfuller(
            x, maxlag=lags, regression='c', autolag=None
        )[:5]
        critical = float(critical_values['5%'])
        label = 'stationary' if statistic < critical else 'nonstationary'
    else:
        lags = int(4 * (x.size / 100) ** 0.25)
        with warnings.catch_warnings():
            warnings.simplefilter('ignore', InterpolationWarning)
            statistic, _, used_lag, critical_values = kpss(x, regression='c', nlags=lags)
        critical = float(critical_values['5%'])
        label = 'nonstationary' if statistic > critical else 'stationary'
    return ToolResult(
        kind='category',
        value=label,
        diagnostics={
            'test': test,
            'statistic': float(statistic),
            'critical_value_5pct': critical,
            'lags': int(used_lag),
            'span': span_of(series),
        },
    )


@tool('spike_detector', 'det', 'index-set', SpikeDetectorSerializer,
      'Classify and locate isolated spikes/dips; detections closer than min_sep are merged.')
def spike_detector(context, name, threshold=None, min_sep=1):
    series, x = univariate(name)
    threshold = setting('ANOMALY_THRESHOLD') if threshold is None else threshold
    window = min(setting('ANOMALY_WINDOW'), x.size)
    residual, scale, z = robust_residuals(x, window)

    detections = []
    for position in np.flatnonzero(np.abs(z) > threshold):
        candidate = {
            'index': int(position),
            'type': 'spike' if residual[position] > 0 else 'dip',
            'z': float(z[position]),
        }
        if detections and position - detections[-1]['anchor'] < min_sep:
            if abs(candidate['z']) > abs(detections[-1]['z']):
                candidate['anchor'] = int(position)
                detections[-1] = candidate
            else:
                detections[-1]['anchor'] = int(position)
            continue
        candidate['anchor'] = int(position)
        detections.append(candidate)
    for detection in detections:
        detection.pop('anchor')

    most_severe = max(detections, key=lambda d: abs(d['z']))['index'] if detections else None
    return ToolResult(
        kind='index-set',
        value=[d['index'] for d in detections],
        diagnostics={
            'spikes': detections,
            'most_severe': most_severe,
            'length': int(x.size),
            'root_length': root_length(context, series),
            'threshold': threshold,
            'min_sep': min_sep,
            'span': span_of(series),
        },
    )
