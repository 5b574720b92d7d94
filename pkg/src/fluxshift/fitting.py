"""Ridge extraction from spectrum maps and least-squares model fits.

The fitters follow the scikit-learn estimator API: hyperparameters and
initial guesses go to ``__init__``, ``fit(X, y, sigma=None)`` takes the
abscissa (flux in Wb or power in W) and peak frequencies in Hz, fitted
quantities end in an underscore and ``predict`` evaluates the model.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import json
import math
import warnings

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.exceptions import ConvergenceWarning
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .constants import CONSTANTS, GHZ, MICRO, MILLI, NANO
from .exceptions import MaxIterationsExceeded, NoPeakFound, NumericalError, ValidationError
from .lm import levenberg_marquardt
from .model import DEFAULT_FRUSTRATION_CUTOFF, resonator_slope
from .params import FluxQubitParams, ResonatorParams

PHI0 = CONSTANTS.phi0
H = CONSTANTS.h


@dataclass
class RidgeTrace:
    x: np.ndarray
    peak_frequency: np.ndarray
    peak_uncertainty: np.ndarray
    dropped: list = field(default_factory=list)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.peak_frequency = np.asarray(self.peak_frequency, dtype=float)
        self.peak_uncertainty = np.asarray(self.peak_uncertainty, dtype=float)
        if not (self.x.shape == self.peak_frequency.shape == self.peak_uncertainty.shape):
            raise ValidationError("ridge arrays must have equal lengths")
        if np.any(self.peak_uncertainty <= 0):
            raise ValidationError("peak uncertainties must be positive")

    def __len__(self):
        return self.x.size

    def select(self, mask):
        mask = np.asarray(mask, dtype=bool)
        return RidgeTrace(self.x[mask], self.peak_frequency[mask], self.peak_uncertainty[mask], list(self.dropped))


@dataclass
class FitResult:
    parameters: dict
    covariance: np.ndarray
    residual_norm: float
    iterations: int
    converged: bool
    units: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)

    @property
    def names(self):
        return list(self.parameters)

    @property
    def uncertainties(self):
        err = np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))
        return dict(zip(self.parameters, err.tolist()))

    def to_dict(self):
        return {
            "parameters": {k: float(v) for k, v in self.parameters.items()},
            "uncertainties": self.uncertainties,
            "units": dict(self.units),
            "covariance": np.asarray(self.covariance).tolist(),
            "residual_norm": float(self.residual_norm),
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "extras": self.extras,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _run_lm(fun, x0, jac, max_iter, gtol, lambda_init):
    res = levenberg_marquardt(fun, x0, jac, max_iter=max_iter, gtol=gtol, lambda_init=lambda_init)
    if res.hit_max_iter:
        raise MaxIterationsExceeded(f"no convergence after {res.iterations} iterations", res)
    if not res.converged:
        warnings.warn(f"fit did not reach gradient tolerance: {res.message}", ConvergenceWarning)
    return res


def _to_si(res, scales, names, units, extras=None):
    """Convert an LM result in scaled units to a FitResult in SI units."""
    scales = np.asarray(scales)
    values = res.x * scales
    cov = res.covariance() * np.outer(scales, scales)
    return FitResult(
        dict(zip(names, values.tolist())),
        cov,
        res.residual_norm,
        res.iterations,
        res.converged,
        units,
        extras or {},
    )


# -- ridge extraction -----------------------------------------------------


def _lorentz_fit(u, s, i_peak, baseline, contrast):
    """Fit a + b / (1 + ((u - c)/w)^2) to samples ``s`` at positions ``u`` (grid steps)."""
    half = baseline + 0.5 * contrast
    lo = i_peak
    while lo > 0 and s[lo - 1] > half:
        lo -= 1
    hi = i_peak
    while hi < s.size - 1 and s[hi + 1] > half:
        hi += 1
    width = max(hi - lo + 1, 2)
    a = max(0, i_peak - 2 * width)
    b = min(s.size, i_peak + 2 * width + 1)
    uu, ss = u[a:b], s[a:b]
    if uu.size < 5:
        raise NoPeakFound("too few samples around the peak")

    def fun(p):
        amp, c, w, base = p
        return base + amp / (1.0 + ((uu - c) / w) ** 2) - ss

    def jac(p):
        amp, c, w, base = p
        z = (uu - c) / w
        q = 1.0 / (1.0 + z**2)
        dq = 2.0 * z * q**2
        return np.column_stack([q, amp * dq / w, amp * dq * z / w, np.ones_like(uu)])

    p0 = np.array([contrast, u[i_peak], 0.5 * width, baseline])
    res = levenberg_marquardt(fun, p0, jac, max_iter=100)
    centre = res.x[1]
    if not (res.converged and uu[0] <= centre <= uu[-1]):
        raise NoPeakFound("local Lorentzian fit failed")
    var = res.covariance()[1, 1]
    return centre, math.sqrt(max(var, 0.0))


def extract_ridge(spectrum, window=None, threshold=0.1, min_uncertainty=1e-3, threads=1):
    """Per-column peak positions of a spectrum map.

    For each column the strongest sample inside ``window`` (Hz; lower frequency
    wins ties) seeds a local Lorentzian fit whose centre is the ridge point and
    whose curvature gives the uncertainty. Columns whose peak rises less than
    ``threshold`` above the median are dropped and recorded in
    ``RidgeTrace.dropped`` as ``(index, reason)``. Uncertainties are floored at
    ``min_uncertainty`` grid steps. Columns are independent, so ``threads > 1``
    gives the same trace.
    """
    y = spectrum.y_axis
    order = np.argsort(y, kind="stable")
    y_sorted = y[order]
    lo, hi = (y_sorted[0], y_sorted[-1]) if window is None else window
    sel = (y_sorted >= lo) & (y_sorted <= hi)
    if not np.any(sel):
        raise ValidationError("ridge window does not intersect the frequency axis")
    ys = y_sorted[sel]
    step = float(np.median(np.diff(ys))) if ys.size > 1 else 1.0
    u = (ys - ys[0]) / step

    def column(ix):
        s = spectrum.values[ix][order][sel]
        baseline = float(np.median(s))
        i_peak = int(np.argmax(s))
        contrast = float(s[i_peak]) - baseline
        if contrast < threshold:
            return "NoPeakFound: contrast below threshold"
        try:
            centre, err = _lorentz_fit(u, s, i_peak, baseline, contrast)
        except NumericalError as exc:
            return f"NoPeakFound: {exc}"
        return ys[0] + centre * step, max(err, min_uncertainty) * step

    indices = range(len(spectrum.x_axis))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(column, indices))
    else:
        outcomes = [column(ix) for ix in indices]

    xs, fs, es, dropped = [], [], [], []
    for ix, out in enumerate(outcomes):
        if isinstance(out, str):
            dropped.append((ix, out))
            continue
        xs.append(float(spectrum.x_axis[ix]))
        fs.append(out[0])
        es.append(out[1])
    return RidgeTrace(np.array(xs), np.array(fs), np.array(es), dropped)


class RidgeExtractor(TransformerMixin, BaseEstimator):
    """Transformer wrapper around :func:`extract_ridge`."""

    def __init__(self, window=None, threshold=0.1, threads=1):
        self.window = window
        self.threshold = threshold
        self.threads = threads

    def fit(self, spectrum=None, y=None):
        return self

    def transform(self, spectrum):
        return extract_ridge(spectrum, self.window, self.threshold, threads=self.threads)


def _prepare(X, y, sigma):
    X, y = check_X_y(np.asarray(X, dtype=float).reshape(-1, 1), y, y_numeric=True)
    x = X[:, 0]
    if sigma is None:
        sigma = np.ones_like(y)
    sigma = np.broadcast_to(np.asarray(sigma, dtype=float), y.shape).copy()
    if np.any(sigma <= 0):
        raise ValidationError("sigma must be positive")
    return x, y, sigma


# -- qubit spectrum -------------------------------------------------------

# detuning in GHz per (nA * mPhi0)
_EPS_GHZ = 2.0 * NANO * MILLI * PHI0 / H / GHZ


class QubitSpectrumRegressor(RegressorMixin, BaseEstimator):
    """Fit gap, persistent current and flux offset to a qubit frequency-vs-flux trace.

    Model: ``f = sqrt(eps^2 + Delta^2) / h`` with
    ``eps = 2 I_p (Phi - n Phi0/2 - offset)``. ``initial`` supplies the starting
    gap/current and the lobe index.
    """

    def __init__(self, initial=None, fit_offset=True, offset_init=0.0, max_iter=200, gtol=1e-8, lambda_init=1e-3):
        self.initial = initial
        self.fit_offset = fit_offset
        self.offset_init = offset_init
        self.max_iter = max_iter
        self.gtol = gtol
        self.lambda_init = lambda_init

    def _reduced_flux(self, x):
        lobe = self._initial().lobe_index
        return (x - 0.5 * lobe * PHI0) / (MILLI * PHI0)

    def _initial(self):
        if self.initial is None:
            return FluxQubitParams(1.3 * GHZ * H, 640 * NANO)
        return self.initial

    @staticmethod
    def _eval(p, u):
        gap, ip = p[0], p[1]
        off = p[2] if p.size > 2 else 0.0
        eps = _EPS_GHZ * ip * (u - off)
        return eps, np.hypot(eps, gap)

    def fit(self, X, y, sigma=None):
        x, y, sigma = _prepare(X, y, sigma)
        if x.size < 3:
            raise ValidationError("need at least 3 points")
        init = self._initial()
        u = self._reduced_flux(x)
        off0 = self.offset_init / (MILLI * PHI0)
        if not (np.any(u - off0 < 0) and np.any(u - off0 > 0)):
            raise ValidationError("trace must span both sides of the sweet spot")
        yg, sg = y / GHZ, sigma / GHZ
        p0 = [init.gap_delta / H / GHZ, init.persistent_current / NANO]
        if self.fit_offset:
            p0.append(off0)

        def fun(p):
            return (self._eval(p, u)[1] - yg) / sg

        def jac(p):
            eps, f = self._eval(p, u)
            off = p[2] if p.size > 2 else 0.0
            cols = [p[0] / f, eps * _EPS_GHZ * (u - off) / f]
            if p.size > 2:
                cols.append(-eps * _EPS_GHZ * p[1] / f)
            return np.column_stack(cols) / sg[:, None]

        res = _run_lm(fun, np.array(p0), jac, self.max_iter, self.gtol, self.lambda_init)
        res.x[0], res.x[1] = abs(res.x[0]), abs(res.x[1])
        names = ["gap_delta", "persistent_current"]
        scales = [GHZ * H, NANO]
        units = {"gap_delta": "J", "persistent_current": "A"}
        if self.fit_offset:
            names.append("flux_offset")
            scales.append(MILLI * PHI0)
            units["flux_offset"] = "Wb"
        self.result_ = _to_si(res, scales, names, units, {"gap_delta_hz": float(res.x[0] * GHZ)})
        self.params_ = res.x.copy()
        self.gap_delta_ = self.result_.parameters["gap_delta"]
        self.persistent_current_ = self.result_.parameters["persistent_current"]
        self.flux_offset_ = self.result_.parameters.get("flux_offset", 0.0)
        self.covariance_ = self.result_.covariance
        self.qubit_params_ = FluxQubitParams(self.gap_delta_, self.persistent_current_, init.lobe_index)
        return self

    def predict(self, X):
        check_is_fitted(self, "params_")
        x = check_array(np.asarray(X, dtype=float).reshape(-1, 1))[:, 0]
        return self._eval(self.params_, self._reduced_flux(x))[1] * GHZ


def fit_qubit_spectrum(trace, initial, fit_offset=True, **kwargs):
    """Fit the bare qubit dispersion to ``trace``; returns a :class:`FitResult`."""
    est = QubitSpectrumRegressor(initial, fit_offset=fit_offset, **kwargs)
    est.fit(trace.x, trace.peak_frequency, trace.peak_uncertainty)
    return est.result_


# -- resonator spectrum ---------------------------------------------------


class ResonatorSpectrumRegressor(RegressorMixin, BaseEstimator):
    """Fit the SQUID-tuned resonator dispersion to a frequency-vs-flux trace.

    Free parameters: bare frequency ``omega_LC``, junction critical current
    ``I_c``, and optionally a flux offset and a flux scale (applied flux
    ``Phi`` maps to SQUID flux ``scale * (Phi - offset)``). The line
    inductance ``L`` is held at ``initial.inductance_l`` because only the
    ratio ``L_SQ / L`` is visible in a spectrum.
    """

    def __init__(
        self,
        initial=None,
        fit_offset=True,
        fit_scale=True,
        offset_init=0.0,
        scale_init=1.0,
        cutoff=DEFAULT_FRUSTRATION_CUTOFF,
        max_iter=200,
        gtol=1e-8,
        lambda_init=1e-3,
    ):
        self.initial = initial
        self.fit_offset = fit_offset
        self.fit_scale = fit_scale
        self.offset_init = offset_init
        self.scale_init = scale_init
        self.cutoff = cutoff
        self.max_iter = max_iter
        self.gtol = gtol
        self.lambda_init = lambda_init

    def _unpack(self, p):
        f_lc, ic = p[0], p[1]
        k = 2
        off = self.offset_init / PHI0
        scale = self.scale_init
        if self.fit_offset:
            off = p[k]
            k += 1
        if self.fit_scale:
            scale = p[k]
        return f_lc, ic, off, scale

    def _model(self, p, u):
        f_lc, ic, off, scale = self._unpack(p)
        x0 = PHI0 / (4.0 * np.pi * ic * MICRO * self._inductance)
        theta = np.pi * scale * (u - off)
        c = np.cos(theta)
        q = 1.0 + x0 / np.abs(c)
        return f_lc * q**-0.5, (f_lc, ic, off, scale, x0, theta, c, q)

    def fit(self, X, y, sigma=None):
        x, y, sigma = _prepare(X, y, sigma)
        if x.size < 5:
            raise ValidationError("need at least 5 points")
        init = self.initial
        if init is None:
            raise ValidationError("initial ResonatorParams guess is required")
        self._inductance = init.inductance_l
        u = x / PHI0
        c0 = np.cos(np.pi * self.scale_init * (u - self.offset_init / PHI0))
        if np.any(np.abs(c0) <= self.cutoff):
            raise ValidationError("trace includes points at SQUID frustration")
        yg, sg = y / GHZ, sigma / GHZ
        p0 = [init.omega_lc / (2 * np.pi) / GHZ, init.squid_critical_current / MICRO]
        if self.fit_offset:
            p0.append(self.offset_init / PHI0)
        if self.fit_scale:
            p0.append(self.scale_init)

        def fun(p):
            return (self._model(p, u)[0] - yg) / sg

        def jac(p):
            f, (f_lc, ic, off, scale, x0, theta, c, q) = self._model(p, u)
            dfdq = -0.5 * f_lc * q**-1.5
            dq_dtheta = x0 * np.sign(c) * np.sin(theta) / c**2
            cols = [q**-0.5, dfdq * (-x0 / (ic * np.abs(c)))]
            if self.fit_offset:
                cols.append(dfdq * dq_dtheta * (-np.pi * scale))
            if self.fit_scale:
                cols.append(dfdq * dq_dtheta * np.pi * (u - off))
            return np.column_stack(cols) / sg[:, None]

        res = _run_lm(fun, np.array(p0, dtype=float), jac, self.max_iter, self.gtol, self.lambda_init)
        res.x[1] = abs(res.x[1])
        names = ["omega_lc", "squid_critical_current"]
        scales = [2 * np.pi * GHZ, MICRO]
        units = {"omega_lc": "rad/s", "squid_critical_current": "A"}
        if self.fit_offset:
            names.append("flux_offset")
            scales.append(PHI0)
            units["flux_offset"] = "Wb"
        if self.fit_scale:
            names.append("flux_scale")
            scales.append(1.0)
            units["flux_scale"] = "1"
        self.result_ = _to_si(res, scales, names, units)
        self.params_ = res.x.copy()
        self._scales = np.asarray(scales)
        self.covariance_ = self.result_.covariance
        pars = self.result_.parameters
        self.omega_lc_ = pars["omega_lc"]
        self.squid_critical_current_ = pars["squid_critical_current"]
        self.flux_offset_ = pars.get("flux_offset", self.offset_init)
        self.flux_scale_ = pars.get("flux_scale", self.scale_init)
        self.resonator_params_ = ResonatorParams.from_omega(
            self.omega_lc_, init.inductance_l, self.squid_critical_current_
        )
        return self

    def predict(self, X):
        check_is_fitted(self, "params_")
        x = check_array(np.asarray(X, dtype=float).reshape(-1, 1))[:, 0]
        return self._model(self.params_, x / PHI0)[0] * GHZ

    def _slope_from(self, p, phi):
        f_lc, ic, off, scale = self._unpack(p)
        res = ResonatorParams.from_omega(2 * np.pi * f_lc * GHZ, self._inductance, ic * MICRO)
        return scale * resonator_slope(scale * (phi - off * PHI0), res, self.cutoff)

    def slope_at(self, phi):
        """d(omega_r)/d(Phi) at applied flux ``phi`` with its 1-sigma uncertainty."""
        check_is_fitted(self, "params_")
        p = self.params_
        value = self._slope_from(p, phi)
        grad = np.empty(p.size)
        for j in range(p.size):
            h = 1e-6 * max(abs(p[j]), 1e-3)
            dp = np.zeros_like(p)
            dp[j] = h
            grad[j] = (self._slope_from(p + dp, phi) - self._slope_from(p - dp, phi)) / (2 * h)
        cov_scaled = self.covariance_ / np.outer(self._scales, self._scales)
        return float(value), float(math.sqrt(max(grad @ cov_scaled @ grad, 0.0)))


def fit_resonator_spectrum(trace, initial, operating_point=None, **kwargs):
    """Fit the resonator dispersion; optionally report the slope at ``operating_point`` (Wb)."""
    est = ResonatorSpectrumRegressor(initial, **kwargs)
    est.fit(trace.x, trace.peak_frequency, trace.peak_uncertainty)
    result = est.result_
    if operating_point is not None:
        slope, err = est.slope_at(operating_point)
        result.extras.update(
            {"operating_point": float(operating_point), "slope_at_operating_point": slope, "slope_uncertainty": err}
        )
    return result


# -- power dependence -----------------------------------------------------

CONVENTIONS = {"N+1/2": 0.5, "N": 0.0}


class PowerDependenceRegressor(RegressorMixin, BaseEstimator):
    """Fit qubit frequency versus on-resonance pump power.

    Model: ``h f = sqrt([eps - g alpha P - c g - b]^2 + Delta^2)`` with
    ``c = 1/2`` (``convention="N+1/2"``) or ``0`` (``"N"``). Only the product
    ``g alpha`` is identified; ``g`` itself is needed only for the ``c g`` term
    and may be omitted when ``c = 0`` or when the offset ``b`` is fitted.
    Points above ``power_cutoff`` (W) are ignored.
    """

    def __init__(
        self,
        gap_delta=None,
        epsilon=0.0,
        g=None,
        convention="N+1/2",
        power_cutoff=0.8e-3,
        fit_offset=False,
        slope_init=None,
        max_iter=200,
        gtol=1e-8,
        lambda_init=1e-3,
    ):
        self.gap_delta = gap_delta
        self.epsilon = epsilon
        self.g = g
        self.convention = convention
        self.power_cutoff = power_cutoff
        self.fit_offset = fit_offset
        self.slope_init = slope_init
        self.max_iter = max_iter
        self.gtol = gtol
        self.lambda_init = lambda_init

    def _constants(self):
        if self.convention not in CONVENTIONS:
            raise ValidationError(f"convention must be one of {sorted(CONVENTIONS)}")
        if self.gap_delta is None:
            raise ValidationError("gap_delta is required")
        c = CONVENTIONS[self.convention]
        if c and self.g is None and not self.fit_offset:
            raise ValidationError("convention 'N+1/2' needs g unless the offset is fitted")
        cg = c * (self.g or 0.0) / H / GHZ
        return self.epsilon / H / GHZ, self.gap_delta / H / GHZ, cg

    def _model(self, p, pm):
        e, d, cg = self._constants()
        b = p[1] if p.size > 1 else 0.0
        x = e - p[0] * pm - cg - b
        return x, np.hypot(x, d)

    def fit(self, X, y, sigma=None):
        x, y, sigma = _prepare(X, y, sigma)
        keep = x <= self.power_cutoff if self.power_cutoff is not None else np.ones_like(x, bool)
        x, y, sigma = x[keep], y[keep], sigma[keep]
        self.n_points_used_ = int(x.size)
        if x.size < 2 + bool(self.fit_offset):
            raise ValidationError("too few points below the power cutoff")
        e, d, cg = self._constants()
        pm = x / MILLI
        yg, sg = y / GHZ, sigma / GHZ
        if self.slope_init is None:
            lin = np.sqrt(np.clip(yg**2 - d**2, 0.0, None))
            k0 = abs(np.polyfit(pm, lin, 1)[0]) if np.ptp(pm) > 0 else 1.0
            k0 = k0 if k0 > 0 else 1.0
        else:
            k0 = self.slope_init * MILLI / GHZ
        p0 = [k0] + ([0.0] if self.fit_offset else [])

        def fun(p):
            return (self._model(p, pm)[1] - yg) / sg

        def jac(p):
            xx, f = self._model(p, pm)
            cols = [-xx * pm / f]
            if p.size > 1:
                cols.append(-xx / f)
            return np.column_stack(cols) / sg[:, None]

        res = _run_lm(fun, np.array(p0, dtype=float), jac, self.max_iter, self.gtol, self.lambda_init)
        names = ["g_alpha"]
        scales = [GHZ * H / MILLI]
        units = {"g_alpha": "J/W"}
        if self.fit_offset:
            names.append("offset")
            scales.append(GHZ * H)
            units["offset"] = "J"
        extras = {
            "convention": self.convention,
            "power_cutoff": self.power_cutoff,
            "slope_hz_per_w": float(res.x[0] * GHZ / MILLI),
            "n_points_used": self.n_points_used_,
        }
        self.result_ = _to_si(res, scales, names, units, extras)
        self.params_ = res.x.copy()
        self.g_alpha_ = self.result_.parameters["g_alpha"]
        self.offset_ = self.result_.parameters.get("offset", 0.0)
        self.slope_ = self.g_alpha_ / H
        self.covariance_ = self.result_.covariance
        return self

    def predict(self, X):
        check_is_fitted(self, "params_")
        x = check_array(np.asarray(X, dtype=float).reshape(-1, 1))[:, 0]
        return self._model(self.params_, x / MILLI)[1] * GHZ


def fit_power_dependence(trace, fixed, convention="N+1/2", power_cutoff=0.8e-3, fit_offset=False, **kwargs):
    """Fit ``g alpha`` to a frequency-vs-power ridge.

    ``fixed`` maps ``"gap_delta"`` and ``"epsilon"`` (J) and optionally ``"g"``.
    """
    est = PowerDependenceRegressor(
        gap_delta=fixed["gap_delta"],
        epsilon=fixed.get("epsilon", 0.0),
        g=fixed.get("g"),
        convention=convention,
        power_cutoff=power_cutoff,
        fit_offset=fit_offset,
        **kwargs,
    )
    est.fit(trace.x, trace.peak_frequency, trace.peak_uncertainty)
    return est.result_
