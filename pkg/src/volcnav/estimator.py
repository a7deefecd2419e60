"""Sliding-window factor-graph fusion of GNSS, odometry, and absolute SLAM poses.

States are time-indexed SE(3) robot poses in the world frame plus a single
SE(3) alignment variable anchoring the (drifting) SLAM map frame to the
world. GNSS fixes constrain translation only; odometry adds relative-pose
factors between consecutive states; SLAM poses are absolute measurements in
the map frame whose residual runs through the alignment, so the alignment is
estimated jointly at every solve. Asynchronous GNSS/SLAM stamps attach to
the state timeline with interpolation factors.

The solver is a damped Gauss-Newton on the stacked whitened residuals.
Rotation-log Jacobians use the small-residual approximation (exact at the
optimum), which is the standard trade for this graph size. States that fall
out of the time window are folded into a Gaussian prior on their boundary
variables via Schur complement.

A GNSS-frame anchor slot is kept for completeness: simulation produces GNSS
directly in world ENU, so it is the identity by construction and excluded
from optimization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .geo import (
    Pose,
    quat_conjugate,
    quat_exp,
    quat_identity,
    quat_log,
    quat_mul,
    quat_normalize,
    rotation_matrix,
)


@dataclass
class GnssFix:
    t: float
    position: np.ndarray
    covariance: np.ndarray          # 3x3


@dataclass
class OdometryDelta:
    t0: float
    t1: float
    delta: Pose                     # motion of the body between t0 and t1
    covariance: np.ndarray          # 6x6 (xyz, rotvec)


@dataclass
class SlamPose:
    t: float
    pose: Pose                      # absolute pose in the SLAM map frame
    covariance: np.ndarray          # 6x6


def _skew(v):
    return np.array([[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]])


def _sqrt_info(cov: np.ndarray) -> np.ndarray:
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    return np.linalg.cholesky(np.linalg.inv(cov)).T


def _slerp(qa, qb, alpha: float):
    d = float(np.dot(qa, qb))
    if d < 0:
        qb = -np.asarray(qb)
        d = -d
    if d > 0.9995:
        return quat_normalize(qa + alpha * (np.asarray(qb) - qa))
    theta = math.acos(np.clip(d, -1.0, 1.0))
    return quat_normalize(
        (math.sin((1 - alpha) * theta) * np.asarray(qa) + math.sin(alpha * theta) * np.asarray(qb)) / math.sin(theta)
    )


_EYE3 = np.eye(3)
_EYE6 = np.eye(6)


class _PoseVar:
    __slots__ = ("t", "p", "_q", "_R")

    def __init__(self, t, p, q):
        self.t = float(t)
        self.p = np.asarray(p, dtype=float).copy()
        self._q = quat_normalize(q)
        self._R = None

    @property
    def q(self):
        return self._q

    @q.setter
    def q(self, value):
        self._q = value
        self._R = None

    @property
    def R(self):
        if self._R is None:
            self._R = rotation_matrix(self._q)
        return self._R

    def retract(self, delta):
        self.p = self.p + delta[:3]
        self.q = quat_normalize(quat_mul(self._q, quat_exp(delta[3:])))

    def pose(self) -> Pose:
        return Pose(self.p.copy(), self._q.copy(), frame="world", child_frame="base", stamp=self.t)


# Factor residual/Jacobian conventions: residual = [translation; rotation-log],
# pose perturbation is (global dp, right-multiplied rotation-vector dtheta).


class _GnssFactor:
    kind = "gnss-position"
    dim = 3

    def __init__(self, keys, alphas, z, cov):
        self.keys = keys            # one or two pose keys
        self.alphas = alphas        # interpolation weights summing to 1
        self.z = np.asarray(z, dtype=float)
        self.sqrt_info = _sqrt_info(cov)
        self._jac = {k: np.hstack([a * np.eye(3), np.zeros((3, 3))]) for k, a in zip(keys, alphas)}

    def residual(self, get):
        p = sum(a * get(k).p for k, a in zip(self.keys, self.alphas))
        return p - self.z

    def jacobians(self, get):
        return self._jac


class _PriorFactor:
    kind = "prior"
    dim = 6

    def __init__(self, key, p0, q0, cov):
        self.keys = [key]
        self.p0 = np.asarray(p0, dtype=float)
        self.q0 = quat_normalize(q0)
        self.sqrt_info = _sqrt_info(cov)

    def residual(self, get):
        v = get(self.keys[0])
        return np.concatenate([v.p - self.p0, quat_log(quat_mul(quat_conjugate(self.q0), v.q))])

    def jacobians(self, get):
        return {self.keys[0]: _EYE6}


class _OdometryFactor:
    kind = "odometry-relative"
    dim = 6

    def __init__(self, key_a, key_b, delta: Pose, cov):
        self.keys = [key_a, key_b]
        self.z_p = delta.position.copy()
        self.z_q = delta.orientation.copy()
        self.z_R = rotation_matrix(self.z_q)
        self.sqrt_info = _sqrt_info(cov)

    def residual(self, get):
        a, b = get(self.keys[0]), get(self.keys[1])
        dp = a.R.T @ (b.p - a.p)
        dq = quat_mul(quat_conjugate(a.q), b.q)
        return np.concatenate([dp - self.z_p, quat_log(quat_mul(quat_conjugate(self.z_q), dq))])

    def jacobians(self, get):
        a, b = get(self.keys[0]), get(self.keys[1])
        RaT = a.R.T
        dp = RaT @ (b.p - a.p)
        Ja = np.zeros((6, 6))
        Jb = np.zeros((6, 6))
        Ja[:3, :3] = -RaT
        Ja[:3, 3:] = _skew(dp)
        Ja[3:, 3:] = -self.z_R.T
        Jb[:3, :3] = RaT
        Jb[3:, 3:] = _EYE3
        return {self.keys[0]: Ja, self.keys[1]: Jb}


class _SlamFactor:
    kind = "slam-absolute-pose"
    dim = 6

    def __init__(self, pose_keys, alphas, z: Pose, cov):
        self.keys = list(pose_keys) + ["align"]
        self.pose_keys = list(pose_keys)
        self.alphas = alphas
        self.z_p = z.position.copy()
        self.z_q = z.orientation.copy()
        self.z_R = rotation_matrix(self.z_q)
        self.sqrt_info = _sqrt_info(cov)

    def _state(self, get):
        if len(self.pose_keys) == 1:
            v = get(self.pose_keys[0])
            return v.p, v.q
        a, b = get(self.pose_keys[0]), get(self.pose_keys[1])
        alpha = self.alphas[1]
        return (1 - alpha) * a.p + alpha * b.p, _slerp(a.q, b.q, alpha)

    def residual(self, get):
        al = get("align")
        p_k, q_k = self._state(get)
        p_P = al.p + al.R @ self.z_p
        q_P = quat_mul(al.q, self.z_q)
        R_P = al.R @ self.z_R
        r_p = R_P.T @ (p_k - p_P)
        r_t = quat_log(quat_mul(quat_conjugate(q_P), q_k))
        return np.concatenate([r_p, r_t])

    def jacobians(self, get):
        al = get("align")
        p_k, q_k = self._state(get)
        R_A = al.R
        R_P = R_A @ self.z_R

        J_state = np.zeros((6, 6))
        J_state[:3, :3] = R_P.T
        J_state[3:, 3:] = _EYE3

        J_align = np.zeros((6, 6))
        J_align[:3, :3] = -R_P.T
        J_align[:3, 3:] = self.z_R.T @ _skew(R_A.T @ (p_k - al.p))
        J_align[3:, 3:] = -self.z_R.T

        out = {"align": J_align}
        for k, a in zip(self.pose_keys, self.alphas):
            out[k] = a * J_state
        return out


class _MarginalPrior:
    """Linearized Gaussian prior left behind by marginalized states."""

    kind = "prior"

    def __init__(self, keys, lin_points, sqrt_H, rhs):
        self.keys = list(keys)
        self.lin = lin_points       # key -> (p0, q0)
        self.A = sqrt_H             # (s, 6n)
        self.b = rhs                # (s,)
        self.dim = sqrt_H.shape[0]
        self.sqrt_info = np.eye(self.dim)
        self._jac = {k: self.A[:, 6 * i : 6 * (i + 1)] for i, k in enumerate(self.keys)}

    def _delta(self, get):
        parts = []
        for k in self.keys:
            v = get(k)
            p0, q0 = self.lin[k]
            parts.append(v.p - p0)
            parts.append(quat_log(quat_mul(quat_conjugate(q0), v.q)))
        return np.concatenate(parts)

    def residual(self, get):
        return self.A @ self._delta(get) + self.b

    def jacobians(self, get):
        return self._jac


@dataclass
class EstimatorConfig:
    window_duration: float = 10.0
    max_iters: int = 8
    damping: float = 1e-6
    convergence_eps: float = 1e-10
    stamp_tolerance: float = 1e-6
    first_orientation_sigma: float = 2.0       # rad; weak gauge-fixing prior
    first_position_sigma: float = 1e6
    align_prior_sigma: float = 1e3
    add_first_orientation_prior: bool = True


@dataclass
class OptimizeReport:
    iterations: int
    final_cost: float
    converged: bool
    degenerate: bool = False


class FactorGraphEstimator:
    """MAP estimator over a sliding window of poses plus the map alignment."""

    def __init__(self, config: EstimatorConfig | None = None):
        self.config = config or EstimatorConfig()
        self.poses: dict[int, _PoseVar] = {}
        self.align = _PoseVar(0.0, np.zeros(3), quat_identity())
        self.gnss_anchor = Pose.identity(frame="world", child_frame="enu")  # fixed by construction
        self.factors: list = []
        self.events: list[dict] = []
        self._next_id = 0
        self._last_stamp = {"gnss": -math.inf, "odom": -math.inf, "slam": -math.inf}
        self._order: list[int] = []
        self._prop: Pose | None = None
        self._last_H = None
        self._last_index = None
        self.factors.append(
            _PriorFactor("align", np.zeros(3), quat_identity(),
                         np.eye(6) * self.config.align_prior_sigma**2)
        )

    # -- state bookkeeping --------------------------------------------------

    def _new_state(self, t: float, p, q) -> int:
        k = self._next_id
        self._next_id += 1
        self.poses[k] = _PoseVar(t, p, q)
        self._order.append(k)
        if k == 0 and self.config.add_first_orientation_prior:
            cov = np.diag(
                [self.config.first_position_sigma**2] * 3 + [self.config.first_orientation_sigma**2] * 3
            )
            self.factors.append(_PriorFactor(k, p, q, cov))
        return k

    def _latest_key(self):
        return self._order[-1] if self._order else None

    def _state_at(self, t: float):
        """(keys, alphas) attaching stamp t to the state timeline."""
        tol = self.config.stamp_tolerance
        for k in reversed(self._order):
            if abs(self.poses[k].t - t) <= tol:
                return [k], [1.0]
        times = [self.poses[k].t for k in self._order]
        if self._order and t > times[-1]:
            return None
        idx = int(np.searchsorted(times, t))
        if idx == 0 or not self._order:
            return None
        ka, kb = self._order[idx - 1], self._order[idx]
        alpha = (t - times[idx - 1]) / (times[idx] - times[idx - 1])
        return [ka, kb], [1.0 - alpha, alpha]

    def latest_pose(self) -> Pose | None:
        k = self._latest_key()
        return self.poses[k].pose() if k is not None else None

    def current_pose(self) -> Pose | None:
        """Latest solved pose propagated through odometry received since."""
        return self._prop.copy() if self._prop is not None else self.latest_pose()

    def alignment(self) -> Pose:
        return Pose(self.align.p.copy(), self.align.q.copy(), frame="world", child_frame="map")

    # -- measurement ingestion ----------------------------------------------

    def add_measurement(self, m) -> bool:
        if isinstance(m, GnssFix):
            return self._add_gnss(m)
        if isinstance(m, OdometryDelta):
            return self._add_odometry(m)
        if isinstance(m, SlamPose):
            return self._add_slam(m)
        raise TypeError(f"unknown measurement type {type(m).__name__}")

    def _reject(self, sensor: str, t: float) -> bool:
        self.events.append({"event": "measurement-rejected", "sensor": sensor, "t": t,
                            "reason": "out-of-order stamp"})
        return False

    def _add_gnss(self, m: GnssFix) -> bool:
        if m.t < self._last_stamp["gnss"]:
            return self._reject("gnss", m.t)
        self._last_stamp["gnss"] = m.t
        attach = self._state_at(m.t)
        if attach is None:
            if not self._order:
                k = self._new_state(m.t, m.position, quat_identity())
            else:
                last = self.poses[self._latest_key()]
                k = self._new_state(m.t, last.p, last.q)
            keys, alphas = [k], [1.0]
        else:
            keys, alphas = attach
        self.factors.append(_GnssFactor(keys, alphas, m.position, m.covariance))
        if self._prop is None:
            self._prop = self.latest_pose()
        return True

    def _add_odometry(self, m: OdometryDelta) -> bool:
        if m.t1 < self._last_stamp["odom"]:
            return self._reject("odom", m.t1)
        self._last_stamp["odom"] = m.t1
        if not self._order:
            self._new_state(m.t0, np.zeros(3), quat_identity())
        # anchor the earlier end on the state matching t0: asynchronous
        # sensors may have created newer states in between
        key_a = self._latest_key()
        best = math.inf
        for k in reversed(self._order):
            dt = abs(self.poses[k].t - m.t0)
            if dt < best:
                best, key_a = dt, k
            if self.poses[k].t < m.t0 - self.config.stamp_tolerance:
                break
        a = self.poses[key_a]
        p_b = a.p + rotation_matrix(a.q) @ m.delta.position
        q_b = quat_normalize(quat_mul(a.q, m.delta.orientation))
        key_b = self._new_state(m.t1, p_b, q_b)
        self.factors.append(_OdometryFactor(key_a, key_b, m.delta, m.covariance))
        base = self._prop if self._prop is not None else a.pose()
        prop = Pose(
            base.position + rotation_matrix(base.orientation) @ m.delta.position,
            quat_normalize(quat_mul(base.orientation, m.delta.orientation)),
            frame="world", child_frame="base", stamp=m.t1,
        )
        self._prop = prop
        return True

    def _add_slam(self, m: SlamPose) -> bool:
        if m.t < self._last_stamp["slam"]:
            return self._reject("slam", m.t)
        self._last_stamp["slam"] = m.t
        attach = self._state_at(m.t)
        if attach is None:
            R_A = rotation_matrix(self.align.q)
            p = self.align.p + R_A @ m.pose.position
            q = quat_normalize(quat_mul(self.align.q, m.pose.orientation))
            k = self._new_state(m.t, p, q)
            keys, alphas = [k], [1.0]
        else:
            keys, alphas = attach
        self.factors.append(_SlamFactor(keys, alphas, m.pose, m.covariance))
        return True

    # -- optimization ---------------------------------------------------------

    def _get(self, key):
        return self.align if key == "align" else self.poses[key]

    def _cost(self) -> float:
        total = 0.0
        for f in self.factors:
            r = f.sqrt_info @ f.residual(self._get)
            total += float(r @ r)
        return total

    def _assemble(self, index):
        n = 6 * len(index)
        H = np.zeros((n, n))
        g = np.zeros(n)
        for f in self.factors:
            r = f.sqrt_info @ f.residual(self._get)
            jacs = f.jacobians(self._get)
            items = [(index[k], f.sqrt_info @ J) for k, J in jacs.items()]
            for i, Ji in items:
                g[i : i + 6] += Ji.T @ r
                for j, Jj in items:
                    H[i : i + 6, j : j + 6] += Ji.T @ Jj
        return H, g

    def optimize(self, max_iters: int | None = None, damping: float | None = None,
                 convergence_eps: float | None = None) -> OptimizeReport:
        """Damped Gauss-Newton over all window poses and the alignment."""
        max_iters = max_iters or self.config.max_iters
        lam = damping if damping is not None else self.config.damping
        eps = convergence_eps if convergence_eps is not None else self.config.convergence_eps

        if not self._order:
            return OptimizeReport(0, 0.0, True)
        anchored = any(
            f.kind == "gnss-position" or (f.kind == "prior" and any(k != "align" for k in f.keys))
            for f in self.factors
        )
        if not anchored:
            self.events.append({"event": "degeneracy", "reason": "no anchoring factor"})
            return OptimizeReport(0, self._cost(), False, degenerate=True)

        self._marginalize_old_states()

        keys = list(self._order) + ["align"]
        index = {k: 6 * i for i, k in enumerate(keys)}
        cost = self._cost()
        iterations = 0
        converged = False
        degenerate = False
        H = None
        for _ in range(max_iters):
            iterations += 1
            H, g = self._assemble(index)
            accepted = False
            for _try in range(8):
                Hd = H + lam * (np.diag(np.diag(H)) + 1e-12 * np.eye(H.shape[0]))
                try:
                    delta = scipy.linalg.cho_solve(scipy.linalg.cho_factor(Hd), -g)
                except np.linalg.LinAlgError:
                    lam = max(lam, 1e-9) * 10.0
                    if lam > 1e6:
                        break
                    continue
                backup = {k: (self._get(k).p.copy(), self._get(k).q.copy()) for k in keys}
                for k in keys:
                    self._get(k).retract(delta[index[k] : index[k] + 6])
                new_cost = self._cost()
                if new_cost <= cost + 1e-15:
                    accepted = True
                    improvement = cost - new_cost
                    cost = new_cost
                    lam = max(lam / 4.0, 1e-12)
                    if improvement < eps * max(1.0, cost):
                        converged = True
                    break
                for k in keys:
                    self._get(k).p, self._get(k).q = backup[k]
                lam = max(lam, 1e-9) * 10.0
                if lam > 1e6:
                    break
            if not accepted:
                degenerate = lam > 1e6
                if degenerate:
                    self.events.append({"event": "degeneracy", "reason": "damping floor reached"})
                converged = not degenerate
                break
            if converged:
                break

        # H from the last accepted linearization is close enough for marginals
        self._last_H = H if H is not None else self._assemble(index)[0]
        self._last_index = index
        k = self._latest_key()
        self._prop = self.poses[k].pose()
        return OptimizeReport(iterations, cost, converged, degenerate)

    # -- marginalization ------------------------------------------------------

    def _marginalize_old_states(self):
        if not self._order:
            return
        newest = self.poses[self._order[-1]].t
        cutoff = newest - self.config.window_duration
        drop = [k for k in self._order if self.poses[k].t < cutoff]
        if not drop or len(drop) >= len(self._order):
            return
        drop_set = set(drop)
        affected = [f for f in self.factors if any(k in drop_set for k in f.keys)]
        boundary = []
        for f in affected:
            for k in f.keys:
                if k not in drop_set and k not in boundary:
                    boundary.append(k)
        keys = drop + boundary
        index = {k: 6 * i for i, k in enumerate(keys)}
        n = 6 * len(keys)
        H = np.zeros((n, n))
        g = np.zeros(n)
        for f in affected:
            r = f.sqrt_info @ f.residual(self._get)
            jacs = f.jacobians(self._get)
            items = [(index[k], f.sqrt_info @ J) for k, J in jacs.items()]
            for i, Ji in items:
                g[i : i + 6] += Ji.T @ r
                for j, Jj in items:
                    H[i : i + 6, j : j + 6] += Ji.T @ Jj
        m = 6 * len(drop)
        H_mm, H_mb = H[:m, :m], H[:m, m:]
        H_bb, g_m, g_b = H[m:, m:], g[:m], g[m:]
        H_mm_reg = H_mm + 1e-9 * np.eye(m)
        sol = np.linalg.solve(H_mm_reg, np.hstack([H_mb, g_m[:, None]]))
        H_prior = H_bb - H_mb.T @ sol[:, :-1]
        g_prior = g_b - H_mb.T @ sol[:, -1]
        w, U = np.linalg.eigh((H_prior + H_prior.T) / 2.0)
        keep = w > max(1e-10, w.max() * 1e-12) if w.size else w > 0
        A = (U[:, keep] * np.sqrt(w[keep])).T
        b = np.divide(1.0, np.sqrt(w[keep])) * (U[:, keep].T @ g_prior)
        if boundary and A.shape[0] > 0:
            lin = {k: (self._get(k).p.copy(), self._get(k).q.copy()) for k in boundary}
            self.factors.append(_MarginalPrior(boundary, lin, A, b))
        self.factors = [f for f in self.factors if not any(k in drop_set for k in f.keys)]
        for k in drop:
            del self.poses[k]
        self._order = [k for k in self._order if k not in drop_set]

    # -- queries ----------------------------------------------------------------

    def marginal_covariance(self, key) -> np.ndarray | None:
        """6x6 covariance block at the last linearization point."""
        if self._last_H is None or key not in self._last_index:
            return None
        i = self._last_index[key]
        try:
            factor = scipy.linalg.cho_factor(self._last_H + 1e-12 * np.eye(self._last_H.shape[0]))
        except np.linalg.LinAlgError:
            return None
        cols = np.zeros((self._last_H.shape[0], 6))
        cols[i : i + 6] = np.eye(6)
        return scipy.linalg.cho_solve(factor, cols)[i : i + 6]

    def state_history(self):
        """(t, Pose) for every state currently in the window, time-ordered."""
        return [(self.poses[k].t, self.poses[k].pose()) for k in self._order]
