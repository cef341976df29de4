"""Random waypoint mobility, vectorised over all nodes."""

from __future__ import annotations

import numpy as np


class RandomWaypoint:
    """Each node walks to a uniform waypoint at a uniform speed, pauses, repeats."""

    def __init__(self, positions: np.ndarray, width: float, height: float,
                 speed_range: tuple[float, float], pause_time: float, rng: np.random.Generator):
        self.width = width
        self.height = height
        self.speed_range = speed_range
        self.pause_time = pause_time
        self.rng = rng
        self.positions = np.array(positions, dtype=float)
        n = len(self.positions)
        self.waypoints = self._draw_points(n)
        self.speeds = self._draw_speeds(n)
        self.pause_left = np.zeros(n)

    def _draw_points(self, k: int) -> np.ndarray:
        return self.rng.uniform((0.0, 0.0), (self.width, self.height), size=(k, 2))

    def _draw_speeds(self, k: int) -> np.ndarray:
        lo, hi = self.speed_range
        return self.rng.uniform(lo, hi, size=k) if hi > lo else np.full(k, float(lo))

    def advance(self, dt: float) -> np.ndarray:
        if dt <= 0:
            raise ValueError("dt must be positive")
        pausing = self.pause_left > 0
        self.pause_left[pausing] = np.maximum(self.pause_left[pausing] - dt, 0.0)
        # nodes whose pause just ran out pick their next leg now
        resumed = pausing & (self.pause_left == 0)
        if resumed.any():
            k = int(resumed.sum())
            self.waypoints[resumed] = self._draw_points(k)
            self.speeds[resumed] = self._draw_speeds(k)

        moving = ~pausing & (self.speeds > 0)
        delta = self.waypoints - self.positions
        dist = np.hypot(delta[:, 0], delta[:, 1])
        step = self.speeds * dt
        arrive = moving & (step >= dist)
        travel = moving & ~arrive
        scale = np.divide(step, dist, out=np.zeros_like(dist), where=dist > 0)
        self.positions[travel] += delta[travel] * scale[travel, None]
        self.positions[arrive] = self.waypoints[arrive]
        if arrive.any():
            if self.pause_time > 0:
                self.pause_left[arrive] = self.pause_time
            else:
                k = int(arrive.sum())
                self.waypoints[arrive] = self._draw_points(k)
                self.speeds[arrive] = self._draw_speeds(k)
        return self.positions


def advance_mobility(state: RandomWaypoint, dt: float, reception_range: float):
    """Move every node by ``dt`` seconds; returns positions and the new adjacency."""
    positions = state.advance(dt)
    return positions, connectivity(positions, reception_range)


def connectivity(positions: np.ndarray, reception_range: float) -> np.ndarray:
    """Unit-disk adjacency: edge iff euclidean distance <= range."""
    diff = positions[:, None, :] - positions[None, :, :]
    dist2 = np.einsum("ijk,ijk->ij", diff, diff)
    adj = dist2 <= reception_range * reception_range
    np.fill_diagonal(adj, False)
    return adj
