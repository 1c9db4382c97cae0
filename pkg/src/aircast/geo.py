"""Great-circle distances and exact k-nearest-neighbour queries."""

from __future__ import annotations

import numpy as np

EARTH_RADIUS_KM = 6371.0


def haversine_km(lat1, lon1, lat2, lon2):
    """Great-circle distance in km between coordinate pairs in decimal degrees."""
    lat1, lon1, lat2, lon2 = map(np.radians, (np.asarray(lat1, dtype=np.float64),
                                              np.asarray(lon1, dtype=np.float64),
                                              np.asarray(lat2, dtype=np.float64),
                                              np.asarray(lon2, dtype=np.float64)))
    dlat = lat2 - lat1
    dlon = lon2 - lon1
    a = np.sin(dlat / 2) ** 2 + np.cos(lat1) * np.cos(lat2) * np.sin(dlon / 2) ** 2
    return 2 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.clip(a, 0.0, 1.0)))


def pairwise_distance_m(coords: np.ndarray, query: np.ndarray) -> np.ndarray:
    """Haversine distance matrix [M x N] in meters (query rows, station columns)."""
    coords = np.atleast_2d(np.asarray(coords, dtype=np.float64))
    query = np.atleast_2d(np.asarray(query, dtype=np.float64))
    return 1000.0 * haversine_km(query[:, None, 0], query[:, None, 1],
                                 coords[None, :, 0], coords[None, :, 1])


def knn_query(coords: np.ndarray, query: np.ndarray, k: int):
    """Exact k nearest stations per query point by haversine distance.

    Returns (indices [M x k], distances_m [M x k]) sorted ascending; ties go to
    the lower station index.
    """
    coords = np.atleast_2d(coords)
    n = coords.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k={k} must be in [1, {n}]")
    dist = pairwise_distance_m(coords, query)
    # stable sort keeps lower station index first on exact distance ties
    order = np.argsort(dist, axis=1, kind="stable")[:, :k]
    return order, np.take_along_axis(dist, order, axis=1)
