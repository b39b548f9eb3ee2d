"""2D site geometry and image-method ray tracing.

Walls are line segments with a complex reflection coefficient; propagation
between any two points is the coherent sum of the direct path (when
unobstructed) and all specular paths up to a configurable reflection order,
found by recursively mirroring the source across wall lines and validating
each candidate with segment-intersection tests.

Channel components are synthesized per source-destination pair:

    h_u[k, m]  direct + wall + unloaded-panel paths, BS antenna m to user k
    h_0[n, m]  wall paths only, BS antenna m to RIS port n
    g_l[k, n]  wall paths only, RIS port n to user k

The unloaded RIS panel acts as one extra specular reflector for h_u; it is
excluded from port traces because the ports sit on the panel itself.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .channel import ChannelComponents
from .constants import SPEED_OF_LIGHT
from .coupling import DEFAULT_SELF_IMPEDANCE, synthesize_mutual_impedance
from .errors import GeometryError

GEOM_EPS = 1e-9  # meters; tolerance for on-wall and intersection tests

MAX_REFLECTION_ORDER = 5


@dataclass(frozen=True)
class Wall:
    """Line segment reflector with a constant complex reflection coefficient."""

    p1: tuple
    p2: tuple
    reflection: complex = -0.6

    def __post_init__(self):
        p1 = np.asarray(self.p1, dtype=float)
        p2 = np.asarray(self.p2, dtype=float)
        object.__setattr__(self, "p1", p1)
        object.__setattr__(self, "p2", p2)
        if not (np.all(np.isfinite(p1)) and np.all(np.isfinite(p2))):
            raise ValueError("wall endpoints must be finite")
        if np.linalg.norm(p2 - p1) <= GEOM_EPS:
            raise ValueError("wall segment has (near-)zero length")
        if abs(self.reflection) > 1.0 + 1e-12:
            raise ValueError("|reflection coefficient| must be <= 1")


@dataclass(frozen=True)
class PropagationPath:
    """One specular path: unfolded length, cumulative reflection product, order."""

    length: float
    product: complex
    order: int
    points: tuple = ()  # reflection points, for inspection/trace output


@dataclass(frozen=True)
class ObservationGrid:
    """Rectangular grid of field observation points."""

    origin: tuple
    spacing: tuple  # (dx, dy) meters
    counts: tuple  # (nx, ny)

    def points(self) -> np.ndarray:
        ox, oy = self.origin
        dx, dy = self.spacing
        nx, ny = self.counts
        pts = [
            (ox + i * dx, oy + j * dy) for j in range(ny) for i in range(nx)
        ]
        return np.asarray(pts, dtype=float)


@dataclass(frozen=True)
class SceneDescription:
    """2D scene: walls, BS array, RIS port line, users, optional grid.

    The optional ``unloaded_panel`` wall models the scattering of the RIS
    structure with all loads removed; it participates only in BS-to-user
    traces.  ``ris_self_impedance`` seeds the synthetic port coupling matrix.
    """

    walls: tuple
    bs_elements: np.ndarray  # (M, 2)
    ris_ports: np.ndarray  # (N, 2)
    user_positions: np.ndarray  # (K, 2)
    frequency: float
    max_reflection_order: int = 2
    grid: ObservationGrid | None = None
    unloaded_panel: Wall | None = None
    ris_self_impedance: complex = DEFAULT_SELF_IMPEDANCE

    def __post_init__(self):
        object.__setattr__(self, "walls", tuple(self.walls))
        for name in ("bs_elements", "ris_ports", "user_positions"):
            arr = np.atleast_2d(np.asarray(getattr(self, name), dtype=float))
            object.__setattr__(self, name, arr)
            if arr.shape[0] < 1 or arr.shape[1] != 2:
                raise ValueError(f"{name} must be a nonempty list of 2D points")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite positions")
        if self.frequency <= 0:
            raise ValueError("frequency must be positive")
        if not 0 <= self.max_reflection_order <= MAX_REFLECTION_ORDER:
            raise ValueError(
                f"max_reflection_order must be in [0, {MAX_REFLECTION_ORDER}]"
            )

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.frequency

    @property
    def dims(self) -> tuple[int, int, int]:
        """(K users, M antennas, N ports)."""
        return (
            self.user_positions.shape[0],
            self.bs_elements.shape[0],
            self.ris_ports.shape[0],
        )

    @property
    def ris_spacing(self) -> float:
        ports = self.ris_ports
        if ports.shape[0] < 2:
            return self.wavelength / 2.0
        return float(np.linalg.norm(ports[1] - ports[0]))


def _mirror(point: np.ndarray, wall: Wall) -> np.ndarray:
    d = wall.p2 - wall.p1
    n = np.array([-d[1], d[0]])
    n = n / np.linalg.norm(n)
    return point - 2.0 * np.dot(point - wall.p1, n) * n


def _segment_wall_intersection(a, b, wall):
    """Parameters (t, u) with a + t(b-a) = p1 + u(p2-p1), or None if parallel."""
    r = b - a
    s = wall.p2 - wall.p1
    denom = r[0] * s[1] - r[1] * s[0]
    if abs(denom) < 1e-15 * (np.linalg.norm(r) * np.linalg.norm(s) + 1e-300):
        return None
    q = wall.p1 - a
    t = (q[0] * s[1] - q[1] * s[0]) / denom
    u = (q[0] * r[1] - q[1] * r[0]) / denom
    return t, u


def _leg_blocked(a, b, walls, skip=()):
    """True when segment a->b crosses any wall not in ``skip``.

    Crossings within GEOM_EPS of the leg endpoints do not count: reflection
    points terminate legs exactly on their anchor walls.
    """
    length = np.linalg.norm(b - a)
    if length <= GEOM_EPS:
        return True
    t_eps = GEOM_EPS / length
    for wall in walls:
        if any(wall is w for w in skip):
            continue
        hit = _segment_wall_intersection(a, b, wall)
        if hit is None:
            continue
        t, u = hit
        if t_eps < t < 1.0 - t_eps and -GEOM_EPS <= u <= 1.0 + GEOM_EPS:
            return True
    return False


def _point_on_wall(point, wall) -> bool:
    d = wall.p2 - wall.p1
    length = np.linalg.norm(d)
    rel = point - wall.p1
    u = np.dot(rel, d) / (length**2)
    if u < -GEOM_EPS or u > 1.0 + GEOM_EPS:
        return False
    perp = rel - u * d
    return np.linalg.norm(perp) <= GEOM_EPS


def _wall_sequences(walls, order):
    """All wall-index sequences of the given order without immediate repeats."""
    if order == 0:
        yield ()
        return
    idx = range(len(walls))

    def extend(prefix):
        if len(prefix) == order:
            yield prefix
            return
        for i in idx:
            if prefix and prefix[-1] == i:
                continue
            yield from extend(prefix + (i,))

    yield from extend(())


def trace_paths(
    scene: SceneDescription,
    src,
    dst,
    walls=None,
    max_order: int | None = None,
) -> list[PropagationPath]:
    """All specular paths from src to dst up to the scene's reflection order.

    Recursive image sources generate candidates; each is validated by
    intersection tests on every leg.  Results are sorted by (order, length).
    ``walls`` overrides the traced wall set (used internally to include or
    exclude the unloaded RIS panel).
    """
    src = np.asarray(src, dtype=float)
    dst = np.asarray(dst, dtype=float)
    if walls is None:
        walls = scene.walls
    order_cap = scene.max_reflection_order if max_order is None else max_order
    if order_cap > MAX_REFLECTION_ORDER:
        raise ValueError(f"reflection order capped at {MAX_REFLECTION_ORDER}")
    if np.linalg.norm(dst - src) <= GEOM_EPS:
        raise GeometryError("src and dst coincide")
    for wall in walls:
        if _point_on_wall(src, wall) or _point_on_wall(dst, wall):
            raise GeometryError("src or dst lies on a wall segment")

    paths = []
    if not _leg_blocked(src, dst, walls):
        paths.append(
            PropagationPath(
                length=float(np.linalg.norm(dst - src)),
                product=1.0 + 0.0j,
                order=0,
            )
        )

    for order in range(1, order_cap + 1):
        for seq in _wall_sequences(walls, order):
            candidate = _validate_sequence(src, dst, walls, seq)
            if candidate is not None:
                paths.append(candidate)

    paths.sort(key=lambda p: (p.order, p.length))
    return paths


def _validate_sequence(src, dst, walls, seq):
    """Check one ordered wall sequence; return its path or None."""
    order = len(seq)
    images = [src]
    for i in seq:
        images.append(_mirror(images[-1], walls[i]))

    # Backtrack reflection points from the last wall toward the source.
    points = [None] * order
    target = dst
    for j in range(order - 1, -1, -1):
        wall = walls[seq[j]]
        hit = _segment_wall_intersection(images[j + 1], target, wall)
        if hit is None:
            return None
        t, u = hit
        if not (GEOM_EPS < t < 1.0 - GEOM_EPS):
            return None
        if not (-GEOM_EPS <= u <= 1.0 + GEOM_EPS):
            return None
        points[j] = images[j + 1] + t * (target - images[j + 1])
        target = points[j]

    # Visibility of every physical leg, skipping each leg's anchor walls.
    stations = [src] + points + [dst]
    anchors = [None] + [walls[i] for i in seq] + [None]
    product = 1.0 + 0.0j
    for i in seq:
        product *= walls[i].reflection
    for leg in range(order + 1):
        a, b = stations[leg], stations[leg + 1]
        skip = tuple(w for w in (anchors[leg], anchors[leg + 1]) if w is not None)
        if np.linalg.norm(b - a) <= GEOM_EPS:
            return None
        if _leg_blocked(a, b, walls, skip=skip):
            return None

    length = float(np.linalg.norm(dst - images[-1]))
    return PropagationPath(
        length=length,
        product=product,
        order=order,
        points=tuple(tuple(p) for p in points),
    )


def path_gain(path: PropagationPath, frequency: float) -> complex:
    """Complex field contribution of one path: product * exp(-jkd) / d."""
    if path.length <= 0.0:
        raise ValueError("path length must be positive")
    k = 2.0 * np.pi * frequency / SPEED_OF_LIGHT
    return path.product * np.exp(-1j * k * path.length) / path.length


def field_between(scene, src, dst, walls=None) -> complex:
    """Coherent sum of all path gains between two points."""
    total = 0.0 + 0.0j
    for path in trace_paths(scene, src, dst, walls=walls):
        total += path_gain(path, scene.frequency)
    return total


def synthesize_components(scene: SceneDescription) -> ChannelComponents:
    """Trace every source-destination pair and build the channel substrate.

    Port traces exclude the unloaded panel (ports sit on it); BS-to-user
    traces include it so the baseline channel carries the unloaded-RIS
    scattering.  The port coupling matrix comes from the induced-EMF model.
    """
    k, m, n = scene.dims
    walls_user = scene.walls + (
        (scene.unloaded_panel,) if scene.unloaded_panel is not None else ()
    )
    h_u = np.zeros((k, m), dtype=complex)
    for ki, user in enumerate(scene.user_positions):
        for mi, ant in enumerate(scene.bs_elements):
            h_u[ki, mi] = field_between(scene, ant, user, walls=walls_user)
    h_0 = np.zeros((n, m), dtype=complex)
    for ni, port in enumerate(scene.ris_ports):
        for mi, ant in enumerate(scene.bs_elements):
            h_0[ni, mi] = field_between(scene, ant, port, walls=scene.walls)
    g_l = np.zeros((k, n), dtype=complex)
    for ki, user in enumerate(scene.user_positions):
        for ni, port in enumerate(scene.ris_ports):
            g_l[ki, ni] = field_between(scene, port, user, walls=scene.walls)
    if not (np.any(h_u) or np.any(h_0) or np.any(g_l)):
        warnings.warn(
            "all traced channel matrices are zero (fully occluded scene)",
            stacklevel=2,
        )
    z_ll = synthesize_mutual_impedance(
        n, scene.ris_spacing, scene.frequency, scene.ris_self_impedance
    )
    return ChannelComponents(
        h_u=h_u, h_0=h_0, g_l=g_l, z_ll=z_ll, frequency=scene.frequency
    )


def with_users(scene: SceneDescription, user_positions) -> SceneDescription:
    """Same scene with the user set replaced (perturbation studies, grids)."""
    return replace(
        scene, user_positions=np.atleast_2d(np.asarray(user_positions, dtype=float))
    )


def grid_scene(scene: SceneDescription) -> SceneDescription:
    """Scene whose 'users' are the observation grid points."""
    if scene.grid is None:
        raise ValueError("scene has no observation grid")
    return with_users(scene, scene.grid.points())


# --- default site -----------------------------------------------------------

DEFAULT_FREQUENCY = 5.8e9

# Orientation of the RIS panel line, degrees from the x axis.  Chosen so the
# panel specularly couples the BS region to the user region.
DEFAULT_PANEL_ANGLE_DEG = 103.0

DEFAULT_WALL_REFLECTION = -0.6
DEFAULT_PANEL_REFLECTION = -0.6

DEFAULT_USERS = ((1.30, 3.13), (1.80, 2.38), (2.30, 1.63))
DEFAULT_BS_CENTER = (6.0, -3.0)


def make_ris_line(
    center=(0.0, 0.0),
    n_ports: int = 20,
    spacing: float | None = None,
    angle_deg: float = DEFAULT_PANEL_ANGLE_DEG,
    frequency: float = DEFAULT_FREQUENCY,
    reflection: complex = DEFAULT_PANEL_REFLECTION,
):
    """Uniform port line centered at ``center`` plus its panel reflector wall."""
    lam = SPEED_OF_LIGHT / frequency
    if spacing is None:
        spacing = lam / 2.0
    center = np.asarray(center, dtype=float)
    theta = math.radians(angle_deg)
    direction = np.array([math.cos(theta), math.sin(theta)])
    offsets = (np.arange(n_ports) - (n_ports - 1) / 2.0) * spacing
    ports = center + offsets[:, None] * direction
    half_extent = n_ports * spacing / 2.0
    panel = Wall(
        p1=tuple(center - half_extent * direction),
        p2=tuple(center + half_extent * direction),
        reflection=reflection,
    )
    return ports, panel


def default_scene(
    n_ports: int = 20,
    max_reflection_order: int = 2,
    frequency: float = DEFAULT_FREQUENCY,
    with_grid: bool = True,
) -> SceneDescription:
    """Built-in corridor-junction scene.

    Three BS antennas spaced half a wavelength around (6, -3), a 20-port RIS
    line centered at the origin, three users in the upper arm, and corridor
    walls placed so all direct links stay clear.  All wall coefficients are
    declared assumptions, not measured values.
    """
    lam = SPEED_OF_LIGHT / frequency
    bs_center = np.asarray(DEFAULT_BS_CENTER, dtype=float)
    offsets = (np.arange(3) - 1.0) * lam / 2.0
    bs = bs_center + np.stack([offsets, np.zeros(3)], axis=1)
    ports, panel = make_ris_line(
        n_ports=n_ports, frequency=frequency
    )
    walls = (
        Wall(p1=(-1.0, -4.0), p2=(-1.0, 4.0), reflection=DEFAULT_WALL_REFLECTION),
        Wall(p1=(-1.0, -4.0), p2=(7.0, -4.0), reflection=DEFAULT_WALL_REFLECTION),
        Wall(p1=(7.0, -4.0), p2=(7.0, 1.0), reflection=DEFAULT_WALL_REFLECTION),
        Wall(p1=(-1.0, 4.0), p2=(3.0, 4.0), reflection=DEFAULT_WALL_REFLECTION),
    )
    grid = (
        ObservationGrid(origin=(0.5, 0.5), spacing=(0.15, 0.15), counts=(18, 18))
        if with_grid
        else None
    )
    return SceneDescription(
        walls=walls,
        bs_elements=bs,
        ris_ports=ports,
        user_positions=np.asarray(DEFAULT_USERS, dtype=float),
        frequency=frequency,
        max_reflection_order=max_reflection_order,
        grid=grid,
        unloaded_panel=panel,
    )
