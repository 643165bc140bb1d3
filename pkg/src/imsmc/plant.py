"""Uncertain discrete-time plant, regular-form transform and forward stepping.

The plant is x+(k+1) = (A~ + D Delta E) x(k) + B~ u(k) + f(k) in the original
coordinates; simulation runs in regular-form coordinates x = T_c * original,
where the input matrix is [0; B1].
"""

from dataclasses import dataclass, field

import numpy as np


class PlantPartitionError(ValueError):
    """Raised when the input matrix cannot be partitioned into regular form."""


@dataclass(frozen=True)
class DisturbanceSchedule:
    """Additive state disturbance in the original coordinates.

    Either a constant vector on the closed step interval [k_on, k_off], or a
    per-step table {k: vector}. Zero outside the configured steps.
    """
    k_on: int = 0
    k_off: int = -1
    vector: np.ndarray | None = None
    table: dict | None = None

    def at(self, k: int, n: int) -> np.ndarray:
        if self.table is not None and k in self.table:
            return np.asarray(self.table[k], dtype=float)
        if self.vector is not None and self.k_on <= k <= self.k_off:
            return np.asarray(self.vector, dtype=float)
        return np.zeros(n)

    @property
    def active(self) -> bool:
        return self.table is not None or (self.vector is not None and self.k_off >= self.k_on)


@dataclass(frozen=True)
class Plant:
    a_tilde: np.ndarray
    b_tilde: np.ndarray
    d: np.ndarray
    e: np.ndarray
    delta: np.ndarray
    disturbance: DisturbanceSchedule = field(default_factory=DisturbanceSchedule)

    def __post_init__(self):
        object.__setattr__(self, "a_tilde", np.atleast_2d(np.asarray(self.a_tilde, dtype=float)))
        object.__setattr__(self, "b_tilde", np.atleast_2d(np.asarray(self.b_tilde, dtype=float)))
        object.__setattr__(self, "d", np.atleast_2d(np.asarray(self.d, dtype=float)))
        object.__setattr__(self, "e", np.atleast_2d(np.asarray(self.e, dtype=float)))
        object.__setattr__(self, "delta", np.atleast_2d(np.asarray(self.delta, dtype=float)))

    @property
    def n_state(self) -> int:
        return self.a_tilde.shape[0]

    @property
    def n_input(self) -> int:
        return self.b_tilde.shape[1]

    @property
    def in_spec(self) -> bool:
        """Whether the stored uncertainty realization satisfies ||Delta||_2 <= 1."""
        return bool(np.linalg.norm(self.delta, 2) <= 1.0 + 1e-12)

    def uncertainty_term(self) -> np.ndarray:
        """D Delta E in the original coordinates."""
        return self.d @ self.delta @ self.e


@dataclass(frozen=True)
class StateVector:
    """State in regular-form coordinates with its (x1, x2) partition."""
    x: np.ndarray
    n_input: int

    @property
    def x1(self) -> np.ndarray:
        return self.x[: self.x.size - self.n_input]

    @property
    def x2(self) -> np.ndarray:
        return self.x[self.x.size - self.n_input:]


@dataclass(frozen=True)
class RegularForm:
    t_c: np.ndarray
    a: np.ndarray
    b: np.ndarray
    d_bar: np.ndarray
    e_bar: np.ndarray
    n_input: int

    @property
    def n_state(self) -> int:
        return self.a.shape[0]

    @property
    def n_red(self) -> int:
        """Dimension of the x1 block."""
        return self.n_state - self.n_input

    @property
    def a11(self) -> np.ndarray:
        m = self.n_red
        return self.a[:m, :m]

    @property
    def a12(self) -> np.ndarray:
        m = self.n_red
        return self.a[:m, m:]

    @property
    def a21(self) -> np.ndarray:
        m = self.n_red
        return self.a[m:, :m]

    @property
    def a22(self) -> np.ndarray:
        m = self.n_red
        return self.a[m:, m:]

    @property
    def b1(self) -> np.ndarray:
        return self.b[self.n_red:, :]

    @property
    def d_bar1(self) -> np.ndarray:
        return self.d_bar[: self.n_red, :]

    @property
    def d_bar2(self) -> np.ndarray:
        return self.d_bar[self.n_red:, :]

    @property
    def e_bar1(self) -> np.ndarray:
        return self.e_bar[:, : self.n_red]

    @property
    def e_bar2(self) -> np.ndarray:
        return self.e_bar[:, self.n_red:]

    def split(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return x[: self.n_red], x[self.n_red:]

    def delta_a(self, delta: np.ndarray) -> np.ndarray:
        """Uncertainty block D_bar Delta E_bar for a concrete realization."""
        return self.d_bar @ np.atleast_2d(delta) @ self.e_bar


def _controllable(a: np.ndarray, b: np.ndarray) -> bool:
    n = a.shape[0]
    blocks = [b]
    for _ in range(n - 1):
        blocks.append(a @ blocks[-1])
    return np.linalg.matrix_rank(np.hstack(blocks)) == n


def to_regular_form(plant: Plant) -> RegularForm:
    """Coordinate transform bringing the input matrix to [0; B1].

    T_c = [[I, -B1~ B2~^-1], [0, I]] where B~ = [B1~; B2~] with B2~ the
    bottom n_u x n_u block. The zero upper block of the transformed input
    matrix is enforced structurally, not left to rounding.
    """
    a_t, b_t = plant.a_tilde, plant.b_tilde
    n, nu = plant.n_state, plant.n_input
    m = n - nu
    if np.linalg.matrix_rank(b_t) < nu:
        raise PlantPartitionError("input matrix is not full column rank")
    b2 = b_t[m:, :]
    if abs(np.linalg.det(b2)) < 1e-12:
        raise PlantPartitionError("plant not partitionable: bottom input block singular")
    if not _controllable(a_t, b_t):
        raise PlantPartitionError("(A~, B~) is not controllable")
    t_c = np.eye(n)
    t_c[:m, m:] = -b_t[:m, :] @ np.linalg.inv(b2)
    t_inv = np.linalg.inv(t_c)
    a = t_c @ a_t @ t_inv
    b = t_c @ b_t
    b[:m, :] = 0.0  # exact regular form
    d_bar = t_c @ plant.d
    e_bar = plant.e @ t_inv
    return RegularForm(t_c=t_c, a=a, b=b, d_bar=d_bar, e_bar=e_bar, n_input=nu)


def step(rf: RegularForm, plant: Plant, x: np.ndarray, u: np.ndarray, k: int) -> np.ndarray:
    """One closed-loop step in regular-form coordinates.

    x(k+1) = (A + D_bar Delta E_bar) x(k) + B u(k) + T_c f(k), with f taken
    from the plant's disturbance schedule.
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    f = plant.disturbance.at(k, plant.n_state)
    return (rf.a + rf.delta_a(plant.delta)) @ x + rf.b @ u + rf.t_c @ f
