"""
Core domain models for OPF data distillation.

These Pydantic models represent the core entities:
- FeederModel: A radial single-phase feeder with DER placement
- GridMatrices: The linearized voltage sensitivities R and X
- OpfSpec: Everything the soft-constrained OPF needs besides the data vector
- OpfSolution: Minimizer, multipliers and status of one OPF solve
- ApgConfig: Settings for the proximal gradient engines
- DistillationMap: A fitted selection/reconstruction pair W = C·Sᵀ
- SyntheticConfig: Settings for the synthetic scenario generator
"""

from enum import Enum
from typing import Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class FeatureKind(str, Enum):
    """Kind of an OPF feature: net active injection or reactive demand."""

    P_NET = "p_net"
    Q_LOAD = "q_load"


class Method(str, Enum):
    """Supported distillation methods."""

    PCA = "pca"
    DEIM = "deim"
    GL = "gl"
    GL2 = "gl2"
    BGL = "bgl"
    BGL2 = "bgl2"

    @property
    def is_bilevel(self) -> bool:
        return self in (Method.BGL, Method.BGL2)

    @property
    def uses_lambda(self) -> bool:
        return self not in (Method.PCA, Method.DEIM)


class GroupMode(str, Enum):
    """How columns of W are grouped by the group-lasso penalty."""

    COLUMN = "column"
    BUS = "bus"


class SolverStatus(str, Enum):
    """Termination status of an OPF solve."""

    OPTIMAL = "optimal"
    MAX_ITER = "max_iter"
    INFEASIBLE_NUMERICS = "infeasible_numerics"
    INFEASIBLE = "infeasible"


class FeatureInfo(BaseModel):
    """Identity of one OPF feature (one row of Θ)."""

    model_config = ConfigDict(frozen=True)

    feature_id: str
    kind: FeatureKind
    bus: int = Field(..., ge=0, description="Bus id as written in the scenario file")


# ============================================================================
# Feeder
# ============================================================================


class Line(BaseModel):
    """A feeder line with per-unit series impedance."""

    model_config = ConfigDict(frozen=True)

    from_bus: int = Field(..., ge=0, description="Sending-end bus (internal id)")
    to_bus: int = Field(..., ge=0, description="Receiving-end bus (internal id)")
    r: float = Field(..., description="Series resistance in pu")
    x: float = Field(..., description="Series reactance in pu")

    @field_validator("r", "x")
    @classmethod
    def validate_impedance(cls, v: float) -> float:
        if not np.isfinite(v) or v < 0:
            raise ValueError("line impedance must be finite and nonnegative")
        return v


class FeederModel(BaseModel):
    """
    Radial single-phase feeder.

    Bus 0 is the substation; buses 1..N host loads and possibly one DER each.

    Attributes:
        n_buses: Bus count N+1 including the substation
        lines: Exactly N lines forming a tree rooted at bus 0
        v0: Substation voltage magnitude in pu
        der_buses: Buses hosting a DER (values in 1..N)
        der_qmax: Reactive rating per DER in pu
        v_max_dev: Allowed voltage deviation from v0 in pu
        bus_labels: Original bus ids from input files, indexed by internal id
    """

    model_config = ConfigDict(frozen=True)

    n_buses: int = Field(..., ge=2, description="Number of buses including the substation")
    lines: List[Line] = Field(..., description="Feeder lines")
    v0: float = Field(default=1.0, gt=0, description="Substation voltage in pu")
    der_buses: List[int] = Field(default_factory=list, description="DER bus ids")
    der_qmax: List[float] = Field(default_factory=list, description="DER ratings in pu")
    v_max_dev: float = Field(default=0.03, gt=0, description="Voltage deviation limit in pu")
    bus_labels: Optional[List[int]] = Field(
        default=None, description="Original bus ids indexed by internal id"
    )

    @model_validator(mode="after")
    def validate_feeder(self) -> "FeederModel":
        n = self.n_buses - 1
        for line in self.lines:
            if line.from_bus > n or line.to_bus > n:
                raise ValueError(f"line {line.from_bus}-{line.to_bus} references unknown bus")
        if len(self.der_buses) != len(self.der_qmax):
            raise ValueError("der_buses and der_qmax must have the same length")
        if len(set(self.der_buses)) != len(self.der_buses):
            raise ValueError("DER buses must be unique")
        for bus in self.der_buses:
            if not 1 <= bus <= n:
                raise ValueError(f"DER bus {bus} outside 1..{n}")
        for qmax in self.der_qmax:
            if not np.isfinite(qmax) or qmax < 0:
                raise ValueError("DER ratings must be finite and nonnegative")
        if self.bus_labels is not None and len(self.bus_labels) != self.n_buses:
            raise ValueError("bus_labels must name every bus")
        return self

    @property
    def n(self) -> int:
        """Number of non-substation buses N."""
        return self.n_buses - 1

    @property
    def n_der(self) -> int:
        """Number of DERs G."""
        return len(self.der_buses)

    def label(self, bus: int) -> int:
        """Original id of an internal bus."""
        return self.bus_labels[bus] if self.bus_labels is not None else bus


class GridMatrices(BaseModel):
    """Linearized voltage sensitivities v ≈ Rp + Xq + v0·1 (both N×N, symmetric PD)."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    R: np.ndarray
    X: np.ndarray

    @property
    def n(self) -> int:
        return int(self.R.shape[0])


# ============================================================================
# OPF
# ============================================================================


class IpmOptions(BaseModel):
    """Interior point solver settings."""

    model_config = ConfigDict(frozen=True)

    gap_tol: float = Field(default=1e-9, gt=0, description="Duality gap tolerance")
    max_iter: int = Field(default=100, ge=1, description="Maximum interior point iterations")
    polish: bool = Field(default=True, description="Refine the solution on its active set")


class OpfSpec(BaseModel):
    """
    Soft-constrained OPF definition, minus the data vector θ.

    The data vector θ holds the entries of [p; q^ℓ] (length 2N) listed in
    ``feature_index``; every other entry is fixed to ``fixed_theta``.

    Attributes:
        grid: R and X matrices
        der_buses: DER bus ids in 1..N (G entries)
        qmax: DER ratings (G-vector)
        v_max_dev: Voltage deviation limit v̄
        nu: Quadratic slack penalty ν
        rho: Linear slack penalty ρ
        feature_index: Strictly increasing indices into [p; q^ℓ]
        fixed_theta: Values of [p; q^ℓ] for entries outside feature_index
        ipm: Interior point settings
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    grid: GridMatrices
    der_buses: List[int]
    qmax: np.ndarray
    v_max_dev: float = Field(default=0.03, gt=0)
    nu: float = Field(default=1000.0, gt=0)
    rho: float = Field(default=100.0, gt=0)
    feature_index: np.ndarray
    fixed_theta: np.ndarray
    ipm: IpmOptions = Field(default_factory=IpmOptions)

    @model_validator(mode="after")
    def validate_spec(self) -> "OpfSpec":
        n = self.grid.n
        if len(set(self.der_buses)) != len(self.der_buses):
            raise ValueError("DER buses must be unique")
        if any(not 1 <= b <= n for b in self.der_buses):
            raise ValueError(f"DER buses must lie in 1..{n}")
        if self.qmax.shape != (len(self.der_buses),):
            raise ValueError("qmax must have one entry per DER")
        if self.fixed_theta.shape != (2 * n,):
            raise ValueError(f"fixed_theta must have length {2 * n}")
        idx = self.feature_index
        if idx.ndim != 1 or (idx.size and (idx.min() < 0 or idx.max() >= 2 * n)):
            raise ValueError(f"feature_index entries must lie in 0..{2 * n - 1}")
        if idx.size > 1 and np.any(np.diff(idx) <= 0):
            raise ValueError("feature_index must be strictly increasing")
        return self

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def g(self) -> int:
        return len(self.der_buses)

    @property
    def p(self) -> int:
        return int(self.feature_index.size)

    @property
    def incidence(self) -> np.ndarray:
        """N×G DER incidence matrix E."""
        E = np.zeros((self.n, self.g))
        for j, bus in enumerate(self.der_buses):
            E[bus - 1, j] = 1.0
        return E

    def full_theta(self, theta: np.ndarray) -> np.ndarray:
        """Scatter θ (length P) into the full [p; q^ℓ] vector."""
        full = self.fixed_theta.copy()
        full[self.feature_index] = theta
        return full

    def split(self, theta: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Return (p, q^ℓ) for a data vector θ."""
        full = self.full_theta(theta)
        return full[: self.n], full[self.n :]

    def with_fixed(self, fixed_theta: np.ndarray) -> "OpfSpec":
        return self.model_copy(update={"fixed_theta": np.asarray(fixed_theta, dtype=float)})


class OpfSolution(BaseModel):
    """
    Result of one OPF solve.

    Rows of ``duals`` and ``slacks`` follow the QP inequality layout: N upper
    voltage rows, N lower voltage rows, G upper rating rows, G lower rating rows,
    then the s ≥ 0 bound.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    qg: np.ndarray
    s: float
    objective: float
    duals: np.ndarray
    slacks: np.ndarray
    status: SolverStatus
    iterations: int = 0
    kkt_residual: float = 0.0

    @property
    def x(self) -> np.ndarray:
        """Stacked minimizer [q^g; s]."""
        return np.append(self.qg, self.s)

    @property
    def is_optimal(self) -> bool:
        return self.status == SolverStatus.OPTIMAL


# ============================================================================
# Proximal gradient engines
# ============================================================================


class ApgConfig(BaseModel):
    """
    Settings for the accelerated proximal gradient engines.

    Attributes:
        step_size: μ for the convex engine (None derives 1/L from the loss)
        step_size_bar: Initial μ̄ for backtracking in the nonconvex engine
        lam: Group penalty weight λ
        max_iter: Iteration cap
        tol: Relative tolerance on cost and iterate change
        eta: Averaging weight η of the monitored cost
        delta: Sufficient-decrease constant δ
        seed: Seed for the standard normal initialization
        init: Initial iterate ("normal", "zero" or "identity")
        restart: Reset momentum when an extrapolated step raises the cost
        bb_step: Start backtracking from a Barzilai-Borwein step estimate
        backtrack_factor: Step shrink factor during backtracking
        max_backtracks: Backtracking cap per step
        zero_threshold: Group norm under which a column group counts as zero
    """

    model_config = ConfigDict(frozen=True)

    step_size: Optional[float] = Field(default=None, description="Step size μ")
    step_size_bar: float = Field(default=1.0, description="Initial step size μ̄")
    lam: float = Field(default=0.0, ge=0, description="Regularization weight λ")
    max_iter: int = Field(default=500, ge=1)
    tol: float = Field(default=1e-6, gt=0)
    eta: float = Field(default=0.8)
    delta: float = Field(default=1e-4)
    seed: int = Field(default=0)
    init: Literal["normal", "zero", "identity"] = Field(default="normal")
    restart: bool = Field(default=True)
    bb_step: bool = Field(default=True)
    backtrack_factor: float = Field(default=0.5, gt=0, lt=1)
    max_backtracks: int = Field(default=30, ge=0)
    zero_threshold: float = Field(default=1e-6, ge=0)

    @field_validator("step_size", "step_size_bar")
    @classmethod
    def validate_step(cls, v: Optional[float]) -> Optional[float]:
        if v is not None and v <= 0:
            raise ValueError("step sizes must be positive")
        return v

    @field_validator("eta")
    @classmethod
    def validate_eta(cls, v: float) -> float:
        if not 0 <= v < 1:
            raise ValueError("eta must lie in [0, 1)")
        return v

    @field_validator("delta")
    @classmethod
    def validate_delta(cls, v: float) -> float:
        if v <= 0:
            raise ValueError("delta must be positive")
        return v

    def initial_iterate(self, p: int) -> np.ndarray:
        """Starting matrix W⁰ (P×P)."""
        if self.init == "zero":
            return np.zeros((p, p))
        if self.init == "identity":
            return np.eye(p)
        return np.random.default_rng(self.seed).standard_normal((p, p))


# ============================================================================
# Distillation results
# ============================================================================


class DistillationMap(BaseModel):
    """
    A fitted distillation map W = C·Sᵀ.

    For selection methods C is P×K and ``selected_indices`` lists the K kept
    features. PCA has no selection: C holds the full P×P projector and the index
    list is empty.

    Attributes:
        method: Method that produced the map
        k: Number of selected features (rank for PCA)
        lam: Penalty weight used by lasso-type fits
        selected_indices: Kept feature indices, ascending
        c_matrix: Reconstruction matrix C
        p: Feature count P
        groups_mode: Grouping used by the penalty
        exact_k: False when a K target was only approximated
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    method: Method
    k: int = Field(..., ge=0)
    lam: Optional[float] = None
    selected_indices: List[int] = Field(default_factory=list)
    c_matrix: np.ndarray
    p: int = Field(..., ge=1)
    groups_mode: GroupMode = GroupMode.COLUMN
    exact_k: bool = True

    @model_validator(mode="after")
    def validate_map(self) -> "DistillationMap":
        if self.method == Method.PCA:
            if self.selected_indices:
                raise ValueError("PCA maps carry no selection")
            if self.c_matrix.shape != (self.p, self.p):
                raise ValueError("PCA maps store the full P×P projector")
            return self
        if self.k != len(self.selected_indices):
            raise ValueError("k must equal the number of selected indices")
        if sorted(set(self.selected_indices)) != list(self.selected_indices):
            raise ValueError("selected_indices must be unique and ascending")
        if any(not 0 <= i < self.p for i in self.selected_indices):
            raise ValueError("selected index out of range")
        if self.c_matrix.shape != (self.p, self.k):
            raise ValueError(f"C must be {self.p}×{self.k}")
        return self

    @property
    def W(self) -> np.ndarray:
        """Combined P×P map."""
        if self.method == Method.PCA:
            return self.c_matrix.copy()
        W = np.zeros((self.p, self.p))
        W[:, self.selected_indices] = self.c_matrix
        return W

    @classmethod
    def from_w(
        cls,
        method: Method,
        W: np.ndarray,
        selected: List[int],
        lam: Optional[float] = None,
        groups_mode: GroupMode = GroupMode.COLUMN,
        exact_k: bool = True,
    ) -> "DistillationMap":
        """Build a selection map from a full W and its support."""
        selected = sorted(int(i) for i in selected)
        return cls(
            method=method,
            k=len(selected),
            lam=lam,
            selected_indices=selected,
            c_matrix=np.ascontiguousarray(W[:, selected]),
            p=int(W.shape[0]),
            groups_mode=groups_mode,
            exact_k=exact_k,
        )


# ============================================================================
# Scenario generation
# ============================================================================

# PV buses of the 37-bus study; filtered to the generated feeder size.
DEFAULT_PV_BUSES = [2, 4, 7, 9, 11, 14, 17, 20, 22, 25]


class SyntheticConfig(BaseModel):
    """
    Settings for the synthetic feeder and scenario generator.

    Loads are built by aggregating household profiles per bus, the way the
    37-bus study aggregates smart-meter households per medium-voltage node.
    """

    model_config = ConfigDict(frozen=True)

    seed: int = Field(default=0, description="Generator seed")
    n_buses: int = Field(default=36, ge=1, description="Non-substation bus count N")
    n_scenarios: int = Field(default=200, ge=1, description="Scenario count T")
    load_buses: Optional[List[int]] = Field(
        default=None, description="Buses hosting loads (default 1..min(25, N))"
    )
    pv_buses: Optional[List[int]] = Field(
        default=None, description="Buses hosting solar (default: study PV buses within the load set)"
    )
    der_buses: Optional[List[int]] = Field(
        default=None, description="Buses hosting DER inverters (default: the PV buses)"
    )
    der_qmax: float = Field(default=0.05, ge=0, description="DER reactive rating in pu")
    households_per_bus: int = Field(default=5, ge=1)
    household_pool: int = Field(default=25, ge=1)
    base_load: float = Field(default=0.02, ge=0, description="Benchmark peak load per bus in pu")
    load_scale: float = Field(default=2.0, ge=0, description="Peak load as multiple of base_load")
    pv_scale: float = Field(default=2.0, ge=0, description="Solar peak as multiple of base_load")
    ev_scale: float = Field(default=0.5, ge=0, description="EV charging power as multiple of base_load")
    ev_fraction: float = Field(default=1.0, ge=0, le=1)
    noise: float = Field(default=0.05, ge=0, description="Relative load noise")
    pf_min: float = Field(default=0.85, gt=0, le=1)
    start_hour: float = Field(default=8.0, ge=0, lt=24)
    end_hour: float = Field(default=17.0, gt=0, le=24)
    r_range: Tuple[float, float] = Field(default=(0.002, 0.008))
    x_over_r: Tuple[float, float] = Field(default=(1.0, 2.0))
    v_max_dev: float = Field(default=0.03, gt=0)

    @model_validator(mode="after")
    def validate_ranges(self) -> "SyntheticConfig":
        if self.end_hour <= self.start_hour:
            raise ValueError("end_hour must follow start_hour")
        if not 0 < self.r_range[0] <= self.r_range[1]:
            raise ValueError("r_range must be positive and ordered")
        if not 0 < self.x_over_r[0] <= self.x_over_r[1]:
            raise ValueError("x_over_r must be positive and ordered")
        return self

    def resolved_buses(self) -> Dict[str, List[int]]:
        """Load, PV and DER bus lists with defaults applied."""
        n = self.n_buses
        loads = (
            list(self.load_buses)
            if self.load_buses is not None
            else list(range(1, min(25, n) + 1))
        )
        if self.pv_buses is not None:
            pv = list(self.pv_buses)
        else:
            pv = [b for b in DEFAULT_PV_BUSES if b in loads]
        der = list(self.der_buses) if self.der_buses is not None else list(pv)
        return {"load": sorted(loads), "pv": sorted(pv), "der": sorted(der)}
