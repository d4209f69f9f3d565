from enum import Enum
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator


class LightModel(str, Enum):
    EXPONENTIAL_DECAY = "ExponentialDecay"
    SELF_SHADING = "SelfShading"


class FunctionalResponse(str, Enum):
    HOLLING_I = "HollingI"
    HOLLING_II = "HollingII"
    HOLLING_III = "HollingIII"
    IVLEV = "Ivlev"
    RATIO_QUAD = "RatioQuad"


class Scheme(str, Enum):
    IMEX_EULER = "IMEX_Euler"
    EXPLICIT_RK4 = "Explicit_RK4"


class Parameters(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    D: float = Field(1.0, gt=0, description="Vertical turbulent diffusivity (length^2/time).")
    H: float = Field(1.0, gt=0, description="Depth of the water column (length).")
    chi: float = Field(1.0, gt=0, description="""Inverse half-saturation density of nutrient intake. Strictly
positive so that the maximum phytoplankton growth rate r/chi is finite.""")
    m: float = Field(0.1, ge=0, description="Zooplankton mortality rate (1/time).")
    m_p: float = Field(0.2, ge=0, description="Phytoplankton mortality rate (1/time).")
    k: float = Field(1.0, ge=0, description="Food utilization coefficient (dimensionless).")
    r: float = Field(0.5, ge=0, description="Light-limited uptake scale (1/time).")
    gamma: float = Field(1.0, ge=0, description="Light attenuation coefficient (1/length).")
    nu: float = Field(1.0, ge=0, description="Self-shading coefficient (1/(density*length)).")
    n_H: float = Field(1.0, ge=0, description="Nutrient density imposed at the bottom of the column h=H.")


class SolverConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    dt: float = Field(1e-3, gt=0, description="Time step.")
    t_end: float = Field(1.0, ge=0, description="Final time of the run.")
    scheme: Scheme = Field(Scheme.IMEX_EULER, description="Time integrator.")
    snapshot_every: int = Field(10, ge=1, description="Store a snapshot every this many steps.")
    positivity_tol: float = Field(1e-10, ge=0, description="""Negative entries above -positivity_tol are tolerated
(or clamped in clamp mode); anything below aborts the run.""")
    clamp_mode: bool = Field(False, description="Clamp tolerated negative entries to zero. Exploratory runs only.")


class InitialProfile(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    profile: Literal["constant", "gaussian-bump", "cosine-mode", "random", "from-file"] = Field(
        "constant", description="Named shape of the initial field.")
    value: Optional[float] = Field(None, ge=0, description="Level of a constant profile.")
    base: float = Field(0.0, ge=0, description="Background level under a bump or a cosine mode.")
    amplitude: float = Field(1.0, description="Height of a bump or a cosine mode.")
    center: Optional[float] = Field(None, ge=0, description="Bump center; half the depth when absent.")
    width: Optional[float] = Field(None, gt=0, description="Bump width; a tenth of the depth when absent.")
    k: int = Field(0, ge=0, description="Cosine mode index.")
    low: float = Field(0.0, ge=0, description="Lower end of a random profile.")
    high: float = Field(1.0, ge=0, description="Upper end of a random profile.")
    path: Optional[str] = Field(None, description="Snapshot CSV (h,n,p) for a from-file profile.")

    @model_validator(mode="after")
    def check_profile(self):
        if self.profile == "from-file":
            if self.path is None:
                raise ValueError("path is required for a from-file profile")
            if not Path(self.path).is_file():
                raise ValueError(f"path {self.path} does not exist")
        if self.profile == "random" and self.high < self.low:
            raise ValueError("high must be >= low")
        return self


class GridSection(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    M: int = Field(51, ge=3, description="Number of grid nodes, boundaries included.")


class ModelSection(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    light: LightModel = LightModel.EXPONENTIAL_DECAY
    response: FunctionalResponse = FunctionalResponse.HOLLING_II


class InitialSection(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    n: InitialProfile = InitialProfile()
    p: InitialProfile = InitialProfile(profile="gaussian-bump")
    z: float = Field(0.1, ge=0, description="Initial zooplankton density.")


class OutputSection(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    dir: str = "output"


class RunSection(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    seed: int = Field(0, ge=0, description="Seed of the random initial profiles.")


class AnalysisSection(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    extinction_window_start: Optional[float] = Field(None, ge=0, description="""Start of the decay-rate fit window;
the second half of the run when absent.""")


class RunConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    params: Parameters = Parameters()
    grid: GridSection = GridSection()
    model: ModelSection = ModelSection()
    solver: SolverConfig = SolverConfig()
    initial: InitialSection = InitialSection()
    output: OutputSection = OutputSection()
    run: RunSection = RunSection()
    analysis: AnalysisSection = AnalysisSection()


class InvariantReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str = Field(description="Check name as written in report.txt.")
    passed: bool
    worst: float = Field(description="""Worst offending value. The check fails exactly when this value is on the
wrong side of the tolerance.""")
    node: Optional[int] = None
    time: Optional[float] = None
    tolerance: float
    enforced: bool = Field(True, description="""Whether a failure of this check fails the run. Long-horizon
limits whose outcome depends on the run length are reported but not enforced.""")


class DecayFit(BaseModel):
    model_config = ConfigDict(frozen=True)

    quantity: str = Field(description="Fitted observable, int_p or z.")
    rate: float = Field(description="Least-squares slope of the log of the observable.")
    window_start: float
    window_end: float
    r_squared: float = Field(ge=0, le=1)
    bound: float = Field(description="Theoretical rate bound the fitted rate is compared with.")
    passed: bool
