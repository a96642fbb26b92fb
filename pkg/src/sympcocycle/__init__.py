"""sympcocycle: a numerical laboratory for symplectic linear cocycles
over suspension flows of hyperbolic maps.

The package integrates fundamental solutions of Hamiltonian linear
differential systems with a structure-preserving Cayley/midpoint scheme,
estimates Oseledets/Lyapunov spectra by QR reorthogonalization, builds
stable and unstable holonomies of the induced return cocycle, and
implements flowbox perturbations that realize prescribed symplectic maps
and break holonomy rigidity.
"""

__version__ = "0.1.0"

from .base import (
    CAT_EXPANSION,
    CatMap,
    ConstantRoof,
    CosineBumpRoof,
    FullShift,
    PeriodicOrbit,
    ShiftPoint,
    SuspensionPoint,
    TorusPoint,
    base_apply,
    heteroclinic_point_catmap,
    periodic_points_catmap,
    roof_integral,
    roof_sum,
    suspend_flow,
)
from .engine import (
    FundamentalSolution,
    InducedCocycleValue,
    field_eval,
    fundamental_solution,
    gronwall_check,
    induced_cocycle,
    lipschitz_probe,
    verify_cocycle_identity,
)
from .errors import (
    BudgetError,
    ConfigError,
    GeometryError,
    InvalidDimensionError,
    IsotopyError,
    NumericalDegeneracyError,
    PreconditionError,
    ResourceLimitError,
    SearchFailureError,
    SpectrumDegeneracyError,
    StepTooLargeError,
    SympcocycleError,
    TruncationError,
)
from .exactnum import QuadraticNumber
from .fields import GeneratorField, PerturbedField, bump_profile
from .holonomy import (
    AxiomReport,
    DominationParams,
    Holonomy,
    ProjectiveAtomMeasure,
    atomic_measure_at_periodic,
    domination_check,
    holonomy_axiom_check,
    projective_distance,
    pushforward_compare,
    stable_holonomy,
    unstable_holonomy,
)
from .perturbation import (
    BreakResult,
    FlowboxPerturbation,
    PerturbationBudget,
    break_holonomy,
    build_perturbation,
    compute_K,
    genericity_probe,
    isotopy_generator,
    isotopy_path_defect,
    log_generator,
    plane_rotation_generator,
    simplify_return_spectrum,
    verify_realization,
)
from .spectrum import (
    SpectrumResult,
    poincare_flow_exponents,
    qr_product_exponents,
    scaling_law_check,
    spectrum_flow,
    spectrum_induced,
)
from .symplectic import (
    HamGenerator,
    SympForm,
    SympMatrix,
    algebra_defect,
    hamiltonian_basis,
    make_standard_form,
    random_generator,
    spectrum_symmetry_check,
    symplectic_defect,
    symplectic_inverse,
)
