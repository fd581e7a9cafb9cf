from fesc.elements.catalog import (
    CATALOG,
    Discrepancy,
    DofFamily,
    ElementName,
    ElementSpec,
    Expectation,
    Pressure,
    Provenance,
    build,
    check_dimensions,
    discrepancies,
    element_descriptor,
    element_spec,
    expectations,
    load_descriptor,
)
from fesc.elements.clough_tocher import (
    clough_tocher,
    clough_tocher_dg,
    clough_tocher_dg_minimal,
    clough_tocher_minimal,
    minimal_cross_check,
)
from fesc.elements.extensions import (
    edge_bubble_phi,
    edge_bubble_psi,
    edge_extension,
    vertex_jet_extension,
    verify_extensions,
)
from fesc.elements.fixtures import sector_complex, whitney_system
from fesc.elements.powell_sabin import (
    PowellSabinSplit,
    powell_sabin,
    powell_sabin_branch,
    powell_sabin_counts,
    wt_span,
)
from fesc.elements.unisolvence import UnisolvenceReport, unisolvence_tests
from fesc.spaces import whitney_space
