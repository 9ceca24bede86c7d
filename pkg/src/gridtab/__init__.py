"""Grid-representation toolkit for table structure recognition pipelines.

Tables are modeled as an M x N lattice of vertexes and down/right edges;
this package generates training targets from annotations, reconstructs
tables from (real or simulated) predictions, and scores the results with
TEDS, adjacency-relation F1, and detection F-score.
"""

from .errors import (
    AnnotationError,
    DegenerateTableError,
    GridTabError,
    LabelError,
    ReconstructionError,
    SchemaError,
    StructureInconsistencyError,
)
from .grid import (
    Cell,
    GridDims,
    GridLabel,
    GridPrediction,
    LogicalTable,
    ValidationReport,
    grid_stats,
    incident_positive_edges,
    validate_logical_table,
)
from .ingest import HtmlTokenStream, RawAnnotation, ingest, normalize_textline_boxes, parse_html_structure
from .labels import (
    ProposalLattice,
    ReferencePoint,
    build_grid_label,
    build_proposal_lattice,
    build_reference_labels,
)
from .matching import (
    Assignment,
    FocalConfig,
    LossWeights,
    cell_bounding_rectangles,
    evaluate_losses,
    focal_loss,
    giou,
    giou_loss,
    hungarian,
    matching_cost,
    total_loss,
)
from .metrics import PRF, AdjacencyRelation, adjacency_f1, adjacency_relations, cell_detection_fscore, quad_iou
from .reconstruct import (
    ActiveSubgrid,
    ReconstructionConfig,
    classify_vertexes,
    group_cells,
    reconstruct_table,
    select_and_sort,
    to_html,
)
from .synth import NoiseParams, SynthParams, generate_table, perfect_prediction, perturb
from .teds import TedsTree, table_to_tree, teds, tree_edit_distance

__version__ = "0.1.0"
