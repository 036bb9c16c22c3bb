"""Streaming coverage toolkit.

Build near-linear-size subsampled sketches of set/element incidence streams,
solve k-cover and set-cover variants on the sketch with guarantees, compare
against a bottom-hash distinct-count baseline and exact brute force, and
stress oracle-query lower bounds with planted-gold instances.
"""

from .distinct import (DistinctSketch, L0_ENUM_GUARD, build_per_set_sketches,
                       kcover_via_l0, load_distinct, merge_sketches,
                       save_distinct)
from .errors import (ConfigError, CovsketchError, GuardExceededError,
                     IdRangeError, IncompatibleSketchError,
                     IsolatedElementError, ParseError, StateError)
from .hardness import (DemoReport, PlantedGoldInstance, ValidityReport,
                       query_counter_demo, verify_oracle_validity)
from .hashing import ElementHasher, derive_seed, splitmix64
from .instance import (CoverageInstance, compact_ids, gen_disjointness,
                       gen_planted_cover, gen_random, load_edges,
                       random_edge_stream, read_metadata, write_edges_binary,
                       write_edges_text, write_metadata)
from .sketch import (CoverageEstimate, Sketch, SketchParams,
                     StreamingSketchBuilder, SubgraphView,
                     build_sketch_from_stream, build_sketch_offline,
                     cap_element_degrees, estimate_coverage, load_sketch,
                     sample_subgraph, save_sketch)
from .solvers import (BRUTE_FORCE_GUARD, REJECT, MultipassParams,
                      OutlierParams, SetSystem, Solution, as_set_system,
                      brute_force_kcover, brute_force_setcover,
                      greedy_kcover, greedy_setcover, kcover_via_sketch,
                      probe_on_sketch, probe_params, setcover_multipass,
                      setcover_outliers, setcover_probe, threshold_greedy)

__version__ = "0.1.0"

__all__ = [
    "BRUTE_FORCE_GUARD",
    "ConfigError",
    "CoverageEstimate",
    "CoverageInstance",
    "CovsketchError",
    "DemoReport",
    "DistinctSketch",
    "ElementHasher",
    "GuardExceededError",
    "IdRangeError",
    "IncompatibleSketchError",
    "IsolatedElementError",
    "L0_ENUM_GUARD",
    "MultipassParams",
    "OutlierParams",
    "ParseError",
    "PlantedGoldInstance",
    "REJECT",
    "SetSystem",
    "Sketch",
    "SketchParams",
    "Solution",
    "StateError",
    "StreamingSketchBuilder",
    "SubgraphView",
    "ValidityReport",
    "as_set_system",
    "brute_force_kcover",
    "brute_force_setcover",
    "build_per_set_sketches",
    "build_sketch_from_stream",
    "build_sketch_offline",
    "cap_element_degrees",
    "compact_ids",
    "derive_seed",
    "estimate_coverage",
    "gen_disjointness",
    "gen_planted_cover",
    "gen_random",
    "greedy_kcover",
    "greedy_setcover",
    "kcover_via_l0",
    "kcover_via_sketch",
    "load_distinct",
    "load_edges",
    "load_sketch",
    "merge_sketches",
    "probe_on_sketch",
    "probe_params",
    "query_counter_demo",
    "random_edge_stream",
    "read_metadata",
    "sample_subgraph",
    "save_distinct",
    "save_sketch",
    "setcover_multipass",
    "setcover_outliers",
    "setcover_probe",
    "splitmix64",
    "threshold_greedy",
    "verify_oracle_validity",
    "write_edges_binary",
    "write_edges_text",
    "write_metadata",
]
