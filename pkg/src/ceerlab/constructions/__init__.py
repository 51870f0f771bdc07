"""Stage-driven reduction constructions."""
from .base import (
    FLAT, ConstructionRun, Family, FieldTooLarge, Fixed, Full, Marker, Trace, TraceRecord,
    VirtualFamily, replay, replay_matches,
)
from .chipgame import pi02_to_eqce
from .combinators import (
    BlockRelation, ChainRelation, TupleNotFound, block_relation, chain_relation, narrow,
    small_tuples, widen,
)
from .density import block_bound, star_column, z0_to_e3
from .e3 import (
    ColumnChips, column_chips, column_span, partitions, set_to_e3_binary, set_to_e3_finitary,
    set_to_e3_ternary,
)
from .extrema import TernaryMaxGame, card_max_bridge, eqce_to_emax_ternary, min_to_max_finitary
from .sets import cof_to_set, d_column, dup_columns, pad_family, perm_to_set

__all__ = [
    "FLAT", "ConstructionRun", "Family", "FieldTooLarge", "Fixed", "Full", "Marker", "Trace",
    "TraceRecord", "VirtualFamily", "replay", "replay_matches", "pi02_to_eqce", "BlockRelation",
    "ChainRelation", "TupleNotFound", "block_relation", "chain_relation", "narrow", "widen",
    "small_tuples", "block_bound", "star_column", "z0_to_e3", "ColumnChips", "column_chips",
    "column_span", "partitions", "set_to_e3_binary", "set_to_e3_ternary", "set_to_e3_finitary",
    "TernaryMaxGame", "card_max_bridge", "eqce_to_emax_ternary", "min_to_max_finitary",
    "cof_to_set", "d_column", "dup_columns", "pad_family", "perm_to_set",
]
