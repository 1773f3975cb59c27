"""Python access to the outfit-completion engine.

The heavy lifting happens in the compiled ``_stylefuse`` extension; this
package re-exports it. Vectors are numpy float32 arrays, matrices hold one
vector per row.
"""

try:
    from . import _stylefuse as _core
except ImportError:  # in-tree build: the extension sits next to this package
    import _stylefuse as _core

Error = _core.Error
Catalog = _core.Catalog
normalize = _core.normalize
ta_isa = _core.ta_isa
aa_va = _core.aa_va
entropy_of_distribution = _core.entropy_of_distribution
de_gf = _core.de_gf
build_query = _core.build_query
parse_reasoning = _core.parse_reasoning
read_embeddings = _core.read_embeddings
write_embeddings = _core.write_embeddings
load_catalog = _core.load_catalog
run_cli = _core.run_cli

__all__ = [
    "Error",
    "Catalog",
    "normalize",
    "ta_isa",
    "aa_va",
    "entropy_of_distribution",
    "de_gf",
    "build_query",
    "parse_reasoning",
    "read_embeddings",
    "write_embeddings",
    "load_catalog",
    "run_cli",
]
