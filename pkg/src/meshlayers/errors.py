"""Exception hierarchy. Every error carries a stable wire code."""


class MeshLayersError(Exception):
    code = "error"


class ParseError(MeshLayersError):
    code = "parse_error"


class UVRangeError(ParseError):
    code = "uv_range"


class MissingUVs(MeshLayersError):
    code = "missing_uvs"


class EmptyMesh(MeshLayersError):
    code = "empty_mesh"


class DegenerateCamera(MeshLayersError):
    code = "degenerate_camera"


class CapacityExceeded(MeshLayersError):
    code = "capacity_exceeded"


class TargetMismatch(MeshLayersError):
    code = "target_mismatch"


class BadPalette(MeshLayersError):
    code = "bad_palette"


class UnknownTable(MeshLayersError):
    code = "unknown_table"


class BadMagic(MeshLayersError):
    code = "bad_magic"


class UnsupportedVersion(MeshLayersError):
    code = "unsupported_version"


class TruncatedStream(MeshLayersError):
    code = "truncated_stream"


class ChecksumMismatch(MeshLayersError):
    code = "checksum_mismatch"


class StaleDepth(MeshLayersError):
    code = "stale_depth"


class LayerMeshMismatch(MeshLayersError):
    code = "layer_mesh_mismatch"


class MemoryBudgetExceeded(MeshLayersError):
    code = "memory_budget_exceeded"


class DuplicateTable(MeshLayersError):
    code = "duplicate_table"


class BadSchema(MeshLayersError):
    code = "bad_schema"


class SchemaViolation(MeshLayersError):
    code = "schema_violation"


class ReservedKey(MeshLayersError):
    code = "reserved_key"


class UnknownLayer(MeshLayersError):
    code = "unknown_layer"


class BindFailure(MeshLayersError):
    code = "bind_failure"


class BadRequest(MeshLayersError):
    code = "bad_request"
