"""Built-in phantoms and default materials as MCP resources."""

# Import local modules
from mfeit.core.admittivity import MaterialSpec
from mfeit.core.geometry import BUILTIN_PHANTOMS, build_phantom, builtin_phantom_spec, distance_report
from mfeit.registry import register_resource


def register(mcp):
    """Register phantom resources.

    Args:
        mcp: The MCP server instance.

    Returns:
        list: Registered resource paths.

    """

    def list_phantoms() -> dict:
        """Names of the built-in phantoms."""
        return {"phantoms": sorted(BUILTIN_PHANTOMS)}

    def get_phantom(name: str) -> dict:
        """Specification of one built-in phantom with its minimum inclusion distance."""
        spec = builtin_phantom_spec(name)
        return {**spec.to_dict(), "minimum_distance": distance_report(build_phantom(spec)).minimum()}

    def default_materials() -> dict:
        """Default conductivities and permittivities."""
        return MaterialSpec().to_dict()

    return [
        register_resource(mcp, list_phantoms, "mfeit://phantoms"),
        register_resource(mcp, get_phantom, "mfeit://phantoms/{name}"),
        register_resource(mcp, default_materials, "mfeit://materials/default"),
    ]
