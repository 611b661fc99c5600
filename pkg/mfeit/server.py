"""MCP server exposing the mfeit pipeline stages as tools."""

# Import built-in modules
import argparse
import sys

# Import third-party modules
from loguru import logger
from mcp.server.fastmcp import FastMCP

# Import local modules
from mfeit.app import APP_DESCRIPTION, __version__, configure_logging
from mfeit.registry import register_all_resources, register_all_tools


def create_server(name: str = "mfeit", version: str | None = None) -> FastMCP:
    """Create the MCP server and register every tool and resource module.

    Args:
        name: The name of the MCP server.
        version: The server version (defaults to package version).

    Returns:
        FastMCP: The configured MCP server.

    """
    server_mcp = FastMCP(name=name)

    logger.info("Registering resources...")
    registered_resources = register_all_resources(server_mcp)
    logger.info(f"Registered resources from modules: {list(registered_resources)}")

    logger.info("Registering tools...")
    registered_tools = register_all_tools(server_mcp)
    logger.info(f"Registered tools from modules: {list(registered_tools)}")

    logger.info(f"Server '{name}' v{version or __version__} configured successfully")
    return server_mcp


def main() -> None:
    """Run the MCP server over stdio (``mfeit-mcp`` entry point)."""
    parser = argparse.ArgumentParser(description=f"{APP_DESCRIPTION} (MCP server)")
    parser.add_argument("--name", default="mfeit", help="Server name")
    parser.add_argument("--version", help="Server version (overrides package version)")
    parser.add_argument("--debug", action="store_true", help="Enable debug logging")
    args = parser.parse_args()
    configure_logging(args.debug)

    logger.info(f"Starting mfeit MCP server v{args.version or __version__}...")
    try:
        create_server(name=args.name, version=args.version).run()
    except Exception as e:
        logger.error(f"Error starting server: {e}")
        sys.exit(1)


if __name__ == "__main__":
    main()
