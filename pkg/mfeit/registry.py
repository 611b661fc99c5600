"""Dynamic registration of tools and resources with the MCP server."""

# Import built-in modules
import importlib
import pkgutil
import weakref
from collections.abc import Callable
from typing import Literal

# Import third-party modules
from loguru import logger
from mcp.server.fastmcp import FastMCP

# Import local modules
from mfeit.decorators import debug_tool, log_tool_call

NAMESPACE = "mfeit"

# Modules already registered, per server
_registered_modules: weakref.WeakKeyDictionary[FastMCP, set[str]] = weakref.WeakKeyDictionary()


def register_from_module(
    mcp_server: FastMCP, module_name: str, registry_type: Literal["tool", "resource"]
) -> list[str]:
    """Call the ``register(mcp)`` function of one module.

    Args:
        mcp_server: The MCP server instance.
        module_name: The name of the module to register from.
        registry_type: The type of registry ("tool" or "resource").

    Returns:
        Names returned by ``register``; empty if the module was already registered or has no hook.

    """
    registry_key = f"{registry_type}:{module_name}"
    done = _registered_modules.setdefault(mcp_server, set())
    if registry_key in done:
        logger.debug(f"Module {module_name} already registered for {registry_type}")
        return []

    try:
        module = importlib.import_module(module_name)
    except ImportError as e:
        logger.error(f"Failed to import module {module_name}: {e}")
        return []

    register = getattr(module, "register", None)
    if not callable(register):
        logger.debug(f"Module {module_name} has no register() function")
        return []
    logger.info(f"Registering {registry_type}s from {module_name}")
    names = list(register(mcp_server) or [])
    done.add(registry_key)
    return names


def register_all(
    mcp_server: FastMCP, package_name: str, registry_type: Literal["tool", "resource"]
) -> dict[str, list[str]]:
    """Register tools or resources from every module of a package.

    Returns:
        Dictionary mapping module names to lists of registered item names.

    """
    registered_items: dict[str, list[str]] = {}
    try:
        package = importlib.import_module(package_name)
    except ImportError as e:
        logger.error(f"Failed to import package {package_name}: {e}")
        return registered_items

    for _, module_name, is_pkg in pkgutil.iter_modules(package.__path__, package.__name__ + "."):
        if module_name.split(".")[-1] == "__init__":
            continue
        items = register_from_module(mcp_server, module_name, registry_type)
        if items:
            registered_items[module_name] = items
        if is_pkg:
            registered_items.update(register_all(mcp_server, module_name, registry_type))
    return registered_items


def register_all_tools(mcp_server: FastMCP, package_name: str = "mfeit.tools") -> dict[str, list[str]]:
    return register_all(mcp_server, package_name, "tool")


def register_all_resources(mcp_server: FastMCP, package_name: str = "mfeit.resources") -> dict[str, list[str]]:
    return register_all(mcp_server, package_name, "resource")


def register_tool(
    mcp_server: FastMCP,
    func: Callable,
    name: str | None = None,
    namespace: str = NAMESPACE,
    debug: bool = True,
) -> str:
    """Register a function as an MCP tool.

    Args:
        mcp_server: The MCP server instance.
        func: The function to register.
        name: Optional name for the tool. If not provided, the function name is used.
        namespace: Namespace prefix for the tool name. Default is "mfeit".
        debug: Whether to wrap the function with the error and logging decorators.

    Returns:
        The name of the registered tool.

    """
    base_name = name or func.__name__
    if namespace and not base_name.startswith(f"{namespace}_"):
        tool_name = f"{namespace}_{base_name}"
    else:
        tool_name = base_name

    decorated_func = log_tool_call(debug_tool(func)) if debug else func
    mcp_server.tool(name=tool_name)(decorated_func)
    logger.info(f"Registered tool: {tool_name}")
    return tool_name


def register_resource(mcp_server: FastMCP, func: Callable, path: str) -> str:
    mcp_server.resource(path)(func)
    logger.info(f"Registered resource: {path}")
    return path
