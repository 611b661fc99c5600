"""MCP resources module."""
