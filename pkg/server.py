#!/usr/bin/env python3
"""
server.py

MCP entry point for the HAR benchmark.
It exposes the experiment harness as tools so an MCP client can
summarize the dataset, launch runs, regenerate figures and read results.

HOW THE SERVER WORKS:
1. It creates an MCP server instance with identity information
2. It defines one tool per harness operation
3. It connects to the stdio transport
4. Long runs execute in a worker thread so the event loop stays responsive
"""
import asyncio
import logging
import sys
from pathlib import Path
from typing import Any

from mcp.server import Server
from mcp.server.stdio import stdio_server
from mcp.types import TextContent, Tool

from src import __version__
from src.config import config, configure_logging, ensure_output_folder
from src.errors import HarError
from src.models.requests import (
    RenderArtifactSchema,
    RunExperimentsSchema,
    ShowResultsSchema,
    SummarizeDataSchema,
)
from src.services.experiment_service import experiment_service
from src.utils.formatters import (
    create_error_response,
    create_success_response,
    format_artifact,
    format_dataset_summary,
    format_report,
)

logger = logging.getLogger(__name__)

# Create the MCP server
server = Server("HAR-Benchmark-Server", version=__version__)


def safe_execute(operation, error_message: str):
    """
    Run an operation; on failure log it and return the exception instead
    of raising, so one bad call never takes the server down.

    Args:
        operation: The function to execute (callable)
        error_message: Prefix for the error text

    Returns:
        Either the operation result or an Exception
    """
    try:
        return operation()
    except Exception as error:
        logger.error("%s: %s", error_message, error)
        return Exception(f"{error_message}: {error}")


def _content(response: dict) -> list[TextContent]:
    return [TextContent(**item) for item in response["content"]]


def _text(message: str) -> list[TextContent]:
    return _content(create_success_response(message))


def _error(message: str) -> list[TextContent]:
    return _content(create_error_response(message))


def _summarize(arguments: dict[str, Any]) -> str:
    data = SummarizeDataSchema(**arguments)
    root = Path(data.dataset_root) if data.dataset_root else config.dataset.root
    return format_dataset_summary(experiment_service.summarize_data(root, data.seed))


def _run(arguments: dict[str, Any]) -> str:
    data = RunExperimentsSchema(**arguments)
    explicit = {
        'experiments': data.experiments,
        'seed': data.seed,
        'dataset_root': data.dataset_root,
        'output_directory': data.output_directory,
        'show_progress': False,
    }
    experiment_config = experiment_service.build_config(**{**data.overrides, **explicit})
    ensure_output_folder(experiment_config.output_directory)
    artifact = experiment_service.run(experiment_config)
    experiment_service.write_outputs(artifact, experiment_config.output_directory)
    return f"Results written to {experiment_config.output_directory}\n\n{format_artifact(artifact)}"


def _render(arguments: dict[str, Any]) -> str:
    data = RenderArtifactSchema(**arguments)
    written = experiment_service.render(Path(data.artifact_path),
                                        Path(data.output_directory) if data.output_directory else None)
    return f"Rendered {len(written)} files:\n" + '\n'.join(f"- {path}" for path in written)


def _show(arguments: dict[str, Any]) -> str:
    data = ShowResultsSchema(**arguments)
    artifact = experiment_service.load_artifact(Path(data.artifact_path))
    text = format_artifact(artifact)
    if data.model_tag:
        reports = artifact.headline_reports()
        if data.model_tag not in reports:
            raise HarError(f"no report for {data.model_tag!r}; available: {', '.join(sorted(reports))}")
        text += '\n' + format_report(reports[data.model_tag])
    return text


_HANDLERS = {
    "summarize-data": (_summarize, "Failed to summarize dataset"),
    "render-artifact": (_render, "Failed to render artifact"),
    "show-results": (_show, "Failed to read results"),
}


@server.call_tool()
async def handle_tool_call(tool_name: str, arguments: dict[str, Any]) -> list[TextContent]:
    """Handle all tool calls - routes to appropriate handler based on tool_name"""
    arguments = arguments or {}
    if tool_name == "run-experiments":
        # Training takes minutes; keep the event loop free.
        result = await asyncio.to_thread(safe_execute, lambda: _run(arguments), "Failed to run experiments")
    elif tool_name in _HANDLERS:
        handler, message = _HANDLERS[tool_name]
        result = safe_execute(lambda: handler(arguments), message)
    else:
        return _error(f"Unknown tool: {tool_name}")

    if isinstance(result, Exception):
        return _error(str(result))
    return _text(result)


# Register tools with proper schemas
@server.list_tools()
async def list_tools_handler() -> list[Tool]:
    return [
        Tool(
            name="summarize-data",
            description="Load the UCI HAR dataset, split the held-out partition into validation and test, "
                        "and report partition sizes, per-class counts and subjects.",
            inputSchema={
                "type": "object",
                "properties": {
                    "datasetRoot": {"type": "string", "description": "Dataset directory (default: HAR_DATASET_ROOT)"},
                    "seed": {"type": "integer", "minimum": 0, "description": "Split seed (default 42)"}
                }
            }
        ),
        Tool(
            name="run-experiments",
            description="Train and evaluate the selected classifiers, compare them with the published "
                        "accuracies and write tables, confusion matrices and artifact.json.",
            inputSchema={
                "type": "object",
                "properties": {
                    "experiments": {
                        "type": "array",
                        "items": {"type": "string",
                                  "enum": ["knn_sweep", "svm_kernels", "naive_bayes", "mlp", "mlp_search", "all"]},
                        "minItems": 1,
                        "description": "Experiments to run (default: all)"
                    },
                    "seed": {"type": "integer", "minimum": 0},
                    "datasetRoot": {"type": "string"},
                    "outputDirectory": {"type": "string", "description": "Default: HAR_OUTPUT_DIR"},
                    "overrides": {"type": "object", "description": "Other experiment settings by config-file key"}
                }
            }
        ),
        Tool(
            name="render-artifact",
            description="Regenerate all tables and figures from an artifact.json",
            inputSchema={
                "type": "object",
                "properties": {
                    "artifactPath": {"type": "string", "minLength": 1},
                    "outputDirectory": {"type": "string"}
                },
                "required": ["artifactPath"]
            }
        ),
        Tool(
            name="show-results",
            description="Show the comparison table of a run, optionally with one model's per-class report "
                        "(modelTag: knn, mlp, naive_bayes, svm_linear, svm_polynomial, svm_sigmoid)",
            inputSchema={
                "type": "object",
                "properties": {
                    "artifactPath": {"type": "string", "minLength": 1},
                    "modelTag": {"type": "string"}
                },
                "required": ["artifactPath"]
            }
        ),
    ]


async def main():
    """
    Start the server on the stdio transport.

    stdout belongs to the transport, so every diagnostic goes to stderr.
    """
    configure_logging()
    logger.info("Starting HAR Benchmark MCP Server %s", __version__)
    logger.info("Dataset root: %s, output folder: %s", config.dataset.root, config.output.folder)

    try:
        async with stdio_server() as (read_stream, write_stream):
            await server.run(
                read_stream,
                write_stream,
                server.create_initialization_options()
            )
    except KeyboardInterrupt:
        logger.info("Shutting down...")
    except Exception as error:
        print(f"Failed to start HAR Benchmark MCP Server: {error}", file=sys.stderr)


if __name__ == "__main__":
    asyncio.run(main())
