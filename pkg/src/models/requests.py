"""
requests.py

Validation schemas for the MCP tool arguments. Tool arguments arrive in
camelCase; each schema also accepts the snake_case field names.
"""
from typing import Any, Optional

from pydantic import BaseModel, ConfigDict, Field

from src.models.experiment import ExperimentName


class SummarizeDataSchema(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    dataset_root: Optional[str] = Field(None, alias="datasetRoot",
                                        description="Dataset directory; defaults to HAR_DATASET_ROOT")
    seed: int = Field(42, ge=0, description="Seed of the validation/test split")


class RunExperimentsSchema(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    experiments: list[ExperimentName] = Field(default_factory=lambda: [ExperimentName.ALL], min_length=1,
                                              description="Experiments to run (at least one)")
    seed: int = Field(42, ge=0)
    dataset_root: Optional[str] = Field(None, alias="datasetRoot")
    output_directory: Optional[str] = Field(None, alias="outputDirectory",
                                            description="Where to write results; defaults to HAR_OUTPUT_DIR")
    overrides: dict[str, Any] = Field(default_factory=dict,
                                      description="Any other experiment setting, by its config-file key")


class RenderArtifactSchema(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    artifact_path: str = Field(..., min_length=1, alias="artifactPath",
                               description="artifact.json, or the directory holding it")
    output_directory: Optional[str] = Field(None, alias="outputDirectory")


class ShowResultsSchema(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    artifact_path: str = Field(..., min_length=1, alias="artifactPath")
    model_tag: Optional[str] = Field(None, alias="modelTag",
                                     description="Also show the per-class report of this model")
