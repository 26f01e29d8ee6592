from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator


class SvmParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    C: float = Field(1.0, gt=0.0)
    epochs: int = Field(200, gt=0)
    # stop once the largest KKT violation falls below this
    tolerance: float = Field(1e-4, gt=0.0)


class SvmConfig(SvmParams):
    seed: int


class MlpParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    learning_rate: float = Field(0.1, gt=0.0)
    epochs: int = Field(2000, ge=0)
    hidden_sizes: List[int] = Field(default_factory=lambda: [5])
    # a single-class training set is rejected unless this is switched off
    require_both_classes: bool = True

    @model_validator(mode="after")
    def hidden_sizes_positive(self):
        if any(h <= 0 for h in self.hidden_sizes):
            raise ValueError("hidden layer sizes must be positive")
        return self


class MlpConfig(MlpParams):
    seed: int


class TrainConfig(BaseModel):
    svm: SvmConfig
    mlp: MlpConfig


class LinearModel(BaseModel):
    kind: Literal["linear"] = "linear"
    weights: List[float]
    bias: float
    objective: float
    seed: Optional[int] = None
    config: Optional[SvmConfig] = None

    @property
    def n_features(self) -> int:
        return len(self.weights)


class MlpModel(BaseModel):
    kind: Literal["mlp"] = "mlp"
    layer_sizes: List[int]
    # weights[l] has shape (layer_sizes[l + 1], layer_sizes[l])
    weights: List[List[List[float]]]
    biases: List[List[float]]
    seed: Optional[int] = None
    config: Optional[MlpConfig] = None

    @model_validator(mode="after")
    def shapes_chain(self):
        sizes = self.layer_sizes
        if len(sizes) < 2 or sizes[-1] != 1:
            raise ValueError("layer sizes must run from the input width down to a single output")
        if len(self.weights) != len(sizes) - 1 or len(self.biases) != len(sizes) - 1:
            raise ValueError("one weight matrix and bias vector per layer")
        for layer, (w, b) in enumerate(zip(self.weights, self.biases)):
            if len(w) != sizes[layer + 1] or any(len(row) != sizes[layer] for row in w):
                raise ValueError(f"weight matrix {layer} does not match layer sizes")
            if len(b) != sizes[layer + 1]:
                raise ValueError(f"bias vector {layer} does not match layer sizes")
        return self

    @property
    def n_features(self) -> int:
        return self.layer_sizes[0]


class Standardization(BaseModel):
    mean: List[float]
    scale: List[float]
