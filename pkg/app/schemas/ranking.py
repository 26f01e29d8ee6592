from typing import List, Optional

from pydantic import BaseModel, model_validator


class EliminationStep(BaseModel):
    iteration: int
    removed: int
    criterion: float


class Ranking(BaseModel):
    # position 0 is the most important attribute (the last one standing)
    order: List[int]
    trace: List[EliminationStep]
    attribute_names: Optional[List[str]] = None
    seed: Optional[int] = None

    @model_validator(mode="after")
    def order_is_permutation(self):
        if sorted(self.order) != list(range(len(self.order))):
            raise ValueError("ranking order must be a permutation of attribute indices")
        if self.attribute_names is not None and len(self.attribute_names) != len(self.order):
            raise ValueError("one attribute name per ranked index")
        return self

    @property
    def n_attributes(self) -> int:
        return len(self.order)

    def names(self, indices: List[int]) -> List[str]:
        if self.attribute_names is None:
            return [str(i) for i in indices]
        return [self.attribute_names[i] for i in indices]
