import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator


class TruncatedSeries(BaseModel):
    """
    Coefficients c_0..c_J of a power series truncated at order J.

    ``tail_loss`` is the mass dropped beyond the truncation order, accumulated
    through every operation that produced this series. It is exact for
    probability generating functions and a bookkeeping estimate otherwise.
    """

    coeffs: np.ndarray
    tail_loss: float = 0.0

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    @field_validator("coeffs", mode="before")
    def check_coeffs(cls, value):
        array = np.array(value, dtype=np.float64, copy=True).reshape(-1)
        if array.size == 0:
            raise ValueError("series needs at least one coefficient")
        array.setflags(write=False)
        return array

    @property
    def order(self) -> int:
        return self.coeffs.size - 1
