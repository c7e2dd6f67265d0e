#  * Copyright (c) 2020-2021. Authors: see NOTICE file.
#  *
#  * Licensed under the Apache License, Version 2.0 (the "License");
#  * you may not use this file except in compliance with the License.
#  * You may obtain a copy of the License at
#  *
#  *      http://www.apache.org/licenses/LICENSE-2.0
#  *
#  * Unless required by applicable law or agreed to in writing, software
#  * distributed under the License is distributed on an "AS IS" BASIS,
#  * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
#  * See the License for the specific language governing permissions and
#  * limitations under the License.

import math
from decimal import Decimal
from typing import Optional, Union

from pint import Quantity, UnitRegistry

UNIT_REGISTRY = UnitRegistry()

Number = Union[int, float, str]


def parse_float(value) -> Optional[float]:
    if value is None:
        return None
    try:
        return float(value)
    except (TypeError, ValueError):
        return None


def parse_physical_size(value: Optional[Number], unit: Optional[str]) -> Optional[Quantity]:
    if value is not None and unit is not None:
        value = parse_float(value)
        if value is not None and math.isfinite(value):
            return value * UNIT_REGISTRY(unit)
    return None


def convert(value: Number, unit: str, target: str) -> float:
    """
    Convert a magnitude between two length-like units, e.g.
    `convert(22, 'km', 'm') == 22000.0`.
    """
    quantity = parse_physical_size(value, unit)
    if quantity is None:
        raise ValueError(f"Cannot interpret {value!r} as a quantity in {unit}")
    return float(quantity.to(target).magnitude)


def km_to_m_exact(value: Number) -> float:
    # Decimal keeps km <-> m conversions free of binary rounding, so that
    # serialized configurations read back bit-identical.
    return float(Decimal(str(value)).scaleb(3))


def m_to_km_text(value: float) -> str:
    if not math.isfinite(value):
        return repr(value)
    return str(Decimal(repr(value)).scaleb(-3))


def loss_db_per_km_to_att_length_km(loss: float) -> float:
    """Attenuation length (1/e length) of a fiber with `loss` dB/km."""
    return 10.0 / (math.log(10.0) * loss)
