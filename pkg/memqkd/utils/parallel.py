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

import logging
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

from memqkd.config import get_settings

logger = logging.getLogger("memqkd.parallel")

T = TypeVar('T')
R = TypeVar('R')


def ordered_map(func: Callable[[T], R], items: Iterable[T], workers: Optional[int] = None) -> List[R]:
    """
    Apply `func` to every item, in worker processes when `workers` > 1.

    Results always come back in input order, so any reduction over them is
    independent of the number of workers. `func` must be a module-level
    callable and items must be picklable.
    """
    items = list(items)
    if workers is None:
        workers = get_settings().workers
    workers = min(workers, len(items))
    if workers <= 1:
        return [func(item) for item in items]

    logger.debug(f"Dispatching {len(items)} work items to {workers} workers")
    with ProcessPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(func, items))
