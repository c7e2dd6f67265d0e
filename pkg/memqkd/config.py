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

import os
from functools import lru_cache
from typing import Optional

from pydantic import BaseSettings, conint, confloat


class Settings(BaseSettings):
    default_config: Optional[str] = None
    workers: conint(ge=1) = 1
    log_level = "WARNING"

    grid_min_km: confloat(gt=0) = 0.001
    grid_max_km: confloat(gt=0) = 800.0
    grid_points: conint(ge=2) = 2000

    m_cap: conint(ge=1) = 10 ** 6
    mc_block_size: conint(ge=1) = 65536

    class Config:
        env_prefix = 'memqkd_'
        env_file = "memqkd-settings.env"
        env_file_encoding = 'utf-8'


@lru_cache()
def get_settings():
    env_file = os.getenv('MEMQKD_SETTINGS_FILE', 'memqkd-settings.env')
    return Settings(_env_file=env_file)
