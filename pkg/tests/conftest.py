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
from contextlib import contextmanager

import pytest

# Tests never pick up a settings file from the working directory.
os.environ['MEMQKD_SETTINGS_FILE'] = os.devnull

from memqkd import config  # noqa: E402
from memqkd.model import load_preset, paper_defaults  # noqa: E402


def get_settings():
    return config.Settings(_env_file=os.devnull)


@pytest.fixture
def settings():
    return get_settings()


@pytest.fixture
def defaults():
    return paper_defaults()


@pytest.fixture
def point_a():
    """eta_total = 0.01155, T2 = 2 s, L_att = 22 km."""
    return paper_defaults()


@pytest.fixture
def no_conversion():
    return load_preset("no_conversion")


@pytest.fixture
def near_ideal():
    return paper_defaults().with_eta_total(1.0).with_t2(1e9)


@pytest.fixture
def desk_scale():
    """Short, efficient link where click probabilities are large enough to sample."""
    return paper_defaults().with_eta_total(0.6).with_distance(1e3)


@contextmanager
def not_raises(expected_exc):
    try:
        yield

    except expected_exc as err:
        raise AssertionError(
            "Did raise exception {0} when it should not!".format(
                repr(expected_exc)
            )
        )

    except Exception as err:
        raise AssertionError(
            "An unexpected exception {0} raised.".format(repr(err))
        )
