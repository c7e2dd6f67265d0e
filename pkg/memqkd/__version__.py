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

VERSION = (0, 1, 0)

__title__ = 'memqkd'
__description__ = 'Key rates of multiplexed memory-assisted MDI-QKD versus repeaterless bounds'
__url__ = 'https://github.com/memqkd/memqkd'
__version__ = '.'.join(map(str, VERSION))
__license__ = 'Apache 2.0'
__copyright__ = 'Copyright 2020-2021 memqkd authors'
__author__ = 'memqkd authors'
__email__ = 'memqkd@users.noreply.github.com'
