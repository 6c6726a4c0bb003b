# Copyright (c) 2026 The redforge Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#   http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

import importlib
import os
import sys

_here = os.path.dirname(os.path.abspath(__file__))
sys.path.insert(0, os.path.join(_here, "..", "..", "python"))
if os.environ.get("REDFORGE_PYTHON_PATH"):
    # Test the freshly built extension, not an installed copy.
    sys.path.insert(0, os.environ["REDFORGE_PYTHON_PATH"])
    sys.modules["redforge._redforge"] = importlib.import_module("_redforge")
