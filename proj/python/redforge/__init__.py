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

"""Python bindings for the redforge curation pipeline and kernels."""

import os
import shutil

try:
    from . import _redforge as _ext
except ImportError:  # in-tree build: the extension sits outside the package
    import _redforge as _ext

globals().update({k: v for k, v in vars(_ext).items() if not k.startswith("_")})

__all__ = [name for name in vars(_ext) if not name.startswith("_")] + ["cli_path"]
__version__ = "0.1.0"


def cli_path():
    """Path of the redforge command line tool, or None when not found."""
    env = os.environ.get("REDFORGE_CLI")
    if env:
        return env
    bundled = os.path.join(os.path.dirname(_ext.__file__), "bin", "redforge")
    if os.path.exists(bundled):
        return bundled
    return shutil.which("redforge")
