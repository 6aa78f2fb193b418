# Copyright (c) numlab-hardy contributors. All rights reserved.
# Licensed under the MIT License.

import sys

from .cli import main


sys.exit(main())
