# Copyright (c) numlab-hardy contributors. All rights reserved.
# Licensed under the MIT License.

__path__ = __import__('pkgutil').extend_path(__path__, __name__)
