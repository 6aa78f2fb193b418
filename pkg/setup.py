# Copyright (c) numlab-hardy contributors. All rights reserved.
# Licensed under the MIT License.

from setuptools import setup
from numlab.hardy import __version__

with open("README.md") as readme:
    long_description = readme.read()

setup(
    name='numlab-hardy',
    version=__version__,
    description='Numerical laboratory for weighted Hardy quotients with '
                'boundary singularities',
    long_description=long_description,
    long_description_content_type='text/markdown',
    author='numlab-hardy contributors',
    classifiers=[
        'License :: OSI Approved :: MIT License',
        'Intended Audience :: Science/Research',
        'Programming Language :: Python :: 3',
        'Programming Language :: Python :: 3.7',
        'Programming Language :: Python :: 3.8',
        'Programming Language :: Python :: 3.9',
        'Operating System :: OS Independent',
        'Topic :: Scientific/Engineering :: Mathematics',
        'Development Status :: 3 - Alpha',
    ],
    license='MIT',
    packages=[
        'numlab.hardy',
    ],
    package_data={
        'numlab.hardy': ['py.typed']
    },
    install_requires=[
        'numpy>=1.17',
        'scipy>=1.7',
        'sympy>=1.5',
    ],
    extras_require={
        'dev': [
            'flake8~=3.7.9',
            'mypy',
            'pytest',
            'pytest-cov',
            'coverage'
        ]
    },
    entry_points={
        'console_scripts': [
            'hardy = numlab.hardy.cli:main',
        ],
    },
    include_package_data=True,
    test_suite='tests'
)
