#!/usr/bin/env python3
"""
Setup script for UnaryFlow
"""

from setuptools import setup

# Read requirements from requirements.txt
with open('requirements.txt') as f:
    requirements = f.read().splitlines()

# Read long description from README.md
with open('README.md', encoding='utf-8') as f:
    long_description = f.read()

setup(
    name="unaryflow",
    version="1.0.0",
    description="Deterministic unary-stream multiplier and stochastic-computing benchmarks",
    long_description=long_description,
    long_description_content_type="text/markdown",
    package_dir={"": "src"},
    py_modules=["streams", "detmul", "funcs", "matrix", "costmodel", "bench",
                "config_loader", "cli"],
    install_requires=requirements,
    entry_points={
        'console_scripts': [
            'unaryflow=cli:main',
        ],
    },
    classifiers=[
        "Programming Language :: Python :: 3",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
    ],
    python_requires=">=3.8",
)
