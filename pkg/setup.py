"""
Setup script for growthlift

Allows installation via: pip install .
Console entry point: growthlift (see [project.scripts] in pyproject.toml)
"""

from setuptools import setup

if __name__ == "__main__":
    setup()
