"""
Setup script for powgame.
"""

from setuptools import setup, find_packages

with open("README.md", "r", encoding="utf-8") as fh:
    long_description = fh.read()

with open("requirements.txt", "r", encoding="utf-8") as fh:
    requirements = [
        line.split("#")[0].strip()
        for line in fh
        if line.strip() and not line.startswith("#") and not line.startswith("-")
    ]

setup(
    name="powgame",
    version="0.1.0",
    description="Evolutionary-game analysis of proof-of-work mining participation",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=find_packages(include=["powgame", "powgame.*"]),
    classifiers=[
        "Development Status :: 4 - Beta",
        "Intended Audience :: Science/Research",
        "Topic :: Scientific/Engineering :: Mathematics",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
    ],
    python_requires=">=3.9",
    install_requires=requirements,
    entry_points={
        "console_scripts": [
            "powgame=powgame.cli:app",
        ],
    },
    include_package_data=True,
    package_data={
        "powgame": [
            "config/*.yaml",
            "config/scenarios/*.yaml",
        ],
    },
)
