#!/usr/bin/env python3
"""Setup script for WPT Scheduler"""

from setuptools import setup, find_packages
from pathlib import Path

# Read the README file
readme_file = Path(__file__).parent / "README.md"
long_description = readme_file.read_text(encoding="utf-8") if readme_file.exists() else ""

setup(
    name="wpt-scheduler",
    version="0.1.0",
    description="Joint data and wireless power transfer scheduling for WLANs: simulator and finite-horizon MDP solver",
    long_description=long_description,
    long_description_content_type="text/markdown",
    author="WPT Scheduler Contributors",
    license="MIT",
    packages=find_packages(exclude=["tests", "tests.*"]),
    include_package_data=True,
    package_data={
        "wpt_scheduler": [
            "data/config.json.example",
            "data/small_scenario.json",
            "data/small_topology.json",
        ],
    },
    python_requires=">=3.8",
    install_requires=[
        "numpy>=1.20.0",
        "scipy>=1.7.0",
        "networkx>=2.6",
        "pluggy>=1.0.0",
        "pandas>=1.5.0",
    ],
    extras_require={
        "test": [
            "pytest>=7.0",
        ],
    },
    entry_points={
        "console_scripts": [
            "wpt-scheduler=wpt_scheduler.__main__:main",
        ],
    },
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.8",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Topic :: Scientific/Engineering",
        "Topic :: System :: Networking",
    ],
    keywords="wlan scheduling wireless-power-transfer mdp value-iteration simulation",
)
