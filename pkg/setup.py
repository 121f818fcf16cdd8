import os
from setuptools import setup, find_packages

def read(fname):
    with open(os.path.join(os.path.dirname(__file__), fname)) as f:
        return f.read()

setup(
    name = "IMT.VectorCoproc",
    version = "0.0.0",
    description = ("Cycle-approximate simulator of a 3-hart interleaved-multithreaded RISC-V core with a parametric vector coprocessor."),
    license = "Tbd",
    long_description=read("README.md"),
    install_requires = [
        "joblib",
        "loguru",
        "numba==0.56.4",
        "numpy==1.23.5",
        "pandas",
    ],
    extras_require = {
        "test": [
            "pytest",
        ]
    },
    packages = find_packages(where="src"),
    package_dir = {"": "src"},
    entry_points = {
        "console_scripts": [
            "imt-vector-coproc=IMTVectorCoproc.cli:main",
        ]
    },
    include_package_data=True,
)
