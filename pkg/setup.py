from setuptools import setup, find_packages

setup(
    name="anholoflow",
    version="0.1.0",
    description="Nonholonomic Ricci flows, Perelman-type functionals and stochastic porous-media runs on grids",
    packages=find_packages(exclude=["examples", "examples.*"]),
    python_requires=">=3.9",
    install_requires=[
        "numpy>=1.24.0",
        "scipy>=1.10.0",
        "sympy>=1.12",
        "pydantic>=2.0,<3",
    ],
    extras_require={
        "parallel": [
            "ray>=2.35.0,<2.48.0"
        ],
        "dev": [
            "pytest==7.4.0",
            "pre-commit==3.2.2",
            "black==23.7.0",
            "isort==5.12.0"
        ],
        "docs": [
            "mkdocs==1.4.3",
            "mkdocs-material==9.1.7"
        ]
    },
    entry_points={
        "console_scripts": [
            "anholoflow=anholoflow.cli:main",
        ],
    },
)
