from setuptools import setup

setup(
    name="ncid",
    version="1.0.0",
    author="Crucible Team",
    description="Exact-arithmetic workbench for noncommutative identities",
    package_dir={"": "src"},
    py_modules=[
        "nc_core",
        "exact_linalg",
        "spectral",
        "guessing",
        "flows",
        "ratexpr",
        "dynamics",
        "laurent_recover",
        "config",
        "cli",
    ],
    install_requires=["sympy>=1.12"],
    entry_points={"console_scripts": ["ncid=cli:main"]},
    zip_safe=False,
    python_requires=">=3.8",
)
