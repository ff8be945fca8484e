from setuptools import setup, find_packages

setup(
    name="brickint",
    version="0.1",
    packages=find_packages(exclude=["tests", "scripts"]),
    install_requires=["torch", "tqdm", "mpmath"],
    extras_require={"test": ["hypothesis"]},
    entry_points={"console_scripts": ["brickint=brickint.cli:main"]},
)
