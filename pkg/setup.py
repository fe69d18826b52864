from setuptools import setup, find_packages

with open("README.md", "r", encoding="utf-8") as fh:
    long_description = fh.read()

with open("requirements.txt", "r", encoding="utf-8") as fh:
    requirements = [line.strip() for line in fh if line.strip() and not line.startswith("#")]

setup(
    name="pixelnav",
    version="1.0.0",
    author="PixelNav Developers",
    description="Goal-conditioned offline CQL for pixel-space needle trajectory prediction",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=find_packages(exclude=("examples", "examples.*")),
    classifiers=[
        "Development Status :: 4 - Beta",
        "Intended Audience :: Science/Research",
        "Topic :: Scientific/Engineering :: Artificial Intelligence",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Programming Language :: Python :: 3.12",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
    ],
    python_requires=">=3.10",
    install_requires=requirements,
    entry_points={
        "console_scripts": [
            "pixelnav=pixelnav.main:main",
        ],
    },
    include_package_data=True,
    package_data={
        "pixelnav": ["*.yaml"],
    },
)
