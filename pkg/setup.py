from setuptools import setup, find_packages

with open("README.md", "r", encoding="utf-8") as f:
    long_description = f.read()

setup(
    name="chemotaxis-lab",
    version="1.0.0",
    author="Your Name",
    author_email="your.email@example.com",
    description="Particle and finite-volume laboratory for the regularized Keller-Segel model",
    long_description=long_description,
    long_description_content_type="text/markdown",
    url="https://github.com/yourusername/chemotaxis-lab",
    packages=find_packages(exclude=["tests", "tests.*"]),
    classifiers=[
        "Development Status :: 4 - Beta",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: MIT License",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.8",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Topic :: Scientific/Engineering :: Mathematics",
    ],
    python_requires=">=3.8",
    install_requires=[
        "numpy>=1.20",  # Arrays and counter-based random streams
        "scipy>=1.7",  # FFT convolution, KD-trees, special functions, quadrature
        "tqdm>=4.61.0",  # For progress bars
    ],
    entry_points={
        "console_scripts": [
            "chemotaxis-lab=chemotaxis_lab.cli:main",
        ],
    },
)
