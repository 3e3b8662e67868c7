################################################################################
#                               skpathfinder                                   #
#                                                                              #
# Pathfinder departure operations under convective weather: queueing,         #
# worst-case acceptance, departure simulation and offer sequencing.           #
################################################################################

import setuptools
import os
import skpathfinder

VERSION = skpathfinder.__version__

def read(fname):
    return open(os.path.join(os.path.dirname(__file__), fname)).read()
        
        
setuptools.setup(
    name="skpathfinder",
    version=VERSION,
    description="Pathfinder departure operations under convective weather",
    long_description=read("README.md"),
    long_description_content_type="text/markdown",
    packages=setuptools.find_packages(exclude=["tests"]),
    package_data={"skpathfinder": ["data/*.csv", "data/*.yaml"]},
    entry_points={
        "console_scripts": ["skpathfinder=skpathfinder.cli:main"]
    },
    classifiers=[
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.8",
        "Programming Language :: Python :: 3.9",
        "License :: OSI Approved :: MIT License"
    ],
    install_requires=[
          'numpy>=1.20.1',
          'pandas>=1.2.2',
          'tqdm>=4.57.0',
          'scikit-learn>=0.24',
          'joblib>=1.0',
          'scipy>=1.6',
          'simpy>=4.0',
          'pydantic>=2.0',
          'PyYAML>=5.4'
    ]
)
