# -*- coding: utf-8 -*-
from setuptools import setup

__license__ = "GPLv3 and MIT, see LICENSE file"

about = {}
with open('backstep/version.py') as f:
    exec(f.read(), about)

setup(name='backstep',
      version=about['__version__'],
      description='Bilateral backstepping boundary control for 2x2 hyperbolic systems with spatially varying speeds',
      long_description=open('README.rst').read(),
      license=__license__,
      classifiers=[
          'License :: OSI Approved :: MIT License',
          'License :: OSI Approved :: GNU General Public License v3 (GPLv3)',
          'Programming Language :: Python :: 3',
          'Programming Language :: Python :: 3.7',
          'Programming Language :: Python :: 3.8',
          'Programming Language :: Python :: 3.9',
          'Topic :: Scientific/Engineering :: Mathematics',
      ],
      keywords='backstepping boundary-control hyperbolic pde kernel',
      python_requires='>=3.7',
      install_requires=[
          'frozendict>=2',
          'numpy>=1.17',
          'pyyaml>=5.1',
          'scipy>=1.6',
      ],
      extras_require={
          'dev': [
              'pip',
              'pytest>4',
              'pytest-cov',
              'pre-commit',
              'yapf',
              'prospector',
              'pylint',
          ],
          "docs": [
              "Sphinx",
              "Pygments",
              "docutils",
              "sphinx-rtd-theme",
          ],
      },
      entry_points={
          'console_scripts': ['backstep = backstep.cli:main'],
      },
      packages=['backstep'],
      test_suite='test')
