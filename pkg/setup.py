#! /usr/bin/env python
"""Setup bulk-ad."""
import os
from setuptools import setup, find_packages

# get the version
version = None
with open(os.path.join('bulk_ad', '__init__.py'), 'r') as fid:
    for line in (line.strip() for line in fid):
        if line.startswith('__version__'):
            version = line.split('=')[1].strip().strip('\'')
            break
if version is None:
    raise RuntimeError('Could not determine version')


descr = ('bulk-ad: reverse-mode automatic differentiation of a small array '
         'language, by vectorizing to bulk operations first')

DISTNAME = 'bulk-ad'
DESCRIPTION = descr
MAINTAINER = 'bulk-ad developers'
LICENSE = 'BSD (3-clause)'
VERSION = version

if __name__ == "__main__":
    setup(name=DISTNAME,
          maintainer=MAINTAINER,
          description=DESCRIPTION,
          license=LICENSE,
          version=VERSION,
          long_description=open('README.rst').read(),
          long_description_content_type='text/x-rst',
          python_requires='>=3.10',
          install_requires=['numpy>=1.20', 'mne>=1.0'],
          classifiers=[
              'Intended Audience :: Science/Research',
              'Intended Audience :: Developers',
              'License :: OSI Approved',
              'Programming Language :: Python',
              'Topic :: Software Development',
              'Topic :: Scientific/Engineering',
              'Operating System :: Microsoft :: Windows',
              'Operating System :: POSIX',
              'Operating System :: Unix',
              'Operating System :: MacOS',
              'Programming Language :: Python :: 3.10',
              'Programming Language :: Python :: 3.11',
              'Programming Language :: Python :: 3.12',
          ],
          platforms='any',
          packages=find_packages(),
          entry_points={'console_scripts': [
              'bulk_ad = bulk_ad.commands.run:main',
          ]},
          )
